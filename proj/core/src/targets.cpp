#include "voxelpipe/targets.hpp"

#include <algorithm>
#include <cmath>

#include "voxelpipe/errors.hpp"
#include "voxelpipe/kernels.hpp"
#include "voxelpipe/parallel.hpp"

namespace voxelpipe {

ClassConfig class_config(const std::string& name) {
  ClassConfig cc;
  cc.name = name;
  if (name == "Car") {
    cc.anchor_l = 3.9;
    cc.anchor_w = 1.6;
    cc.anchor_h = 1.56;
    cc.anchor_z = -1.0;
    cc.pos_iou = 0.6;
    cc.neg_iou = 0.45;
    cc.eval_iou = 0.7;
  } else if (name == "Pedestrian") {
    cc.anchor_l = 0.8;
    cc.anchor_w = 0.6;
    cc.anchor_h = 1.73;
    cc.anchor_z = -0.6;
    cc.pos_iou = 0.5;
    cc.neg_iou = 0.35;
    cc.eval_iou = 0.5;
  } else if (name == "Cyclist") {
    cc.anchor_l = 1.76;
    cc.anchor_w = 0.6;
    cc.anchor_h = 1.73;
    cc.anchor_z = -0.6;
    cc.pos_iou = 0.5;
    cc.neg_iou = 0.35;
    cc.eval_iou = 0.5;
  } else {
    throw ConfigError("unknown detection class: " + name);
  }
  return cc;
}

AnchorGrid make_anchor_grid(const ClassConfig& cc, const Range3& range, std::int64_t h2,
                            std::int64_t w2) {
  if (h2 < 1 || w2 < 1) {
    throw ConfigError("anchor grid dimensions must be positive");
  }
  AnchorGrid grid;
  grid.h2 = h2;
  grid.w2 = w2;
  grid.anchors.reserve(static_cast<std::size_t>(h2 * w2 * 2));
  const double stride_y = (range.y_max - range.y_min) / static_cast<double>(h2);
  const double stride_x = (range.x_max - range.x_min) / static_cast<double>(w2);
  for (std::int64_t hy = 0; hy < h2; ++hy) {
    for (std::int64_t wx = 0; wx < w2; ++wx) {
      for (int rot = 0; rot < 2; ++rot) {
        Box3D a;
        a.x = range.x_min + (static_cast<double>(wx) + 0.5) * stride_x;
        a.y = range.y_min + (static_cast<double>(hy) + 0.5) * stride_y;
        a.z = cc.anchor_z;
        a.l = cc.anchor_l;
        a.w = cc.anchor_w;
        a.h = cc.anchor_h;
        a.theta = rot == 0 ? 0.0 : M_PI / 2.0;
        grid.anchors.push_back(a);
      }
    }
  }
  return grid;
}

namespace {

struct Poly {
  std::array<std::array<double, 2>, 16> pts;
  int n = 0;
};

double cross2(const std::array<double, 2>& o, const std::array<double, 2>& a,
              const std::array<double, 2>& b) {
  return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
}

// Clips a convex CCW polygon by the half-plane left of edge p1 -> p2.
void clip_edge(const Poly& in, const std::array<double, 2>& p1, const std::array<double, 2>& p2,
               Poly& out) {
  out.n = 0;
  for (int i = 0; i < in.n; ++i) {
    const auto& cur = in.pts[i];
    const auto& nxt = in.pts[(i + 1) % in.n];
    const double d_cur = cross2(p1, p2, cur);
    const double d_nxt = cross2(p1, p2, nxt);
    const bool cur_in = d_cur >= 0.0;
    const bool nxt_in = d_nxt >= 0.0;
    if (cur_in) {
      out.pts[out.n++] = cur;
    }
    if (cur_in != nxt_in) {
      const double t = d_cur / (d_cur - d_nxt);
      out.pts[out.n][0] = cur[0] + t * (nxt[0] - cur[0]);
      out.pts[out.n][1] = cur[1] + t * (nxt[1] - cur[1]);
      ++out.n;
    }
  }
}

double shoelace(const Poly& p) {
  double area = 0.0;
  for (int i = 0; i < p.n; ++i) {
    const auto& a = p.pts[i];
    const auto& b = p.pts[(i + 1) % p.n];
    area += a[0] * b[1] - b[0] * a[1];
  }
  return 0.5 * area;
}

double footprint_intersection(const Box3D& a, const Box3D& b) {
  const auto ca = footprint_corners(a);
  const auto cb = footprint_corners(b);
  Poly subject;
  subject.n = 4;
  for (int i = 0; i < 4; ++i) {
    subject.pts[i] = ca[i];
  }
  Poly scratch;
  for (int e = 0; e < 4 && subject.n > 0; ++e) {
    clip_edge(subject, cb[e], cb[(e + 1) % 4], scratch);
    subject = scratch;
  }
  if (subject.n < 3) {
    return 0.0;
  }
  return std::max(0.0, shoelace(subject));
}

}  // namespace

double bev_iou(const Box3D& a, const Box3D& b) {
  const double area_a = a.l * a.w;
  const double area_b = b.l * b.w;
  if (area_a <= 0.0 || area_b <= 0.0) {
    return 0.0;
  }
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  const double reach =
      0.5 * (std::hypot(a.l, a.w) + std::hypot(b.l, b.w));
  if (dx * dx + dy * dy > reach * reach) {
    return 0.0;
  }
  const double inter = footprint_intersection(a, b);
  const double denom = area_a + area_b - inter;
  if (denom <= 0.0) {
    return 0.0;
  }
  return std::clamp(inter / denom, 0.0, 1.0);
}

double iou_3d(const Box3D& a, const Box3D& b) {
  const double vol_a = a.l * a.w * a.h;
  const double vol_b = b.l * b.w * b.h;
  if (vol_a <= 0.0 || vol_b <= 0.0) {
    return 0.0;
  }
  const double z_lo = std::max(a.z - 0.5 * a.h, b.z - 0.5 * b.h);
  const double z_hi = std::min(a.z + 0.5 * a.h, b.z + 0.5 * b.h);
  const double dz = z_hi - z_lo;
  if (dz <= 0.0) {
    return 0.0;
  }
  const double inter = footprint_intersection(a, b) * dz;
  const double denom = vol_a + vol_b - inter;
  if (denom <= 0.0) {
    return 0.0;
  }
  return std::clamp(inter / denom, 0.0, 1.0);
}

MatchResult match_anchors(const AnchorGrid& grid, const std::vector<Box3D>& gts,
                          const ClassConfig& cc) {
  const std::int64_t n = grid.size();
  const std::size_t g = gts.size();
  MatchResult result;
  result.labels.assign(static_cast<std::size_t>(n), AnchorLabel::kNegative);
  result.gt_index.assign(static_cast<std::size_t>(n), -1);
  result.residuals.assign(static_cast<std::size_t>(n), {});

  // Per anchor: IoU with every ground truth (circle prefilter), tracking the
  // anchor's best gt and each gt's best anchor in one pass.
  std::vector<double> best_iou(static_cast<std::size_t>(n), 0.0);
  std::vector<std::int32_t> best_gt(static_cast<std::size_t>(n), -1);
  std::vector<double> claimed_iou(static_cast<std::size_t>(n), -1.0);  // threshold positives
  std::vector<std::int32_t> claimed_gt(static_cast<std::size_t>(n), -1);
  std::vector<double> gt_best_iou(g, -1.0);
  std::vector<std::int64_t> gt_best_anchor(g, -1);

  std::vector<double> gt_reach(g, 0.0);
  for (std::size_t j = 0; j < g; ++j) {
    gt_reach[j] = 0.5 * std::hypot(gts[j].l, gts[j].w);
  }
  const double anchor_reach = 0.5 * cc.anchor_diag();

  std::vector<double> iou_buf(static_cast<std::size_t>(n) * g, 0.0);
  parallel_for(static_cast<std::size_t>(n), [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      const Box3D& a = grid.anchors[i];
      for (std::size_t j = 0; j < g; ++j) {
        const double dx = a.x - gts[j].x;
        const double dy = a.y - gts[j].y;
        const double reach = anchor_reach + gt_reach[j];
        if (dx * dx + dy * dy > reach * reach) {
          continue;
        }
        iou_buf[i * g + j] = bev_iou(a, gts[j]);
      }
    }
  });

  for (std::int64_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < g; ++j) {
      const double iou = iou_buf[static_cast<std::size_t>(i) * g + j];
      if (iou > best_iou[i]) {
        best_iou[i] = iou;
        best_gt[i] = static_cast<std::int32_t>(j);
      }
      if (iou > cc.pos_iou && iou > claimed_iou[i]) {
        claimed_iou[i] = iou;
        claimed_gt[i] = static_cast<std::int32_t>(j);
      }
      if (iou > gt_best_iou[j]) {
        gt_best_iou[j] = iou;
        gt_best_anchor[j] = i;
      }
    }
  }

  // Forced positives: each gt's argmax anchor claims it; an anchor keeps the
  // highest-IoU claim, ties resolved toward the lowest gt index.
  for (std::size_t j = 0; j < g; ++j) {
    const std::int64_t i = gt_best_anchor[j];
    if (i < 0) {
      continue;
    }
    const double iou = gt_best_iou[j];
    if (iou > claimed_iou[i] ||
        (iou == claimed_iou[i] && static_cast<std::int32_t>(j) < claimed_gt[i])) {
      claimed_iou[i] = iou;
      claimed_gt[i] = static_cast<std::int32_t>(j);
    }
  }

  for (std::int64_t i = 0; i < n; ++i) {
    if (claimed_gt[i] >= 0) {
      result.labels[i] = AnchorLabel::kPositive;
      result.gt_index[i] = claimed_gt[i];
      result.residuals[i] = encode_residual(gts[claimed_gt[i]], grid.anchors[i]);
      ++result.num_pos;
    } else if (best_iou[i] < cc.neg_iou) {
      result.labels[i] = AnchorLabel::kNegative;
      ++result.num_neg;
    } else {
      result.labels[i] = AnchorLabel::kDontCare;
    }
  }
  return result;
}

std::array<double, 7> encode_residual(const Box3D& gt, const Box3D& anchor) {
  if (gt.l <= 0 || gt.w <= 0 || gt.h <= 0) {
    throw InvariantError("encode_residual: ground-truth extents must be positive");
  }
  const double d = std::sqrt(anchor.l * anchor.l + anchor.w * anchor.w);
  return {(gt.x - anchor.x) / d,       (gt.y - anchor.y) / d, (gt.z - anchor.z) / anchor.h,
          std::log(gt.l / anchor.l),   std::log(gt.w / anchor.w),
          std::log(gt.h / anchor.h),   gt.theta - anchor.theta};
}

Box3D decode_residual(const std::array<double, 7>& u, const Box3D& anchor) {
  const double d = std::sqrt(anchor.l * anchor.l + anchor.w * anchor.w);
  Box3D out;
  out.x = u[0] * d + anchor.x;
  out.y = u[1] * d + anchor.y;
  out.z = u[2] * anchor.h + anchor.z;
  out.l = std::exp(u[3]) * anchor.l;
  out.w = std::exp(u[4]) * anchor.w;
  out.h = std::exp(u[5]) * anchor.h;
  out.theta = normalize_angle(u[6] + anchor.theta);
  return out;
}

template <typename S>
LossResult<S> total_loss(const TensorT<S>& score_map, const TensorT<S>& reg_map,
                         const MatchResult& match, bool softmax_mode, double alpha, double beta) {
  if (match.num_pos < 1) {
    throw InvariantError("total_loss: no positive anchors in this frame");
  }
  const std::int64_t h2 = score_map.shape[1];
  const std::int64_t w2 = score_map.shape[2];
  const std::int64_t plane = h2 * w2;
  const int anchors_per_cell = softmax_mode ? static_cast<int>(score_map.shape[0]) / 2
                                            : static_cast<int>(score_map.shape[0]);
  if (static_cast<std::int64_t>(match.labels.size()) != plane * anchors_per_cell) {
    throw InvariantError("total_loss: match size disagrees with the map extents");
  }
  if (reg_map.shape[0] != anchors_per_cell * 7) {
    throw InvariantError("total_loss: regression map channel count mismatch");
  }

  LossResult<S> result;
  result.num_pos = match.num_pos;
  result.num_neg = match.num_neg;
  result.grad_score = zeros_like(score_map);
  result.grad_reg = zeros_like(reg_map);

  const double w_pos = alpha / static_cast<double>(match.num_pos);
  const double w_neg = match.num_neg > 0 ? beta / static_cast<double>(match.num_neg) : 0.0;
  const double w_reg = 1.0 / static_cast<double>(match.num_pos);

  double cls_pos = 0.0, cls_neg = 0.0, reg = 0.0;
  const S* sp = score_map.data.data();
  const S* rp = reg_map.data.data();
  S* gs = result.grad_score.data.data();
  S* gr = result.grad_reg.data.data();

  for (std::int64_t cell = 0; cell < plane; ++cell) {
    for (int a = 0; a < anchors_per_cell; ++a) {
      const std::int64_t anchor_idx = cell * anchors_per_cell + a;
      const AnchorLabel label = match.labels[anchor_idx];
      if (label == AnchorLabel::kDontCare) {
        continue;
      }
      const bool positive = label == AnchorLabel::kPositive;
      const double weight = positive ? w_pos : w_neg;
      if (softmax_mode) {
        // Channels 2a and 2a+1 hold the anchor's (negative, positive) logits.
        const double l0 = sp[(2 * a) * plane + cell];
        const double l1 = sp[(2 * a + 1) * plane + cell];
        const double mx = std::max(l0, l1);
        const double e0 = std::exp(l0 - mx);
        const double e1 = std::exp(l1 - mx);
        const double z = e0 + e1;
        const double p1 = e1 / z;
        const double p0 = e0 / z;
        const double nll = positive ? -std::log(std::max(p1, 1e-300))
                                    : -std::log(std::max(p0, 1e-300));
        (positive ? cls_pos : cls_neg) += weight * nll;
        const double t1 = positive ? 1.0 : 0.0;
        gs[(2 * a) * plane + cell] += static_cast<S>(weight * (p0 - (1.0 - t1)));
        gs[(2 * a + 1) * plane + cell] += static_cast<S>(weight * (p1 - t1));
      } else {
        const double logit = sp[a * plane + cell];
        const double target = positive ? 1.0 : 0.0;
        const double loss = bce_with_logits(logit, target);
        (positive ? cls_pos : cls_neg) += weight * loss;
        gs[a * plane + cell] += static_cast<S>(weight * bce_with_logits_grad(logit, target));
      }
      if (positive) {
        const auto& target_u = match.residuals[anchor_idx];
        for (int j = 0; j < 7; ++j) {
          const std::int64_t idx = (a * 7 + j) * plane + cell;
          const double diff = static_cast<double>(rp[idx]) - target_u[j];
          reg += w_reg * smooth_l1(diff);
          gr[idx] += static_cast<S>(w_reg * smooth_l1_grad(diff));
        }
      }
    }
  }
  result.cls_pos = cls_pos;
  result.cls_neg = cls_neg;
  result.reg = reg;
  result.total = cls_pos + cls_neg + reg;
  return result;
}

template LossResult<float> total_loss<float>(const Tensor&, const Tensor&, const MatchResult&,
                                             bool, double, double);
template LossResult<double> total_loss<double>(const Tensor64&, const Tensor64&,
                                               const MatchResult&, bool, double, double);

}  // namespace voxelpipe
