#include "voxelpipe/reference.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "voxelpipe/errors.hpp"

namespace voxelpipe {
namespace reference {

VoxelBuffers build_buffers_two_pass(const PointCloud& cloud, const VoxelConfig& cfg) {
  const GridDims dims = grid_dims(cfg);
  const auto perm = shuffled_permutation(cloud.size(), cfg.rng_seed);

  // Pass 1: allocate voxel rows in first-seen order, capped at k_max.
  std::map<std::array<int, 3>, std::int64_t> slot_of;
  std::vector<std::array<int, 3>> slot_coord;
  std::size_t distinct = 0;
  std::map<std::array<int, 3>, bool> seen;
  for (const std::size_t pi : perm) {
    const VoxelCoord c = voxel_index(cloud.points[pi], cfg);
    const std::array<int, 3> key{c.d, c.h, c.w};
    if (!seen.count(key)) {
      seen[key] = true;
      ++distinct;
    }
    if (!slot_of.count(key) && static_cast<int>(slot_coord.size()) < cfg.k_max) {
      slot_of[key] = static_cast<std::int64_t>(slot_coord.size());
      slot_coord.push_back(key);
    }
  }

  VoxelBuffers out;
  out.dims = dims;
  out.t_max = cfg.t_max;
  out.num_voxels = static_cast<std::int64_t>(slot_coord.size());
  out.features = Tensor({static_cast<std::int64_t>(cfg.k_max), static_cast<std::int64_t>(cfg.t_max), 7});
  out.coords.assign(static_cast<std::size_t>(cfg.k_max) * 3, 0);
  out.counts.assign(static_cast<std::size_t>(cfg.k_max), 0);
  for (std::size_t s = 0; s < slot_coord.size(); ++s) {
    out.coords[s * 3 + 0] = slot_coord[s][0];
    out.coords[s * 3 + 1] = slot_coord[s][1];
    out.coords[s * 3 + 2] = slot_coord[s][2];
  }

  // Pass 2: fill rows in permutation order, capped at t_max per voxel.
  out.stats.total_points = cloud.size();
  for (const std::size_t pi : perm) {
    const Point4& p = cloud.points[pi];
    const VoxelCoord c = voxel_index(p, cfg);
    const std::array<int, 3> key{c.d, c.h, c.w};
    const auto it = slot_of.find(key);
    if (it == slot_of.end()) {
      ++out.stats.dropped_capacity;
      continue;
    }
    const std::int64_t slot = it->second;
    if (out.counts[slot] >= cfg.t_max) {
      ++out.stats.dropped_full_voxel;
      continue;
    }
    const std::int64_t row = (slot * cfg.t_max + out.counts[slot]) * 7;
    out.features.data[row + 0] = p.x;
    out.features.data[row + 1] = p.y;
    out.features.data[row + 2] = p.z;
    out.features.data[row + 3] = p.r;
    ++out.counts[slot];
    ++out.stats.kept_points;
  }
  out.stats.distinct_voxels = distinct;
  return out;
}

Tensor64 conv2d_naive(const Tensor64& x, const Tensor64& w, const Conv2dSpec& spec) {
  const std::int64_t ci = x.shape[0], ih = x.shape[1], iw = x.shape[2];
  const std::int64_t co = w.shape[0];
  const std::int64_t oh = conv_out_extent(ih, spec.kh, spec.sh, spec.ph);
  const std::int64_t ow = conv_out_extent(iw, spec.kw, spec.sw, spec.pw);
  Tensor64 y({co, oh, ow});
  for (std::int64_t oc = 0; oc < co; ++oc) {
    for (std::int64_t r = 0; r < oh; ++r) {
      for (std::int64_t c = 0; c < ow; ++c) {
        double acc = 0;
        for (std::int64_t ic = 0; ic < ci; ++ic) {
          for (int kr = 0; kr < spec.kh; ++kr) {
            for (int kc = 0; kc < spec.kw; ++kc) {
              const std::int64_t sr = r * spec.sh + kr - spec.ph;
              const std::int64_t sc = c * spec.sw + kc - spec.pw;
              if (sr < 0 || sr >= ih || sc < 0 || sc >= iw) {
                continue;
              }
              acc += x.data[(ic * ih + sr) * iw + sc] *
                     w.data[((oc * ci + ic) * spec.kh + kr) * spec.kw + kc];
            }
          }
        }
        y.data[(oc * oh + r) * ow + c] = acc;
      }
    }
  }
  return y;
}

Tensor64 conv3d_naive(const Tensor64& x, const Tensor64& w, const Conv3dSpec& spec) {
  const std::int64_t ci = x.shape[0], id = x.shape[1], ih = x.shape[2], iw = x.shape[3];
  const std::int64_t co = w.shape[0];
  const std::int64_t od = conv_out_extent(id, spec.kd, spec.sd, spec.pd);
  const std::int64_t oh = conv_out_extent(ih, spec.kh, spec.sh, spec.ph);
  const std::int64_t ow = conv_out_extent(iw, spec.kw, spec.sw, spec.pw);
  Tensor64 y({co, od, oh, ow});
  for (std::int64_t oc = 0; oc < co; ++oc) {
    for (std::int64_t g = 0; g < od; ++g) {
      for (std::int64_t r = 0; r < oh; ++r) {
        for (std::int64_t c = 0; c < ow; ++c) {
          double acc = 0;
          for (std::int64_t ic = 0; ic < ci; ++ic) {
            for (int kg = 0; kg < spec.kd; ++kg) {
              for (int kr = 0; kr < spec.kh; ++kr) {
                for (int kc = 0; kc < spec.kw; ++kc) {
                  const std::int64_t sg = g * spec.sd + kg - spec.pd;
                  const std::int64_t sr = r * spec.sh + kr - spec.ph;
                  const std::int64_t sc = c * spec.sw + kc - spec.pw;
                  if (sg < 0 || sg >= id || sr < 0 || sr >= ih || sc < 0 || sc >= iw) {
                    continue;
                  }
                  acc += x.data[((ic * id + sg) * ih + sr) * iw + sc] *
                         w.data[(((oc * ci + ic) * spec.kd + kg) * spec.kh + kr) * spec.kw + kc];
                }
              }
            }
          }
          y.data[((oc * od + g) * oh + r) * ow + c] = acc;
        }
      }
    }
  }
  return y;
}

Tensor64 deconv2d_naive(const Tensor64& x, const Tensor64& w, const Conv2dSpec& spec) {
  const std::int64_t ci = x.shape[0], ih = x.shape[1], iw = x.shape[2];
  const std::int64_t co = w.shape[1];
  const std::int64_t oh = deconv_out_extent(ih, spec.kh, spec.sh, spec.ph);
  const std::int64_t ow = deconv_out_extent(iw, spec.kw, spec.sw, spec.pw);
  Tensor64 y({co, oh, ow});
  for (std::int64_t ic = 0; ic < ci; ++ic) {
    for (std::int64_t r = 0; r < ih; ++r) {
      for (std::int64_t c = 0; c < iw; ++c) {
        const double xv = x.data[(ic * ih + r) * iw + c];
        for (std::int64_t oc = 0; oc < co; ++oc) {
          for (int kr = 0; kr < spec.kh; ++kr) {
            for (int kc = 0; kc < spec.kw; ++kc) {
              const std::int64_t orow = r * spec.sh + kr - spec.ph;
              const std::int64_t ocol = c * spec.sw + kc - spec.pw;
              if (orow < 0 || orow >= oh || ocol < 0 || ocol >= ow) {
                continue;
              }
              y.data[(oc * oh + orow) * ow + ocol] +=
                  xv * w.data[((ic * co + oc) * spec.kh + kr) * spec.kw + kc];
            }
          }
        }
      }
    }
  }
  return y;
}

namespace {

struct FootprintTest {
  double cx, cy, cos_t, sin_t, hl, hw;

  explicit FootprintTest(const Box3D& b)
      : cx(b.x), cy(b.y), cos_t(std::cos(b.theta)), sin_t(std::sin(b.theta)), hl(0.5 * b.l),
        hw(0.5 * b.w) {}

  bool contains(double px, double py) const {
    const double dx = px - cx;
    const double dy = py - cy;
    const double u = cos_t * dx + sin_t * dy;
    const double v = -sin_t * dx + cos_t * dy;
    return std::abs(u) <= hl && std::abs(v) <= hw;
  }
};

inline std::uint64_t splitmix_step(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

double mc_bev_iou(const Box3D& a, const Box3D& b, std::int64_t samples, std::uint64_t seed) {
  const FootprintTest fa(a);
  const FootprintTest fb(b);
  double x_lo = 1e18, x_hi = -1e18, y_lo = 1e18, y_hi = -1e18;
  for (const auto& c : footprint_corners(a)) {
    x_lo = std::min(x_lo, c[0]);
    x_hi = std::max(x_hi, c[0]);
    y_lo = std::min(y_lo, c[1]);
    y_hi = std::max(y_hi, c[1]);
  }
  for (const auto& c : footprint_corners(b)) {
    x_lo = std::min(x_lo, c[0]);
    x_hi = std::max(x_hi, c[0]);
    y_lo = std::min(y_lo, c[1]);
    y_hi = std::max(y_hi, c[1]);
  }
  std::uint64_t state = seed;
  std::int64_t in_a = 0, in_b = 0, in_both = 0;
  const double sx = x_hi - x_lo;
  const double sy = y_hi - y_lo;
  for (std::int64_t i = 0; i < samples; ++i) {
    const double px = x_lo + sx * (static_cast<double>(splitmix_step(state) >> 11) * 0x1.0p-53);
    const double py = y_lo + sy * (static_cast<double>(splitmix_step(state) >> 11) * 0x1.0p-53);
    const bool ia = fa.contains(px, py);
    const bool ib = fb.contains(px, py);
    in_a += ia;
    in_b += ib;
    in_both += ia && ib;
  }
  const std::int64_t uni = in_a + in_b - in_both;
  if (uni <= 0) {
    return 0.0;
  }
  return static_cast<double>(in_both) / static_cast<double>(uni);
}

MatchResult match_anchors_exhaustive(const AnchorGrid& grid, const std::vector<Box3D>& gts,
                                     const ClassConfig& cc) {
  const std::size_t n = static_cast<std::size_t>(grid.size());
  const std::size_t g = gts.size();
  std::vector<std::vector<double>> iou(n, std::vector<double>(g, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < g; ++j) {
      iou[i][j] = bev_iou(grid.anchors[i], gts[j]);
    }
  }
  // Per gt, the argmax anchor (first maximum wins).
  std::vector<std::size_t> argmax_anchor(g, 0);
  std::vector<bool> has_argmax(g, false);
  for (std::size_t j = 0; j < g; ++j) {
    double best = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (iou[i][j] > best) {
        best = iou[i][j];
        argmax_anchor[j] = i;
        has_argmax[j] = true;
      }
    }
  }
  MatchResult result;
  result.labels.assign(n, AnchorLabel::kNegative);
  result.gt_index.assign(n, -1);
  result.residuals.assign(n, {});
  for (std::size_t i = 0; i < n; ++i) {
    double win_iou = -1.0;
    std::int64_t win_gt = -1;
    for (std::size_t j = 0; j < g; ++j) {
      const bool claims = iou[i][j] > cc.pos_iou || (has_argmax[j] && argmax_anchor[j] == i);
      if (!claims) {
        continue;
      }
      if (iou[i][j] > win_iou ||
          (iou[i][j] == win_iou && static_cast<std::int64_t>(j) < win_gt)) {
        win_iou = iou[i][j];
        win_gt = static_cast<std::int64_t>(j);
      }
    }
    if (win_gt >= 0) {
      result.labels[i] = AnchorLabel::kPositive;
      result.gt_index[i] = static_cast<std::int32_t>(win_gt);
      result.residuals[i] = encode_residual(gts[win_gt], grid.anchors[i]);
      ++result.num_pos;
      continue;
    }
    double best = 0.0;
    for (std::size_t j = 0; j < g; ++j) {
      best = std::max(best, iou[i][j]);
    }
    if (best < cc.neg_iou) {
      result.labels[i] = AnchorLabel::kNegative;
      ++result.num_neg;
    } else {
      result.labels[i] = AnchorLabel::kDontCare;
    }
  }
  return result;
}

template <typename S>
ScalarLoss total_loss_scalar(const TensorT<S>& score_map, const TensorT<S>& reg_map,
                             const MatchResult& match, bool softmax_mode, double alpha,
                             double beta) {
  const std::int64_t plane = score_map.shape[1] * score_map.shape[2];
  const int anchors_per_cell = softmax_mode ? static_cast<int>(score_map.shape[0]) / 2
                                            : static_cast<int>(score_map.shape[0]);
  ScalarLoss out;
  for (std::int64_t cell = 0; cell < plane; ++cell) {
    for (int a = 0; a < anchors_per_cell; ++a) {
      const std::int64_t idx = cell * anchors_per_cell + a;
      const AnchorLabel label = match.labels[idx];
      if (label == AnchorLabel::kDontCare) {
        continue;
      }
      double p_pos;
      if (softmax_mode) {
        const double l0 = score_map.data[(2 * a) * plane + cell];
        const double l1 = score_map.data[(2 * a + 1) * plane + cell];
        p_pos = std::exp(l1) / (std::exp(l0) + std::exp(l1));
      } else {
        const double logit = score_map.data[a * plane + cell];
        p_pos = 1.0 / (1.0 + std::exp(-logit));
      }
      if (label == AnchorLabel::kPositive) {
        out.cls_pos += -std::log(p_pos);
        for (int j = 0; j < 7; ++j) {
          const double diff =
              static_cast<double>(reg_map.data[(a * 7 + j) * plane + cell]) -
              match.residuals[idx][j];
          const double ad = std::abs(diff);
          out.reg += ad < 1.0 ? 0.5 * diff * diff : ad - 0.5;
        }
      } else {
        out.cls_neg += -std::log(1.0 - p_pos);
      }
    }
  }
  out.cls_pos *= alpha / static_cast<double>(match.num_pos);
  out.cls_neg = match.num_neg > 0 ? out.cls_neg * beta / static_cast<double>(match.num_neg) : 0.0;
  out.reg /= static_cast<double>(match.num_pos);
  out.total = out.cls_pos + out.cls_neg + out.reg;
  return out;
}

template ScalarLoss total_loss_scalar<float>(const Tensor&, const Tensor&, const MatchResult&,
                                             bool, double, double);
template ScalarLoss total_loss_scalar<double>(const Tensor64&, const Tensor64&,
                                              const MatchResult&, bool, double, double);

std::vector<Detection> nms_bev_quadratic(const std::vector<Detection>& dets, double iou_thresh) {
  const std::size_t n = dets.size();
  std::vector<std::vector<double>> iou(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i != j) {
        iou[i][j] = bev_iou(dets[i].box, dets[j].box);
      }
    }
  }
  std::vector<bool> alive(n, true), kept_flag(n, false);
  std::vector<Detection> kept;
  for (;;) {
    std::int64_t best = -1;
    for (std::size_t i = 0; i < n; ++i) {
      if (alive[i] && (best < 0 || dets[i].score > dets[best].score)) {
        best = static_cast<std::int64_t>(i);
      }
    }
    if (best < 0) {
      break;
    }
    alive[best] = false;
    kept_flag[best] = true;
    kept.push_back(dets[best]);
    for (std::size_t i = 0; i < n; ++i) {
      if (alive[i] && iou[best][i] > iou_thresh) {
        alive[i] = false;
      }
    }
  }
  return kept;
}

}  // namespace reference
}  // namespace voxelpipe
