#include "voxelpipe/postprocess.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "voxelpipe/errors.hpp"

namespace voxelpipe {

template <typename S>
std::vector<Detection> decode_detections(const TensorT<S>& score_map, const TensorT<S>& reg_map,
                                         const AnchorGrid& grid, double score_thresh,
                                         bool softmax_mode) {
  if (score_map.shape.size() != 3 || reg_map.shape.size() != 3) {
    throw InvariantError("decode_detections: expected rank-3 maps");
  }
  const std::int64_t h2 = score_map.shape[1];
  const std::int64_t w2 = score_map.shape[2];
  const std::int64_t plane = h2 * w2;
  const int anchors_per_cell = softmax_mode ? static_cast<int>(score_map.shape[0]) / 2
                                            : static_cast<int>(score_map.shape[0]);
  if (grid.h2 != h2 || grid.w2 != w2 ||
      grid.size() != plane * anchors_per_cell) {
    throw InvariantError("decode_detections: anchor grid disagrees with the map extents");
  }
  if (reg_map.shape[0] != anchors_per_cell * 7) {
    throw InvariantError("decode_detections: regression map channel count mismatch");
  }

  std::vector<Detection> out;
  const S* sp = score_map.data.data();
  const S* rp = reg_map.data.data();
  for (std::int64_t cell = 0; cell < plane; ++cell) {
    for (int a = 0; a < anchors_per_cell; ++a) {
      double prob;
      if (softmax_mode) {
        const double l0 = sp[(2 * a) * plane + cell];
        const double l1 = sp[(2 * a + 1) * plane + cell];
        const double mx = std::max(l0, l1);
        const double e0 = std::exp(l0 - mx);
        const double e1 = std::exp(l1 - mx);
        prob = e1 / (e0 + e1);
      } else {
        const double logit = sp[a * plane + cell];
        prob = logit >= 0 ? 1.0 / (1.0 + std::exp(-logit))
                          : std::exp(logit) / (1.0 + std::exp(logit));
      }
      if (prob < score_thresh) {
        continue;
      }
      const std::int64_t anchor_idx = cell * anchors_per_cell + a;
      std::array<double, 7> u;
      for (int j = 0; j < 7; ++j) {
        u[j] = rp[(a * 7 + j) * plane + cell];
      }
      Detection det;
      det.box = decode_residual(u, grid.anchors[anchor_idx]);
      det.score = prob;
      det.anchor_index = anchor_idx;
      out.push_back(det);
    }
  }
  return out;
}

template std::vector<Detection> decode_detections<float>(const Tensor&, const Tensor&,
                                                         const AnchorGrid&, double, bool);
template std::vector<Detection> decode_detections<double>(const Tensor64&, const Tensor64&,
                                                          const AnchorGrid&, double, bool);

std::vector<Detection> nms_bev(const std::vector<Detection>& dets, double iou_thresh) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return dets[a].score > dets[b].score;
  });
  std::vector<Detection> kept;
  for (const std::size_t i : order) {
    bool suppressed = false;
    for (const Detection& k : kept) {
      if (bev_iou(dets[i].box, k.box) > iou_thresh) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) {
      kept.push_back(dets[i]);
    }
  }
  return kept;
}

int difficulty_of(const GtObject& gt) {
  if (gt.bbox_height >= 40.0 && gt.occlusion <= 0 && gt.truncation <= 0.15) {
    return 0;
  }
  if (gt.bbox_height >= 25.0 && gt.occlusion <= 1 && gt.truncation <= 0.3) {
    return 1;
  }
  if (gt.bbox_height >= 25.0 && gt.occlusion <= 2 && gt.truncation <= 0.5) {
    return 2;
  }
  return 3;
}

namespace {

double interpolated_ap(const std::vector<double>& precision, const std::vector<double>& recall,
                       bool forty_point) {
  const int points = forty_point ? 40 : 11;
  double sum = 0.0;
  for (int k = 0; k < points; ++k) {
    // 11-point: recall levels {0, 0.1, ..., 1.0}; 40-point: {0.025, ..., 1.0}.
    const double r = forty_point ? static_cast<double>(k + 1) / 40.0
                                 : static_cast<double>(k) / 10.0;
    double best = 0.0;
    for (std::size_t i = 0; i < recall.size(); ++i) {
      if (recall[i] >= r - 1e-12) {
        best = std::max(best, precision[i]);
      }
    }
    sum += best;
  }
  return sum / static_cast<double>(points);
}

}  // namespace

ApResult average_precision(const std::vector<std::vector<Detection>>& dets,
                           const std::vector<std::vector<GtObject>>& gts,
                           const EvalConfig& cfg) {
  if (dets.size() != gts.size()) {
    throw InvariantError("average_precision: detection and ground-truth frame counts differ");
  }
  const std::size_t frames = dets.size();

  struct Ranked {
    double score;
    std::size_t frame;
    std::size_t index;
  };
  std::vector<Ranked> ranked;
  for (std::size_t f = 0; f < frames; ++f) {
    for (std::size_t i = 0; i < dets[f].size(); ++i) {
      ranked.push_back({dets[f][i].score, f, i});
    }
  }
  std::sort(ranked.begin(), ranked.end(), [](const Ranked& a, const Ranked& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.frame != b.frame) return a.frame < b.frame;
    return a.index < b.index;
  });

  const auto overlap = [&](const Box3D& a, const Box3D& b) {
    return cfg.use_3d ? iou_3d(a, b) : bev_iou(a, b);
  };

  ApResult result;
  for (int d = 0; d < 3; ++d) {
    std::int64_t num_valid = 0;
    for (std::size_t f = 0; f < frames; ++f) {
      for (const GtObject& gt : gts[f]) {
        if (!gt.dont_care && difficulty_of(gt) <= d) {
          ++num_valid;
        }
      }
    }
    result.num_gt[d] = num_valid;

    std::vector<std::vector<bool>> matched(frames);
    for (std::size_t f = 0; f < frames; ++f) {
      matched[f].assign(gts[f].size(), false);
    }

    std::int64_t tp = 0, fp = 0;
    std::vector<double> precision, recall;
    precision.reserve(ranked.size());
    recall.reserve(ranked.size());
    for (const Ranked& r : ranked) {
      const Box3D& det_box = dets[r.frame][r.index].box;
      const auto& frame_gts = gts[r.frame];
      double best_valid = 0.0;
      std::int64_t best_valid_idx = -1;
      double best_ignored = 0.0;
      for (std::size_t g = 0; g < frame_gts.size(); ++g) {
        const bool valid = !frame_gts[g].dont_care && difficulty_of(frame_gts[g]) <= d;
        const double iou = overlap(det_box, frame_gts[g].box);
        if (valid && !matched[r.frame][g]) {
          if (iou > best_valid) {
            best_valid = iou;
            best_valid_idx = static_cast<std::int64_t>(g);
          }
        } else if (!valid) {
          best_ignored = std::max(best_ignored, iou);
        }
      }
      if (best_valid_idx >= 0 && best_valid >= cfg.iou_threshold) {
        matched[r.frame][best_valid_idx] = true;
        ++tp;
      } else if (best_ignored >= cfg.iou_threshold) {
        // Overlaps only a don't-care or out-of-difficulty ground truth.
        continue;
      } else {
        ++fp;
      }
      precision.push_back(static_cast<double>(tp) / static_cast<double>(tp + fp));
      recall.push_back(num_valid > 0
                           ? static_cast<double>(tp) / static_cast<double>(num_valid)
                           : 0.0);
    }
    result.num_tp[d] = tp;
    result.num_fp[d] = fp;
    result.ap[d] = num_valid > 0 ? interpolated_ap(precision, recall, cfg.forty_point) : 0.0;
  }
  return result;
}

namespace {

std::array<std::array<double, 3>, 8> box_corners_3d(const Box3D& b) {
  const auto fp = footprint_corners(b);
  std::array<std::array<double, 3>, 8> out;
  for (int i = 0; i < 4; ++i) {
    out[i] = {fp[i][0], fp[i][1], b.z - 0.5 * b.h};
    out[i + 4] = {fp[i][0], fp[i][1], b.z + 0.5 * b.h};
  }
  return out;
}

}  // namespace

void write_kitti_results(const std::string& path, const std::vector<Detection>& dets,
                         const std::string& cls, const Calibration& calib) {
  std::ofstream out(path);
  if (!out) {
    throw IoError("cannot open result file for writing: " + path);
  }
  for (const Detection& det : dets) {
    const auto cam = box_to_camera(det.box, calib);
    // Image bbox from the projected 3D corners, clamped to the image.
    double left = 1e18, top = 1e18, right = -1e18, bottom = -1e18;
    bool any_front = false;
    for (const auto& c : box_corners_3d(det.box)) {
      const auto rectp = calib.lidar_to_rect(c);
      if (rectp[2] <= 0.1) {
        continue;
      }
      any_front = true;
      const auto uv = calib.project(rectp);
      left = std::min(left, uv[0]);
      right = std::max(right, uv[0]);
      top = std::min(top, uv[1]);
      bottom = std::max(bottom, uv[1]);
    }
    if (!any_front) {
      left = top = right = bottom = 0.0;
    } else {
      left = std::clamp(left, 0.0, static_cast<double>(calib.image_width - 1));
      right = std::clamp(right, 0.0, static_cast<double>(calib.image_width - 1));
      top = std::clamp(top, 0.0, static_cast<double>(calib.image_height - 1));
      bottom = std::clamp(bottom, 0.0, static_cast<double>(calib.image_height - 1));
    }
    const double alpha = normalize_angle(cam[3] - std::atan2(cam[0], cam[2]));
    char line[512];
    std::snprintf(line, sizeof(line),
                  "%s 0.00 0 %.6f %.6f %.6f %.6f %.6f %.6f %.6f %.6f %.6f %.6f %.6f %.6f %.6f\n",
                  cls.c_str(), alpha, left, top, right, bottom, det.box.h, det.box.w, det.box.l,
                  cam[0], cam[1], cam[2], cam[3], det.score);
    out << line;
  }
  if (!out) {
    throw IoError("failed writing result file: " + path);
  }
}

void export_ply(const std::string& path, const PointCloud& cloud,
                const std::vector<Box3D>& gt_boxes, const std::vector<Box3D>& det_boxes) {
  std::ofstream out(path);
  if (!out) {
    throw IoError("cannot open PLY file for writing: " + path);
  }
  const std::size_t num_box = gt_boxes.size() + det_boxes.size();
  const std::size_t num_vertex = cloud.size() + num_box * 8;
  const std::size_t num_edge = num_box * 12;
  out << "ply\nformat ascii 1.0\n";
  out << "element vertex " << num_vertex << "\n";
  out << "property float x\nproperty float y\nproperty float z\n";
  out << "property uchar red\nproperty uchar green\nproperty uchar blue\n";
  out << "element edge " << num_edge << "\n";
  out << "property int vertex1\nproperty int vertex2\n";
  out << "end_header\n";
  for (const Point4& p : cloud.points) {
    out << p.x << " " << p.y << " " << p.z << " 160 160 160\n";
  }
  const auto emit_corners = [&](const Box3D& b, int rc, int gc, int bc) {
    for (const auto& c : box_corners_3d(b)) {
      out << c[0] << " " << c[1] << " " << c[2] << " " << rc << " " << gc << " " << bc << "\n";
    }
  };
  for (const Box3D& b : gt_boxes) {
    emit_corners(b, 0, 200, 0);
  }
  for (const Box3D& b : det_boxes) {
    emit_corners(b, 220, 30, 30);
  }
  static const int kEdges[12][2] = {{0, 1}, {1, 2}, {2, 3}, {3, 0}, {4, 5}, {5, 6},
                                    {6, 7}, {7, 4}, {0, 4}, {1, 5}, {2, 6}, {3, 7}};
  for (std::size_t b = 0; b < num_box; ++b) {
    const std::size_t base = cloud.size() + b * 8;
    for (const auto& e : kEdges) {
      out << base + static_cast<std::size_t>(e[0]) << " " << base + static_cast<std::size_t>(e[1])
          << "\n";
    }
  }
  if (!out) {
    throw IoError("failed writing PLY file: " + path);
  }
}

}  // namespace voxelpipe
