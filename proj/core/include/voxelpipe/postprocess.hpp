#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "voxelpipe/box.hpp"
#include "voxelpipe/cloud.hpp"
#include "voxelpipe/io_kitti.hpp"
#include "voxelpipe/targets.hpp"
#include "voxelpipe/tensor.hpp"

namespace voxelpipe {

struct Detection {
  Box3D box;
  double score = 0.0;             // probability in [0, 1]
  std::int64_t anchor_index = -1;
};

// Decodes every anchor whose positive probability is >= score_thresh. The
// score map holds one logit per anchor, or the (negative, positive) logit
// pair per anchor in softmax mode; the regression map holds 7 channels per
// anchor. Output order follows the anchor index.
template <typename S>
std::vector<Detection> decode_detections(const TensorT<S>& score_map, const TensorT<S>& reg_map,
                                         const AnchorGrid& grid, double score_thresh,
                                         bool softmax_mode = false);

// Greedy rotated-BEV suppression: detections visit by descending score (ties
// keep the earlier index) and drop when overlapping an already kept box with
// IoU > iou_thresh.
std::vector<Detection> nms_bev(const std::vector<Detection>& dets, double iou_thresh);

struct GtObject {
  Box3D box;
  bool dont_care = false;
  double bbox_height = 1000.0;  // image-plane height in pixels
  int occlusion = 0;
  double truncation = 0.0;
};

// 0 = easy, 1 = moderate, 2 = hard, 3 = outside every bucket. Buckets nest:
// a ground truth counts at difficulty d iff difficulty_of(gt) <= d.
int difficulty_of(const GtObject& gt);

struct EvalConfig {
  double iou_threshold = 0.7;  // car 0.7, pedestrian/cyclist 0.5
  bool use_3d = false;         // volumetric IoU instead of BEV footprint IoU
  bool forty_point = false;    // 40-point interpolation instead of 11-point
};

struct ApResult {
  std::array<double, 3> ap{};  // easy, moderate, hard
  std::array<std::int64_t, 3> num_gt{};
  std::array<std::int64_t, 3> num_tp{};
  std::array<std::int64_t, 3> num_fp{};
};

// Interpolated average precision per difficulty. Detections are ranked by
// descending score globally (ties: frame index, then detection index); each
// one greedily matches the highest-IoU unmatched valid ground truth of its
// frame at the class threshold. A detection whose only sufficient overlap is
// with a don't-care or out-of-difficulty ground truth is ignored (neither
// true nor false positive).
ApResult average_precision(const std::vector<std::vector<Detection>>& dets,
                           const std::vector<std::vector<GtObject>>& gts,
                           const EvalConfig& cfg);

// KITTI result lines: the 15 standard label fields plus the score. Boxes are
// converted back to the camera frame via the calibration; the image bbox is
// the projection of the 8 box corners clamped to the image.
void write_kitti_results(const std::string& path, const std::vector<Detection>& dets,
                         const std::string& cls, const Calibration& calib);

// ASCII PLY with the cloud as gray vertices and each box as 12 wireframe
// edges (ground truth green, detections red).
void export_ply(const std::string& path, const PointCloud& cloud,
                const std::vector<Box3D>& gt_boxes, const std::vector<Box3D>& det_boxes);

}  // namespace voxelpipe
