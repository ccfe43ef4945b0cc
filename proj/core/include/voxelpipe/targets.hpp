#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "voxelpipe/box.hpp"
#include "voxelpipe/cloud.hpp"
#include "voxelpipe/tensor.hpp"

namespace voxelpipe {

struct ClassConfig {
  std::string name;
  double anchor_l = 3.9;
  double anchor_w = 1.6;
  double anchor_h = 1.56;
  double anchor_z = -1.0;
  double pos_iou = 0.6;
  double neg_iou = 0.45;
  double eval_iou = 0.7;

  double anchor_diag() const { return std::sqrt(anchor_l * anchor_l + anchor_w * anchor_w); }
};

// Fixed per-class anchor geometry and matching thresholds. Throws ConfigError
// for a class other than Car, Pedestrian, Cyclist.
ClassConfig class_config(const std::string& name);

struct AnchorGrid {
  std::vector<Box3D> anchors;  // (h * w2 + w) * 2 + rotation, theta in {0, pi/2}
  std::int64_t h2 = 0;
  std::int64_t w2 = 0;

  std::int64_t size() const { return static_cast<std::int64_t>(anchors.size()); }
};

// Anchors tile the head-resolution BEV grid; each cell center gets one anchor
// per rotation. Cell strides derive from the range extents and (h2, w2).
AnchorGrid make_anchor_grid(const ClassConfig& cc, const Range3& range, std::int64_t h2,
                            std::int64_t w2);

// Rotated-footprint intersection over union in the X-Y plane, exact convex
// polygon clipping in fp64. Degenerate boxes yield 0.
double bev_iou(const Box3D& a, const Box3D& b);

// Footprint intersection times vertical overlap over the volume union.
double iou_3d(const Box3D& a, const Box3D& b);

enum class AnchorLabel : std::uint8_t { kNegative = 0, kPositive = 1, kDontCare = 2 };

struct MatchResult {
  std::vector<AnchorLabel> labels;
  std::vector<std::int32_t> gt_index;             // -1 unless positive
  std::vector<std::array<double, 7>> residuals;   // valid where positive
  std::int64_t num_pos = 0;
  std::int64_t num_neg = 0;
};

// Threshold matching with the per-ground-truth argmax anchor forced positive.
// An anchor claimed by several ground truths takes the highest IoU, ties by
// lowest ground-truth index.
MatchResult match_anchors(const AnchorGrid& grid, const std::vector<Box3D>& gts,
                          const ClassConfig& cc);

// (dx, dy) / anchor diagonal, dz / anchor height, log size ratios, raw dtheta.
std::array<double, 7> encode_residual(const Box3D& gt, const Box3D& anchor);

// Exact inverse; the decoded heading is normalized to [-pi, pi).
Box3D decode_residual(const std::array<double, 7>& u, const Box3D& anchor);

template <typename S>
struct LossResult {
  double total = 0;
  double cls_pos = 0;  // alpha-weighted positive BCE term
  double cls_neg = 0;  // beta-weighted negative BCE term
  double reg = 0;
  std::int64_t num_pos = 0;
  std::int64_t num_neg = 0;
  TensorT<S> grad_score;
  TensorT<S> grad_reg;
};

// The two-term classification + regression objective over the score map
// (logits, anchors-per-cell channels; 2 logits per anchor in softmax mode)
// and regression map (7 channels per anchor). Accumulates in fp64. Throws
// InvariantError when the match holds no positive anchor.
template <typename S>
LossResult<S> total_loss(const TensorT<S>& score_map, const TensorT<S>& reg_map,
                         const MatchResult& match, bool softmax_mode = false, double alpha = 1.5,
                         double beta = 1.0);

}  // namespace voxelpipe
