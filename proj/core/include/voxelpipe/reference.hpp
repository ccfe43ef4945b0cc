#pragma once

#include <cstdint>
#include <vector>

#include "voxelpipe/box.hpp"
#include "voxelpipe/cloud.hpp"
#include "voxelpipe/kernels.hpp"
#include "voxelpipe/postprocess.hpp"
#include "voxelpipe/targets.hpp"
#include "voxelpipe/tensor.hpp"
#include "voxelpipe/voxel.hpp"

// Independent implementations kept deliberately simple and slow. The fast
// paths are validated against these, so nothing here may share code with the
// implementations under test beyond the public types.

namespace voxelpipe {
namespace reference {

// Two-pass bucketing voxelizer over the same shuffled permutation: pass one
// allocates voxels in first-seen order (capped at k_max), pass two fills
// rows (capped at t_max).
VoxelBuffers build_buffers_two_pass(const PointCloud& cloud, const VoxelConfig& cfg);

// Direct nested-loop convolutions in fp64 with zero padding.
Tensor64 conv2d_naive(const Tensor64& x, const Tensor64& w, const Conv2dSpec& spec);
Tensor64 conv3d_naive(const Tensor64& x, const Tensor64& w, const Conv3dSpec& spec);
Tensor64 deconv2d_naive(const Tensor64& x, const Tensor64& w, const Conv2dSpec& spec);

// Monte-Carlo footprint IoU: uniform samples over the joint bounding
// rectangle, counted with inside tests per box.
double mc_bev_iou(const Box3D& a, const Box3D& b, std::int64_t samples, std::uint64_t seed);

// Exhaustive quadratic matcher applying the documented claims rule without
// any prefilter.
MatchResult match_anchors_exhaustive(const AnchorGrid& grid, const std::vector<Box3D>& gts,
                                     const ClassConfig& cc);

struct ScalarLoss {
  double total = 0;
  double cls_pos = 0;
  double cls_neg = 0;
  double reg = 0;
};

// Term-by-term loss evaluation with textbook formulas (probabilities formed
// explicitly, no fused logit trick).
template <typename S>
ScalarLoss total_loss_scalar(const TensorT<S>& score_map, const TensorT<S>& reg_map,
                             const MatchResult& match, bool softmax_mode = false,
                             double alpha = 1.5, double beta = 1.0);

// Quadratic suppressor: full IoU matrix, then repeated max-score selection.
std::vector<Detection> nms_bev_quadratic(const std::vector<Detection>& dets, double iou_thresh);

}  // namespace reference
}  // namespace voxelpipe
