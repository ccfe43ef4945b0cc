#pragma once

#include <cstdint>
#include <vector>

#include "voxelpipe/box.hpp"
#include "voxelpipe/cloud.hpp"
#include "voxelpipe/config.hpp"
#include "voxelpipe/rng.hpp"

namespace voxelpipe {

// A training sample: the raw cloud, its ground-truth boxes, and per-box
// membership (indices of the points inside each box). Membership must be
// recomputed after any geometric edit; the augmentation ops below do so.
struct Scene {
  PointCloud cloud;
  std::vector<Box3D> boxes;
  std::vector<std::vector<std::int64_t>> membership;
};

// Rebuilds membership from the current cloud and boxes (rotation-aware,
// closed box intervals).
void compute_membership(Scene& scene);

struct AugmentConfig {
  bool enable_perturb = true;
  bool enable_scale = true;
  bool enable_rotate = true;
};

AugmentConfig augment_config_from_config(const Config& cfg);

// Independently perturbs each box together with its member points: a rotation
// about the box center by U[-pi/10, pi/10], then a N(0,1) translation per
// axis (draw order per box: dtheta, dx, dy, dz). Afterwards every colliding
// pair (BEV footprint overlap > 0) reverts both members, and one re-test
// round reverts any box still colliding. Returns the number of reverted
// boxes. Recomputes membership.
std::int64_t perturb_boxes(Scene& scene, Rng& rng);

// Scales all point coordinates, box centers, and box extents by one shared
// factor U[0.95, 1.05]; headings unchanged. Recomputes membership.
void global_scale(Scene& scene, Rng& rng);

// Rotates all points and box centers about the Z axis through the origin by
// a shared U[-pi/4, pi/4]; box headings shift by the same angle. Recomputes
// membership.
void global_rotate(Scene& scene, Rng& rng);

// Applies the enabled augmentations in the fixed order perturb, scale,
// rotate.
void augment_scene(Scene& scene, Rng& rng, const AugmentConfig& cfg);

}  // namespace voxelpipe
