#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "voxelpipe/cloud.hpp"
#include "voxelpipe/tensor.hpp"

namespace voxelpipe {

struct VoxelConfig {
  Range3 range;
  double v_d = 0.4;  // size along z
  double v_h = 0.2;  // size along y
  double v_w = 0.2;  // size along x
  int t_max = 35;    // points kept per voxel
  int k_max = 20000; // non-empty voxels kept per cloud
  std::uint64_t rng_seed = 0;
};

struct GridDims {
  int d = 0;
  int h = 0;
  int w = 0;
  std::int64_t cells() const {
    return static_cast<std::int64_t>(d) * h * w;
  }
  bool operator==(const GridDims&) const = default;
};

// Throws ConfigError when an axis extent is not an integer multiple of its
// voxel size, or when t_max/k_max are not positive.
GridDims grid_dims(const VoxelConfig& config);

struct VoxelCoord {
  int d = 0;
  int h = 0;
  int w = 0;
  bool operator==(const VoxelCoord&) const = default;
};

// Floor binning with [low, high) cells; the point must already be in range.
VoxelCoord voxel_index(const Point4& p, const VoxelConfig& config);

struct VoxelStats {
  std::size_t total_points = 0;
  std::size_t kept_points = 0;
  std::size_t dropped_full_voxel = 0;  // voxel already held t_max points
  std::size_t dropped_capacity = 0;    // point needed a new voxel past k_max
  std::size_t distinct_voxels = 0;     // includes voxels lost to the k_max cap
};

struct VoxelBuffers {
  // k_max x t_max x 7 rows: (x, y, z, r, dx_centroid, dy_centroid, dz_centroid).
  // Offset slots stay zero until augment_with_centroid fills them.
  Tensor features;
  std::vector<std::int32_t> coords;  // k_max x 3 as (d, h, w)
  std::vector<std::int32_t> counts;  // occupancy per voxel row
  std::int64_t num_voxels = 0;
  GridDims dims;
  int t_max = 0;
  VoxelStats stats;
};

// The single-pass permutation used by build_buffers, exposed so independent
// reimplementations can consume the identical point order.
std::vector<std::size_t> shuffled_permutation(std::size_t n, std::uint64_t seed);

// One pass over the shuffled cloud with a coord-keyed hash table. Voxel rows
// appear in first-touch order; a full voxel or a full table drops points
// silently (tallied in stats).
VoxelBuffers build_buffers(const PointCloud& cloud, const VoxelConfig& config);

// Fills slots 4..6 of each occupied row with the offset from the voxel's
// XYZ centroid (mean over the first counts[k] rows, accumulated in fp64).
void augment_with_centroid(VoxelBuffers& buffers);

// Scatters N x C voxel features into a dense C x D x H x W tensor. Coords
// must be unique and in bounds; a duplicate raises InvariantError.
template <typename S>
TensorT<S> scatter_to_dense(const TensorT<S>& voxel_features,
                            const std::vector<std::int32_t>& coords, GridDims dims);

// Adjoint of scatter_to_dense: reads the feature vector at each coord.
template <typename S>
TensorT<S> gather_from_dense(const TensorT<S>& dense, const std::vector<std::int32_t>& coords);

void dump_buffers(const VoxelBuffers& buffers, const std::string& path);
VoxelBuffers load_buffers(const std::string& path);

}  // namespace voxelpipe
