#include "voxelpipe/voxel.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <unordered_map>
#include <unordered_set>

#include "voxelpipe/errors.hpp"
#include "voxelpipe/parallel.hpp"
#include "voxelpipe/rng.hpp"

namespace voxelpipe {

namespace {

int axis_cells(double lo, double hi, double size, const char* axis) {
  if (size <= 0) {
    throw ConfigError(std::string("voxel size must be positive on axis ") + axis);
  }
  const double ratio = (hi - lo) / size;
  const double rounded = std::round(ratio);
  if (rounded < 1 || std::abs(ratio - rounded) > 1e-6) {
    throw ConfigError(std::string("range extent is not a multiple of voxel size on axis ") + axis);
  }
  return static_cast<int>(rounded);
}

constexpr int kRowSlots = 7;

}  // namespace

GridDims grid_dims(const VoxelConfig& config) {
  if (config.t_max < 1 || config.k_max < 1) {
    throw ConfigError("voxel capacities t_max and k_max must be at least 1");
  }
  GridDims dims;
  dims.d = axis_cells(config.range.z_min, config.range.z_max, config.v_d, "z");
  dims.h = axis_cells(config.range.y_min, config.range.y_max, config.v_h, "y");
  dims.w = axis_cells(config.range.x_min, config.range.x_max, config.v_w, "x");
  return dims;
}

VoxelCoord voxel_index(const Point4& p, const VoxelConfig& config) {
  VoxelCoord c;
  c.d = static_cast<int>(std::floor((p.z - config.range.z_min) / config.v_d));
  c.h = static_cast<int>(std::floor((p.y - config.range.y_min) / config.v_h));
  c.w = static_cast<int>(std::floor((p.x - config.range.x_min) / config.v_w));
  return c;
}

std::vector<std::size_t> shuffled_permutation(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  DetRng rng(seed);
  rng.shuffle(perm);
  return perm;
}

VoxelBuffers build_buffers(const PointCloud& cloud, const VoxelConfig& config) {
  VoxelBuffers buffers;
  buffers.dims = grid_dims(config);
  buffers.t_max = config.t_max;
  buffers.features = Tensor({config.k_max, config.t_max, kRowSlots});
  buffers.coords.assign(static_cast<std::size_t>(config.k_max) * 3, 0);
  buffers.counts.assign(config.k_max, 0);
  buffers.stats.total_points = cloud.size();

  const auto perm = shuffled_permutation(cloud.size(), config.rng_seed);
  std::unordered_map<std::int64_t, std::int32_t> slot_of;
  slot_of.reserve(static_cast<std::size_t>(config.k_max) * 2);
  std::unordered_set<std::int64_t> dropped_keys;
  const std::int64_t hw = static_cast<std::int64_t>(buffers.dims.h) * buffers.dims.w;

  for (const std::size_t idx : perm) {
    const Point4& p = cloud.points[idx];
    const VoxelCoord c = voxel_index(p, config);
    if (c.d < 0 || c.d >= buffers.dims.d || c.h < 0 || c.h >= buffers.dims.h || c.w < 0 ||
        c.w >= buffers.dims.w) {
      throw InvariantError("point outside the voxel grid; crop the cloud before voxelization");
    }
    const std::int64_t key = c.d * hw + static_cast<std::int64_t>(c.h) * buffers.dims.w + c.w;
    auto [it, inserted] = slot_of.try_emplace(key, static_cast<std::int32_t>(buffers.num_voxels));
    if (inserted) {
      if (buffers.num_voxels == config.k_max) {
        slot_of.erase(it);
        dropped_keys.insert(key);
        ++buffers.stats.dropped_capacity;
        continue;
      }
      buffers.coords[buffers.num_voxels * 3 + 0] = c.d;
      buffers.coords[buffers.num_voxels * 3 + 1] = c.h;
      buffers.coords[buffers.num_voxels * 3 + 2] = c.w;
      ++buffers.num_voxels;
    }
    const std::int32_t slot = it->second;
    if (buffers.counts[slot] == config.t_max) {
      ++buffers.stats.dropped_full_voxel;
      continue;
    }
    float* row =
        buffers.features.data.data() +
        (static_cast<std::int64_t>(slot) * config.t_max + buffers.counts[slot]) * kRowSlots;
    row[0] = p.x;
    row[1] = p.y;
    row[2] = p.z;
    row[3] = p.r;
    ++buffers.counts[slot];
    ++buffers.stats.kept_points;
  }
  buffers.stats.distinct_voxels = slot_of.size() + dropped_keys.size();
  return buffers;
}

void augment_with_centroid(VoxelBuffers& buffers) {
  const int t = buffers.t_max;
  float* base = buffers.features.data.data();
  parallel_for(static_cast<std::size_t>(buffers.num_voxels), [&](std::size_t lo, std::size_t hi) {
    for (std::size_t k = lo; k < hi; ++k) {
      const int count = buffers.counts[k];
      if (count == 0) {
        continue;
      }
      float* voxel = base + static_cast<std::int64_t>(k) * t * kRowSlots;
      double sx = 0, sy = 0, sz = 0;
      for (int i = 0; i < count; ++i) {
        sx += voxel[i * kRowSlots + 0];
        sy += voxel[i * kRowSlots + 1];
        sz += voxel[i * kRowSlots + 2];
      }
      const double cx = sx / count;
      const double cy = sy / count;
      const double cz = sz / count;
      for (int i = 0; i < count; ++i) {
        voxel[i * kRowSlots + 4] = static_cast<float>(voxel[i * kRowSlots + 0] - cx);
        voxel[i * kRowSlots + 5] = static_cast<float>(voxel[i * kRowSlots + 1] - cy);
        voxel[i * kRowSlots + 6] = static_cast<float>(voxel[i * kRowSlots + 2] - cz);
      }
    }
  });
}

template <typename S>
TensorT<S> scatter_to_dense(const TensorT<S>& voxel_features,
                            const std::vector<std::int32_t>& coords, GridDims dims) {
  if (voxel_features.rank() != 2) {
    throw InvariantError("scatter_to_dense expects an N x C feature matrix");
  }
  const std::int64_t n = voxel_features.shape[0];
  const std::int64_t c = voxel_features.shape[1];
  if (static_cast<std::int64_t>(coords.size()) < n * 3) {
    throw InvariantError("scatter_to_dense: coords shorter than the feature rows");
  }
  TensorT<S> dense({c, dims.d, dims.h, dims.w});
  std::vector<bool> seen(static_cast<std::size_t>(dims.cells()), false);
  const std::int64_t hw = static_cast<std::int64_t>(dims.h) * dims.w;
  const std::int64_t dhw = static_cast<std::int64_t>(dims.d) * hw;
  for (std::int64_t k = 0; k < n; ++k) {
    const std::int32_t d = coords[k * 3 + 0];
    const std::int32_t h = coords[k * 3 + 1];
    const std::int32_t w = coords[k * 3 + 2];
    if (d < 0 || d >= dims.d || h < 0 || h >= dims.h || w < 0 || w >= dims.w) {
      throw InvariantError("scatter_to_dense: coord out of grid bounds");
    }
    const std::int64_t cell = d * hw + static_cast<std::int64_t>(h) * dims.w + w;
    if (seen[static_cast<std::size_t>(cell)]) {
      throw InvariantError("scatter_to_dense: duplicate voxel coord");
    }
    seen[static_cast<std::size_t>(cell)] = true;
    for (std::int64_t ch = 0; ch < c; ++ch) {
      dense.data[ch * dhw + cell] = voxel_features.data[k * c + ch];
    }
  }
  return dense;
}

template <typename S>
TensorT<S> gather_from_dense(const TensorT<S>& dense, const std::vector<std::int32_t>& coords) {
  if (dense.rank() != 4) {
    throw InvariantError("gather_from_dense expects a C x D x H x W tensor");
  }
  const std::int64_t c = dense.shape[0];
  const std::int64_t hw = dense.shape[2] * dense.shape[3];
  const std::int64_t dhw = dense.shape[1] * hw;
  const std::int64_t n = static_cast<std::int64_t>(coords.size()) / 3;
  TensorT<S> out({n, c});
  for (std::int64_t k = 0; k < n; ++k) {
    const std::int64_t cell = coords[k * 3 + 0] * hw +
                              static_cast<std::int64_t>(coords[k * 3 + 1]) * dense.shape[3] +
                              coords[k * 3 + 2];
    for (std::int64_t ch = 0; ch < c; ++ch) {
      out.data[k * c + ch] = dense.data[ch * dhw + cell];
    }
  }
  return out;
}

template Tensor scatter_to_dense<float>(const Tensor&, const std::vector<std::int32_t>&, GridDims);
template Tensor64 scatter_to_dense<double>(const Tensor64&, const std::vector<std::int32_t>&,
                                           GridDims);
template Tensor gather_from_dense<float>(const Tensor&, const std::vector<std::int32_t>&);
template Tensor64 gather_from_dense<double>(const Tensor64&, const std::vector<std::int32_t>&);

namespace {

constexpr char kDumpMagic[4] = {'V', 'X', 'B', 'F'};
constexpr std::uint32_t kDumpVersion = 1;

template <typename T>
void write_pod(std::ofstream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
void read_pod(std::ifstream& in, T& value, const std::string& path) {
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) {
    throw IoError("truncated voxel buffer file: " + path);
  }
}

}  // namespace

void dump_buffers(const VoxelBuffers& buffers, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw IoError("cannot open voxel buffer file for writing: " + path);
  }
  out.write(kDumpMagic, 4);
  write_pod(out, kDumpVersion);
  write_pod(out, static_cast<std::int64_t>(buffers.features.shape[0]));  // k_max
  write_pod(out, static_cast<std::int64_t>(buffers.t_max));
  write_pod(out, static_cast<std::int64_t>(buffers.dims.d));
  write_pod(out, static_cast<std::int64_t>(buffers.dims.h));
  write_pod(out, static_cast<std::int64_t>(buffers.dims.w));
  write_pod(out, buffers.num_voxels);
  const std::int64_t rows = buffers.num_voxels * buffers.t_max * kRowSlots;
  out.write(reinterpret_cast<const char*>(buffers.features.data.data()),
            rows * static_cast<std::int64_t>(sizeof(float)));
  out.write(reinterpret_cast<const char*>(buffers.coords.data()),
            buffers.num_voxels * 3 * static_cast<std::int64_t>(sizeof(std::int32_t)));
  out.write(reinterpret_cast<const char*>(buffers.counts.data()),
            buffers.num_voxels * static_cast<std::int64_t>(sizeof(std::int32_t)));
  if (!out) {
    throw IoError("short write to voxel buffer file: " + path);
  }
}

VoxelBuffers load_buffers(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open voxel buffer file: " + path);
  }
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kDumpMagic, 4) != 0) {
    throw IoError("not a voxel buffer file: " + path);
  }
  std::uint32_t version = 0;
  read_pod(in, version, path);
  if (version != kDumpVersion) {
    throw IoError("unsupported voxel buffer version in " + path);
  }
  std::int64_t k_max = 0, t_max = 0, d = 0, h = 0, w = 0, num_voxels = 0;
  read_pod(in, k_max, path);
  read_pod(in, t_max, path);
  read_pod(in, d, path);
  read_pod(in, h, path);
  read_pod(in, w, path);
  read_pod(in, num_voxels, path);
  if (k_max < 1 || t_max < 1 || d < 1 || h < 1 || w < 1 || num_voxels < 0 || num_voxels > k_max) {
    throw IoError("corrupt voxel buffer header in " + path);
  }
  VoxelBuffers buffers;
  buffers.dims = {static_cast<int>(d), static_cast<int>(h), static_cast<int>(w)};
  buffers.t_max = static_cast<int>(t_max);
  buffers.num_voxels = num_voxels;
  buffers.features = Tensor({k_max, t_max, kRowSlots});
  buffers.coords.assign(static_cast<std::size_t>(k_max) * 3, 0);
  buffers.counts.assign(static_cast<std::size_t>(k_max), 0);
  const std::int64_t rows = num_voxels * t_max * kRowSlots;
  in.read(reinterpret_cast<char*>(buffers.features.data.data()),
          rows * static_cast<std::int64_t>(sizeof(float)));
  in.read(reinterpret_cast<char*>(buffers.coords.data()),
          num_voxels * 3 * static_cast<std::int64_t>(sizeof(std::int32_t)));
  in.read(reinterpret_cast<char*>(buffers.counts.data()),
          num_voxels * static_cast<std::int64_t>(sizeof(std::int32_t)));
  if (!in) {
    throw IoError("truncated voxel buffer file: " + path);
  }
  return buffers;
}

}  // namespace voxelpipe
