#pragma once

#include <unistd.h>

#include <cstdint>
#include <filesystem>
#include <string>

#include "voxelpipe/cloud.hpp"
#include "voxelpipe/rng.hpp"
#include "voxelpipe/voxel.hpp"

namespace testutil {

inline voxelpipe::PointCloud random_cloud(std::size_t n, std::uint64_t seed,
                                          const voxelpipe::Range3& r) {
  voxelpipe::DetRng rng(seed);
  voxelpipe::PointCloud cloud;
  cloud.points.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    voxelpipe::Point4 p;
    // Deliberately overshoots the range a little so cropping paths get hit.
    p.x = static_cast<float>(rng.uniform(r.x_min - 1.0, r.x_max + 1.0));
    p.y = static_cast<float>(rng.uniform(r.y_min - 1.0, r.y_max + 1.0));
    p.z = static_cast<float>(rng.uniform(r.z_min - 1.0, r.z_max + 1.0));
    p.r = static_cast<float>(rng.uniform01());
    cloud.points.push_back(p);
  }
  return cloud;
}

inline voxelpipe::Range3 small_range() {
  return voxelpipe::Range3{-3.0, 1.0, -8.0, 8.0, 0.0, 16.0};
}

inline voxelpipe::VoxelConfig small_voxel_config() {
  voxelpipe::VoxelConfig cfg;
  cfg.range = small_range();
  cfg.v_d = 0.4;
  cfg.v_h = 0.2;
  cfg.v_w = 0.2;
  cfg.t_max = 8;
  cfg.k_max = 2000;
  cfg.rng_seed = 7;
  return cfg;
}

inline voxelpipe::VoxelConfig car_voxel_config() {
  voxelpipe::VoxelConfig cfg;
  cfg.range = voxelpipe::Range3{-3.0, 1.0, -40.0, 40.0, 0.0, 70.4};
  cfg.v_d = 0.4;
  cfg.v_h = 0.2;
  cfg.v_w = 0.2;
  cfg.t_max = 35;
  cfg.k_max = 20000;
  cfg.rng_seed = 1;
  return cfg;
}

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("voxelpipe_test_" + tag + "_" + std::to_string(::getpid()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  std::filesystem::path path() const { return path_; }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

}  // namespace testutil
