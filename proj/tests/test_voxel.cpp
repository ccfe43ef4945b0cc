#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <vector>

#include "test_util.hpp"
#include "voxelpipe/reference.hpp"
#include "voxelpipe/voxel.hpp"

using namespace voxelpipe;

namespace {

bool buffers_equal(const VoxelBuffers& a, const VoxelBuffers& b) {
  if (a.num_voxels != b.num_voxels) return false;
  const std::int64_t nv = a.num_voxels;
  for (std::int64_t k = 0; k < nv; ++k) {
    if (a.counts[k] != b.counts[k]) return false;
    for (int c = 0; c < 3; ++c) {
      if (a.coords[k * 3 + c] != b.coords[k * 3 + c]) return false;
    }
  }
  const std::int64_t row = a.t_max * 7;
  for (std::int64_t i = 0; i < nv * row; ++i) {
    if (a.features.data[i] != b.features.data[i]) return false;
  }
  return a.stats.kept_points == b.stats.kept_points &&
         a.stats.dropped_full_voxel == b.stats.dropped_full_voxel &&
         a.stats.dropped_capacity == b.stats.dropped_capacity &&
         a.stats.distinct_voxels == b.stats.distinct_voxels;
}

}  // namespace

TEST(GridDimsTest, CarConfigShape) {
  const GridDims g = grid_dims(testutil::car_voxel_config());
  EXPECT_EQ(g.d, 10);
  EXPECT_EQ(g.h, 400);
  EXPECT_EQ(g.w, 352);
}

TEST(GridDimsTest, PedestrianConfigShape) {
  VoxelConfig cfg = testutil::car_voxel_config();
  cfg.range = Range3{-3.0, 1.0, -20.0, 20.0, 0.0, 48.0};
  const GridDims g = grid_dims(cfg);
  EXPECT_EQ(g.d, 10);
  EXPECT_EQ(g.h, 200);
  EXPECT_EQ(g.w, 240);
}

TEST(GridDimsTest, UnitExtentsUnitVoxels) {
  VoxelConfig cfg;
  cfg.range = Range3{0, 1, 0, 1, 0, 1};
  cfg.v_d = cfg.v_h = cfg.v_w = 1.0;
  const GridDims g = grid_dims(cfg);
  EXPECT_EQ(g.d, 1);
  EXPECT_EQ(g.h, 1);
  EXPECT_EQ(g.w, 1);
  EXPECT_EQ(g.cells(), 1);
}

TEST(VoxelIndexTest, HandEvaluatedCarPoint) {
  const VoxelConfig cfg = testutil::car_voxel_config();
  const VoxelCoord c = voxel_index({10.0f, 0.0f, -1.0f, 0.0f}, cfg);
  EXPECT_EQ(c.d, 5);
  EXPECT_EQ(c.h, 200);
  EXPECT_EQ(c.w, 50);
}

TEST(VoxelIndexTest, RangeMinimumCornerIsOriginCell) {
  const VoxelConfig cfg = testutil::car_voxel_config();
  const VoxelCoord c = voxel_index({0.0f, -40.0f, -3.0f, 0.0f}, cfg);
  EXPECT_EQ(c.d, 0);
  EXPECT_EQ(c.h, 0);
  EXPECT_EQ(c.w, 0);
}

TEST(VoxelIndexTest, JustBelowRangeMaxIsLastCell) {
  const VoxelConfig cfg = testutil::car_voxel_config();
  const GridDims g = grid_dims(cfg);
  const float eps = 1e-4f;
  const VoxelCoord c = voxel_index({70.4f - eps, 40.0f - eps, 1.0f - eps, 0.0f}, cfg);
  EXPECT_EQ(c.d, g.d - 1);
  EXPECT_EQ(c.h, g.h - 1);
  EXPECT_EQ(c.w, g.w - 1);
}

TEST(BuildBuffersTest, UnderCapacityVoxelKeepsAllPointsPadsZero) {
  VoxelConfig cfg = testutil::car_voxel_config();
  PointCloud cloud;
  cloud.points.push_back({10.01f, 0.01f, -1.01f, 0.1f});
  cloud.points.push_back({10.05f, 0.05f, -1.05f, 0.2f});
  cloud.points.push_back({10.09f, 0.09f, -1.09f, 0.3f});
  const VoxelBuffers buffers = build_buffers(cloud, cfg);
  ASSERT_EQ(buffers.num_voxels, 1);
  EXPECT_EQ(buffers.counts[0], 3);
  const std::int64_t row = cfg.t_max * 7;
  for (std::int64_t t = 3; t < cfg.t_max; ++t) {
    for (int f = 0; f < 7; ++f) {
      EXPECT_EQ(buffers.features.data[t * 7 + f], 0.0f) << "row " << t;
    }
  }
  (void)row;
}

TEST(BuildBuffersTest, OverfullVoxelSamplesExactlyTmax) {
  VoxelConfig cfg = testutil::car_voxel_config();
  PointCloud cloud;
  for (int i = 0; i < cfg.t_max + 5; ++i) {
    cloud.points.push_back({10.0f + 0.001f * i, 0.0f, -1.0f, 0.1f});
  }
  const VoxelBuffers buffers = build_buffers(cloud, cfg);
  ASSERT_EQ(buffers.num_voxels, 1);
  EXPECT_EQ(buffers.counts[0], cfg.t_max);
  EXPECT_EQ(buffers.stats.dropped_full_voxel, 5u);
  EXPECT_EQ(buffers.stats.kept_points, static_cast<std::size_t>(cfg.t_max));
}

TEST(BuildBuffersTest, MatchesTwoPassOracleOnRandomClouds) {
  VoxelConfig cfg = testutil::small_voxel_config();
  for (std::uint64_t trial = 0; trial < 8; ++trial) {
    cfg.rng_seed = 100 + trial;
    cfg.t_max = trial % 2 == 0 ? 8 : 3;
    cfg.k_max = trial % 3 == 0 ? 50 : 2000;  // small K exercises the capacity drop path
    const PointCloud cloud =
        testutil::random_cloud(10000, 555 + trial, testutil::small_range());
    const VoxelBuffers fast = build_buffers(cloud, cfg);
    const VoxelBuffers slow = reference::build_buffers_two_pass(cloud, cfg);
    EXPECT_TRUE(buffers_equal(fast, slow)) << "trial " << trial;
  }
}

TEST(BuildBuffersTest, StatsAccountForEveryInRangePoint) {
  const VoxelConfig cfg = testutil::small_voxel_config();
  const PointCloud cloud = testutil::random_cloud(5000, 77, testutil::small_range());
  const PointCloud cropped = crop_to_range(cloud, cfg.range);
  const VoxelBuffers buffers = build_buffers(cropped, cfg);
  EXPECT_EQ(buffers.stats.total_points, cropped.size());
  EXPECT_EQ(buffers.stats.kept_points + buffers.stats.dropped_full_voxel +
                buffers.stats.dropped_capacity,
            buffers.stats.total_points);
}

TEST(CentroidTest, SinglePointVoxelHasZeroOffsets) {
  VoxelConfig cfg = testutil::car_voxel_config();
  PointCloud cloud;
  cloud.points.push_back({10.0f, 0.0f, -1.0f, 0.5f});
  VoxelBuffers buffers = build_buffers(cloud, cfg);
  augment_with_centroid(buffers);
  EXPECT_FLOAT_EQ(buffers.features.data[4], 0.0f);
  EXPECT_FLOAT_EQ(buffers.features.data[5], 0.0f);
  EXPECT_FLOAT_EQ(buffers.features.data[6], 0.0f);
}

TEST(CentroidTest, SymmetricPairGivesUnitOffsets) {
  VoxelConfig cfg;
  cfg.range = Range3{-10, 10, -10, 10, -10, 10};
  cfg.v_d = cfg.v_h = cfg.v_w = 20.0;  // one giant voxel
  cfg.t_max = 4;
  cfg.k_max = 4;
  PointCloud cloud;
  cloud.points.push_back({1.0f, 2.0f, 3.0f, 0.0f});
  cloud.points.push_back({-1.0f, 2.0f, 3.0f, 0.0f});
  VoxelBuffers buffers = build_buffers(cloud, cfg);
  ASSERT_EQ(buffers.counts[0], 2);
  augment_with_centroid(buffers);
  // Offset slots are (dx, dy, dz) from the voxel centroid; x centroid is 0.
  const float dx0 = buffers.features.data[4];
  const float dx1 = buffers.features.data[7 + 4];
  EXPECT_FLOAT_EQ(std::abs(dx0), 1.0f);
  EXPECT_FLOAT_EQ(dx0, -dx1);
  EXPECT_FLOAT_EQ(buffers.features.data[5], 0.0f);
  EXPECT_FLOAT_EQ(buffers.features.data[6], 0.0f);
}

TEST(CentroidTest, OffsetsSumToZeroPerVoxel) {
  const VoxelConfig cfg = testutil::small_voxel_config();
  const PointCloud cloud = testutil::random_cloud(4000, 13, testutil::small_range());
  VoxelBuffers buffers = build_buffers(crop_to_range(cloud, cfg.range), cfg);
  augment_with_centroid(buffers);
  for (std::int64_t k = 0; k < buffers.num_voxels; ++k) {
    double sum[3] = {0, 0, 0};
    for (std::int64_t t = 0; t < buffers.counts[k]; ++t) {
      const std::int64_t base = (k * cfg.t_max + t) * 7;
      sum[0] += buffers.features.data[base + 4];
      sum[1] += buffers.features.data[base + 5];
      sum[2] += buffers.features.data[base + 6];
    }
    EXPECT_NEAR(sum[0], 0.0, 1e-5);
    EXPECT_NEAR(sum[1], 0.0, 1e-5);
    EXPECT_NEAR(sum[2], 0.0, 1e-5);
  }
}

TEST(ScatterTest, SingleVoxelPlacesFeatureAtCoord) {
  Tensor features({1, 2});
  features.data = {1.0f, 1.0f};
  const std::vector<std::int32_t> coords = {0, 0, 0};
  GridDims grid;
  grid.d = 1;
  grid.h = 2;
  grid.w = 2;
  const Tensor dense = scatter_to_dense(features, coords, grid);
  ASSERT_EQ(dense.rank(), 4);
  EXPECT_EQ(dense.shape[0], 2);
  EXPECT_EQ(dense.shape[1], 1);
  EXPECT_EQ(dense.shape[2], 2);
  EXPECT_EQ(dense.shape[3], 2);
  double total = 0;
  for (float v : dense.data) total += v;
  EXPECT_FLOAT_EQ(dense.data[0], 1.0f);                  // channel 0 at (0,0,0)
  EXPECT_FLOAT_EQ(dense.data[1 * 1 * 2 * 2 + 0], 1.0f);  // channel 1 at (0,0,0)
  EXPECT_DOUBLE_EQ(total, 2.0);
}

TEST(ScatterTest, NoVoxelsGivesAllZeros) {
  Tensor features({0, 3});
  GridDims grid;
  grid.d = 2;
  grid.h = 2;
  grid.w = 2;
  const Tensor dense = scatter_to_dense(features, {}, grid);
  for (float v : dense.data) EXPECT_EQ(v, 0.0f);
}

TEST(ScatterTest, GatherInvertsScatter) {
  const VoxelConfig cfg = testutil::small_voxel_config();
  const PointCloud cloud = testutil::random_cloud(3000, 21, testutil::small_range());
  const VoxelBuffers buffers = build_buffers(crop_to_range(cloud, cfg.range), cfg);
  const std::int64_t nv = buffers.num_voxels;
  DetRng rng(4);
  Tensor features({nv, 5});
  for (auto& v : features.data) v = static_cast<float>(rng.uniform(-1, 1));
  const std::vector<std::int32_t> coords(buffers.coords.begin(), buffers.coords.begin() + nv * 3);
  const Tensor dense = scatter_to_dense(features, coords, buffers.dims);
  const Tensor back = gather_from_dense(dense, coords);
  ASSERT_EQ(back.numel(), features.numel());
  for (std::int64_t i = 0; i < features.numel(); ++i) {
    EXPECT_EQ(back.data[i], features.data[i]);
  }
}

TEST(BufferIoTest, DumpLoadRoundtrip) {
  testutil::TempDir dir("vox");
  const VoxelConfig cfg = testutil::small_voxel_config();
  const PointCloud cloud = testutil::random_cloud(2000, 9, testutil::small_range());
  VoxelBuffers buffers = build_buffers(crop_to_range(cloud, cfg.range), cfg);
  augment_with_centroid(buffers);
  const std::string path = dir.file("b.vx");
  dump_buffers(buffers, path);
  const VoxelBuffers loaded = load_buffers(path);
  EXPECT_TRUE(buffers_equal(buffers, loaded));
  EXPECT_EQ(loaded.dims.d, buffers.dims.d);
  EXPECT_EQ(loaded.t_max, buffers.t_max);
}
