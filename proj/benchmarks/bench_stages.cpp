#include <benchmark/benchmark.h>

#include "voxelpipe/network.hpp"
#include "voxelpipe/rng.hpp"
#include "voxelpipe/voxel.hpp"

// Per-stage costs on the reduced desk profile. The stage split mirrors the
// CLI bench subcommand: buffer build, VFE, middle layers, RPN.

namespace {

using namespace voxelpipe;

VoxelConfig bench_voxel_config() {
  VoxelConfig vc;
  vc.range = {-3.0, 1.0, -8.0, 8.0, 0.0, 16.0};
  vc.v_d = 0.4;
  vc.v_h = 0.2;
  vc.v_w = 0.2;
  vc.t_max = 35;
  vc.k_max = 4000;
  vc.rng_seed = 1;
  return vc;
}

NetworkSpec bench_network_spec(const VoxelConfig& vc) {
  NetworkSpec spec;
  spec.grid = grid_dims(vc);
  spec.vfe_channels = {7, 8, 32};
  spec.middle_channels = {16, 16, 16};
  spec.rpn.channels = {32, 32, 64};
  spec.rpn.q = {3, 5, 5};
  spec.rpn.lateral_channels = 64;
  return spec;
}

PointCloud bench_cloud(std::size_t n, const Range3& range) {
  DetRng rng(99);
  PointCloud cloud;
  cloud.points.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Point4 p;
    p.x = static_cast<float>(rng.uniform(range.x_min, range.x_max));
    p.y = static_cast<float>(rng.uniform(range.y_min, range.y_max));
    p.z = static_cast<float>(rng.uniform(range.z_min, range.z_max));
    p.r = static_cast<float>(rng.uniform(0.0, 1.0));
    cloud.points.push_back(p);
  }
  return cloud;
}

struct Prepared {
  VoxelConfig vc = bench_voxel_config();
  NetworkSpec spec;
  Network<float> net;
  PointCloud cloud;
  VoxelBuffers buffers;
  Tensor vfe_out;
  Tensor bev;

  Prepared() : spec(bench_network_spec(vc)), cloud(bench_cloud(20000, vc.range)) {
    net.init(spec);
    buffers = build_buffers(cloud, vc);
    augment_with_centroid(buffers);
    vfe_out = run_vfe();
    bev = run_middle();
  }

  Tensor run_vfe() {
    const std::int64_t nv = buffers.num_voxels;
    const std::int64_t t = buffers.t_max;
    Tensor x({nv, t, 7});
    std::copy(buffers.features.data.begin(), buffers.features.data.begin() + nv * t * 7,
              x.data.begin());
    std::vector<std::int32_t> counts(buffers.counts.begin(), buffers.counts.begin() + nv);
    return net.vfe.forward(x, counts, /*train=*/false);
  }

  Tensor run_middle() {
    const std::int64_t nv = buffers.num_voxels;
    std::vector<std::int32_t> coords(buffers.coords.begin(), buffers.coords.begin() + nv * 3);
    Tensor dense = scatter_to_dense(vfe_out, coords, spec.grid);
    Tensor mid = net.middle.forward(dense, false);
    return reshape_to_bev(std::move(mid));
  }
};

Prepared& prepared() {
  static Prepared p;
  return p;
}

void BM_BufferBuild(benchmark::State& state) {
  auto& p = prepared();
  for (auto _ : state) {
    VoxelBuffers buffers = build_buffers(p.cloud, p.vc);
    augment_with_centroid(buffers);
    benchmark::DoNotOptimize(buffers.num_voxels);
  }
}
BENCHMARK(BM_BufferBuild)->Unit(benchmark::kMillisecond);

void BM_Vfe(benchmark::State& state) {
  auto& p = prepared();
  for (auto _ : state) {
    Tensor out = p.run_vfe();
    benchmark::DoNotOptimize(out.data.data());
  }
}
BENCHMARK(BM_Vfe)->Unit(benchmark::kMillisecond);

void BM_Middle(benchmark::State& state) {
  auto& p = prepared();
  for (auto _ : state) {
    Tensor out = p.run_middle();
    benchmark::DoNotOptimize(out.data.data());
  }
}
BENCHMARK(BM_Middle)->Unit(benchmark::kMillisecond);

void BM_Rpn(benchmark::State& state) {
  auto& p = prepared();
  for (auto _ : state) {
    auto heads = p.net.rpn.forward(p.bev, /*train=*/false);
    benchmark::DoNotOptimize(heads.first.data.data());
  }
}
BENCHMARK(BM_Rpn)->Unit(benchmark::kMillisecond);

}  // namespace
