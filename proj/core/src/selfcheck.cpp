#include "voxelpipe/selfcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>

#include "voxelpipe/augment.hpp"
#include "voxelpipe/checkpoint.hpp"
#include "voxelpipe/errors.hpp"
#include "voxelpipe/grad_check.hpp"
#include "voxelpipe/kernels.hpp"
#include "voxelpipe/network.hpp"
#include "voxelpipe/postprocess.hpp"
#include "voxelpipe/reference.hpp"
#include "voxelpipe/targets.hpp"
#include "voxelpipe/trainer.hpp"
#include "voxelpipe/vfe.hpp"
#include "voxelpipe/voxel.hpp"

namespace voxelpipe {

namespace {

struct Harness {
  std::string suite;
  std::vector<CheckResult>* results;

  void check(const std::string& name, bool ok, const std::string& detail = "") {
    results->push_back({suite, name, ok, ok ? std::string() : detail});
  }

  void check_close(const std::string& name, double got, double want, double tol) {
    const bool ok = std::abs(got - want) <= tol;
    char buf[128];
    std::snprintf(buf, sizeof(buf), "got %.9g, want %.9g (tol %.1e)", got, want, tol);
    check(name, ok, buf);
  }
};

// Returns the midpoint of every uniform range and the mean of every normal:
// exact identity draws for all three augmentations.
class MidpointRng final : public Rng {
 public:
  double uniform(double lo, double hi) override { return 0.5 * (lo + hi); }
  double normal(double mean, double /*stddev*/) override { return mean; }
};

// Uniform draws collapse to the midpoint (zero rotation); normal draws come
// from a fixed queue, then zero.
class QueueRng final : public Rng {
 public:
  explicit QueueRng(std::vector<double> values) : values_(std::move(values)) {}
  double uniform(double lo, double hi) override { return 0.5 * (lo + hi); }
  double normal(double /*mean*/, double /*stddev*/) override {
    if (next_ >= values_.size()) {
      return 0.0;
    }
    return values_[next_++];
  }

 private:
  std::vector<double> values_;
  std::size_t next_ = 0;
};

PointCloud random_cloud(DetRng& rng, std::size_t n, const Range3& range) {
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

VoxelConfig small_voxel_config() {
  VoxelConfig vc;
  vc.range = {-3.0, 1.0, -8.0, 8.0, 0.0, 16.0};
  vc.v_d = 0.4;
  vc.v_h = 0.2;
  vc.v_w = 0.2;
  vc.t_max = 8;
  vc.k_max = 2000;
  vc.rng_seed = 7;
  return vc;
}

bool buffers_equal(const VoxelBuffers& a, const VoxelBuffers& b, std::string* why) {
  if (a.num_voxels != b.num_voxels) {
    *why = "voxel counts differ";
    return false;
  }
  for (std::int64_t k = 0; k < a.num_voxels; ++k) {
    if (a.counts[k] != b.counts[k]) {
      *why = "occupancy differs at voxel " + std::to_string(k);
      return false;
    }
    for (int j = 0; j < 3; ++j) {
      if (a.coords[k * 3 + j] != b.coords[k * 3 + j]) {
        *why = "coords differ at voxel " + std::to_string(k);
        return false;
      }
    }
    for (std::int64_t s = 0; s < a.counts[k] * 7; ++s) {
      if (a.features.data[(k * a.t_max) * 7 + s] != b.features.data[(k * b.t_max) * 7 + s]) {
        *why = "features differ at voxel " + std::to_string(k);
        return false;
      }
    }
  }
  if (a.stats.kept_points != b.stats.kept_points ||
      a.stats.dropped_full_voxel != b.stats.dropped_full_voxel ||
      a.stats.dropped_capacity != b.stats.dropped_capacity ||
      a.stats.distinct_voxels != b.stats.distinct_voxels) {
    *why = "stats differ";
    return false;
  }
  return true;
}

void suite_rng(Harness& h) {
  DetRng a(42), b(42);
  bool same = true;
  for (int i = 0; i < 100; ++i) {
    same = same && a.next_u64() == b.next_u64();
  }
  h.check("same seed reproduces the stream", same);

  DetRng c(7);
  bool in_range = true;
  for (int i = 0; i < 1000; ++i) {
    const double u = c.uniform01();
    in_range = in_range && u >= 0.0 && u < 1.0;
  }
  h.check("uniform01 in [0,1)", in_range);

  std::vector<int> v(100);
  std::iota(v.begin(), v.end(), 0);
  DetRng d(3);
  d.shuffle(v);
  std::vector<int> sorted = v;
  std::sort(sorted.begin(), sorted.end());
  bool perm = true;
  for (int i = 0; i < 100; ++i) {
    perm = perm && sorted[i] == i;
  }
  h.check("shuffle is a permutation", perm);

  h.check("derived seeds separate streams",
          derive_seed(1, 2, 3) != derive_seed(1, 2, 4) &&
              derive_seed(1, 2, 3) != derive_seed(1, 3, 3) &&
              derive_seed(1, 2, 3) != derive_seed(2, 2, 3));
}

void suite_voxel(Harness& h) {
  const VoxelConfig vc = small_voxel_config();
  DetRng rng(11);
  for (int trial = 0; trial < 3; ++trial) {
    const PointCloud cloud = random_cloud(rng, 5000, vc.range);
    VoxelBuffers fast = build_buffers(cloud, vc);
    VoxelBuffers ref = reference::build_buffers_two_pass(cloud, vc);
    std::string why;
    h.check("hash buffers equal two-pass oracle (trial " + std::to_string(trial) + ")",
            buffers_equal(fast, ref, &why), why);
  }

  const PointCloud cloud = random_cloud(rng, 3000, vc.range);
  VoxelBuffers buf = build_buffers(cloud, vc);
  augment_with_centroid(buf);
  bool zeros = true;
  for (std::int64_t k = 0; k < buf.num_voxels && zeros; ++k) {
    for (std::int64_t t = buf.counts[k]; t < buf.t_max && zeros; ++t) {
      for (int j = 0; j < 7; ++j) {
        zeros = zeros && buf.features.data[((k * buf.t_max) + t) * 7 + j] == 0.0f;
      }
    }
  }
  h.check("padding rows stay zero after centroid fill", zeros);

  Tensor feat({3, 5});
  DetRng frng(5);
  for (auto& x : feat.data) {
    x = static_cast<float>(frng.uniform(-1, 1));
  }
  std::vector<std::int32_t> coords{0, 1, 2, 1, 0, 3, 0, 2, 2};
  GridDims dims{2, 3, 4};
  Tensor dense = scatter_to_dense(feat, coords, dims);
  Tensor back = gather_from_dense(dense, coords);
  bool round = back.data == feat.data;
  h.check("scatter/gather roundtrip", round);

  const auto tmp = std::filesystem::temp_directory_path() / "voxelpipe_selfcheck_buffers.bin";
  dump_buffers(buf, tmp.string());
  VoxelBuffers loaded = load_buffers(tmp.string());
  std::string why;
  h.check("buffer dump/load roundtrip", buffers_equal(buf, loaded, &why), why);
  std::filesystem::remove(tmp);
}

void suite_kernels(Harness& h) {
  DetRng rng(21);
  const auto fill64 = [&](Tensor64& t) {
    for (auto& v : t.data) {
      v = rng.uniform(-1, 1);
    }
  };

  Tensor64 x({3, 9, 11});
  Tensor64 w({4, 3, 3, 3});
  fill64(x);
  fill64(w);
  Conv2dSpec spec{3, 3, 2, 2, 1, 1};
  Tensor64 y = conv2d(x, w, Tensor64(), spec);
  Tensor64 y_ref = reference::conv2d_naive(x, w, spec);
  double err = 0;
  for (std::size_t i = 0; i < y.data.size(); ++i) {
    err = std::max(err, std::abs(y.data[i] - y_ref.data[i]));
  }
  h.check_close("conv2d matches the naive loop", err, 0.0, 1e-9);

  Tensor64 x3({2, 6, 7, 8});
  Tensor64 w3({3, 2, 3, 3, 3});
  fill64(x3);
  fill64(w3);
  Conv3dSpec spec3{3, 3, 3, 2, 1, 1, 1, 1, 1};
  Tensor64 y3 = conv3d(x3, w3, Tensor64(), spec3);
  Tensor64 y3_ref = reference::conv3d_naive(x3, w3, spec3);
  err = 0;
  for (std::size_t i = 0; i < y3.data.size(); ++i) {
    err = std::max(err, std::abs(y3.data[i] - y3_ref.data[i]));
  }
  h.check_close("conv3d matches the naive loop", err, 0.0, 1e-9);

  Tensor64 xd({3, 5, 6});
  Tensor64 wd({3, 2, 4, 4});
  fill64(xd);
  fill64(wd);
  Conv2dSpec specd{4, 4, 2, 2, 1, 1};
  Tensor64 yd = deconv2d(xd, wd, Tensor64(), specd);
  Tensor64 yd_ref = reference::deconv2d_naive(xd, wd, specd);
  err = 0;
  for (std::size_t i = 0; i < yd.data.size(); ++i) {
    err = std::max(err, std::abs(yd.data[i] - yd_ref.data[i]));
  }
  h.check_close("deconv2d matches the naive loop", err, 0.0, 1e-9);

  // Finite-difference check through conv2d: loss = sum(conv(x, w)).
  Tensor64 gx({2, 5, 5});
  Tensor64 gw({2, 2, 3, 3});
  fill64(gx);
  fill64(gw);
  Conv2dSpec gspec{3, 3, 1, 1, 1, 1};
  const auto loss = [&]() {
    Tensor64 out = conv2d(gx, gw, Tensor64(), gspec);
    double s = 0;
    for (const double v : out.data) {
      s += v * v;
    }
    return 0.5 * s;
  };
  Tensor64 out = conv2d(gx, gw, Tensor64(), gspec);
  Tensor64 gy = out;  // dL/dy = y for the quadratic objective
  Tensor64 dx = zeros_like(gx);
  Tensor64 dw = zeros_like(gw);
  conv2d_backward(gx, gw, gy, gspec, &dx, &dw, nullptr);
  gx.ensure_grad();
  gw.ensure_grad();
  gx.grad = dx.data;
  gw.grad = dw.data;
  const auto gres = check_gradients(loss, {{"x", &gx}, {"w", &gw}}, 1e-6, 64);
  h.check("conv2d gradients pass finite differences (worst " + gres.worst + ")",
          gres.pass(1e-4));

  h.check_close("sigmoid at zero", static_cast<double>(bce_with_logits(0.0, 1.0)), std::log(2.0),
                1e-12);
  h.check_close("smooth L1 kink value", static_cast<double>(smooth_l1(1.0)), 0.5, 1e-12);
}

void suite_vfe(Harness& h) {
  DetRng rng(31);
  VfeStack<float> stack;
  DetRng init_rng(1);
  stack.init({7, 8, 16}, init_rng);

  const std::int64_t nv = 5, t = 10;
  Tensor x({nv, t, 7});
  std::vector<std::int32_t> counts{10, 7, 3, 1, 6};
  for (std::int64_t k = 0; k < nv; ++k) {
    for (std::int64_t r = 0; r < counts[k]; ++r) {
      for (int c = 0; c < 7; ++c) {
        x.data[(k * t + r) * 7 + c] = static_cast<float>(rng.uniform(-1, 1));
      }
    }
  }
  Tensor base = stack.forward(x, counts, /*train=*/false);

  // Permute the occupied rows of each voxel.
  Tensor xp = x;
  DetRng prng(9);
  for (std::int64_t k = 0; k < nv; ++k) {
    std::vector<std::int64_t> order(counts[k]);
    std::iota(order.begin(), order.end(), 0);
    prng.shuffle(order);
    for (std::int64_t r = 0; r < counts[k]; ++r) {
      for (int c = 0; c < 7; ++c) {
        xp.data[(k * t + r) * 7 + c] = x.data[(k * t + order[r]) * 7 + c];
      }
    }
  }
  Tensor perm = stack.forward(xp, counts, false);
  double err = 0;
  for (std::size_t i = 0; i < base.data.size(); ++i) {
    err = std::max(err, std::abs(static_cast<double>(base.data[i]) - perm.data[i]));
  }
  h.check_close("features invariant to point order", err, 0.0, 1e-6);

  // Growing T with zero rows must not change anything.
  const std::int64_t t2 = t + 5;
  Tensor xpad({nv, t2, 7});
  for (std::int64_t k = 0; k < nv; ++k) {
    for (std::int64_t r = 0; r < t; ++r) {
      for (int c = 0; c < 7; ++c) {
        xpad.data[(k * t2 + r) * 7 + c] = x.data[(k * t + r) * 7 + c];
      }
    }
  }
  Tensor padded = stack.forward(xpad, counts, false);
  err = 0;
  for (std::size_t i = 0; i < base.data.size(); ++i) {
    err = std::max(err, std::abs(static_cast<double>(base.data[i]) - padded.data[i]));
  }
  h.check_close("features invariant to zero-row padding", err, 0.0, 1e-6);
}

void suite_detector(Harness& h) {
  // Full car profile, metadata level.
  VoxelConfig vc;
  vc.range = {-3.0, 1.0, -40.0, 40.0, 0.0, 70.4};
  GridDims dims = grid_dims(vc);
  h.check("car grid is 10 x 400 x 352", dims.d == 10 && dims.h == 400 && dims.w == 352);
  h.check("middle stack leaves depth 2", middle_depth_out(dims.d) == 2);
  const std::int64_t rpn_in = 64 * middle_depth_out(dims.d);
  h.check("reshaped middle output has 128 channels", rpn_in == 128);

  // Reduced numeric run.
  NetworkSpec spec;
  spec.grid = {10, 16, 16};
  spec.vfe_channels = {7, 4, 8};
  spec.middle_channels = {4, 4, 4};
  spec.rpn.channels = {8, 8, 8};
  spec.rpn.q = {1, 1, 1};
  spec.rpn.lateral_channels = 8;
  Network<float> net;
  net.init(spec);

  VoxelConfig vsmall;
  vsmall.range = {-3.0, 1.0, -1.6, 1.6, 0.0, 3.2};
  vsmall.v_d = 0.4;
  vsmall.v_h = 0.2;
  vsmall.v_w = 0.2;
  vsmall.t_max = 8;
  vsmall.k_max = 500;
  vsmall.rng_seed = 3;
  DetRng rng(17);
  const PointCloud cloud = random_cloud(rng, 800, vsmall.range);
  VoxelBuffers buf = build_buffers(cloud, vsmall);
  augment_with_centroid(buf);
  auto out = net.forward(buf, /*train=*/false);
  h.check("score map is 2 x H/2 x W/2",
          out.score.shape == std::vector<std::int64_t>({2, 8, 8}));
  h.check("regression map is 14 x H/2 x W/2",
          out.reg.shape == std::vector<std::int64_t>({14, 8, 8}));
}

void suite_targets(Harness& h) {
  DetRng rng(41);
  double max_err = 0;
  for (int i = 0; i < 1000; ++i) {
    Box3D anchor;
    anchor.x = rng.uniform(-10, 10);
    anchor.y = rng.uniform(-10, 10);
    anchor.z = rng.uniform(-2, 0);
    anchor.l = rng.uniform(0.5, 4.5);
    anchor.w = rng.uniform(0.4, 2.0);
    anchor.h = rng.uniform(1.0, 2.0);
    anchor.theta = i % 2 == 0 ? 0.0 : M_PI / 2;
    Box3D gt;
    gt.x = anchor.x + rng.uniform(-2, 2);
    gt.y = anchor.y + rng.uniform(-2, 2);
    gt.z = anchor.z + rng.uniform(-0.5, 0.5);
    gt.l = anchor.l * rng.uniform(0.7, 1.4);
    gt.w = anchor.w * rng.uniform(0.7, 1.4);
    gt.h = anchor.h * rng.uniform(0.7, 1.4);
    gt.theta = rng.uniform(-M_PI, M_PI);
    const Box3D back = decode_residual(encode_residual(gt, anchor), anchor);
    max_err = std::max({max_err, std::abs(back.x - gt.x), std::abs(back.y - gt.y),
                        std::abs(back.z - gt.z), std::abs(back.l - gt.l),
                        std::abs(back.w - gt.w), std::abs(back.h - gt.h),
                        std::abs(normalize_angle(back.theta - gt.theta))});
  }
  h.check_close("encode/decode roundtrip", max_err, 0.0, 1e-9);

  Box3D a;
  a.l = 4;
  a.w = 2;
  a.h = 1.5;
  h.check_close("IoU with itself", bev_iou(a, a), 1.0, 1e-12);
  Box3D b = a;
  b.x = 2.0;  // half-length shift: intersection 4, union 12
  h.check_close("axis-aligned half overlap", bev_iou(a, b), 1.0 / 3.0, 1e-12);
  b.x = 100;
  h.check_close("disjoint boxes", bev_iou(a, b), 0.0, 0.0);

  const ClassConfig cc = class_config("Car");
  const Range3 range{-3.0, 1.0, -8.0, 8.0, 0.0, 16.0};
  const AnchorGrid grid = make_anchor_grid(cc, range, 20, 20);
  DetRng srng(55);
  bool agree = true;
  bool covered = true;
  std::string why;
  for (int scene = 0; scene < 10 && agree; ++scene) {
    std::vector<Box3D> gts;
    const int num = 1 + static_cast<int>(srng.uniform_index(3));
    for (int g = 0; g < num; ++g) {
      Box3D gt;
      gt.x = srng.uniform(2, 14);
      gt.y = srng.uniform(-6, 6);
      gt.z = -1.0;
      gt.l = cc.anchor_l * srng.uniform(0.8, 1.2);
      gt.w = cc.anchor_w * srng.uniform(0.8, 1.2);
      gt.h = cc.anchor_h;
      gt.theta = srng.uniform(-M_PI, M_PI);
      gts.push_back(gt);
    }
    const MatchResult fast = match_anchors(grid, gts, cc);
    const MatchResult ref = reference::match_anchors_exhaustive(grid, gts, cc);
    if (fast.labels != ref.labels || fast.gt_index != ref.gt_index ||
        fast.num_pos != ref.num_pos || fast.num_neg != ref.num_neg) {
      agree = false;
      why = "scene " + std::to_string(scene);
    }
    std::vector<bool> has_pos(gts.size(), false);
    for (std::size_t i = 0; i < fast.labels.size(); ++i) {
      if (fast.labels[i] == AnchorLabel::kPositive) {
        has_pos[static_cast<std::size_t>(fast.gt_index[i])] = true;
      }
    }
    for (const bool hp : has_pos) {
      covered = covered && hp;
    }
  }
  h.check("matcher equals the exhaustive oracle", agree, why);
  h.check("every ground truth gets a positive anchor", covered);

  // Loss vs the scalar reference on a small random instance.
  const AnchorGrid small_grid = make_anchor_grid(cc, range, 4, 4);
  std::vector<Box3D> gts;
  Box3D gt;
  gt.x = 8;
  gt.y = 0;
  gt.z = -1;
  gt.l = 3.9;
  gt.w = 1.6;
  gt.h = 1.56;
  gt.theta = 0.3;
  gts.push_back(gt);
  const MatchResult match = match_anchors(small_grid, gts, cc);
  Tensor64 score({2, 4, 4});
  Tensor64 reg({14, 4, 4});
  DetRng lrng(66);
  for (auto& v : score.data) {
    v = lrng.uniform(-2, 2);
  }
  for (auto& v : reg.data) {
    v = lrng.uniform(-1, 1);
  }
  const auto fast_loss = total_loss<double>(score, reg, match);
  const auto ref_loss = reference::total_loss_scalar<double>(score, reg, match);
  h.check_close("loss equals the scalar reference", fast_loss.total, ref_loss.total, 1e-6);
}

void suite_augment(Harness& h) {
  DetRng srng(3);
  const ClassConfig cc = class_config("Car");
  const Range3 range{-3.0, 1.0, -8.0, 8.0, 0.0, 16.0};
  Scene scene = make_synthetic_scene(srng, cc, range);
  const Scene before = scene;

  MidpointRng id;
  perturb_boxes(scene, id);
  global_scale(scene, id);
  global_rotate(scene, id);
  bool identical = scene.boxes.size() == before.boxes.size() &&
                   scene.cloud.points.size() == before.cloud.points.size();
  for (std::size_t i = 0; i < scene.cloud.points.size() && identical; ++i) {
    identical = scene.cloud.points[i].x == before.cloud.points[i].x &&
                scene.cloud.points[i].y == before.cloud.points[i].y &&
                scene.cloud.points[i].z == before.cloud.points[i].z;
  }
  for (std::size_t i = 0; i < scene.boxes.size() && identical; ++i) {
    identical = scene.boxes[i].x == before.boxes[i].x &&
                scene.boxes[i].theta == before.boxes[i].theta;
  }
  h.check("centered draws leave the scene unchanged", identical);

  // Two boxes 3 m apart; forced +1.5/-1.5 x-translations collide them.
  Scene pair;
  for (int i = 0; i < 2; ++i) {
    Box3D box;
    box.x = i == 0 ? 5.0 : 8.0;
    box.y = 0;
    box.z = -1;
    box.l = 3.9;
    box.w = 1.6;
    box.h = 1.56;
    box.theta = 0;
    pair.boxes.push_back(box);
  }
  compute_membership(pair);
  QueueRng collide({1.5, 0.0, 0.0, -1.5, 0.0, 0.0});
  const std::int64_t reverted = perturb_boxes(pair, collide);
  h.check("forced collision reverts both boxes",
          reverted == 2 && pair.boxes[0].x == 5.0 && pair.boxes[1].x == 8.0,
          "reverted=" + std::to_string(reverted));

  Scene rot = before;
  DetRng rrng(9);
  const std::size_t n = std::min<std::size_t>(rot.cloud.points.size(), 40);
  std::vector<double> dist_before;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const auto& p = rot.cloud.points[i];
      const auto& q = rot.cloud.points[j];
      dist_before.push_back(std::hypot(p.x - q.x, p.y - q.y, p.z - q.z));
    }
  }
  global_rotate(rot, rrng);
  double max_err = 0;
  std::size_t idx = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const auto& p = rot.cloud.points[i];
      const auto& q = rot.cloud.points[j];
      max_err = std::max(max_err,
                         std::abs(std::hypot(p.x - q.x, p.y - q.y, p.z - q.z) -
                                  dist_before[idx++]));
    }
  }
  h.check_close("rotation preserves pairwise distances", max_err, 0.0, 1e-5);
}

void suite_postprocess(Harness& h) {
  DetRng rng(77);
  std::vector<Detection> dets;
  for (int i = 0; i < 200; ++i) {
    Detection d;
    d.box.x = rng.uniform(0, 30);
    d.box.y = rng.uniform(-10, 10);
    d.box.z = -1;
    d.box.l = rng.uniform(2, 5);
    d.box.w = rng.uniform(1, 2);
    d.box.h = 1.5;
    d.box.theta = rng.uniform(-M_PI, M_PI);
    d.score = rng.uniform(0, 1);
    dets.push_back(d);
  }
  const auto fast = nms_bev(dets, 0.1);
  const auto ref = reference::nms_bev_quadratic(dets, 0.1);
  bool same = fast.size() == ref.size();
  for (std::size_t i = 0; i < fast.size() && same; ++i) {
    same = fast[i].score == ref[i].score && fast[i].box.x == ref[i].box.x;
  }
  h.check("suppression equals the quadratic reference", same);

  // Perfect detections give AP 1 at the car threshold.
  std::vector<std::vector<GtObject>> gts(3);
  std::vector<std::vector<Detection>> det_frames(3);
  DetRng grng(5);
  for (int f = 0; f < 3; ++f) {
    for (int g = 0; g < 2; ++g) {
      GtObject gt;
      gt.box.x = 5.0 + 8.0 * g;
      gt.box.y = f - 1;
      gt.box.z = -1;
      gt.box.l = 3.9;
      gt.box.w = 1.6;
      gt.box.h = 1.56;
      gt.box.theta = grng.uniform(-M_PI, M_PI);
      gts[f].push_back(gt);
      Detection d;
      d.box = gt.box;
      d.score = grng.uniform(0.5, 1.0);
      det_frames[f].push_back(d);
    }
  }
  EvalConfig ec;
  ec.iou_threshold = 0.7;
  const ApResult perfect = average_precision(det_frames, gts, ec);
  h.check_close("perfect detections reach AP 1", perfect.ap[0], 1.0, 1e-12);

  const ApResult empty = average_precision({{}, {}, {}}, gts, ec);
  h.check_close("no detections give AP 0", empty.ap[0], 0.0, 0.0);
}

void suite_checkpoint(Harness& h) {
  const auto tmp = std::filesystem::temp_directory_path() / "voxelpipe_selfcheck_ckpt.bin";
  Tensor a({2, 3});
  Tensor b({4});
  DetRng rng(13);
  for (auto& v : a.data) {
    v = static_cast<float>(rng.uniform(-1, 1));
  }
  for (auto& v : b.data) {
    v = static_cast<float>(rng.uniform(-1, 1));
  }
  save_checkpoint(tmp.string(), {{"a", &a}, {"b", &b}});
  const auto loaded = load_checkpoint(tmp.string());
  h.check("weights roundtrip bit-exactly",
          loaded.size() == 2 && loaded.at("a").data == a.data && loaded.at("b").data == b.data);

  // Truncate and expect a loader error naming the offset.
  std::error_code ec;
  std::filesystem::resize_file(tmp, 20, ec);
  bool reported = false;
  std::string message;
  try {
    load_checkpoint(tmp.string());
  } catch (const IoError& e) {
    message = e.what();
    reported = message.find("offset") != std::string::npos;
  }
  h.check("corrupted file reports its byte offset", reported, message);
  std::filesystem::remove(tmp);
}

void suite_trainer(Harness& h) {
  const ClassConfig cc = class_config("Car");
  const Range3 range{-3.0, 1.0, -8.0, 8.0, 0.0, 16.0};
  DetRng s1(2024), s2(2024);
  const Scene scene1 = make_synthetic_scene(s1, cc, range);
  const Scene scene2 = make_synthetic_scene(s2, cc, range);
  bool same = scene1.cloud.points.size() == scene2.cloud.points.size() &&
              scene1.boxes.size() == scene2.boxes.size();
  for (std::size_t i = 0; i < scene1.cloud.points.size() && same; ++i) {
    same = scene1.cloud.points[i].x == scene2.cloud.points[i].x &&
           scene1.cloud.points[i].r == scene2.cloud.points[i].r;
  }
  h.check("synthetic scenes reproduce from the seed", same);

  bool enough = true;
  for (const auto& members : scene1.membership) {
    enough = enough && members.size() >= 50;
  }
  h.check("every synthetic box holds at least 50 points", enough);

  TrainConfig tc;
  tc.batch_size = 1;
  tc.steps = 3;
  tc.lr0 = 0.0;
  tc.lr1 = 0.0;
  tc.seed = 5;
  VoxelConfig vc = small_voxel_config();
  vc.t_max = 16;
  NetworkSpec spec;
  spec.grid = grid_dims(vc);
  spec.vfe_channels = {7, 4, 8};
  spec.middle_channels = {4, 4, 4};
  spec.rpn.channels = {8, 8, 8};
  spec.rpn.q = {1, 1, 1};
  spec.rpn.lateral_channels = 8;
  Trainer trainer(tc, vc, spec);
  std::vector<float> before;
  for (const auto& p : trainer.network().params()) {
    if (p.learnable) {
      before.insert(before.end(), p.value->data.begin(), p.value->data.end());
    }
  }
  trainer.run({scene1}, 3, nullptr);
  std::vector<float> after;
  for (const auto& p : trainer.network().params()) {
    if (p.learnable) {
      after.insert(after.end(), p.value->data.begin(), p.value->data.end());
    }
  }
  h.check("zero learning rate leaves parameters unchanged", before == after);
}

}  // namespace

std::vector<CheckResult> run_selfcheck(const std::string& filter) {
  std::vector<CheckResult> results;
  const std::vector<std::pair<std::string, void (*)(Harness&)>> suites = {
      {"rng", suite_rng},           {"voxel", suite_voxel},
      {"kernels", suite_kernels},   {"vfe", suite_vfe},
      {"detector", suite_detector}, {"targets", suite_targets},
      {"augment", suite_augment},   {"postprocess", suite_postprocess},
      {"checkpoint", suite_checkpoint}, {"trainer", suite_trainer},
  };
  for (const auto& [name, fn] : suites) {
    if (!filter.empty() && name.find(filter) == std::string::npos) {
      continue;
    }
    Harness h{name, &results};
    fn(h);
  }
  return results;
}

int selfcheck_report(const std::string& filter, std::ostream& out) {
  const auto results = run_selfcheck(filter);
  int failed = 0;
  for (const auto& r : results) {
    out << (r.passed ? "[pass] " : "[FAIL] ") << r.suite << ": " << r.name;
    if (!r.passed && !r.detail.empty()) {
      out << " (" << r.detail << ")";
    }
    out << "\n";
    failed += r.passed ? 0 : 1;
  }
  if (results.empty()) {
    out << "no suites match filter '" << filter << "'\n";
    return 2;
  }
  out << results.size() - failed << "/" << results.size() << " checks passed\n";
  return failed == 0 ? 0 : 1;
}

}  // namespace voxelpipe
