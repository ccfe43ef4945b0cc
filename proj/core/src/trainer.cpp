#include "voxelpipe/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "voxelpipe/checkpoint.hpp"
#include "voxelpipe/errors.hpp"
#include "voxelpipe/io_kitti.hpp"

namespace voxelpipe {

TrainConfig train_config_from_config(const Config& cfg) {
  TrainConfig tc;
  tc.cls = cfg.get_string("train.class", tc.cls);
  tc.lr0 = cfg.get_double("train.lr0", tc.lr0);
  tc.lr1 = cfg.get_double("train.lr1", tc.lr1);
  tc.epochs_main = cfg.get_int("train.epochs_main", tc.epochs_main);
  tc.epochs_tail = cfg.get_int("train.epochs_tail", tc.epochs_tail);
  tc.batch_size = cfg.get_int("train.batch_size", tc.batch_size);
  tc.steps = cfg.get_int("train.steps", tc.steps);
  tc.lr_switch_step = cfg.get_int("train.lr_switch_step", tc.lr_switch_step);
  tc.momentum = cfg.get_double("train.momentum", tc.momentum);
  tc.seed = static_cast<std::uint64_t>(cfg.get_int("seed", 1));
  tc.seed = static_cast<std::uint64_t>(cfg.get_int("train.seed", static_cast<std::int64_t>(tc.seed)));
  tc.checkpoint_every = cfg.get_int("train.checkpoint_every", tc.checkpoint_every);
  tc.aug = augment_config_from_config(cfg);
  if (tc.lr0 < 0 || tc.lr1 < 0) {
    throw ConfigError("learning rates must be non-negative");
  }
  if (tc.batch_size < 1) {
    throw ConfigError("batch size must be at least 1");
  }
  return tc;
}

namespace {

// Index draw via the shared uniform stream so any Rng stub controls it.
std::int64_t draw_index(Rng& rng, std::int64_t n) {
  const double u = rng.uniform(0.0, static_cast<double>(n));
  const std::int64_t i = static_cast<std::int64_t>(u);
  return std::min(i, n - 1);
}

}  // namespace

Scene make_synthetic_scene(Rng& rng, const ClassConfig& cc, const Range3& range) {
  Scene scene;
  const std::int64_t num_boxes = 1 + draw_index(rng, 4);
  for (std::int64_t b = 0; b < num_boxes; ++b) {
    Box3D box;
    bool placed = false;
    for (int attempt = 0; attempt < 100 && !placed; ++attempt) {
      box.l = cc.anchor_l * rng.uniform(0.85, 1.15);
      box.w = cc.anchor_w * rng.uniform(0.85, 1.15);
      box.h = cc.anchor_h * rng.uniform(0.9, 1.1);
      box.theta = rng.uniform(-M_PI, M_PI);
      const double margin = 0.5 * std::hypot(box.l, box.w) + 0.1;
      if (range.x_max - range.x_min <= 2 * margin || range.y_max - range.y_min <= 2 * margin) {
        throw ConfigError("range too small for synthetic boxes");
      }
      box.x = rng.uniform(range.x_min + margin, range.x_max - margin);
      box.y = rng.uniform(range.y_min + margin, range.y_max - margin);
      box.z = cc.anchor_z + rng.uniform(-0.1, 0.1);
      placed = true;
      for (const Box3D& other : scene.boxes) {
        if (bev_iou(box, other) > 0.0) {
          placed = false;
          break;
        }
      }
    }
    if (!placed) {
      break;  // crowded range; keep the boxes placed so far
    }
    scene.boxes.push_back(box);

    const std::int64_t num_points = 50 + draw_index(rng, 251);
    const double hl = 0.5 * box.l, hw = 0.5 * box.w, hh = 0.5 * box.h;
    const double ct = std::cos(box.theta), st = std::sin(box.theta);
    for (std::int64_t i = 0; i < num_points; ++i) {
      // One of the four walls or the roof, with inward-clamped jitter so the
      // point stays inside the closed box.
      const std::int64_t face = draw_index(rng, 5);
      double u = rng.uniform(-hl, hl);
      double v = rng.uniform(-hw, hw);
      double zl = rng.uniform(-hh, hh);
      switch (face) {
        case 0: u = hl; break;
        case 1: u = -hl; break;
        case 2: v = hw; break;
        case 3: v = -hw; break;
        default: zl = hh; break;
      }
      u = std::clamp(u + rng.normal(0.0, 0.02), -hl, hl);
      v = std::clamp(v + rng.normal(0.0, 0.02), -hw, hw);
      zl = std::clamp(zl + rng.normal(0.0, 0.02), -hh, hh);
      Point4 p;
      p.x = static_cast<float>(box.x + ct * u - st * v);
      p.y = static_cast<float>(box.y + st * u + ct * v);
      p.z = static_cast<float>(box.z + zl);
      p.r = static_cast<float>(rng.uniform(0.0, 1.0));
      scene.cloud.points.push_back(p);
    }
  }

  const std::int64_t clutter = 100 + draw_index(rng, 101);
  for (std::int64_t i = 0; i < clutter; ++i) {
    Point4 p;
    p.x = static_cast<float>(rng.uniform(range.x_min, range.x_max));
    p.y = static_cast<float>(rng.uniform(range.y_min, range.y_max));
    p.z = static_cast<float>(rng.uniform(range.z_min, range.z_min + 0.2));
    p.r = static_cast<float>(rng.uniform(0.0, 1.0));
    scene.cloud.points.push_back(p);
  }
  compute_membership(scene);
  return scene;
}

Trainer::Trainer(const TrainConfig& tc, const VoxelConfig& vc, const NetworkSpec& spec)
    : cfg_(tc), voxel_(vc), cls_(class_config(tc.cls)) {
  if (spec.grid.h % 2 != 0 || spec.grid.w % 2 != 0) {
    throw ConfigError("grid H and W must be even for the half-resolution head");
  }
  net_.init(spec);
  grid_ = make_anchor_grid(cls_, vc.range, spec.grid.h / 2, spec.grid.w / 2);
}

std::int64_t Trainer::planned_steps(std::size_t num_scenes) const {
  if (cfg_.steps > 0) {
    return cfg_.steps;
  }
  const std::int64_t n = static_cast<std::int64_t>(num_scenes);
  const std::int64_t per_epoch = (n + cfg_.batch_size - 1) / cfg_.batch_size;
  return (cfg_.epochs_main + cfg_.epochs_tail) * per_epoch;
}

double Trainer::learning_rate(std::int64_t step, std::int64_t total_steps) const {
  std::int64_t sw = cfg_.lr_switch_step;
  if (sw < 0) {
    sw = total_steps * cfg_.epochs_main / (cfg_.epochs_main + cfg_.epochs_tail);
  }
  return step < sw ? cfg_.lr0 : cfg_.lr1;
}

std::optional<LossResult<float>> Trainer::process_sample(const Scene& scene,
                                                         std::uint64_t augment_seed,
                                                         std::uint64_t voxel_seed, bool backward,
                                                         std::int64_t* reverted) {
  Scene s = scene;
  DetRng rng(augment_seed);
  if (cfg_.aug.enable_perturb) {
    const std::int64_t r = perturb_boxes(s, rng);
    if (reverted != nullptr) {
      *reverted += r;
    }
  }
  if (cfg_.aug.enable_scale) {
    global_scale(s, rng);
  }
  if (cfg_.aug.enable_rotate) {
    global_rotate(s, rng);
  }

  s.cloud = crop_to_range(s.cloud, voxel_.range);
  // Boxes whose center leaves the range stop being targets for this sample.
  std::vector<Box3D> boxes;
  for (const Box3D& b : s.boxes) {
    if (b.x >= voxel_.range.x_min && b.x < voxel_.range.x_max && b.y >= voxel_.range.y_min &&
        b.y < voxel_.range.y_max && b.z >= voxel_.range.z_min && b.z < voxel_.range.z_max) {
      boxes.push_back(b);
    }
  }
  if (boxes.empty() || s.cloud.empty()) {
    return std::nullopt;
  }

  VoxelConfig vc = voxel_;
  vc.rng_seed = voxel_seed;
  VoxelBuffers buffers = build_buffers(s.cloud, vc);
  if (buffers.num_voxels == 0) {
    return std::nullopt;
  }
  augment_with_centroid(buffers);

  auto out = net_.forward(buffers, /*train=*/true);
  const MatchResult match = match_anchors(grid_, boxes, cls_);
  if (match.num_pos == 0) {
    return std::nullopt;
  }
  LossResult<float> loss = total_loss<float>(out.score, out.reg, match,
                                             net_.spec.rpn.softmax_score);
  if (backward) {
    net_.backward(loss.grad_score, loss.grad_reg);
  }
  return loss;
}

void sgd_apply(std::vector<NamedParam<float>>& params, std::vector<Tensor>& velocity, double lr,
               double momentum, double scale) {
  const float s = static_cast<float>(scale);
  std::size_t vi = 0;
  for (auto& p : params) {
    if (!p.learnable) {
      continue;
    }
    Tensor& t = *p.value;
    if (t.grad.empty()) {
      continue;
    }
    if (momentum > 0) {
      Tensor& v = velocity[vi++];
      for (std::size_t i = 0; i < t.data.size(); ++i) {
        v.data[i] = static_cast<float>(momentum) * v.data[i] + t.grad[i] * s;
        t.data[i] -= static_cast<float>(lr) * v.data[i];
      }
    } else {
      for (std::size_t i = 0; i < t.data.size(); ++i) {
        t.data[i] -= static_cast<float>(lr) * t.grad[i] * s;
      }
    }
  }
}

void Trainer::apply_update(double lr, std::int64_t contributing) {
  auto params = net_.params();
  if (cfg_.momentum > 0 && velocity_.empty()) {
    for (const auto& p : params) {
      if (p.learnable) {
        velocity_.push_back(Tensor(p.value->shape));
      }
    }
  }
  sgd_apply(params, velocity_, lr, cfg_.momentum, 1.0 / static_cast<double>(contributing));
}

TrainResult Trainer::run(const std::vector<Scene>& scenes, std::int64_t num_steps,
                         std::ostream* csv, const std::string& checkpoint_dir) {
  if (scenes.empty()) {
    throw ConfigError("training needs at least one scene");
  }
  TrainResult result;
  const std::int64_t total = planned_steps(scenes.size());
  for (std::int64_t it = 0; it < num_steps; ++it) {
    net_.zero_grads();
    std::int64_t contributing = 0;
    double sum_loss = 0, sum_pos = 0, sum_neg = 0, sum_reg = 0;
    for (std::int64_t slot = 0; slot < cfg_.batch_size; ++slot) {
      const std::size_t idx = static_cast<std::size_t>(
          (step_ * cfg_.batch_size + slot) % static_cast<std::int64_t>(scenes.size()));
      const std::uint64_t aseed = derive_seed(cfg_.seed, static_cast<std::uint64_t>(step_),
                                              static_cast<std::uint64_t>(slot * 2));
      const std::uint64_t vseed = derive_seed(cfg_.seed, static_cast<std::uint64_t>(step_),
                                              static_cast<std::uint64_t>(slot * 2 + 1));
      auto loss = process_sample(scenes[idx], aseed, vseed, /*backward=*/true,
                                 &result.reverted_boxes);
      if (!loss.has_value()) {
        ++result.skipped_no_positive;
        continue;
      }
      ++contributing;
      sum_loss += loss->total;
      sum_pos += loss->cls_pos;
      sum_neg += loss->cls_neg;
      sum_reg += loss->reg;
    }
    if (contributing > 0) {
      const double mean_loss = sum_loss / static_cast<double>(contributing);
      if (!std::isfinite(mean_loss)) {
        throw InvariantError("training diverged: non-finite loss at step " +
                             std::to_string(step_));
      }
      apply_update(learning_rate(step_, total), contributing);
      StepStats stats;
      stats.step = step_;
      stats.loss = mean_loss;
      stats.cls_pos = sum_pos / static_cast<double>(contributing);
      stats.cls_neg = sum_neg / static_cast<double>(contributing);
      stats.reg = sum_reg / static_cast<double>(contributing);
      result.curve.push_back(stats);
      if (csv != nullptr) {
        char row[192];
        std::snprintf(row, sizeof(row), "%lld,%.9e,%.9e,%.9e,%.9e\n",
                      static_cast<long long>(stats.step), stats.loss, stats.cls_pos,
                      stats.cls_neg, stats.reg);
        (*csv) << row;
      }
    }
    ++step_;
    ++result.steps_run;
    if (!checkpoint_dir.empty() && cfg_.checkpoint_every > 0 &&
        step_ % cfg_.checkpoint_every == 0) {
      save_checkpoint_file((std::filesystem::path(checkpoint_dir) /
                            ("checkpoint_" + std::to_string(step_) + ".bin"))
                               .string());
    }
  }
  if (!checkpoint_dir.empty()) {
    save_checkpoint_file(
        (std::filesystem::path(checkpoint_dir) / "checkpoint_final.bin").string());
  }
  return result;
}

void Trainer::save_checkpoint_file(const std::string& path) const {
  auto& self = const_cast<Trainer&>(*this);
  auto params = self.net_.params();
  auto entries = checkpoint_entries(params);
  Tensor step_tensor({1});
  step_tensor.data[0] = static_cast<float>(step_);
  entries.emplace_back("trainer.step", &step_tensor);
  std::vector<Tensor> vel_copy = velocity_;
  std::size_t vi = 0;
  if (cfg_.momentum > 0 && !vel_copy.empty()) {
    for (const auto& p : params) {
      if (p.learnable) {
        entries.emplace_back("momentum." + p.name, &vel_copy[vi++]);
      }
    }
  }
  save_checkpoint(path, entries);
}

void Trainer::load_checkpoint_file(const std::string& path) {
  const auto loaded = load_checkpoint(path);
  auto params = net_.params();
  apply_checkpoint(loaded, params, /*allow_extra=*/true);
  const auto it = loaded.find("trainer.step");
  if (it != loaded.end()) {
    step_ = static_cast<std::int64_t>(it->second.data.at(0));
  }
  if (cfg_.momentum > 0) {
    velocity_.clear();
    for (const auto& p : params) {
      if (!p.learnable) {
        continue;
      }
      Tensor v(p.value->shape);
      const auto vit = loaded.find("momentum." + p.name);
      if (vit != loaded.end()) {
        v = vit->second;
      }
      velocity_.push_back(std::move(v));
    }
  }
}

}  // namespace voxelpipe
