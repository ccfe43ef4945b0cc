#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "voxelpipe/augment.hpp"
#include "voxelpipe/config.hpp"
#include "voxelpipe/network.hpp"
#include "voxelpipe/targets.hpp"
#include "voxelpipe/voxel.hpp"

namespace voxelpipe {

struct TrainConfig {
  std::string cls = "Car";
  double lr0 = 0.01;
  double lr1 = 0.001;
  std::int64_t epochs_main = 150;
  std::int64_t epochs_tail = 10;
  std::int64_t batch_size = 16;
  std::int64_t steps = -1;           // > 0 overrides the epoch-derived step count
  std::int64_t lr_switch_step = -1;  // < 0 derives from the epoch split
  double momentum = 0.0;
  std::uint64_t seed = 1;
  std::int64_t checkpoint_every = 0;  // 0 checkpoints only at the end
  AugmentConfig aug;
};

TrainConfig train_config_from_config(const Config& cfg);

struct StepStats {
  std::int64_t step = 0;
  double loss = 0;
  double cls_pos = 0;
  double cls_neg = 0;
  double reg = 0;
};

struct TrainResult {
  std::vector<StepStats> curve;
  std::int64_t steps_run = 0;
  std::int64_t skipped_no_positive = 0;  // samples without a positive anchor
  std::int64_t reverted_boxes = 0;       // perturbation collision reverts
};

// Synthetic desk-scale sample: 1-4 non-colliding boxes near the class anchor
// size, 50-300 surface points each (all inside the box by construction),
// plus ground clutter below the boxes. Fully determined by the rng state.
Scene make_synthetic_scene(Rng& rng, const ClassConfig& cc, const Range3& range);

// One (momentum) SGD step over the learnable parameters. Gradients are
// scaled by `scale` (the 1/batch factor); `velocity` must either be empty
// (plain SGD) or hold one tensor per learnable parameter.
void sgd_apply(std::vector<NamedParam<float>>& params, std::vector<Tensor>& velocity, double lr,
               double momentum, double scale);

// SGD training over a fixed scene list. Each step draws batch_size samples
// by cycling the list, runs augment -> crop -> voxelize -> forward -> loss ->
// backward per sample with seeds derived from (seed, step, slot), averages
// the accumulated gradients, and applies the update.
class Trainer {
 public:
  Trainer(const TrainConfig& tc, const VoxelConfig& vc, const NetworkSpec& spec);

  // Appends one CSV row per contributing step to csv (header written by the
  // caller). Throws InvariantError when the loss turns non-finite.
  TrainResult run(const std::vector<Scene>& scenes, std::int64_t num_steps, std::ostream* csv,
                  const std::string& checkpoint_dir = "");

  // Full step budget from the config: steps override, or epochs over scenes.
  std::int64_t planned_steps(std::size_t num_scenes) const;
  double learning_rate(std::int64_t step, std::int64_t total_steps) const;

  void save_checkpoint_file(const std::string& path) const;
  void load_checkpoint_file(const std::string& path);

  Network<float>& network() { return net_; }
  const AnchorGrid& anchor_grid() const { return grid_; }
  const ClassConfig& class_cfg() const { return cls_; }
  const VoxelConfig& voxel_cfg() const { return voxel_; }
  std::int64_t step() const { return step_; }

  // One forward/match/loss pass (train-mode stats); grads accumulate when
  // backward is set. Returns nothing when the sample has no positive anchor.
  std::optional<LossResult<float>> process_sample(const Scene& scene, std::uint64_t augment_seed,
                                                  std::uint64_t voxel_seed, bool backward,
                                                  std::int64_t* reverted = nullptr);

 private:
  void apply_update(double lr, std::int64_t contributing);

  TrainConfig cfg_;
  VoxelConfig voxel_;
  ClassConfig cls_;
  Network<float> net_;
  AnchorGrid grid_;
  std::vector<Tensor> velocity_;
  std::int64_t step_ = 0;
};

}  // namespace voxelpipe
