#include "voxelpipe/network.hpp"

#include <sstream>

#include "voxelpipe/errors.hpp"
#include "voxelpipe/kernels.hpp"

namespace voxelpipe {

namespace {

std::vector<int> parse_int_list(const std::string& text, const std::string& key) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stoi(item));
    } catch (const std::exception&) {
      throw ConfigError("key '" + key + "' holds a malformed integer list: " + text);
    }
  }
  if (out.empty()) {
    throw ConfigError("key '" + key + "' holds an empty list");
  }
  return out;
}

}  // namespace

std::int64_t middle_depth_out(std::int64_t d) {
  const std::int64_t d1 = conv_out_extent(d, 3, 2, 1);
  const std::int64_t d2 = conv_out_extent(d1, 3, 1, 0);
  return conv_out_extent(d2, 3, 2, 1);
}

NetworkSpec network_spec_from_config(const Config& cfg, GridDims grid) {
  NetworkSpec spec;
  spec.grid = grid;
  if (cfg.has("vfe_channels")) {
    spec.vfe_channels = parse_int_list(cfg.get_string("vfe_channels"), "vfe_channels");
  }
  if (cfg.has("middle_channels")) {
    const auto list = parse_int_list(cfg.get_string("middle_channels"), "middle_channels");
    if (list.size() != 3) {
      throw ConfigError("middle_channels must name exactly three layers");
    }
    spec.middle_channels = {list[0], list[1], list[2]};
  }
  if (cfg.has("rpn_channels")) {
    const auto list = parse_int_list(cfg.get_string("rpn_channels"), "rpn_channels");
    if (list.size() != 3) {
      throw ConfigError("rpn_channels must name exactly three blocks");
    }
    spec.rpn.channels = {list[0], list[1], list[2]};
  }
  if (cfg.has("rpn_q")) {
    const auto list = parse_int_list(cfg.get_string("rpn_q"), "rpn_q");
    if (list.size() != 3) {
      throw ConfigError("rpn_q must name exactly three blocks");
    }
    spec.rpn.q = {list[0], list[1], list[2]};
  }
  if (cfg.has("rpn_lateral_channels")) {
    spec.rpn.lateral_channels = static_cast<int>(cfg.get_int("rpn_lateral_channels"));
  }
  if (cfg.has("rpn_block1_stride")) {
    const int stride = static_cast<int>(cfg.get_int("rpn_block1_stride"));
    if (stride != 1 && stride != 2) {
      throw ConfigError("rpn_block1_stride must be 1 or 2");
    }
    spec.rpn.block1_stride = stride;
  }
  if (cfg.has("score_mode")) {
    const std::string mode = cfg.get_string("score_mode");
    if (mode == "softmax") {
      spec.rpn.softmax_score = true;
    } else if (mode != "sigmoid") {
      throw ConfigError("score_mode must be 'sigmoid' or 'softmax'");
    }
  }
  if (cfg.has("score_bias_init")) {
    spec.rpn.score_bias_init = cfg.get_double("score_bias_init");
  }
  if (cfg.has("init_seed")) {
    spec.init_seed = static_cast<std::uint64_t>(cfg.get_int("init_seed"));
  }
  return spec;
}

VoxelConfig voxel_config_from_config(const Config& cfg) {
  VoxelConfig vc;
  vc.range.z_min = cfg.get_double("range_z_min");
  vc.range.z_max = cfg.get_double("range_z_max");
  vc.range.y_min = cfg.get_double("range_y_min");
  vc.range.y_max = cfg.get_double("range_y_max");
  vc.range.x_min = cfg.get_double("range_x_min");
  vc.range.x_max = cfg.get_double("range_x_max");
  vc.v_d = cfg.get_double("voxel_size_z");
  vc.v_h = cfg.get_double("voxel_size_y");
  vc.v_w = cfg.get_double("voxel_size_x");
  vc.t_max = static_cast<int>(cfg.get_int("points_per_voxel"));
  vc.k_max = static_cast<int>(cfg.get_int("max_voxels"));
  if (cfg.has("seed")) {
    vc.rng_seed = static_cast<std::uint64_t>(cfg.get_int("seed"));
  }
  grid_dims(vc);  // validate divisibility eagerly
  return vc;
}

}  // namespace voxelpipe
