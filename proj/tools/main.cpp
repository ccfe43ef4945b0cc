#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "voxelpipe/augment.hpp"
#include "voxelpipe/checkpoint.hpp"
#include "voxelpipe/errors.hpp"
#include "voxelpipe/io_kitti.hpp"
#include "voxelpipe/manifest.hpp"
#include "voxelpipe/network.hpp"
#include "voxelpipe/parallel.hpp"
#include "voxelpipe/postprocess.hpp"
#include "voxelpipe/selfcheck.hpp"
#include "voxelpipe/trainer.hpp"
#include "voxelpipe/voxel.hpp"

namespace fs = std::filesystem;
using namespace voxelpipe;

namespace {

// VOXELPIPE_SEED wins over any seed key in the config file.
void apply_env_seed(Config& cfg) {
  const char* env = std::getenv("VOXELPIPE_SEED");
  if (env == nullptr || *env == '\0') {
    return;
  }
  char* end = nullptr;
  errno = 0;
  (void)std::strtoull(env, &end, 10);
  if (errno != 0 || end == env || *end != '\0') {
    throw ConfigError(std::string("VOXELPIPE_SEED is not a valid integer: ") + env);
  }
  cfg.set("seed", env);
  cfg.set("train.seed", env);
}

// Files hash as git blobs; directories hash their sorted entry listing.
void hash_path(RunManifest& manifest, const std::string& path) {
  if (fs::is_directory(path)) {
    std::vector<std::string> names;
    for (const auto& entry : fs::directory_iterator(path)) {
      names.push_back(entry.path().filename().string());
    }
    std::sort(names.begin(), names.end());
    std::string listing;
    for (const auto& n : names) {
      listing += n;
      listing += '\n';
    }
    manifest.input_hashes[path + "/"] = git_blob_sha1(listing);
  } else {
    manifest.hash_input(path);
  }
}

RunManifest start_manifest(const std::string& command, const std::vector<std::string>& args,
                           const Config& cfg, int threads) {
  RunManifest m;
  m.command = command;
  m.arguments = args;
  m.config = cfg;
  m.seed = static_cast<std::uint64_t>(cfg.get_int("seed", 0));
  m.threads = threads;
  return m;
}

std::vector<std::string> collect_args(int argc, char** argv) {
  return std::vector<std::string>(argv, argv + argc);
}

std::vector<fs::path> sorted_files(const fs::path& dir, const std::string& ext) {
  std::vector<fs::path> files;
  if (!fs::is_directory(dir)) {
    throw IoError("not a directory: " + dir.string());
  }
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.path().extension() == ext) {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  return files;
}

struct CommonOpts {
  std::string config_path;
  std::string manifest_path;
  int threads = 0;
};

Config load_config(const CommonOpts& opts) {
  Config cfg =
      opts.config_path.empty() ? Config() : Config::from_file(opts.config_path);
  apply_env_seed(cfg);
  set_max_threads(opts.threads);
  return cfg;
}

// ---------------------------------------------------------------------------
// voxelize

int run_voxelize(const CommonOpts& common, const std::string& input,
                 const std::string& output, const std::vector<std::string>& args) {
  Config cfg = load_config(common);
  RunManifest manifest = start_manifest("voxelize", args, cfg, max_threads());
  if (!common.config_path.empty()) {
    hash_path(manifest, common.config_path);
  }
  hash_path(manifest, input);

  const VoxelConfig vc = voxel_config_from_config(cfg);
  double t0 = now_ms();
  const CloudLoadResult loaded = load_pointcloud(input);
  manifest.add_timing("load", now_ms() - t0);

  t0 = now_ms();
  const PointCloud cropped = crop_to_range(loaded.cloud, vc.range);
  VoxelBuffers buffers = build_buffers(cropped, vc);
  augment_with_centroid(buffers);
  manifest.add_timing("buffer build", now_ms() - t0);

  t0 = now_ms();
  dump_buffers(buffers, output);
  manifest.add_timing("write", now_ms() - t0);

  std::printf("points total=%zu in_range=%zu kept=%zu dropped_full=%zu dropped_capacity=%zu\n",
              loaded.cloud.size(), cropped.size(), buffers.stats.kept_points,
              buffers.stats.dropped_full_voxel, buffers.stats.dropped_capacity);
  std::printf("voxels occupied=%lld distinct=%zu grid=%dx%dx%d\n",
              static_cast<long long>(buffers.num_voxels), buffers.stats.distinct_voxels,
              buffers.dims.d, buffers.dims.h, buffers.dims.w);
  if (loaded.rejected_records() > 0) {
    std::printf("input quirks: dropped_nonfinite=%zu clamped_reflectance=%zu truncated_tail=%s\n",
                loaded.dropped_nonfinite, loaded.clamped_reflectance,
                loaded.truncated_tail ? "yes" : "no");
  }
  const std::string mpath =
      common.manifest_path.empty() ? output + ".manifest.json" : common.manifest_path;
  manifest.write(mpath);
  return 0;
}

// ---------------------------------------------------------------------------
// train

std::vector<Scene> load_training_scenes(const std::string& data, const TrainConfig& tc,
                                        RunManifest& manifest) {
  std::vector<Scene> scenes;
  if (data.rfind("synthetic:", 0) == 0) {
    const int n = std::stoi(data.substr(10));
    if (n < 1) {
      throw ConfigError("synthetic scene count must be positive");
    }
    const ClassConfig cc = class_config(tc.cls);
    // Range comes from the voxel config of the caller; the trainer crops, so
    // generate against the configured range captured in the manifest config.
    const VoxelConfig vc = voxel_config_from_config(manifest.config);
    for (int i = 0; i < n; ++i) {
      DetRng rng(derive_seed(tc.seed ^ 0x53594e54ULL, 0, static_cast<std::uint64_t>(i)));
      scenes.push_back(make_synthetic_scene(rng, cc, vc.range));
    }
    return scenes;
  }

  const fs::path root(data);
  hash_path(manifest, data);
  const auto bins = sorted_files(root / "velodyne", ".bin");
  if (bins.empty()) {
    throw IoError("no .bin files under " + (root / "velodyne").string());
  }
  for (const auto& bin : bins) {
    const std::string id = bin.stem().string();
    const fs::path label = root / "label_2" / (id + ".txt");
    const fs::path calib_path = root / "calib" / (id + ".txt");
    Calibration calib = fs::exists(calib_path) ? load_calib(calib_path.string())
                                               : Calibration::identity();
    Scene scene;
    scene.cloud = load_pointcloud(bin.string()).cloud;
    if (fs::exists(label)) {
      const LabelLoadResult labels = load_labels(label.string(), calib);
      for (const auto& obj : labels.objects) {
        if (obj.cls == tc.cls) {
          scene.boxes.push_back(obj.box);
        }
      }
    }
    compute_membership(scene);
    scenes.push_back(std::move(scene));
  }
  return scenes;
}

int run_train(const CommonOpts& common, const std::string& data, const std::string& out_dir,
              const std::string& resume, const std::vector<std::string>& args) {
  Config cfg = load_config(common);
  RunManifest manifest = start_manifest("train", args, cfg, max_threads());
  if (!common.config_path.empty()) {
    hash_path(manifest, common.config_path);
  }

  const TrainConfig tc = train_config_from_config(cfg);
  const VoxelConfig vc = voxel_config_from_config(cfg);
  const NetworkSpec spec = network_spec_from_config(cfg, grid_dims(vc));

  fs::create_directories(out_dir);
  double t0 = now_ms();
  std::vector<Scene> scenes = load_training_scenes(data, tc, manifest);
  manifest.add_timing("load data", now_ms() - t0);

  Trainer trainer(tc, vc, spec);
  if (!resume.empty()) {
    hash_path(manifest, resume);
    trainer.load_checkpoint_file(resume);
  }

  const std::int64_t total = trainer.planned_steps(scenes.size());
  const std::int64_t remaining = total - trainer.step();
  if (remaining <= 0) {
    throw ConfigError("checkpoint already covers the configured step budget");
  }

  const fs::path csv_path = fs::path(out_dir) / "loss.csv";
  std::ofstream csv(csv_path, trainer.step() > 0 ? std::ios::app : std::ios::trunc);
  if (!csv) {
    throw IoError("cannot open loss curve for writing: " + csv_path.string());
  }
  if (trainer.step() == 0) {
    csv << "step,loss,cls_pos,cls_neg,reg\n";
  }

  t0 = now_ms();
  const TrainResult result = trainer.run(scenes, remaining, &csv, out_dir);
  manifest.add_timing("train", now_ms() - t0);
  csv.flush();
  if (!csv) {
    throw IoError("failed writing loss curve: " + csv_path.string());
  }

  if (!result.curve.empty()) {
    std::printf("steps=%lld first_loss=%.6f last_loss=%.6f skipped_samples=%lld\n",
                static_cast<long long>(result.steps_run), result.curve.front().loss,
                result.curve.back().loss, static_cast<long long>(result.skipped_no_positive));
  } else {
    std::printf("steps=%lld (no contributing samples)\n",
                static_cast<long long>(result.steps_run));
  }
  const std::string mpath = common.manifest_path.empty()
                                ? (fs::path(out_dir) / "manifest.json").string()
                                : common.manifest_path;
  manifest.write(mpath);
  return 0;
}

// ---------------------------------------------------------------------------
// infer

int run_infer(const CommonOpts& common, const std::string& checkpoint,
              const std::string& input, const std::string& out_dir,
              const std::string& calib_path, const std::vector<std::string>& args) {
  Config cfg = load_config(common);
  RunManifest manifest = start_manifest("infer", args, cfg, max_threads());
  if (!common.config_path.empty()) {
    hash_path(manifest, common.config_path);
  }
  hash_path(manifest, checkpoint);
  hash_path(manifest, input);

  const VoxelConfig vc = voxel_config_from_config(cfg);
  const NetworkSpec spec = network_spec_from_config(cfg, grid_dims(vc));
  const ClassConfig cc = class_config(cfg.get_string("train.class", "Car"));
  const double score_thresh = cfg.get_double("infer.score_thresh", 0.5);
  const double nms_iou = cfg.get_double("infer.nms_iou", 0.1);

  Network<float> net;
  net.init(spec);
  apply_checkpoint(load_checkpoint(checkpoint), net.params(), /*allow_extra=*/true);
  const AnchorGrid grid = make_anchor_grid(cc, vc.range, spec.grid.h / 2, spec.grid.w / 2);

  std::vector<fs::path> inputs;
  if (fs::is_directory(input)) {
    inputs = sorted_files(input, ".bin");
  } else {
    inputs.push_back(input);
  }
  fs::create_directories(out_dir);

  Calibration calib = Calibration::identity();
  const bool calib_is_dir = !calib_path.empty() && fs::is_directory(calib_path);
  if (!calib_path.empty() && !calib_is_dir) {
    calib = load_calib(calib_path);
  }

  double total_ms = 0;
  std::size_t total_dets = 0;
  for (const auto& bin : inputs) {
    const std::string id = bin.stem().string();
    Calibration frame_calib = calib;
    if (calib_is_dir) {
      const fs::path per_frame = fs::path(calib_path) / (id + ".txt");
      frame_calib =
          fs::exists(per_frame) ? load_calib(per_frame.string()) : Calibration::identity();
    }
    const double t0 = now_ms();
    PointCloud cloud = crop_to_range(load_pointcloud(bin.string()).cloud, vc.range);
    VoxelBuffers buffers = build_buffers(cloud, vc);
    augment_with_centroid(buffers);
    auto out = net.forward(buffers, /*train=*/false);
    auto dets = decode_detections(out.score, out.reg, grid, score_thresh,
                                  spec.rpn.softmax_score);
    dets = nms_bev(dets, nms_iou);
    total_ms += now_ms() - t0;
    total_dets += dets.size();
    write_kitti_results((fs::path(out_dir) / (id + ".txt")).string(), dets, cc.name,
                        frame_calib);
  }
  manifest.add_timing("infer", total_ms);
  std::printf("frames=%zu detections=%zu mean_ms=%.2f\n", inputs.size(), total_dets,
              inputs.empty() ? 0.0 : total_ms / static_cast<double>(inputs.size()));
  const std::string mpath = common.manifest_path.empty()
                                ? (fs::path(out_dir) / "manifest.json").string()
                                : common.manifest_path;
  manifest.write(mpath);
  return 0;
}

// ---------------------------------------------------------------------------
// eval

int run_eval(const CommonOpts& common, const std::string& results_dir,
             const std::string& labels_dir, const std::string& calib_dir,
             const std::string& clouds_dir, const std::string& cls, const std::string& mode,
             bool forty, const std::string& ply_dir, const std::vector<std::string>& args) {
  Config cfg = load_config(common);
  RunManifest manifest = start_manifest("eval", args, cfg, max_threads());
  hash_path(manifest, results_dir);
  hash_path(manifest, labels_dir);

  const ClassConfig cc = class_config(cls);
  EvalConfig ec;
  ec.iou_threshold = cc.eval_iou;
  ec.use_3d = mode == "3d";
  ec.forty_point = forty;

  const auto label_files = sorted_files(labels_dir, ".txt");
  if (label_files.empty()) {
    throw IoError("no label files under " + labels_dir);
  }

  std::vector<std::vector<Detection>> dets;
  std::vector<std::vector<GtObject>> gts;
  const double t0 = now_ms();
  for (const auto& label_path : label_files) {
    const std::string id = label_path.stem().string();
    Calibration calib = Calibration::identity();
    if (!calib_dir.empty()) {
      const fs::path cp = fs::path(calib_dir) / (id + ".txt");
      if (fs::exists(cp)) {
        calib = load_calib(cp.string());
      }
    }
    const LabelLoadResult labels = load_labels(label_path.string(), calib);
    std::vector<GtObject> frame_gts;
    for (const auto& obj : labels.objects) {
      if (obj.cls != cls) {
        continue;
      }
      GtObject gt;
      gt.box = obj.box;
      gt.bbox_height = obj.bbox[3] - obj.bbox[1];
      gt.occlusion = obj.occlusion;
      gt.truncation = obj.truncation;
      frame_gts.push_back(gt);
    }
    for (const auto& obj : labels.dont_care) {
      GtObject gt;
      gt.box = obj.box;
      gt.dont_care = true;
      frame_gts.push_back(gt);
    }
    gts.push_back(std::move(frame_gts));

    std::vector<Detection> frame_dets;
    const fs::path result_path = fs::path(results_dir) / (id + ".txt");
    if (fs::exists(result_path)) {
      const LabelLoadResult result = load_labels(result_path.string(), calib,
                                                 /*with_score=*/true);
      for (const auto& obj : result.objects) {
        if (obj.cls != cls) {
          continue;
        }
        Detection det;
        det.box = obj.box;
        det.score = obj.score;
        frame_dets.push_back(det);
      }
    }
    dets.push_back(std::move(frame_dets));

    if (!ply_dir.empty()) {
      fs::create_directories(ply_dir);
      PointCloud cloud;
      if (!clouds_dir.empty()) {
        const fs::path bin = fs::path(clouds_dir) / (id + ".bin");
        if (fs::exists(bin)) {
          cloud = load_pointcloud(bin.string()).cloud;
        }
      }
      std::vector<Box3D> gt_boxes, det_boxes;
      for (const auto& gt : gts.back()) {
        if (!gt.dont_care) {
          gt_boxes.push_back(gt.box);
        }
      }
      for (const auto& det : dets.back()) {
        det_boxes.push_back(det.box);
      }
      export_ply((fs::path(ply_dir) / (id + ".ply")).string(), cloud, gt_boxes, det_boxes);
    }
  }

  const ApResult ap = average_precision(dets, gts, ec);
  manifest.add_timing("eval", now_ms() - t0);

  std::printf("class=%s iou=%.2f mode=%s interpolation=%d-point\n", cls.c_str(),
              ec.iou_threshold, ec.use_3d ? "3d" : "bev", ec.forty_point ? 40 : 11);
  static const char* kNames[3] = {"easy", "moderate", "hard"};
  for (int d = 0; d < 3; ++d) {
    std::printf("%-9s AP=%7.4f  gts=%lld tp=%lld fp=%lld\n", kNames[d], ap.ap[d],
                static_cast<long long>(ap.num_gt[d]), static_cast<long long>(ap.num_tp[d]),
                static_cast<long long>(ap.num_fp[d]));
  }
  const std::string mpath =
      common.manifest_path.empty() ? "eval_manifest.json" : common.manifest_path;
  manifest.write(mpath);
  return 0;
}

// ---------------------------------------------------------------------------
// bench

struct StageTimes {
  std::vector<double> ms;

  void print(const char* name) const {
    std::vector<double> sorted = ms;
    std::sort(sorted.begin(), sorted.end());
    const double mean =
        std::accumulate(sorted.begin(), sorted.end(), 0.0) / static_cast<double>(sorted.size());
    const double p50 = sorted[sorted.size() / 2];
    const double p95 = sorted[static_cast<std::size_t>(0.95 * static_cast<double>(sorted.size() - 1))];
    std::printf("%-12s mean=%8.3f ms  p50=%8.3f ms  p95=%8.3f ms\n", name, mean, p50, p95);
  }
};

int run_bench(const CommonOpts& common, int repeat, std::int64_t points,
              const std::vector<std::string>& args) {
  Config cfg = load_config(common);
  RunManifest manifest = start_manifest("bench", args, cfg, max_threads());
  if (!common.config_path.empty()) {
    hash_path(manifest, common.config_path);
  }
  if (repeat < 1) {
    throw ConfigError("--repeat must be at least 1");
  }

  const VoxelConfig vc = voxel_config_from_config(cfg);
  const NetworkSpec spec = network_spec_from_config(cfg, grid_dims(vc));
  Network<float> net;
  net.init(spec);

  DetRng rng(static_cast<std::uint64_t>(cfg.get_int("seed", 1)));
  PointCloud cloud;
  cloud.points.reserve(static_cast<std::size_t>(points));
  for (std::int64_t i = 0; i < points; ++i) {
    Point4 p;
    p.x = static_cast<float>(rng.uniform(vc.range.x_min, vc.range.x_max));
    p.y = static_cast<float>(rng.uniform(vc.range.y_min, vc.range.y_max));
    p.z = static_cast<float>(rng.uniform(vc.range.z_min, vc.range.z_max));
    p.r = static_cast<float>(rng.uniform(0.0, 1.0));
    cloud.points.push_back(p);
  }

  StageTimes t_buffer, t_vfe, t_middle, t_rpn;
  for (int r = 0; r < repeat; ++r) {
    double t0 = now_ms();
    VoxelBuffers buffers = build_buffers(cloud, vc);
    augment_with_centroid(buffers);
    t_buffer.ms.push_back(now_ms() - t0);

    const std::int64_t nv = buffers.num_voxels;
    const std::int64_t t = buffers.t_max;
    t0 = now_ms();
    Tensor x({nv, t, 7});
    std::copy(buffers.features.data.begin(), buffers.features.data.begin() + nv * t * 7,
              x.data.begin());
    std::vector<std::int32_t> counts(buffers.counts.begin(), buffers.counts.begin() + nv);
    Tensor feat = net.vfe.forward(x, counts, /*train=*/false);
    t_vfe.ms.push_back(now_ms() - t0);

    t0 = now_ms();
    std::vector<std::int32_t> coords(buffers.coords.begin(), buffers.coords.begin() + nv * 3);
    Tensor dense = scatter_to_dense(feat, coords, spec.grid);
    Tensor mid = net.middle.forward(dense, false);
    Tensor bev = reshape_to_bev(std::move(mid));
    t_middle.ms.push_back(now_ms() - t0);

    t0 = now_ms();
    auto heads = net.rpn.forward(bev, false);
    t_rpn.ms.push_back(now_ms() - t0);
    (void)heads;
  }

  std::printf("points=%lld voxels<=%d repeat=%d threads=%d\n", static_cast<long long>(points),
              vc.k_max, repeat, max_threads());
  t_buffer.print("buffer build");
  t_vfe.print("VFE");
  t_middle.print("middle");
  t_rpn.print("RPN");

  manifest.add_timing("bench total",
                      std::accumulate(t_buffer.ms.begin(), t_buffer.ms.end(), 0.0) +
                          std::accumulate(t_vfe.ms.begin(), t_vfe.ms.end(), 0.0) +
                          std::accumulate(t_middle.ms.begin(), t_middle.ms.end(), 0.0) +
                          std::accumulate(t_rpn.ms.begin(), t_rpn.ms.end(), 0.0));
  const std::string mpath =
      common.manifest_path.empty() ? "bench_manifest.json" : common.manifest_path;
  manifest.write(mpath);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LiDAR voxel detection pipeline"};
  app.require_subcommand(1);
  const auto args = collect_args(argc, argv);

  CommonOpts vox_common;
  std::string vox_input, vox_output;
  auto* vox = app.add_subcommand("voxelize", "Build voxel buffers from a point cloud");
  vox->add_option("--config", vox_common.config_path, "flat key=value config file")->required();
  vox->add_option("--input", vox_input, "point cloud .bin file")->required();
  vox->add_option("--output", vox_output, "buffer dump path")->required();
  vox->add_option("--manifest", vox_common.manifest_path, "manifest path");
  vox->add_option("--threads", vox_common.threads, "worker thread cap (0 = hardware)");

  CommonOpts train_common;
  std::string train_data, train_out, train_resume;
  auto* train = app.add_subcommand("train", "Train the detector");
  train->add_option("--config", train_common.config_path)->required();
  train->add_option("--data", train_data, "dataset dir or synthetic:<N>")->required();
  train->add_option("--out", train_out, "output directory")->required();
  train->add_option("--resume", train_resume, "checkpoint to resume from");
  train->add_option("--manifest", train_common.manifest_path);
  train->add_option("--threads", train_common.threads);

  CommonOpts infer_common;
  std::string infer_checkpoint, infer_input, infer_out, infer_calib;
  auto* infer = app.add_subcommand("infer", "Run detection on point clouds");
  infer->add_option("--config", infer_common.config_path)->required();
  infer->add_option("--checkpoint", infer_checkpoint)->required();
  infer->add_option("--input", infer_input, ".bin file or directory")->required();
  infer->add_option("--out", infer_out, "result directory")->required();
  infer->add_option("--calib", infer_calib, "calibration file or directory");
  infer->add_option("--manifest", infer_common.manifest_path);
  infer->add_option("--threads", infer_common.threads);

  CommonOpts eval_common;
  std::string eval_results, eval_labels, eval_calib, eval_clouds, eval_cls = "Car";
  std::string eval_mode = "bev", eval_ply;
  bool eval_forty = false;
  auto* eval = app.add_subcommand("eval", "Average precision against labels");
  eval->add_option("--results", eval_results, "detection result directory")->required();
  eval->add_option("--labels", eval_labels, "ground-truth label directory")->required();
  eval->add_option("--calib", eval_calib, "calibration directory");
  eval->add_option("--clouds", eval_clouds, "point cloud directory for PLY export");
  eval->add_option("--class", eval_cls, "Car, Pedestrian, or Cyclist");
  eval->add_option("--mode", eval_mode)->check(CLI::IsMember({"bev", "3d"}));
  eval->add_flag("--forty-point", eval_forty, "40-point interpolation");
  eval->add_option("--export-ply", eval_ply, "write per-frame PLY files here");
  eval->add_option("--manifest", eval_common.manifest_path);
  eval->add_option("--threads", eval_common.threads);

  std::string check_filter;
  auto* check = app.add_subcommand("selfcheck", "Run the built-in invariant suites");
  check->add_option("--filter", check_filter, "substring filter on suite names");

  CommonOpts bench_common;
  int bench_repeat = 10;
  std::int64_t bench_points = 20000;
  auto* bench = app.add_subcommand("bench", "Per-stage timing table");
  bench->add_option("--config", bench_common.config_path)->required();
  bench->add_option("--repeat", bench_repeat, "repetitions per stage");
  bench->add_option("--points", bench_points, "synthetic cloud size");
  bench->add_option("--manifest", bench_common.manifest_path);
  bench->add_option("--threads", bench_common.threads);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*vox) {
      return run_voxelize(vox_common, vox_input, vox_output, args);
    }
    if (*train) {
      return run_train(train_common, train_data, train_out, train_resume, args);
    }
    if (*infer) {
      return run_infer(infer_common, infer_checkpoint, infer_input, infer_out, infer_calib,
                       args);
    }
    if (*eval) {
      return run_eval(eval_common, eval_results, eval_labels, eval_calib, eval_clouds,
                      eval_cls, eval_mode, eval_forty, eval_ply, args);
    }
    if (*check) {
      return selfcheck_report(check_filter, std::cout);
    }
    if (*bench) {
      return run_bench(bench_common, bench_repeat, bench_points, args);
    }
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const IoError& e) {
    std::fprintf(stderr, "io error: %s\n", e.what());
    return 3;
  } catch (const InvariantError& e) {
    std::fprintf(stderr, "invariant violated: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 2;
}
