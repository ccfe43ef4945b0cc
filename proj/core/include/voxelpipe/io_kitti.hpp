#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "voxelpipe/box.hpp"
#include "voxelpipe/cloud.hpp"

namespace voxelpipe {

// Rigid sensor calibration in the KITTI convention: LiDAR points map to the
// rectified camera frame via rect * velo_to_cam, then to pixels via proj.
struct Calibration {
  std::array<double, 12> velo_to_cam{1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0};  // 3x4 row-major
  std::array<double, 9> rect{1, 0, 0, 0, 1, 0, 0, 0, 1};                   // 3x3 row-major
  std::array<double, 12> proj{1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0};         // 3x4 row-major
  int image_width = 1242;
  int image_height = 375;

  static Calibration identity(int width, int height) {
    Calibration c;
    c.image_width = width;
    c.image_height = height;
    return c;
  }

  // LiDAR frame -> rectified camera frame.
  std::array<double, 3> lidar_to_rect(const std::array<double, 3>& p) const;
  // Rectified camera frame -> LiDAR frame. Throws ConfigError if rect is singular.
  std::array<double, 3> rect_to_lidar(const std::array<double, 3>& p) const;
  // Rect-frame point -> (pixel_x, pixel_y, depth).
  std::array<double, 3> project(const std::array<double, 3>& p_rect) const;
};

Calibration load_calib(const std::string& path);

struct CloudLoadResult {
  PointCloud cloud;
  std::size_t dropped_nonfinite = 0;
  std::size_t clamped_reflectance = 0;
  bool truncated_tail = false;  // trailing partial record, dropped and flagged

  std::size_t rejected_records() const { return dropped_nonfinite + (truncated_tail ? 1 : 0); }
};

// KITTI velodyne `.bin`: packed little-endian float32 quadruples (x, y, z, r).
CloudLoadResult load_pointcloud(const std::string& path);
void save_pointcloud(const PointCloud& cloud, const std::string& path);

// Keeps points with z in [z_min, z_max), y in [y_min, y_max), x in [x_min, x_max).
PointCloud crop_to_range(const PointCloud& cloud, const Range3& range);

// Keeps points whose projection lands inside the image with positive depth.
PointCloud filter_by_image_frustum(const PointCloud& cloud, const Calibration& calib);

// One KITTI label line; the box is expressed in the LiDAR frame after loading.
struct LabeledObject {
  Box3D box;
  std::string cls;
  double truncation = 0;
  int occlusion = 0;
  double alpha = 0;
  std::array<double, 4> bbox{0, 0, 0, 0};  // image-plane left, top, right, bottom
  double score = 0;                        // result files only
};

struct LabelLoadResult {
  std::vector<LabeledObject> objects;    // Car / Pedestrian / Cyclist
  std::vector<LabeledObject> dont_care;  // retained separately for evaluation
  std::size_t dropped_other_classes = 0;
};

// Parses KITTI label_2 text. Camera-frame bottom-center poses are converted
// to LiDAR-frame box centers (z_c = bottom_z + h/2). Throws IoError naming
// the offending line on malformed input. `with_score` expects a 16th field.
LabelLoadResult load_labels(const std::string& path, const Calibration& calib,
                            bool with_score = false);

// Inverse of the label transform, used when emitting KITTI result lines.
// Returns (location_xyz in rect frame, rotation_y).
std::array<double, 4> box_to_camera(const Box3D& box, const Calibration& calib);
Box3D box_from_camera(const std::array<double, 3>& location, double h, double w, double l,
                      double rotation_y, const Calibration& calib);

}  // namespace voxelpipe
