#pragma once

#include <cstddef>
#include <vector>

namespace voxelpipe {

// One LiDAR return: sensor-frame position in meters plus reflectance.
struct Point4 {
  float x = 0.f;
  float y = 0.f;
  float z = 0.f;
  float r = 0.f;
};

struct PointCloud {
  std::vector<Point4> points;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
};

// Axis ranges in meters, [min, max) on each axis.
struct Range3 {
  double z_min, z_max;
  double y_min, y_max;
  double x_min, x_max;
};

}  // namespace voxelpipe
