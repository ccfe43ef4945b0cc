#pragma once

#include <array>
#include <cmath>

namespace voxelpipe {

// 7-DoF oriented box: center, extents (l along heading, w across, h up),
// yaw about the Z axis.
struct Box3D {
  double x = 0, y = 0, z = 0;
  double l = 0, w = 0, h = 0;
  double theta = 0;
};

// Normalize an angle to [-pi, pi).
inline double normalize_angle(double a) {
  a = std::fmod(a + M_PI, 2.0 * M_PI);
  if (a < 0) a += 2.0 * M_PI;
  return a - M_PI;
}

// BEV footprint corners in XY, counter-clockwise for positive extents.
inline std::array<std::array<double, 2>, 4> footprint_corners(const Box3D& b) {
  const double c = std::cos(b.theta), s = std::sin(b.theta);
  const double hl = 0.5 * b.l, hw = 0.5 * b.w;
  const std::array<std::array<double, 2>, 4> local = {{{hl, hw}, {-hl, hw}, {-hl, -hw}, {hl, -hw}}};
  std::array<std::array<double, 2>, 4> out{};
  for (int i = 0; i < 4; ++i) {
    out[i][0] = b.x + c * local[i][0] - s * local[i][1];
    out[i][1] = b.y + s * local[i][0] + c * local[i][1];
  }
  return out;
}

// Point membership in the box's rotated frame, closed intervals on all axes.
inline bool point_in_box(double px, double py, double pz, const Box3D& b) {
  if (std::abs(pz - b.z) > 0.5 * b.h) return false;
  const double c = std::cos(-b.theta), s = std::sin(-b.theta);
  const double dx = px - b.x, dy = py - b.y;
  const double lx = c * dx - s * dy;
  const double ly = s * dx + c * dy;
  return std::abs(lx) <= 0.5 * b.l && std::abs(ly) <= 0.5 * b.w;
}

}  // namespace voxelpipe
