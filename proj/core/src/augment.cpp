#include "voxelpipe/augment.hpp"

#include <cmath>
#include <vector>

#include "voxelpipe/targets.hpp"

namespace voxelpipe {

void compute_membership(Scene& scene) {
  scene.membership.assign(scene.boxes.size(), {});
  for (std::size_t b = 0; b < scene.boxes.size(); ++b) {
    const Box3D& box = scene.boxes[b];
    for (std::size_t i = 0; i < scene.cloud.points.size(); ++i) {
      const Point4& p = scene.cloud.points[i];
      if (point_in_box(p.x, p.y, p.z, box)) {
        scene.membership[b].push_back(static_cast<std::int64_t>(i));
      }
    }
  }
}

AugmentConfig augment_config_from_config(const Config& cfg) {
  AugmentConfig out;
  out.enable_perturb = cfg.get_bool("aug.enable_perturb", true);
  out.enable_scale = cfg.get_bool("aug.enable_scale", true);
  out.enable_rotate = cfg.get_bool("aug.enable_rotate", true);
  return out;
}

namespace {

void rotate_xy(double angle, double cx, double cy, float* x, float* y) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  const double rx = static_cast<double>(*x) - cx;
  const double ry = static_cast<double>(*y) - cy;
  *x = static_cast<float>(cx + c * rx - s * ry);
  *y = static_cast<float>(cy + s * rx + c * ry);
}

bool collide_bev(const Box3D& a, const Box3D& b) { return bev_iou(a, b) > 0.0; }

}  // namespace

std::int64_t perturb_boxes(Scene& scene, Rng& rng) {
  compute_membership(scene);
  const std::size_t nb = scene.boxes.size();
  const std::vector<Box3D> original_boxes = scene.boxes;
  // Snapshot of every member point, per box, for reverts.
  std::vector<std::vector<Point4>> original_points(nb);
  for (std::size_t b = 0; b < nb; ++b) {
    original_points[b].reserve(scene.membership[b].size());
    for (const std::int64_t i : scene.membership[b]) {
      original_points[b].push_back(scene.cloud.points[i]);
    }
  }

  for (std::size_t b = 0; b < nb; ++b) {
    const double dtheta = rng.uniform(-M_PI / 10.0, M_PI / 10.0);
    const double dx = rng.normal(0.0, 1.0);
    const double dy = rng.normal(0.0, 1.0);
    const double dz = rng.normal(0.0, 1.0);
    Box3D& box = scene.boxes[b];
    const double cx = box.x;
    const double cy = box.y;
    for (const std::int64_t i : scene.membership[b]) {
      Point4& p = scene.cloud.points[i];
      rotate_xy(dtheta, cx, cy, &p.x, &p.y);
      p.x = static_cast<float>(p.x + dx);
      p.y = static_cast<float>(p.y + dy);
      p.z = static_cast<float>(p.z + dz);
    }
    box.theta += dtheta;
    box.x += dx;
    box.y += dy;
    box.z += dz;
  }

  std::vector<bool> reverted(nb, false);
  const auto revert = [&](std::size_t b) {
    if (reverted[b]) {
      return;
    }
    scene.boxes[b] = original_boxes[b];
    for (std::size_t k = 0; k < scene.membership[b].size(); ++k) {
      scene.cloud.points[scene.membership[b][k]] = original_points[b][k];
    }
    reverted[b] = true;
  };

  // Two rounds: offenders found after the perturbation revert, then one
  // re-test catches collisions the reverts themselves introduced.
  for (int round = 0; round < 2; ++round) {
    std::vector<bool> offender(nb, false);
    for (std::size_t i = 0; i + 1 < nb; ++i) {
      for (std::size_t j = i + 1; j < nb; ++j) {
        if (collide_bev(scene.boxes[i], scene.boxes[j])) {
          offender[i] = true;
          offender[j] = true;
        }
      }
    }
    bool any = false;
    for (std::size_t b = 0; b < nb; ++b) {
      if (offender[b] && !reverted[b]) {
        revert(b);
        any = true;
      }
    }
    if (!any) {
      break;
    }
  }

  compute_membership(scene);
  std::int64_t count = 0;
  for (std::size_t b = 0; b < nb; ++b) {
    count += reverted[b] ? 1 : 0;
  }
  return count;
}

void global_scale(Scene& scene, Rng& rng) {
  const double s = rng.uniform(0.95, 1.05);
  for (Point4& p : scene.cloud.points) {
    p.x = static_cast<float>(p.x * s);
    p.y = static_cast<float>(p.y * s);
    p.z = static_cast<float>(p.z * s);
  }
  for (Box3D& b : scene.boxes) {
    b.x *= s;
    b.y *= s;
    b.z *= s;
    b.l *= s;
    b.w *= s;
    b.h *= s;
  }
  compute_membership(scene);
}

void global_rotate(Scene& scene, Rng& rng) {
  const double phi = rng.uniform(-M_PI / 4.0, M_PI / 4.0);
  for (Point4& p : scene.cloud.points) {
    rotate_xy(phi, 0.0, 0.0, &p.x, &p.y);
  }
  for (Box3D& b : scene.boxes) {
    const double c = std::cos(phi);
    const double s = std::sin(phi);
    const double x = b.x;
    const double y = b.y;
    b.x = c * x - s * y;
    b.y = s * x + c * y;
    b.theta += phi;
  }
  compute_membership(scene);
}

void augment_scene(Scene& scene, Rng& rng, const AugmentConfig& cfg) {
  if (cfg.enable_perturb) {
    perturb_boxes(scene, rng);
  }
  if (cfg.enable_scale) {
    global_scale(scene, rng);
  }
  if (cfg.enable_rotate) {
    global_rotate(scene, rng);
  }
}

}  // namespace voxelpipe
