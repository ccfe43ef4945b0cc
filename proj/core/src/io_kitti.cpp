#include "voxelpipe/io_kitti.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "voxelpipe/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "pointcloud binary I/O assumes a little-endian host");

namespace voxelpipe {

namespace {

std::array<double, 3> mul34(const std::array<double, 12>& m, const std::array<double, 3>& p) {
  return {m[0] * p[0] + m[1] * p[1] + m[2] * p[2] + m[3],
          m[4] * p[0] + m[5] * p[1] + m[6] * p[2] + m[7],
          m[8] * p[0] + m[9] * p[1] + m[10] * p[2] + m[11]};
}

std::array<double, 3> mul33(const std::array<double, 9>& m, const std::array<double, 3>& p) {
  return {m[0] * p[0] + m[1] * p[1] + m[2] * p[2],
          m[3] * p[0] + m[4] * p[1] + m[5] * p[2],
          m[6] * p[0] + m[7] * p[1] + m[8] * p[2]};
}

std::array<double, 9> inverse33(const std::array<double, 9>& m, const char* what) {
  const double det = m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6]) +
                     m[2] * (m[3] * m[7] - m[4] * m[6]);
  if (std::abs(det) < 1e-12) {
    throw ConfigError(std::string("singular ") + what + " matrix in calibration");
  }
  const double inv = 1.0 / det;
  return {(m[4] * m[8] - m[5] * m[7]) * inv, (m[2] * m[7] - m[1] * m[8]) * inv,
          (m[1] * m[5] - m[2] * m[4]) * inv, (m[5] * m[6] - m[3] * m[8]) * inv,
          (m[0] * m[8] - m[2] * m[6]) * inv, (m[2] * m[3] - m[0] * m[5]) * inv,
          (m[3] * m[7] - m[4] * m[6]) * inv, (m[1] * m[6] - m[0] * m[7]) * inv,
          (m[0] * m[4] - m[1] * m[3]) * inv};
}

}  // namespace

std::array<double, 3> Calibration::lidar_to_rect(const std::array<double, 3>& p) const {
  return mul33(rect, mul34(velo_to_cam, p));
}

std::array<double, 3> Calibration::rect_to_lidar(const std::array<double, 3>& p) const {
  const auto cam = mul33(inverse33(rect, "rectification"), p);
  const std::array<double, 9> rot{velo_to_cam[0], velo_to_cam[1], velo_to_cam[2],
                                  velo_to_cam[4], velo_to_cam[5], velo_to_cam[6],
                                  velo_to_cam[8], velo_to_cam[9], velo_to_cam[10]};
  const std::array<double, 3> shifted{cam[0] - velo_to_cam[3], cam[1] - velo_to_cam[7],
                                      cam[2] - velo_to_cam[11]};
  return mul33(inverse33(rot, "velo_to_cam rotation"), shifted);
}

std::array<double, 3> Calibration::project(const std::array<double, 3>& p_rect) const {
  const auto q = mul34(proj, p_rect);
  if (std::abs(q[2]) < 1e-12) {
    return {0, 0, q[2]};
  }
  return {q[0] / q[2], q[1] / q[2], q[2]};
}

Calibration load_calib(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open calibration file: " + path);
  }
  Calibration calib;
  bool have_proj = false;
  bool have_rect = false;
  bool have_velo = false;
  std::string line;
  while (std::getline(in, line)) {
    const auto colon = line.find(':');
    if (colon == std::string::npos) {
      continue;
    }
    const std::string key = line.substr(0, colon);
    std::istringstream vals(line.substr(colon + 1));
    auto read_n = [&](double* out, int n) {
      for (int i = 0; i < n; ++i) {
        if (!(vals >> out[i])) {
          throw IoError("calibration key " + key + " needs " + std::to_string(n) +
                        " values: " + path);
        }
      }
    };
    if (key == "P2") {
      read_n(calib.proj.data(), 12);
      have_proj = true;
    } else if (key == "R0_rect") {
      read_n(calib.rect.data(), 9);
      have_rect = true;
    } else if (key == "Tr_velo_to_cam") {
      read_n(calib.velo_to_cam.data(), 12);
      have_velo = true;
    } else if (key == "image_size") {
      double wh[2];
      read_n(wh, 2);
      calib.image_width = static_cast<int>(wh[0]);
      calib.image_height = static_cast<int>(wh[1]);
    }
  }
  if (!have_proj || !have_rect || !have_velo) {
    throw IoError("calibration file missing P2/R0_rect/Tr_velo_to_cam: " + path);
  }
  inverse33(calib.rect, "rectification");  // validate up front
  return calib;
}

CloudLoadResult load_pointcloud(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open pointcloud file: " + path);
  }
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  CloudLoadResult result;
  const std::size_t record_size = 4 * sizeof(float);
  const std::size_t n = bytes.size() / record_size;
  result.truncated_tail = bytes.size() % record_size != 0;
  result.cloud.points.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    float f[4];
    std::memcpy(f, bytes.data() + i * record_size, record_size);
    if (!std::isfinite(f[0]) || !std::isfinite(f[1]) || !std::isfinite(f[2]) ||
        !std::isfinite(f[3])) {
      ++result.dropped_nonfinite;
      continue;
    }
    const float r = std::clamp(f[3], 0.0f, 1.0f);
    if (r != f[3]) {
      ++result.clamped_reflectance;
    }
    result.cloud.points.push_back({f[0], f[1], f[2], r});
  }
  return result;
}

void save_pointcloud(const PointCloud& cloud, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw IoError("cannot open pointcloud file for writing: " + path);
  }
  for (const Point4& p : cloud.points) {
    const float f[4] = {p.x, p.y, p.z, p.r};
    out.write(reinterpret_cast<const char*>(f), sizeof(f));
  }
  if (!out) {
    throw IoError("short write to pointcloud file: " + path);
  }
}

PointCloud crop_to_range(const PointCloud& cloud, const Range3& range) {
  PointCloud kept;
  for (const Point4& p : cloud.points) {
    if (p.x >= range.x_min && p.x < range.x_max && p.y >= range.y_min && p.y < range.y_max &&
        p.z >= range.z_min && p.z < range.z_max) {
      kept.points.push_back(p);
    }
  }
  return kept;
}

PointCloud filter_by_image_frustum(const PointCloud& cloud, const Calibration& calib) {
  PointCloud kept;
  for (const Point4& p : cloud.points) {
    const auto pix = calib.project(calib.lidar_to_rect({p.x, p.y, p.z}));
    if (pix[2] > 0 && pix[0] >= 0 && pix[0] < calib.image_width && pix[1] >= 0 &&
        pix[1] < calib.image_height) {
      kept.points.push_back(p);
    }
  }
  return kept;
}

Box3D box_from_camera(const std::array<double, 3>& location, double h, double w, double l,
                      double rotation_y, const Calibration& calib) {
  const auto bottom = calib.rect_to_lidar(location);
  Box3D box;
  box.x = bottom[0];
  box.y = bottom[1];
  box.z = bottom[2] + h / 2.0;
  box.l = l;
  box.w = w;
  box.h = h;
  box.theta = normalize_angle(-rotation_y - M_PI / 2.0);
  return box;
}

std::array<double, 4> box_to_camera(const Box3D& box, const Calibration& calib) {
  const auto rect = calib.lidar_to_rect({box.x, box.y, box.z - box.h / 2.0});
  return {rect[0], rect[1], rect[2], normalize_angle(-box.theta - M_PI / 2.0)};
}

LabelLoadResult load_labels(const std::string& path, const Calibration& calib, bool with_score) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open label file: " + path);
  }
  LabelLoadResult result;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) {
      continue;
    }
    std::istringstream fields(line);
    LabeledObject obj;
    double values[14];
    fields >> obj.cls;
    for (double& v : values) {
      if (!(fields >> v)) {
        throw IoError("malformed label line " + std::to_string(line_no) + " in " + path);
      }
    }
    if (with_score && !(fields >> obj.score)) {
      throw IoError("label line " + std::to_string(line_no) + " missing score in " + path);
    }
    obj.truncation = values[0];
    obj.occlusion = static_cast<int>(values[1]);
    obj.alpha = values[2];
    obj.bbox = {values[3], values[4], values[5], values[6]};
    const double h = values[7];
    const double w = values[8];
    const double l = values[9];
    obj.box = box_from_camera({values[10], values[11], values[12]}, h, w, l, values[13], calib);
    if (obj.cls == "Car" || obj.cls == "Pedestrian" || obj.cls == "Cyclist") {
      result.objects.push_back(std::move(obj));
    } else if (obj.cls == "DontCare") {
      result.dont_care.push_back(std::move(obj));
    } else {
      ++result.dropped_other_classes;
    }
  }
  return result;
}

}  // namespace voxelpipe
