#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <vector>

#include "test_util.hpp"
#include "voxelpipe/errors.hpp"
#include "voxelpipe/io_kitti.hpp"

using namespace voxelpipe;

namespace {

void write_floats(const std::string& path, const std::vector<float>& values) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(values.data()),
            static_cast<std::streamsize>(values.size() * sizeof(float)));
}

}  // namespace

TEST(PointCloudIoTest, SingleRecordDecodes) {
  testutil::TempDir dir("pc1");
  const std::string path = dir.file("one.bin");
  write_floats(path, {1.0f, 2.0f, 3.0f, 0.5f});
  const CloudLoadResult r = load_pointcloud(path);
  ASSERT_EQ(r.cloud.size(), 1u);
  EXPECT_FLOAT_EQ(r.cloud.points[0].x, 1.0f);
  EXPECT_FLOAT_EQ(r.cloud.points[0].y, 2.0f);
  EXPECT_FLOAT_EQ(r.cloud.points[0].z, 3.0f);
  EXPECT_FLOAT_EQ(r.cloud.points[0].r, 0.5f);
  EXPECT_EQ(r.rejected_records(), 0u);
}

TEST(PointCloudIoTest, EmptyFileGivesEmptyCloud) {
  testutil::TempDir dir("pc2");
  const std::string path = dir.file("empty.bin");
  write_floats(path, {});
  const CloudLoadResult r = load_pointcloud(path);
  EXPECT_EQ(r.cloud.size(), 0u);
  EXPECT_FALSE(r.truncated_tail);
}

TEST(PointCloudIoTest, ThreeRecordFixtureMatchesHandDecode) {
  testutil::TempDir dir("pc3");
  const std::string path = dir.file("three.bin");
  // 48 bytes: hand-written byte-level fixture of three records.
  const std::vector<float> fixture = {0.0f,  0.0f,  0.0f, 0.0f,   //
                                      -1.5f, 2.25f, 4.0f, 1.0f,   //
                                      70.0f, -3.5f, 0.1f, 0.25f};
  write_floats(path, fixture);
  const CloudLoadResult r = load_pointcloud(path);
  ASSERT_EQ(r.cloud.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_FLOAT_EQ(r.cloud.points[i].x, fixture[4 * i + 0]);
    EXPECT_FLOAT_EQ(r.cloud.points[i].y, fixture[4 * i + 1]);
    EXPECT_FLOAT_EQ(r.cloud.points[i].z, fixture[4 * i + 2]);
    EXPECT_FLOAT_EQ(r.cloud.points[i].r, fixture[4 * i + 3]);
  }
}

TEST(PointCloudIoTest, TruncatedTailIsDroppedAndFlagged) {
  testutil::TempDir dir("pc4");
  const std::string path = dir.file("trunc.bin");
  write_floats(path, {1.0f, 2.0f, 3.0f, 0.5f, 9.0f});  // 20 bytes
  const CloudLoadResult r = load_pointcloud(path);
  EXPECT_EQ(r.cloud.size(), 1u);
  EXPECT_TRUE(r.truncated_tail);
  EXPECT_EQ(r.rejected_records(), 1u);
}

TEST(PointCloudIoTest, NonFiniteRecordsDropReflectanceClamps) {
  testutil::TempDir dir("pc5");
  const std::string path = dir.file("bad.bin");
  write_floats(path, {1.0f, 2.0f, std::nanf(""), 0.5f,  //
                      1.0f, 2.0f, 3.0f, 1.75f});
  const CloudLoadResult r = load_pointcloud(path);
  ASSERT_EQ(r.cloud.size(), 1u);
  EXPECT_EQ(r.dropped_nonfinite, 1u);
  EXPECT_EQ(r.clamped_reflectance, 1u);
  EXPECT_FLOAT_EQ(r.cloud.points[0].r, 1.0f);
}

TEST(PointCloudIoTest, SaveLoadRoundtrip) {
  testutil::TempDir dir("pc6");
  const std::string path = dir.file("rt.bin");
  PointCloud cloud = testutil::random_cloud(500, 3, testutil::small_range());
  save_pointcloud(cloud, path);
  const CloudLoadResult r = load_pointcloud(path);
  ASSERT_EQ(r.cloud.size(), cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    EXPECT_EQ(std::memcmp(&cloud.points[i], &r.cloud.points[i], sizeof(Point4)), 0);
  }
}

TEST(CropTest, CarRangeKeepsInsideDropsOutside) {
  const Range3 car{-3.0, 1.0, -40.0, 40.0, 0.0, 70.4};
  PointCloud cloud;
  cloud.points.push_back({10.0f, 0.0f, -1.0f, 0.1f});
  cloud.points.push_back({80.0f, 0.0f, -1.0f, 0.1f});
  const PointCloud kept = crop_to_range(cloud, car);
  ASSERT_EQ(kept.size(), 1u);
  EXPECT_FLOAT_EQ(kept.points[0].x, 10.0f);
}

TEST(CropTest, BoundariesAreLowInclusiveHighExclusive) {
  const Range3 r{0.0, 1.0, 0.0, 1.0, 0.0, 1.0};
  PointCloud cloud;
  cloud.points.push_back({0.0f, 0.0f, 0.0f, 0.0f});
  cloud.points.push_back({1.0f, 0.5f, 0.5f, 0.0f});
  const PointCloud kept = crop_to_range(cloud, r);
  ASSERT_EQ(kept.size(), 1u);
  EXPECT_FLOAT_EQ(kept.points[0].x, 0.0f);
}

TEST(CropTest, AllInsideIsIdentity) {
  PointCloud cloud = testutil::random_cloud(200, 11, testutil::small_range());
  const Range3 wide{-100, 100, -100, 100, -100, 100};
  EXPECT_EQ(crop_to_range(cloud, wide).size(), cloud.size());
}

TEST(CropTest, EmptyCloudStaysEmpty) {
  EXPECT_EQ(crop_to_range(PointCloud{}, testutil::small_range()).size(), 0u);
}

TEST(FrustumTest, IdentityCalibrationKeepsProjectedPoint) {
  const Calibration calib = Calibration::identity(100, 100);
  PointCloud cloud;
  cloud.points.push_back({250.0f, 250.0f, 5.0f, 0.0f});  // projects to pixel (50, 50), depth 5
  const PointCloud kept = filter_by_image_frustum(cloud, calib);
  EXPECT_EQ(kept.size(), 1u);
}

TEST(FrustumTest, NegativeDepthIsDropped) {
  const Calibration calib = Calibration::identity(100, 100);
  PointCloud cloud;
  cloud.points.push_back({250.0f, 250.0f, -5.0f, 0.0f});
  EXPECT_EQ(filter_by_image_frustum(cloud, calib).size(), 0u);
}

TEST(FrustumTest, OutOfImagePixelIsDropped) {
  const Calibration calib = Calibration::identity(100, 100);
  PointCloud cloud;
  cloud.points.push_back({-5.0f, 250.0f, 5.0f, 0.0f});  // pixel x = -1
  EXPECT_EQ(filter_by_image_frustum(cloud, calib).size(), 0u);
}

TEST(LabelTest, FixtureLineMatchesHandTransform) {
  testutil::TempDir dir("lbl1");
  const std::string path = dir.file("l.txt");
  {
    std::ofstream out(path);
    out << "Car 0.10 1 -1.58 100.0 150.0 200.0 250.0 1.50 1.60 3.90 2.0 1.0 10.0 -1.57\n";
  }
  const Calibration calib = Calibration::identity(1242, 375);
  const LabelLoadResult r = load_labels(path, calib);
  ASSERT_EQ(r.objects.size(), 1u);
  const LabeledObject& obj = r.objects[0];
  EXPECT_EQ(obj.cls, "Car");
  EXPECT_DOUBLE_EQ(obj.truncation, 0.10);
  EXPECT_EQ(obj.occlusion, 1);
  EXPECT_DOUBLE_EQ(obj.alpha, -1.58);
  EXPECT_DOUBLE_EQ(obj.bbox[0], 100.0);
  EXPECT_DOUBLE_EQ(obj.bbox[3], 250.0);
  // Identity calibration: the camera frame coincides with the LiDAR frame,
  // so the center is the bottom-center location lifted by h/2.
  EXPECT_DOUBLE_EQ(obj.box.x, 2.0);
  EXPECT_DOUBLE_EQ(obj.box.y, 1.0);
  EXPECT_DOUBLE_EQ(obj.box.z, 10.0 + 0.75);
  EXPECT_DOUBLE_EQ(obj.box.h, 1.50);
  EXPECT_DOUBLE_EQ(obj.box.w, 1.60);
  EXPECT_DOUBLE_EQ(obj.box.l, 3.90);
  EXPECT_NEAR(obj.box.theta, normalize_angle(1.57 - M_PI / 2.0), 1e-12);
}

TEST(LabelTest, DontCareIsKeptSeparately) {
  testutil::TempDir dir("lbl2");
  const std::string path = dir.file("l.txt");
  {
    std::ofstream out(path);
    out << "DontCare -1 -1 -10 559.62 175.83 575.40 183.15 -1 -1 -1 -1000 -1000 -1000 -10\n";
    out << "Van 0 0 0 0 0 10 10 1.5 1.6 3.9 0 0 10 0\n";
  }
  const LabelLoadResult r = load_labels(path, Calibration::identity(1242, 375));
  EXPECT_EQ(r.objects.size(), 0u);
  EXPECT_EQ(r.dont_care.size(), 1u);
  EXPECT_EQ(r.dropped_other_classes, 1u);
}

TEST(LabelTest, EmptyFileGivesEmptyLists) {
  testutil::TempDir dir("lbl3");
  const std::string path = dir.file("l.txt");
  {
    std::ofstream out(path);
  }
  const LabelLoadResult r = load_labels(path, Calibration::identity(1242, 375));
  EXPECT_EQ(r.objects.size(), 0u);
  EXPECT_EQ(r.dont_care.size(), 0u);
}

TEST(LabelTest, MalformedLineThrowsIoErrorNamingTheLine) {
  testutil::TempDir dir("lbl4");
  const std::string path = dir.file("l.txt");
  {
    std::ofstream out(path);
    out << "Car 0.0 0\n";
  }
  try {
    load_labels(path, Calibration::identity(1242, 375));
    FAIL() << "expected IoError";
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find("line 1"), std::string::npos);
  }
}

TEST(LabelTest, ScoreFieldParsesWhenRequested) {
  testutil::TempDir dir("lbl5");
  const std::string path = dir.file("l.txt");
  {
    std::ofstream out(path);
    out << "Car 0 0 0 0 0 10 10 1.5 1.6 3.9 0 0 10 0 0.87\n";
  }
  const LabelLoadResult r = load_labels(path, Calibration::identity(1242, 375), true);
  ASSERT_EQ(r.objects.size(), 1u);
  EXPECT_DOUBLE_EQ(r.objects[0].score, 0.87);
}

TEST(LabelTest, CameraRoundtripRestoresBox) {
  Calibration calib;  // KITTI-like non-trivial extrinsics
  calib.velo_to_cam = {0, -1, 0, 0.1, 0, 0, -1, -0.2, 1, 0, 0, 0.3};
  calib.rect = {0.999, 0.01, 0, -0.01, 0.999, 0, 0, 0, 1.0};
  Box3D box;
  box.x = 12.0;
  box.y = -3.0;
  box.z = -0.8;
  box.l = 3.9;
  box.w = 1.6;
  box.h = 1.5;
  box.theta = 0.6;
  const auto cam = box_to_camera(box, calib);
  const Box3D back = box_from_camera({cam[0], cam[1], cam[2]}, box.h, box.w, box.l, cam[3], calib);
  EXPECT_NEAR(back.x, box.x, 1e-9);
  EXPECT_NEAR(back.y, box.y, 1e-9);
  EXPECT_NEAR(back.z, box.z, 1e-9);
  EXPECT_NEAR(back.theta, box.theta, 1e-9);
}

TEST(CalibTest, LoadParsesKittiKeys) {
  testutil::TempDir dir("calib");
  const std::string path = dir.file("c.txt");
  {
    std::ofstream out(path);
    out << "P2: 700 0 600 0 0 700 180 0 0 0 1 0\n";
    out << "R0_rect: 1 0 0 0 1 0 0 0 1\n";
    out << "Tr_velo_to_cam: 0 -1 0 0 0 0 -1 0 1 0 0 0\n";
  }
  const Calibration calib = load_calib(path);
  EXPECT_DOUBLE_EQ(calib.proj[0], 700.0);
  // LiDAR x-forward becomes rect z-forward under this extrinsic.
  const auto rect = calib.lidar_to_rect({5.0, 0.0, 0.0});
  EXPECT_DOUBLE_EQ(rect[2], 5.0);
}

TEST(CalibTest, MissingKeysThrow) {
  testutil::TempDir dir("calib2");
  const std::string path = dir.file("c.txt");
  {
    std::ofstream out(path);
    out << "P2: 700 0 600 0 0 700 180 0 0 0 1 0\n";
  }
  EXPECT_THROW(load_calib(path), IoError);
}
