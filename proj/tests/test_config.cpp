#include <gtest/gtest.h>

#include <fstream>

#include "test_util.hpp"
#include "voxelpipe/config.hpp"
#include "voxelpipe/errors.hpp"

using voxelpipe::Config;
using voxelpipe::ConfigError;

TEST(ConfigTest, ParsesFlatKeyValueText) {
  Config cfg = Config::from_string(
      "# comment line\n"
      "range_x_min = 0.0\n"
      "train.batch_size = 16\n"
      "name = Car\n"
      "\n"
      "flag = true\n");
  EXPECT_DOUBLE_EQ(cfg.get_double("range_x_min", -1.0), 0.0);
  EXPECT_EQ(cfg.get_int("train.batch_size", 0), 16);
  EXPECT_EQ(cfg.get_string("name", ""), "Car");
  EXPECT_TRUE(cfg.get_bool("flag", false));
}

TEST(ConfigTest, FallbackAppliesOnlyWhenMissing) {
  Config cfg = Config::from_string("a = 2\n");
  EXPECT_EQ(cfg.get_int("a", 99), 2);
  EXPECT_EQ(cfg.get_int("b", 99), 99);
  EXPECT_TRUE(cfg.has("a"));
  EXPECT_FALSE(cfg.has("b"));
}

TEST(ConfigTest, RequiredAccessorsThrowOnMissingKey) {
  Config cfg = Config::from_string("a = 2\n");
  EXPECT_EQ(cfg.get_int("a"), 2);
  EXPECT_THROW(cfg.get_int("missing"), ConfigError);
  EXPECT_THROW(cfg.get_double("missing"), ConfigError);
  EXPECT_THROW(cfg.get_string("missing"), ConfigError);
}

TEST(ConfigTest, MalformedNumbersThrow) {
  Config cfg = Config::from_string("a = notanumber\n");
  EXPECT_THROW(cfg.get_int("a", 0), ConfigError);
  EXPECT_THROW(cfg.get_double("a", 0.0), ConfigError);
}

TEST(ConfigTest, LaterAssignmentWins) {
  Config cfg = Config::from_string("a = 1\na = 2\n");
  EXPECT_EQ(cfg.get_int("a", 0), 2);
}

TEST(ConfigTest, FromFileMatchesFromString) {
  testutil::TempDir dir("config");
  const std::string path = dir.file("t.cfg");
  {
    std::ofstream out(path);
    out << "x = 4.5\ns = hello\n";
  }
  Config cfg = Config::from_file(path);
  EXPECT_DOUBLE_EQ(cfg.get_double("x", 0.0), 4.5);
  EXPECT_EQ(cfg.get_string("s", ""), "hello");
}

TEST(ConfigTest, MissingFileThrowsIoError) {
  EXPECT_THROW(Config::from_file("/nonexistent/path/p.cfg"), voxelpipe::IoError);
}
