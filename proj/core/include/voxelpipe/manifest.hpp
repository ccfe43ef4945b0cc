#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "voxelpipe/config.hpp"

namespace voxelpipe {

// SHA-1 of the git blob encoding "blob <len>\0<content>", hex lowercase.
// Matches `git hash-object` on the same bytes.
std::string git_blob_sha1(const std::string& content);
std::string git_blob_sha1_file(const std::string& path);

// Reproducibility record emitted by every CLI command: the exact command
// line, the parsed config, the effective seed, content hashes of the input
// files, and wall-clock stage timings.
struct RunManifest {
  std::string command;
  std::vector<std::string> arguments;
  Config config;
  std::uint64_t seed = 0;
  int threads = 1;
  std::map<std::string, std::string> input_hashes;  // path -> git blob sha1
  std::vector<std::pair<std::string, double>> timings_ms;

  void hash_input(const std::string& path);
  void add_timing(const std::string& stage, double ms);
  std::string to_json() const;
  void write(const std::string& path) const;
};

// Monotonic milliseconds helper for stage timing.
double now_ms();

}  // namespace voxelpipe
