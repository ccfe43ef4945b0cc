#include "voxelpipe/manifest.hpp"

#include <chrono>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "voxelpipe/errors.hpp"

namespace voxelpipe {

namespace {

struct Sha1 {
  std::uint32_t h[5] = {0x67452301u, 0xefcdab89u, 0x98badcfeu, 0x10325476u, 0xc3d2e1f0u};
  std::uint64_t total = 0;
  unsigned char block[64];
  std::size_t fill = 0;

  static std::uint32_t rol(std::uint32_t x, int n) { return (x << n) | (x >> (32 - n)); }

  void compress(const unsigned char* p) {
    std::uint32_t w[80];
    for (int i = 0; i < 16; ++i) {
      w[i] = (std::uint32_t(p[4 * i]) << 24) | (std::uint32_t(p[4 * i + 1]) << 16) |
             (std::uint32_t(p[4 * i + 2]) << 8) | std::uint32_t(p[4 * i + 3]);
    }
    for (int i = 16; i < 80; ++i) {
      w[i] = rol(w[i - 3] ^ w[i - 8] ^ w[i - 14] ^ w[i - 16], 1);
    }
    std::uint32_t a = h[0], b = h[1], c = h[2], d = h[3], e = h[4];
    for (int i = 0; i < 80; ++i) {
      std::uint32_t f, k;
      if (i < 20) {
        f = (b & c) | (~b & d);
        k = 0x5a827999u;
      } else if (i < 40) {
        f = b ^ c ^ d;
        k = 0x6ed9eba1u;
      } else if (i < 60) {
        f = (b & c) | (b & d) | (c & d);
        k = 0x8f1bbcdcu;
      } else {
        f = b ^ c ^ d;
        k = 0xca62c1d6u;
      }
      const std::uint32_t t = rol(a, 5) + f + e + k + w[i];
      e = d;
      d = c;
      c = rol(b, 30);
      b = a;
      a = t;
    }
    h[0] += a;
    h[1] += b;
    h[2] += c;
    h[3] += d;
    h[4] += e;
  }

  void update(const void* data, std::size_t len) {
    const unsigned char* p = static_cast<const unsigned char*>(data);
    total += len;
    while (len > 0) {
      const std::size_t take = std::min(len, std::size_t{64} - fill);
      std::memcpy(block + fill, p, take);
      fill += take;
      p += take;
      len -= take;
      if (fill == 64) {
        compress(block);
        fill = 0;
      }
    }
  }

  std::string hex_digest() {
    // The length is latched before padding; the 0x80/zero fill bytes reuse
    // update() only for its block handling.
    const std::uint64_t bits = total * 8;
    const unsigned char one = 0x80;
    update(&one, 1);
    const unsigned char zero = 0x00;
    while (fill != 56) {
      update(&zero, 1);
    }
    unsigned char len_be[8];
    for (int i = 0; i < 8; ++i) {
      len_be[i] = static_cast<unsigned char>(bits >> (56 - 8 * i));
    }
    update(len_be, 8);
    static const char* kHex = "0123456789abcdef";
    std::string out(40, '0');
    for (int i = 0; i < 5; ++i) {
      for (int j = 0; j < 4; ++j) {
        const unsigned char byte = static_cast<unsigned char>(h[i] >> (24 - 8 * j));
        out[i * 8 + j * 2] = kHex[byte >> 4];
        out[i * 8 + j * 2 + 1] = kHex[byte & 0xf];
      }
    }
    return out;
  }
};

}  // namespace

std::string git_blob_sha1(const std::string& content) {
  Sha1 sha;
  const std::string header = "blob " + std::to_string(content.size());
  sha.update(header.data(), header.size() + 1);  // includes the NUL terminator
  sha.update(content.data(), content.size());
  return sha.hex_digest();
}

std::string git_blob_sha1_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open file for hashing: " + path);
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return git_blob_sha1(buf.str());
}

void RunManifest::hash_input(const std::string& path) {
  input_hashes[path] = git_blob_sha1_file(path);
}

void RunManifest::add_timing(const std::string& stage, double ms) {
  timings_ms.emplace_back(stage, ms);
}

std::string RunManifest::to_json() const {
  nlohmann::json j;
  j["command"] = command;
  j["arguments"] = arguments;
  nlohmann::json cfg_json = nlohmann::json::object();
  for (const auto& [key, value] : config.entries()) {
    cfg_json[key] = value;
  }
  j["config"] = cfg_json;
  j["seed"] = seed;
  j["threads"] = threads;
  nlohmann::json hashes = nlohmann::json::object();
  for (const auto& [path, digest] : input_hashes) {
    hashes[path] = digest;
  }
  j["input_hashes"] = hashes;
  nlohmann::json timings = nlohmann::json::array();
  for (const auto& [stage, ms] : timings_ms) {
    timings.push_back({{"stage", stage}, {"ms", ms}});
  }
  j["timings_ms"] = timings;
  return j.dump(2) + "\n";
}

void RunManifest::write(const std::string& path) const {
  std::ofstream out(path);
  if (!out) {
    throw IoError("cannot open manifest for writing: " + path);
  }
  out << to_json();
  if (!out) {
    throw IoError("failed writing manifest: " + path);
  }
}

double now_ms() {
  const auto t = std::chrono::steady_clock::now().time_since_epoch();
  return std::chrono::duration<double, std::milli>(t).count();
}

}  // namespace voxelpipe
