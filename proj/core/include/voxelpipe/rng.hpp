#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace voxelpipe {

// Mixing function used to derive independent per-sample seeds.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t epoch, std::uint64_t index) {
  return splitmix64(splitmix64(seed ^ 0x6d656d6f72793aULL) ^ splitmix64(epoch * 0x100000001b3ULL + index));
}

// Abstract draw interface so tests can force specific values into the
// augmentation pipeline.
class Rng {
 public:
  virtual ~Rng() = default;
  virtual double uniform(double lo, double hi) = 0;
  virtual double normal(double mean, double stddev) = 0;
};

// Deterministic RNG. std::mt19937_64's raw output sequence is pinned by the
// standard; the distributions here are hand-rolled because the standard
// library's distribution objects are implementation-defined and would break
// cross-machine reproducibility.
class DetRng final : public Rng {
 public:
  explicit DetRng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53 bits of precision.
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) override { return lo + (hi - lo) * uniform01(); }

  // Box-Muller; one value per call keeps the stream layout obvious.
  double normal(double mean, double stddev) override {
    if (have_spare_) {
      have_spare_ = false;
      return mean + stddev * spare_;
    }
    double u1 = uniform01();
    double u2 = uniform01();
    while (u1 <= 0.0) u1 = uniform01();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * M_PI * u2;
    spare_ = radius * std::sin(angle);
    have_spare_ = true;
    return mean + stddev * radius * std::cos(angle);
  }

  // Uniform integer in [0, n). Modulo bias is irrelevant at 64-bit range.
  std::uint64_t uniform_index(std::uint64_t n) { return n == 0 ? 0 : engine_() % n; }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(uniform_index(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace voxelpipe
