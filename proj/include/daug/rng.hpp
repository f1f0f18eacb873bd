#pragma once

#include <cstdint>
#include <cmath>
#include <initializer_list>
#include <string_view>

namespace daug {

// Counter-based 64-bit generator. Output i of a stream keyed by `key` is
// mix64(key + i * GOLDEN) with the splitmix64 finalizer. Uniforms take the
// top 53 bits; normals come from Box-Muller on those uniforms. Library
// default RNGs are never used, so streams are identical across platforms.
inline constexpr std::uint64_t kGoldenGamma = 0x9E3779B97F4A7C15ULL;

inline std::uint64_t mix64(std::uint64_t x) {
  x ^= x >> 30;
  x *= 0xBF58476D1CE4E5B9ULL;
  x ^= x >> 27;
  x *= 0x94D049BB133111EBULL;
  x ^= x >> 31;
  return x;
}

class CounterRng {
 public:
  explicit CounterRng(std::uint64_t key) : key_(key) {}

  std::uint64_t next_u64() { return mix64(key_ + (++counter_) * kGoldenGamma); }

  // [0, 1), 53-bit resolution
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // (0, 1], safe as a log argument
  double uniform_pos() {
    return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
  }

  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = uniform_pos();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

 private:
  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

inline std::uint64_t hash_u64(std::uint64_t h, std::uint64_t v) {
  return mix64(h ^ (mix64(v) + kGoldenGamma + (h << 6) + (h >> 2)));
}

// FNV-1a over the tag string; used to name seed sub-streams.
inline std::uint64_t seed_tag(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

// Per-purpose stream key from (seed, tag, indices). Adding a new purpose
// never perturbs draws of existing purposes.
inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view purpose,
                                 std::initializer_list<std::uint64_t> parts = {}) {
  std::uint64_t h = hash_u64(seed, seed_tag(purpose));
  for (std::uint64_t p : parts) h = hash_u64(h, p);
  return h;
}

}  // namespace daug
