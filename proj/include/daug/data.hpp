#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "daug/tensor.hpp"

namespace daug {

struct Dataset {
  Tensor features;  // [n × d]
  std::vector<int> fine_labels;
  std::vector<int> coarse_labels;  // empty when the dataset has no hierarchy
  std::string name;

  std::size_t size() const { return features.rows(); }
  int num_fine() const;
  int num_coarse() const;
  bool has_coarse() const { return !coarse_labels.empty(); }
};

// Hierarchical Gaussian mixture: K superclass centers ~ N(0, σs² I), M
// subclass centers per superclass ~ N(center, σc² I), n_per_subclass points
// per subclass ~ N(subcenter, σn² I). Fine label = subclass, coarse =
// superclass.
struct SyntheticSpec {
  std::size_t K = 4;
  std::size_t M = 4;
  std::size_t d = 64;
  std::size_t n_per_subclass = 250;
  double super_spread = 4.0;
  double sub_spread = 1.0;
  double noise = 0.5;
  std::uint64_t seed = 0;

  void validate() const;
};

Dataset generate_synthetic(const SyntheticSpec& spec);

enum class CifarVariant { Cifar10, Cifar100 };

// cifar10 record: 1 label byte + 3072 pixel bytes (1024 R, 1024 G, 1024 B,
// row-major); cifar100 record: coarse byte + fine byte + 3072 pixels.
// Pixels map to [0,1] by /255.
Dataset parse_cifar(const std::string& path, CifarVariant variant);
Dataset parse_cifar_bytes(const std::string& bytes, CifarVariant variant,
                          const std::string& origin);
// inverse mapping (pixels ×255 rounded to nearest); used for round-trip checks
std::string serialize_cifar(const Dataset& ds, CifarVariant variant);

// Per-epoch full shuffle keyed on (seed, epoch); a final batch smaller than 2
// is dropped.
std::vector<std::vector<std::size_t>> batch_iter(std::size_t n, std::size_t batch_size,
                                                 std::uint64_t seed, std::size_t epoch);

// deterministic permutation of 0..n-1 (Fisher-Yates on the counter RNG)
std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t key);

// Per-coordinate standardization; mean/std computed on train_idx only and
// applied to all rows. Coordinates with zero train variance are left centered.
void standardize(Dataset& ds, const std::vector<std::size_t>& train_idx);

// Dataset container in the DAUG tensor-file encoding: "features",
// "fine_labels", optional "coarse_labels" (labels stored as f32).
void save_dataset(const Dataset& ds, const std::string& path);
Dataset load_dataset(const std::string& path);

}  // namespace daug
