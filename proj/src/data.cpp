#include "daug/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "daug/layers.hpp"
#include "daug/rng.hpp"

namespace daug {

int Dataset::num_fine() const {
  int k = 0;
  for (int l : fine_labels) k = std::max(k, l + 1);
  return k;
}

int Dataset::num_coarse() const {
  int k = 0;
  for (int l : coarse_labels) k = std::max(k, l + 1);
  return k;
}

void SyntheticSpec::validate() const {
  if (K < 1 || M < 1 || d < 1 || n_per_subclass < 1)
    throw ContractError("synthetic spec: K, M, d, n_per_subclass must be >= 1");
  if (super_spread < 0.0 || sub_spread < 0.0 || noise < 0.0)
    throw ContractError("synthetic spec: spreads must be >= 0");
}

Dataset generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  const std::size_t n = spec.K * spec.M * spec.n_per_subclass;

  Dataset ds;
  ds.name = "synthetic";
  ds.features = Tensor({n, spec.d});
  ds.fine_labels.resize(n);
  ds.coarse_labels.resize(n);

  std::vector<double> super_centers(spec.K * spec.d);
  {
    CounterRng rng(derive_seed(spec.seed, "super_centers"));
    for (double& v : super_centers) v = spec.super_spread * rng.normal();
  }
  std::vector<double> sub_centers(spec.K * spec.M * spec.d);
  {
    CounterRng rng(derive_seed(spec.seed, "sub_centers"));
    for (std::size_t k = 0; k < spec.K; ++k)
      for (std::size_t m = 0; m < spec.M; ++m)
        for (std::size_t j = 0; j < spec.d; ++j)
          sub_centers[(k * spec.M + m) * spec.d + j] =
              super_centers[k * spec.d + j] + spec.sub_spread * rng.normal();
  }

  CounterRng rng(derive_seed(spec.seed, "points"));
  std::size_t row = 0;
  for (std::size_t k = 0; k < spec.K; ++k)
    for (std::size_t m = 0; m < spec.M; ++m) {
      const std::size_t sub = k * spec.M + m;
      for (std::size_t p = 0; p < spec.n_per_subclass; ++p, ++row) {
        for (std::size_t j = 0; j < spec.d; ++j)
          ds.features(row, j) = static_cast<float>(sub_centers[sub * spec.d + j] +
                                                   spec.noise * rng.normal());
        ds.fine_labels[row] = static_cast<int>(sub);
        ds.coarse_labels[row] = static_cast<int>(k);
      }
    }
  return ds;
}

namespace {

constexpr std::size_t kCifarPixels = 3072;

}  // namespace

Dataset parse_cifar_bytes(const std::string& bytes, CifarVariant variant,
                          const std::string& origin) {
  const std::size_t record = variant == CifarVariant::Cifar10 ? kCifarPixels + 1
                                                              : kCifarPixels + 2;
  const int fine_classes = variant == CifarVariant::Cifar10 ? 10 : 100;
  if (bytes.size() % record != 0)
    throw TruncationError("cifar file '" + origin + "': length " +
                              std::to_string(bytes.size()) +
                              " is not a multiple of record size " + std::to_string(record),
                          bytes.size() - bytes.size() % record);

  const std::size_t n = bytes.size() / record;
  Dataset ds;
  ds.name = variant == CifarVariant::Cifar10 ? "cifar10" : "cifar100";
  ds.features = Tensor({n, kCifarPixels});
  ds.fine_labels.resize(n);
  if (variant == CifarVariant::Cifar100) ds.coarse_labels.resize(n);

  for (std::size_t i = 0; i < n; ++i) {
    const unsigned char* rec =
        reinterpret_cast<const unsigned char*>(bytes.data()) + i * record;
    std::size_t off = 0;
    if (variant == CifarVariant::Cifar100) {
      const int coarse = rec[off++];
      if (coarse >= 20)
        throw FormatError("cifar100 record " + std::to_string(i) +
                          ": coarse label " + std::to_string(coarse) + " out of range");
      ds.coarse_labels[i] = coarse;
    }
    const int fine = rec[off++];
    if (fine >= fine_classes)
      throw FormatError("cifar record " + std::to_string(i) + ": label " +
                        std::to_string(fine) + " out of range [0, " +
                        std::to_string(fine_classes) + ")");
    ds.fine_labels[i] = fine;
    for (std::size_t p = 0; p < kCifarPixels; ++p)
      ds.features(i, p) = static_cast<float>(rec[off + p]) / 255.0f;
  }
  return ds;
}

Dataset parse_cifar(const std::string& path, CifarVariant variant) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open '" + path + "'");
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return parse_cifar_bytes(bytes, variant, path);
}

std::string serialize_cifar(const Dataset& ds, CifarVariant variant) {
  if (ds.features.cols() != kCifarPixels)
    throw ShapeError("serialize_cifar: features must have " +
                     std::to_string(kCifarPixels) + " columns");
  std::string out;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (variant == CifarVariant::Cifar100)
      out.push_back(static_cast<char>(ds.coarse_labels.at(i)));
    out.push_back(static_cast<char>(ds.fine_labels.at(i)));
    for (std::size_t p = 0; p < kCifarPixels; ++p) {
      const float v = ds.features(i, p) * 255.0f;
      out.push_back(static_cast<char>(static_cast<int>(std::lround(v))));
    }
  }
  return out;
}

std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t key) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  CounterRng rng(key);
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.next_u64() % i);
    std::swap(idx[i - 1], idx[j]);
  }
  return idx;
}

std::vector<std::vector<std::size_t>> batch_iter(std::size_t n, std::size_t batch_size,
                                                 std::uint64_t seed, std::size_t epoch) {
  if (batch_size < 1) throw ContractError("batch_iter: batch_size must be >= 1");
  auto idx = shuffled_indices(n, derive_seed(seed, "batch_iter", {epoch}));
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t end = std::min(n, start + batch_size);
    if (end - start < 2) break;  // too small for a contrastive signal
    batches.emplace_back(idx.begin() + static_cast<std::ptrdiff_t>(start),
                         idx.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

void standardize(Dataset& ds, const std::vector<std::size_t>& train_idx) {
  if (train_idx.empty()) throw ContractError("standardize: empty train split");
  const std::size_t d = ds.features.cols();
  for (std::size_t c = 0; c < d; ++c) {
    double mean = 0.0;
    for (std::size_t i : train_idx) mean += ds.features(i, c);
    mean /= static_cast<double>(train_idx.size());
    double var = 0.0;
    for (std::size_t i : train_idx) {
      const double dv = ds.features(i, c) - mean;
      var += dv * dv;
    }
    var /= static_cast<double>(train_idx.size());
    const double inv = var > 0.0 ? 1.0 / std::sqrt(var) : 1.0;
    for (std::size_t r = 0; r < ds.size(); ++r)
      ds.features(r, c) = static_cast<float>((ds.features(r, c) - mean) * inv);
  }
}

void save_dataset(const Dataset& ds, const std::string& path) {
  NamedTensors tensors;
  tensors.emplace_back("features", ds.features);
  Tensor fine({ds.fine_labels.size()});
  for (std::size_t i = 0; i < ds.fine_labels.size(); ++i)
    fine(i) = static_cast<float>(ds.fine_labels[i]);
  tensors.emplace_back("fine_labels", std::move(fine));
  if (ds.has_coarse()) {
    Tensor coarse({ds.coarse_labels.size()});
    for (std::size_t i = 0; i < ds.coarse_labels.size(); ++i)
      coarse(i) = static_cast<float>(ds.coarse_labels[i]);
    tensors.emplace_back("coarse_labels", std::move(coarse));
  }
  write_tensor_file(path, tensors);
}

Dataset load_dataset(const std::string& path) {
  NamedTensors tensors = read_tensor_file(path);
  Dataset ds;
  ds.name = path;
  bool have_features = false, have_fine = false;
  for (auto& [name, t] : tensors) {
    if (name == "features") {
      ds.features = std::move(t);
      have_features = true;
    } else if (name == "fine_labels") {
      ds.fine_labels.reserve(t.size());
      for (float v : t.data) ds.fine_labels.push_back(static_cast<int>(v));
      have_fine = true;
    } else if (name == "coarse_labels") {
      ds.coarse_labels.reserve(t.size());
      for (float v : t.data) ds.coarse_labels.push_back(static_cast<int>(v));
    }
  }
  if (!have_features || !have_fine)
    throw FormatError("dataset file '" + path + "' is missing features or fine_labels");
  if (ds.fine_labels.size() != ds.features.rows())
    throw FormatError("dataset file '" + path + "': label count does not match rows");
  return ds;
}

}  // namespace daug
