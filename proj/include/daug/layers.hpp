#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "daug/graph.hpp"
#include "daug/tensor.hpp"

namespace daug {

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class TruncationError : public std::runtime_error {
 public:
  TruncationError(const std::string& msg, std::size_t byte_offset)
      : std::runtime_error(msg + " (at byte offset " + std::to_string(byte_offset) + ")"),
        offset(byte_offset) {}
  std::size_t offset;
};

class VersionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class LayerKind : std::uint8_t { Dense = 0, DenseRelu = 1, L2Normalize = 2 };

struct Layer {
  LayerKind kind = LayerKind::Dense;
  Tensor weight;  // [out × in]; empty for l2-normalize
  Tensor bias;    // [out]; empty for l2-normalize
  bool frozen = false;

  bool has_params() const { return kind != LayerKind::L2Normalize; }
};

// Ordered layer stack with the insertion-point convention: index l ranges
// over -1..L-1, where -1 is the raw input and L-1 the final output.
struct LayeredEncoder {
  std::vector<Layer> layers;

  int layer_count() const { return static_cast<int>(layers.size()); }

  std::size_t input_width() const;
  // activation width at insertion point l (l = -1 gives the input width)
  std::size_t width_at(int l) const;

  void check_layer_index(int l) const;
};

// Dense stack: widths[0] is the input width; each subsequent width adds a
// dense+relu layer except the last, which is a plain dense projection
// followed by an l2-normalize layer. Weights uniform in [-a, a] with
// a = sqrt(6 / (fan_in + fan_out)); biases zero.
LayeredEncoder init_params(const std::vector<std::size_t>& widths, std::uint64_t seed);

// Per-step parameter bindings into a graph. Rebuilt with the graph each step.
struct BoundEncoder {
  const LayeredEncoder* encoder = nullptr;
  std::vector<Var> weights;  // invalid Var for parameter-free layers
  std::vector<Var> biases;
};

BoundEncoder bind(Graph& g, const LayeredEncoder& enc);

Var forward_layer(const BoundEncoder& b, Var x, int layer);
// applies layers 0..l inclusive; l = -1 returns x unchanged
Var forward_to(const BoundEncoder& b, Var x, int l);
// applies layers l+1..L-1; l = L-1 returns h unchanged
Var forward_from(const BoundEncoder& b, Var h, int l);
Var forward_all(const BoundEncoder& b, Var x);

// Detached full/partial forward for evaluation paths.
Tensor forward_eval(const LayeredEncoder& enc, const Tensor& x);
Tensor forward_to_eval(const LayeredEncoder& enc, const Tensor& x, int l);

enum class FreezeMode { None, Before, After };

// before: freezes layers 0..l; after: freezes l+1..L-1. (before, -1) and
// (after, L-1) freeze nothing.
void set_freeze(LayeredEncoder& enc, FreezeMode mode, int l);

// ---- "DAUG" tensor container ----------------------------------------------
// magic "DAUG" | u32 LE version | u32 LE tensor count | per tensor:
// u16 LE name length, UTF-8 name, u8 rank, u32 LE dims, raw f32 LE payload.

inline constexpr std::uint32_t kCheckpointVersion = 1;

using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

void write_tensor_file(const std::string& path, const NamedTensors& tensors);
NamedTensors read_tensor_file(const std::string& path);

void save_checkpoint(const LayeredEncoder& enc, const std::string& path);
LayeredEncoder load_checkpoint(const std::string& path);

}  // namespace daug
