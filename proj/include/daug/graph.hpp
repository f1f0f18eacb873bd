#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <unordered_map>
#include <vector>

#include "daug/tensor.hpp"

namespace daug {

// Tape-style reverse-mode autodiff over dense f32 tensors. A Graph is built
// fresh for every training step and discarded afterwards; forward values are
// cached on the tape for backward. Node ids are topologically ordered by
// construction (inputs always have smaller ids).

enum class Op : std::uint8_t {
  Leaf,
  MatMul,       // [m×k]·[k×n] -> [m×n]
  MatMulNT,     // [m×k]·[n×k]^T -> [m×n]
  Add,          // same shape
  AddBias,      // [B×d] + [d], broadcast over the batch dim
  AddCol,       // [B×d] + [B×1], broadcast across columns
  Mul,          // elementwise, same shape
  Relu,
  Mean,         // full reduction -> [1]
  Sum,          // full reduction -> [1]
  RowSum,       // [B×d] -> [B×1]
  Scale,
  Exp,
  Log,
  L2NormalizeRows,
  ConcatRows,
  SliceRows,
  StopGrad,
};

struct Var;
using GradMap = std::unordered_map<int, Tensor>;

class Graph {
 public:
  Var leaf(Tensor value);

  const Tensor& value(int id) const { return nodes_.at(static_cast<std::size_t>(id)).value; }
  std::size_t node_count() const { return nodes_.size(); }

  // root must be scalar-shaped. Returns gradients for every ancestor of
  // root; nodes not feeding root are absent from the map.
  GradMap backward(const Var& root) const;

  // Replays the recorded tape up to root in 64-bit arithmetic, substituting
  // `leaf_value` for the given leaf. The finite-difference oracle runs on
  // this so f32 forward noise cannot swamp eps-sized differences.
  double replay_scalar_f64(int root_id, int leaf_id, const Tensor& leaf_value) const;

 private:
  struct Node {
    Op op = Op::Leaf;
    int a = -1;
    int b = -1;
    Tensor value;
    float c = 0.0f;               // Scale factor
    std::size_t start = 0;        // SliceRows
    std::vector<std::uint8_t> row_mask;  // StopGrad
  };

  std::vector<Node> nodes_;

  int push(Node n);

  friend Var matmul(Var, Var);
  friend Var matmul_nt(Var, Var);
  friend Var add(Var, Var);
  friend Var add_col_broadcast(Var, Var);
  friend Var mul(Var, Var);
  friend Var relu(Var);
  friend Var mean(Var);
  friend Var sum(Var);
  friend Var row_sum(Var);
  friend Var scale(Var, float);
  friend Var exp(Var);
  friend Var log(Var);
  friend Var l2_normalize_rows(Var);
  friend Var concat_rows(Var, Var);
  friend Var slice_rows(Var, std::size_t, std::size_t);
  friend Var stop_gradient(Var, const std::vector<std::uint8_t>&);
};

struct Var {
  Graph* graph = nullptr;
  int id = -1;

  bool valid() const { return graph != nullptr && id >= 0; }
  const Tensor& value() const { return graph->value(id); }
};

Var matmul(Var a, Var b);
Var matmul_nt(Var a, Var b);
Var add(Var a, Var b);  // same-shape, or bias broadcast [B×d]+[d]
Var add_col_broadcast(Var a, Var b);
Var mul(Var a, Var b);
Var relu(Var a);
Var mean(Var a);
Var sum(Var a);
Var row_sum(Var a);
Var scale(Var a, float c);
Var exp(Var a);
Var log(Var a);
Var l2_normalize_rows(Var a);
Var concat_rows(Var a, Var b);
Var slice_rows(Var a, std::size_t start, std::size_t count);

// Forward is the identity; backward zeroes gradient rows where the mask is
// true before propagating further down.
Var stop_gradient(Var a, const std::vector<std::uint8_t>& row_mask);

// Max relative error between the analytic gradient of f at x and a central
// finite difference (accumulated in 64-bit). f must be deterministic; two
// differing forward evaluations raise ContractError.
double grad_check(const std::function<Var(Graph&, Var)>& f, const Tensor& x,
                  double eps = 1e-3);

}  // namespace daug
