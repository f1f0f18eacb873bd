#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace daug {

class ShapeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ContractError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Dense row-major f32 tensor. Differentiable quantities get a node id by
// entering a Graph; a plain Tensor is detached and immutable by convention
// once shared.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<float> data;

  Tensor() = default;

  explicit Tensor(std::vector<std::size_t> s)
      : shape(std::move(s)), data(count(shape), 0.0f) {}

  Tensor(std::vector<std::size_t> s, std::vector<float> d)
      : shape(std::move(s)), data(std::move(d)) {
    if (count(shape) != data.size())
      throw ShapeError("tensor: shape " + shape_str() + " does not match " +
                       std::to_string(data.size()) + " elements");
  }

  static std::size_t count(const std::vector<std::size_t>& s) {
    std::size_t n = 1;
    for (std::size_t d : s) n *= d;
    return s.empty() ? 0 : n;
  }

  static Tensor scalar(float v) { return Tensor({1}, {v}); }

  static Tensor full(std::vector<std::size_t> s, float v) {
    Tensor t(std::move(s));
    for (float& x : t.data) x = v;
    return t;
  }

  static Tensor ones(std::vector<std::size_t> s) { return full(std::move(s), 1.0f); }

  std::size_t size() const { return data.size(); }
  std::size_t rank() const { return shape.size(); }
  bool is_scalar() const { return size() == 1; }

  std::size_t rows() const {
    if (rank() != 2) throw ShapeError("rows(): tensor " + shape_str() + " is not rank 2");
    return shape[0];
  }
  std::size_t cols() const {
    if (rank() != 2) throw ShapeError("cols(): tensor " + shape_str() + " is not rank 2");
    return shape[1];
  }

  float& operator()(std::size_t i) { return data[i]; }
  float operator()(std::size_t i) const { return data[i]; }
  float& operator()(std::size_t r, std::size_t c) { return data[r * shape[1] + c]; }
  float operator()(std::size_t r, std::size_t c) const { return data[r * shape[1] + c]; }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  bool all_finite() const {
    for (float v : data)
      if (!std::isfinite(v)) return false;
    return true;
  }

  std::string shape_str() const {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
      if (i) s += "x";
      s += std::to_string(shape[i]);
    }
    return s + "]";
  }
};

}  // namespace daug
