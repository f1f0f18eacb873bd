#pragma once

#include <cstdint>
#include <vector>

#include "daug/tensor.hpp"

namespace daug {

class DegenerateInputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Linear CKA between two activation matrices [n × w] sharing n. Both are
// column-centered first; result is ||Y^T X||_F^2 / (||X^T X||_F ||Y^T Y||_F),
// in [0, 1]. Constant input raises DegenerateInputError.
double linear_cka(const Tensor& X, const Tensor& Y);

// Pairwise linear CKA over a layer set; symmetric with unit diagonal.
std::vector<std::vector<double>> cka_matrix(const std::vector<Tensor>& activations);

// (1/m) sum_i ||f1_i - f2_i||^alpha over positive pairs of l2-normalized
// rows; lower is better.
double alignment(const Tensor& f1, const Tensor& f2, double alpha = 2.0);

// log mean over unordered distinct pairs of exp(-t ||f_i - f_j||^2); lower
// is better.
double uniformity(const Tensor& feats, double t = 2.0);

struct ProbeConfig {
  int epochs = 200;
  double lr = 0.1;
};

// Full-batch softmax-regression probe on frozen features: zero-initialized
// single dense layer, gradient descent, returns validation accuracy.
double linear_probe(const Tensor& features, const std::vector<int>& labels,
                    const std::vector<std::size_t>& train_idx,
                    const std::vector<std::size_t>& val_idx,
                    const ProbeConfig& cfg = {});

}  // namespace daug
