#pragma once

#include "daug/graph.hpp"
#include "daug/tensor.hpp"

namespace daug {

float cosine_sim(const Tensor& u, const Tensor& v);

struct InfoNceOptions {
  float tau = 0.5f;
  bool symmetric = false;  // also add the view-swapped term, averaged
};

// -(1/B) sum_i log[ exp(sim(h1_i,h2_i)/tau) / sum_j exp(sim(h1_i,h2_j)/tau) ]
// with a max-shifted log-sum-exp. Rows are l2-normalized internally so sim
// is exact cosine; differentiable through both views.
Var info_nce(Var h1, Var h2, const InfoNceOptions& opt = {});

}  // namespace daug
