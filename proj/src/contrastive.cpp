#include "daug/contrastive.hpp"

#include <cmath>
#include <string>

namespace daug {

float cosine_sim(const Tensor& u, const Tensor& v) {
  if (!u.same_shape(v))
    throw ShapeError("cosine_sim: shapes " + u.shape_str() + " and " + v.shape_str());
  double dot = 0.0, nu = 0.0, nv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += static_cast<double>(u.data[i]) * v.data[i];
    nu += static_cast<double>(u.data[i]) * u.data[i];
    nv += static_cast<double>(v.data[i]) * v.data[i];
  }
  if (nu == 0.0 || nv == 0.0) throw ContractError("cosine_sim: zero vector");
  return static_cast<float>(dot / (std::sqrt(nu) * std::sqrt(nv)));
}

namespace {

// one direction of the loss: anchors from `a`, negatives from `b`
Var info_nce_direction(Var a, Var b, float tau) {
  Graph* g = a.graph;
  const std::size_t B = a.value().rows();

  Var sims = scale(matmul_nt(l2_normalize_rows(a), l2_normalize_rows(b)), 1.0f / tau);

  // positives are the diagonal; extracted via a constant identity mask
  Tensor eye({B, B});
  for (std::size_t i = 0; i < B; ++i) eye(i, i) = 1.0f;
  Var pos = row_sum(mul(sims, g->leaf(std::move(eye))));

  // row-max shift, held constant through backward (the shift cancels)
  Tensor shift({B, 1});
  const Tensor& S = sims.value();
  for (std::size_t i = 0; i < B; ++i) {
    float m = S(i, 0);
    for (std::size_t j = 1; j < B; ++j) m = std::max(m, S(i, j));
    shift(i, 0) = m;
  }
  Var m = g->leaf(shift);
  Var lse = add(log(row_sum(exp(add_col_broadcast(sims, scale(m, -1.0f))))), m);
  return mean(add(lse, scale(pos, -1.0f)));
}

}  // namespace

Var info_nce(Var h1, Var h2, const InfoNceOptions& opt) {
  if (!(opt.tau > 0.0f))
    throw ContractError("info_nce: tau must be positive, got " + std::to_string(opt.tau));
  const Tensor& A = h1.value();
  const Tensor& B = h2.value();
  if (A.rank() != 2 || !A.same_shape(B))
    throw ShapeError("info_nce: views must be equal rank-2 shapes, got " +
                     A.shape_str() + " and " + B.shape_str());
  if (A.rows() < 1) throw ContractError("info_nce: batch must be non-empty");

  Var loss = info_nce_direction(h1, h2, opt.tau);
  if (opt.symmetric)
    loss = scale(add(loss, info_nce_direction(h2, h1, opt.tau)), 0.5f);
  return loss;
}

}  // namespace daug
