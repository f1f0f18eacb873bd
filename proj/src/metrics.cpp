#include "daug/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace daug {

namespace {

// column-centered copy in double
std::vector<double> center_columns(const Tensor& X) {
  const std::size_t n = X.rows(), w = X.cols();
  std::vector<double> out(n * w);
  for (std::size_t c = 0; c < w; ++c) {
    double m = 0.0;
    for (std::size_t r = 0; r < n; ++r) m += X(r, c);
    m /= static_cast<double>(n);
    for (std::size_t r = 0; r < n; ++r) out[r * w + c] = X(r, c) - m;
  }
  return out;
}

// ||A^T B||_F^2 for column-centered [n×wa], [n×wb]
double cross_frob_sq(const std::vector<double>& A, std::size_t wa,
                     const std::vector<double>& B, std::size_t wb, std::size_t n) {
  double total = 0.0;
  for (std::size_t i = 0; i < wa; ++i)
    for (std::size_t j = 0; j < wb; ++j) {
      double dot = 0.0;
      for (std::size_t r = 0; r < n; ++r) dot += A[r * wa + i] * B[r * wb + j];
      total += dot * dot;
    }
  return total;
}

void require_normalized_rows(const char* what, const Tensor& f) {
  for (std::size_t r = 0; r < f.rows(); ++r) {
    double sq = 0.0;
    for (std::size_t c = 0; c < f.cols(); ++c) sq += static_cast<double>(f(r, c)) * f(r, c);
    if (std::abs(std::sqrt(sq) - 1.0) > 1e-3)
      throw ContractError(std::string(what) + ": row " + std::to_string(r) +
                          " is not l2-normalized (norm " + std::to_string(std::sqrt(sq)) + ")");
  }
}

}  // namespace

double linear_cka(const Tensor& X, const Tensor& Y) {
  if (X.rank() != 2 || Y.rank() != 2 || X.rows() != Y.rows())
    throw ShapeError("linear_cka: need rank-2 inputs sharing n, got " +
                     X.shape_str() + " and " + Y.shape_str());
  if (X.rows() < 2) throw ContractError("linear_cka: need n >= 2");

  const std::size_t n = X.rows();
  auto Xc = center_columns(X);
  auto Yc = center_columns(Y);
  const double xx = cross_frob_sq(Xc, X.cols(), Xc, X.cols(), n);
  const double yy = cross_frob_sq(Yc, Y.cols(), Yc, Y.cols(), n);
  if (xx <= 0.0 || yy <= 0.0)
    throw DegenerateInputError("linear_cka: zero-variance input (all rows identical)");
  const double xy = cross_frob_sq(Yc, Y.cols(), Xc, X.cols(), n);
  return xy / (std::sqrt(xx) * std::sqrt(yy));
}

std::vector<std::vector<double>> cka_matrix(const std::vector<Tensor>& activations) {
  const std::size_t L = activations.size();
  std::vector<std::vector<double>> out(L, std::vector<double>(L, 0.0));
  for (std::size_t i = 0; i < L; ++i) {
    out[i][i] = 1.0;
    for (std::size_t j = i + 1; j < L; ++j)
      out[i][j] = out[j][i] = linear_cka(activations[i], activations[j]);
  }
  return out;
}

double alignment(const Tensor& f1, const Tensor& f2, double alpha) {
  if (!f1.same_shape(f2) || f1.rank() != 2)
    throw ShapeError("alignment: need equal rank-2 shapes, got " + f1.shape_str() +
                     " and " + f2.shape_str());
  if (f1.rows() < 1) throw ContractError("alignment: need m >= 1");
  if (!(alpha > 0.0)) throw ContractError("alignment: alpha must be positive");
  require_normalized_rows("alignment", f1);
  require_normalized_rows("alignment", f2);

  double acc = 0.0;
  for (std::size_t r = 0; r < f1.rows(); ++r) {
    double sq = 0.0;
    for (std::size_t c = 0; c < f1.cols(); ++c) {
      const double d = static_cast<double>(f1(r, c)) - f2(r, c);
      sq += d * d;
    }
    acc += std::pow(std::sqrt(sq), alpha);
  }
  return acc / static_cast<double>(f1.rows());
}

double uniformity(const Tensor& feats, double t) {
  if (feats.rank() != 2) throw ShapeError("uniformity: need rank-2 input");
  if (feats.rows() < 2) throw ContractError("uniformity: need n >= 2");
  if (!(t > 0.0)) throw ContractError("uniformity: t must be positive");
  require_normalized_rows("uniformity", feats);

  const std::size_t n = feats.rows(), d = feats.cols();
  double acc = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      double sq = 0.0;
      for (std::size_t c = 0; c < d; ++c) {
        const double diff = static_cast<double>(feats(i, c)) - feats(j, c);
        sq += diff * diff;
      }
      acc += std::exp(-t * sq);
      ++pairs;
    }
  return std::log(acc / static_cast<double>(pairs));
}

double linear_probe(const Tensor& features, const std::vector<int>& labels,
                    const std::vector<std::size_t>& train_idx,
                    const std::vector<std::size_t>& val_idx, const ProbeConfig& cfg) {
  if (features.rank() != 2 || labels.size() != features.rows())
    throw ShapeError("linear_probe: features/labels mismatch");

  int k = 0;
  for (int l : labels) k = std::max(k, l + 1);
  {
    int first = labels.at(train_idx.at(0));
    bool multi = false;
    for (std::size_t i : train_idx)
      if (labels[i] != first) multi = true;
    if (!multi) throw ContractError("linear_probe: train split contains a single class");
  }

  const std::size_t d = features.cols();
  const std::size_t n = train_idx.size();
  std::vector<double> W(static_cast<std::size_t>(k) * d, 0.0);
  std::vector<double> b(static_cast<std::size_t>(k), 0.0);
  std::vector<double> logits(static_cast<std::size_t>(k));
  std::vector<double> gW(W.size()), gb(b.size());

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::fill(gW.begin(), gW.end(), 0.0);
    std::fill(gb.begin(), gb.end(), 0.0);
    for (std::size_t i : train_idx) {
      double m = -1e300;
      for (int c = 0; c < k; ++c) {
        double z = b[static_cast<std::size_t>(c)];
        for (std::size_t j = 0; j < d; ++j)
          z += W[static_cast<std::size_t>(c) * d + j] * features(i, j);
        logits[static_cast<std::size_t>(c)] = z;
        m = std::max(m, z);
      }
      double Z = 0.0;
      for (int c = 0; c < k; ++c) Z += std::exp(logits[static_cast<std::size_t>(c)] - m);
      for (int c = 0; c < k; ++c) {
        double p = std::exp(logits[static_cast<std::size_t>(c)] - m) / Z;
        if (c == labels[i]) p -= 1.0;
        p /= static_cast<double>(n);
        gb[static_cast<std::size_t>(c)] += p;
        for (std::size_t j = 0; j < d; ++j)
          gW[static_cast<std::size_t>(c) * d + j] += p * features(i, j);
      }
    }
    for (std::size_t j = 0; j < W.size(); ++j) W[j] -= cfg.lr * gW[j];
    for (std::size_t j = 0; j < b.size(); ++j) b[j] -= cfg.lr * gb[j];
  }

  std::size_t correct = 0;
  for (std::size_t i : val_idx) {
    int best = 0;
    double best_z = -1e300;
    for (int c = 0; c < k; ++c) {
      double z = b[static_cast<std::size_t>(c)];
      for (std::size_t j = 0; j < d; ++j)
        z += W[static_cast<std::size_t>(c) * d + j] * features(i, j);
      if (z > best_z) {
        best_z = z;
        best = c;
      }
    }
    if (best == labels[i]) ++correct;
  }
  if (val_idx.empty()) throw ContractError("linear_probe: empty validation split");
  return static_cast<double>(correct) / static_cast<double>(val_idx.size());
}

}  // namespace daug
