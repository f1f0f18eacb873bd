#include "daug/graph.hpp"

#include <cmath>
#include <cstring>
#include <string>

namespace daug {

namespace {

[[noreturn]] void shape_fail(const char* op, const Tensor& a, const Tensor& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + a.shape_str() +
                   " and " + b.shape_str());
}

void require_rank2(const char* op, const Tensor& t) {
  if (t.rank() != 2)
    throw ShapeError(std::string(op) + ": expected rank-2 tensor, got " + t.shape_str());
}

void check_same_graph(const char* op, Var a, Var b) {
  if (a.graph == nullptr || a.graph != b.graph)
    throw ContractError(std::string(op) + ": operands belong to different graphs");
}

}  // namespace

int Graph::push(Node n) {
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

Var Graph::leaf(Tensor value) {
  Node n;
  n.op = Op::Leaf;
  n.value = std::move(value);
  return Var{this, push(std::move(n))};
}

Var matmul(Var a, Var b) {
  check_same_graph("matmul", a, b);
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  require_rank2("matmul", A);
  require_rank2("matmul", B);
  if (A.cols() != B.rows()) shape_fail("matmul", A, B);
  const std::size_t m = A.rows(), k = A.cols(), n = B.cols();
  Tensor C({m, n});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < k; ++p) {
      const float av = A(i, p);
      for (std::size_t j = 0; j < n; ++j) C(i, j) += av * B(p, j);
    }
  Graph::Node node;
  node.op = Op::MatMul;
  node.a = a.id;
  node.b = b.id;
  node.value = std::move(C);
  return Var{a.graph, a.graph->push(std::move(node))};
}

Var matmul_nt(Var a, Var b) {
  check_same_graph("matmul_nt", a, b);
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  require_rank2("matmul_nt", A);
  require_rank2("matmul_nt", B);
  if (A.cols() != B.cols()) shape_fail("matmul_nt", A, B);
  const std::size_t m = A.rows(), k = A.cols(), n = B.rows();
  Tensor C({m, n});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      float acc = 0.0f;
      for (std::size_t p = 0; p < k; ++p) acc += A(i, p) * B(j, p);
      C(i, j) = acc;
    }
  Graph::Node node;
  node.op = Op::MatMulNT;
  node.a = a.id;
  node.b = b.id;
  node.value = std::move(C);
  return Var{a.graph, a.graph->push(std::move(node))};
}

Var add(Var a, Var b) {
  check_same_graph("add", a, b);
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  Graph::Node node;
  node.a = a.id;
  node.b = b.id;
  if (A.same_shape(B)) {
    node.op = Op::Add;
    Tensor C = A;
    for (std::size_t i = 0; i < C.size(); ++i) C.data[i] += B.data[i];
    node.value = std::move(C);
  } else if (A.rank() == 2 && B.rank() == 1 && B.shape[0] == A.cols()) {
    node.op = Op::AddBias;
    Tensor C = A;
    for (std::size_t r = 0; r < A.rows(); ++r)
      for (std::size_t c = 0; c < A.cols(); ++c) C(r, c) += B(c);
    node.value = std::move(C);
  } else {
    shape_fail("add", A, B);
  }
  return Var{a.graph, a.graph->push(std::move(node))};
}

Var add_col_broadcast(Var a, Var b) {
  check_same_graph("add_col_broadcast", a, b);
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  require_rank2("add_col_broadcast", A);
  if (B.rank() != 2 || B.rows() != A.rows() || B.cols() != 1)
    shape_fail("add_col_broadcast", A, B);
  Tensor C = A;
  for (std::size_t r = 0; r < A.rows(); ++r)
    for (std::size_t c = 0; c < A.cols(); ++c) C(r, c) += B(r, 0);
  Graph::Node node;
  node.op = Op::AddCol;
  node.a = a.id;
  node.b = b.id;
  node.value = std::move(C);
  return Var{a.graph, a.graph->push(std::move(node))};
}

Var mul(Var a, Var b) {
  check_same_graph("mul", a, b);
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  if (!A.same_shape(B)) shape_fail("mul", A, B);
  Tensor C = A;
  for (std::size_t i = 0; i < C.size(); ++i) C.data[i] *= B.data[i];
  Graph::Node node;
  node.op = Op::Mul;
  node.a = a.id;
  node.b = b.id;
  node.value = std::move(C);
  return Var{a.graph, a.graph->push(std::move(node))};
}

Var relu(Var a) {
  Tensor C = a.value();
  for (float& v : C.data) v = v > 0.0f ? v : 0.0f;
  Graph::Node node;
  node.op = Op::Relu;
  node.a = a.id;
  node.value = std::move(C);
  return Var{a.graph, a.graph->push(std::move(node))};
}

Var mean(Var a) {
  const Tensor& A = a.value();
  if (A.size() == 0) throw ContractError("mean: empty tensor");
  float acc = 0.0f;
  for (float v : A.data) acc += v;
  Graph::Node node;
  node.op = Op::Mean;
  node.a = a.id;
  node.value = Tensor::scalar(acc / static_cast<float>(A.size()));
  return Var{a.graph, a.graph->push(std::move(node))};
}

Var sum(Var a) {
  float acc = 0.0f;
  for (float v : a.value().data) acc += v;
  Graph::Node node;
  node.op = Op::Sum;
  node.a = a.id;
  node.value = Tensor::scalar(acc);
  return Var{a.graph, a.graph->push(std::move(node))};
}

Var row_sum(Var a) {
  const Tensor& A = a.value();
  require_rank2("row_sum", A);
  Tensor C({A.rows(), 1});
  for (std::size_t r = 0; r < A.rows(); ++r) {
    float acc = 0.0f;
    for (std::size_t c = 0; c < A.cols(); ++c) acc += A(r, c);
    C(r, 0) = acc;
  }
  Graph::Node node;
  node.op = Op::RowSum;
  node.a = a.id;
  node.value = std::move(C);
  return Var{a.graph, a.graph->push(std::move(node))};
}

Var scale(Var a, float c) {
  Tensor C = a.value();
  for (float& v : C.data) v *= c;
  Graph::Node node;
  node.op = Op::Scale;
  node.a = a.id;
  node.c = c;
  node.value = std::move(C);
  return Var{a.graph, a.graph->push(std::move(node))};
}

Var exp(Var a) {
  Tensor C = a.value();
  for (float& v : C.data) v = std::exp(v);
  Graph::Node node;
  node.op = Op::Exp;
  node.a = a.id;
  node.value = std::move(C);
  return Var{a.graph, a.graph->push(std::move(node))};
}

Var log(Var a) {
  Tensor C = a.value();
  for (float& v : C.data) {
    if (v <= 0.0f) throw ContractError("log: non-positive input " + std::to_string(v));
    v = std::log(v);
  }
  Graph::Node node;
  node.op = Op::Log;
  node.a = a.id;
  node.value = std::move(C);
  return Var{a.graph, a.graph->push(std::move(node))};
}

Var l2_normalize_rows(Var a) {
  const Tensor& A = a.value();
  require_rank2("l2_normalize_rows", A);
  Tensor C = A;
  for (std::size_t r = 0; r < A.rows(); ++r) {
    float sq = 0.0f;
    for (std::size_t c = 0; c < A.cols(); ++c) sq += A(r, c) * A(r, c);
    if (sq == 0.0f)
      throw ContractError("l2_normalize_rows: zero row " + std::to_string(r));
    const float inv = 1.0f / std::sqrt(sq);
    for (std::size_t c = 0; c < A.cols(); ++c) C(r, c) *= inv;
  }
  Graph::Node node;
  node.op = Op::L2NormalizeRows;
  node.a = a.id;
  node.value = std::move(C);
  return Var{a.graph, a.graph->push(std::move(node))};
}

Var concat_rows(Var a, Var b) {
  check_same_graph("concat_rows", a, b);
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  require_rank2("concat_rows", A);
  require_rank2("concat_rows", B);
  if (A.cols() != B.cols()) shape_fail("concat_rows", A, B);
  Tensor C({A.rows() + B.rows(), A.cols()});
  std::memcpy(C.data.data(), A.data.data(), A.size() * sizeof(float));
  std::memcpy(C.data.data() + A.size(), B.data.data(), B.size() * sizeof(float));
  Graph::Node node;
  node.op = Op::ConcatRows;
  node.a = a.id;
  node.b = b.id;
  node.value = std::move(C);
  return Var{a.graph, a.graph->push(std::move(node))};
}

Var slice_rows(Var a, std::size_t start, std::size_t count) {
  const Tensor& A = a.value();
  require_rank2("slice_rows", A);
  if (start + count > A.rows())
    throw ShapeError("slice_rows: range [" + std::to_string(start) + ", " +
                     std::to_string(start + count) + ") exceeds " + A.shape_str());
  Tensor C({count, A.cols()});
  std::memcpy(C.data.data(), A.data.data() + start * A.cols(),
              count * A.cols() * sizeof(float));
  Graph::Node node;
  node.op = Op::SliceRows;
  node.a = a.id;
  node.start = start;
  node.value = std::move(C);
  return Var{a.graph, a.graph->push(std::move(node))};
}

Var stop_gradient(Var a, const std::vector<std::uint8_t>& row_mask) {
  const Tensor& A = a.value();
  require_rank2("stop_gradient", A);
  if (row_mask.size() != A.rows())
    throw ShapeError("stop_gradient: mask length " + std::to_string(row_mask.size()) +
                     " does not match batch size " + std::to_string(A.rows()));
  Graph::Node node;
  node.op = Op::StopGrad;
  node.a = a.id;
  node.value = A;  // forward is the identity, bit-exact
  node.row_mask = row_mask;
  return Var{a.graph, a.graph->push(std::move(node))};
}

GradMap Graph::backward(const Var& root) const {
  if (root.graph != this || root.id < 0 ||
      root.id >= static_cast<int>(nodes_.size()))
    throw ContractError("backward: root does not belong to this graph");
  if (!nodes_[static_cast<std::size_t>(root.id)].value.is_scalar())
    throw ContractError("backward: root must be scalar-shaped, got " +
                        nodes_[static_cast<std::size_t>(root.id)].value.shape_str());

  const std::size_t n = nodes_.size();
  std::vector<char> reach(n, 0);
  reach[static_cast<std::size_t>(root.id)] = 1;
  for (int i = root.id; i >= 0; --i) {
    if (!reach[static_cast<std::size_t>(i)]) continue;
    const Node& nd = nodes_[static_cast<std::size_t>(i)];
    if (nd.a >= 0) reach[static_cast<std::size_t>(nd.a)] = 1;
    if (nd.b >= 0) reach[static_cast<std::size_t>(nd.b)] = 1;
  }

  std::vector<Tensor> grad(n);
  auto acc = [&](int id, const Tensor& g) {
    Tensor& t = grad[static_cast<std::size_t>(id)];
    if (t.size() == 0) {
      t = g;
    } else {
      for (std::size_t i = 0; i < t.size(); ++i) t.data[i] += g.data[i];
    }
  };

  grad[static_cast<std::size_t>(root.id)] =
      Tensor::ones(nodes_[static_cast<std::size_t>(root.id)].value.shape);

  for (int i = root.id; i >= 0; --i) {
    if (!reach[static_cast<std::size_t>(i)]) continue;
    const Node& nd = nodes_[static_cast<std::size_t>(i)];
    if (nd.op == Op::Leaf) continue;
    if (grad[static_cast<std::size_t>(i)].size() == 0)
      grad[static_cast<std::size_t>(i)] = Tensor(nd.value.shape);
    const Tensor& G = grad[static_cast<std::size_t>(i)];

    switch (nd.op) {
      case Op::MatMul: {
        const Tensor& A = nodes_[static_cast<std::size_t>(nd.a)].value;
        const Tensor& B = nodes_[static_cast<std::size_t>(nd.b)].value;
        const std::size_t m = A.rows(), k = A.cols(), c = B.cols();
        Tensor dA({m, k});
        for (std::size_t r = 0; r < m; ++r)
          for (std::size_t j = 0; j < c; ++j) {
            const float gv = G(r, j);
            for (std::size_t p = 0; p < k; ++p) dA(r, p) += gv * B(p, j);
          }
        Tensor dB({k, c});
        for (std::size_t r = 0; r < m; ++r)
          for (std::size_t p = 0; p < k; ++p) {
            const float av = A(r, p);
            for (std::size_t j = 0; j < c; ++j) dB(p, j) += av * G(r, j);
          }
        acc(nd.a, dA);
        acc(nd.b, dB);
        break;
      }
      case Op::MatMulNT: {
        const Tensor& A = nodes_[static_cast<std::size_t>(nd.a)].value;
        const Tensor& B = nodes_[static_cast<std::size_t>(nd.b)].value;
        const std::size_t m = A.rows(), k = A.cols(), c = B.rows();
        Tensor dA({m, k});
        for (std::size_t r = 0; r < m; ++r)
          for (std::size_t j = 0; j < c; ++j) {
            const float gv = G(r, j);
            for (std::size_t p = 0; p < k; ++p) dA(r, p) += gv * B(j, p);
          }
        Tensor dB({c, k});
        for (std::size_t r = 0; r < m; ++r)
          for (std::size_t j = 0; j < c; ++j) {
            const float gv = G(r, j);
            for (std::size_t p = 0; p < k; ++p) dB(j, p) += gv * A(r, p);
          }
        acc(nd.a, dA);
        acc(nd.b, dB);
        break;
      }
      case Op::Add: {
        acc(nd.a, G);
        acc(nd.b, G);
        break;
      }
      case Op::AddBias: {
        acc(nd.a, G);
        const Tensor& B = nodes_[static_cast<std::size_t>(nd.b)].value;
        Tensor dB(B.shape);
        for (std::size_t r = 0; r < G.rows(); ++r)
          for (std::size_t c = 0; c < G.cols(); ++c) dB(c) += G(r, c);
        acc(nd.b, dB);
        break;
      }
      case Op::AddCol: {
        acc(nd.a, G);
        Tensor dB({G.rows(), 1});
        for (std::size_t r = 0; r < G.rows(); ++r)
          for (std::size_t c = 0; c < G.cols(); ++c) dB(r, 0) += G(r, c);
        acc(nd.b, dB);
        break;
      }
      case Op::Mul: {
        const Tensor& A = nodes_[static_cast<std::size_t>(nd.a)].value;
        const Tensor& B = nodes_[static_cast<std::size_t>(nd.b)].value;
        Tensor dA = G;
        for (std::size_t j = 0; j < dA.size(); ++j) dA.data[j] *= B.data[j];
        Tensor dB = G;
        for (std::size_t j = 0; j < dB.size(); ++j) dB.data[j] *= A.data[j];
        acc(nd.a, dA);
        acc(nd.b, dB);
        break;
      }
      case Op::Relu: {
        const Tensor& A = nodes_[static_cast<std::size_t>(nd.a)].value;
        Tensor dA = G;
        // subgradient 0 at the kink
        for (std::size_t j = 0; j < dA.size(); ++j)
          if (A.data[j] <= 0.0f) dA.data[j] = 0.0f;
        acc(nd.a, dA);
        break;
      }
      case Op::Mean: {
        const Tensor& A = nodes_[static_cast<std::size_t>(nd.a)].value;
        const float gv = G.data[0] / static_cast<float>(A.size());
        acc(nd.a, Tensor::full(A.shape, gv));
        break;
      }
      case Op::Sum: {
        const Tensor& A = nodes_[static_cast<std::size_t>(nd.a)].value;
        acc(nd.a, Tensor::full(A.shape, G.data[0]));
        break;
      }
      case Op::RowSum: {
        const Tensor& A = nodes_[static_cast<std::size_t>(nd.a)].value;
        Tensor dA(A.shape);
        for (std::size_t r = 0; r < A.rows(); ++r)
          for (std::size_t c = 0; c < A.cols(); ++c) dA(r, c) = G(r, 0);
        acc(nd.a, dA);
        break;
      }
      case Op::Scale: {
        Tensor dA = G;
        for (float& v : dA.data) v *= nd.c;
        acc(nd.a, dA);
        break;
      }
      case Op::Exp: {
        Tensor dA = G;
        for (std::size_t j = 0; j < dA.size(); ++j) dA.data[j] *= nd.value.data[j];
        acc(nd.a, dA);
        break;
      }
      case Op::Log: {
        const Tensor& A = nodes_[static_cast<std::size_t>(nd.a)].value;
        Tensor dA = G;
        for (std::size_t j = 0; j < dA.size(); ++j) dA.data[j] /= A.data[j];
        acc(nd.a, dA);
        break;
      }
      case Op::L2NormalizeRows: {
        const Tensor& A = nodes_[static_cast<std::size_t>(nd.a)].value;
        const Tensor& Y = nd.value;
        Tensor dA(A.shape);
        for (std::size_t r = 0; r < A.rows(); ++r) {
          float sq = 0.0f;
          for (std::size_t c = 0; c < A.cols(); ++c) sq += A(r, c) * A(r, c);
          const float inv = 1.0f / std::sqrt(sq);
          float dot = 0.0f;
          for (std::size_t c = 0; c < A.cols(); ++c) dot += G(r, c) * Y(r, c);
          for (std::size_t c = 0; c < A.cols(); ++c)
            dA(r, c) = (G(r, c) - dot * Y(r, c)) * inv;
        }
        acc(nd.a, dA);
        break;
      }
      case Op::ConcatRows: {
        const Tensor& A = nodes_[static_cast<std::size_t>(nd.a)].value;
        const Tensor& B = nodes_[static_cast<std::size_t>(nd.b)].value;
        Tensor dA(A.shape);
        Tensor dB(B.shape);
        std::memcpy(dA.data.data(), G.data.data(), A.size() * sizeof(float));
        std::memcpy(dB.data.data(), G.data.data() + A.size(), B.size() * sizeof(float));
        acc(nd.a, dA);
        acc(nd.b, dB);
        break;
      }
      case Op::SliceRows: {
        const Tensor& A = nodes_[static_cast<std::size_t>(nd.a)].value;
        Tensor dA(A.shape);
        std::memcpy(dA.data.data() + nd.start * A.cols(), G.data.data(),
                    G.size() * sizeof(float));
        acc(nd.a, dA);
        break;
      }
      case Op::StopGrad: {
        Tensor dA = G;
        for (std::size_t r = 0; r < dA.rows(); ++r)
          if (nd.row_mask[r])
            for (std::size_t c = 0; c < dA.cols(); ++c) dA(r, c) = 0.0f;
        acc(nd.a, dA);
        break;
      }
      case Op::Leaf:
        break;
    }
  }

  GradMap out;
  for (std::size_t i = 0; i < n; ++i) {
    if (!reach[i]) continue;
    if (grad[i].size() == 0) grad[i] = Tensor(nodes_[i].value.shape);
    out.emplace(static_cast<int>(i), std::move(grad[i]));
  }
  return out;
}

double Graph::replay_scalar_f64(int root_id, int leaf_id, const Tensor& leaf_value) const {
  if (root_id < 0 || root_id >= static_cast<int>(nodes_.size()))
    throw ContractError("replay: bad root id");
  if (!nodes_[static_cast<std::size_t>(root_id)].value.is_scalar())
    throw ContractError("replay: root must be scalar-shaped");

  std::vector<std::vector<double>> vals(static_cast<std::size_t>(root_id) + 1);
  for (int i = 0; i <= root_id; ++i) {
    const Node& nd = nodes_[static_cast<std::size_t>(i)];
    const std::size_t sz = nd.value.size();
    std::vector<double>& out = vals[static_cast<std::size_t>(i)];
    out.resize(sz);
    auto in_a = [&]() -> const std::vector<double>& {
      return vals[static_cast<std::size_t>(nd.a)];
    };
    auto in_b = [&]() -> const std::vector<double>& {
      return vals[static_cast<std::size_t>(nd.b)];
    };
    auto shape_a = [&]() -> const Tensor& {
      return nodes_[static_cast<std::size_t>(nd.a)].value;
    };
    switch (nd.op) {
      case Op::Leaf: {
        const Tensor& src = (i == leaf_id) ? leaf_value : nd.value;
        if (src.size() != sz) throw ContractError("replay: leaf shape mismatch");
        for (std::size_t j = 0; j < sz; ++j) out[j] = src.data[j];
        break;
      }
      case Op::MatMul: {
        const Tensor& A = shape_a();
        const std::size_t m = A.rows(), k = A.cols(), c = nd.value.cols();
        std::fill(out.begin(), out.end(), 0.0);
        for (std::size_t r = 0; r < m; ++r)
          for (std::size_t p = 0; p < k; ++p) {
            const double av = in_a()[r * k + p];
            for (std::size_t j = 0; j < c; ++j) out[r * c + j] += av * in_b()[p * c + j];
          }
        break;
      }
      case Op::MatMulNT: {
        const Tensor& A = shape_a();
        const std::size_t m = A.rows(), k = A.cols(), c = nd.value.cols();
        for (std::size_t r = 0; r < m; ++r)
          for (std::size_t j = 0; j < c; ++j) {
            double acc = 0.0;
            for (std::size_t p = 0; p < k; ++p) acc += in_a()[r * k + p] * in_b()[j * k + p];
            out[r * c + j] = acc;
          }
        break;
      }
      case Op::Add:
        for (std::size_t j = 0; j < sz; ++j) out[j] = in_a()[j] + in_b()[j];
        break;
      case Op::AddBias: {
        const std::size_t c = nd.value.cols();
        for (std::size_t j = 0; j < sz; ++j) out[j] = in_a()[j] + in_b()[j % c];
        break;
      }
      case Op::AddCol: {
        const std::size_t c = nd.value.cols();
        for (std::size_t j = 0; j < sz; ++j) out[j] = in_a()[j] + in_b()[j / c];
        break;
      }
      case Op::Mul:
        for (std::size_t j = 0; j < sz; ++j) out[j] = in_a()[j] * in_b()[j];
        break;
      case Op::Relu:
        for (std::size_t j = 0; j < sz; ++j) out[j] = in_a()[j] > 0.0 ? in_a()[j] : 0.0;
        break;
      case Op::Mean: {
        double acc = 0.0;
        for (double v : in_a()) acc += v;
        out[0] = acc / static_cast<double>(in_a().size());
        break;
      }
      case Op::Sum: {
        double acc = 0.0;
        for (double v : in_a()) acc += v;
        out[0] = acc;
        break;
      }
      case Op::RowSum: {
        const std::size_t c = shape_a().cols();
        for (std::size_t r = 0; r < sz; ++r) {
          double acc = 0.0;
          for (std::size_t j = 0; j < c; ++j) acc += in_a()[r * c + j];
          out[r] = acc;
        }
        break;
      }
      case Op::Scale:
        for (std::size_t j = 0; j < sz; ++j) out[j] = in_a()[j] * static_cast<double>(nd.c);
        break;
      case Op::Exp:
        for (std::size_t j = 0; j < sz; ++j) out[j] = std::exp(in_a()[j]);
        break;
      case Op::Log:
        for (std::size_t j = 0; j < sz; ++j) out[j] = std::log(in_a()[j]);
        break;
      case Op::L2NormalizeRows: {
        const std::size_t c = nd.value.cols();
        for (std::size_t r = 0; r < nd.value.rows(); ++r) {
          double sq = 0.0;
          for (std::size_t j = 0; j < c; ++j) sq += in_a()[r * c + j] * in_a()[r * c + j];
          const double inv = 1.0 / std::sqrt(sq);
          for (std::size_t j = 0; j < c; ++j) out[r * c + j] = in_a()[r * c + j] * inv;
        }
        break;
      }
      case Op::ConcatRows: {
        const std::size_t na = in_a().size();
        for (std::size_t j = 0; j < na; ++j) out[j] = in_a()[j];
        for (std::size_t j = 0; j < in_b().size(); ++j) out[na + j] = in_b()[j];
        break;
      }
      case Op::SliceRows: {
        const std::size_t c = nd.value.cols();
        for (std::size_t j = 0; j < sz; ++j) out[j] = in_a()[nd.start * c + j];
        break;
      }
      case Op::StopGrad:
        out = in_a();
        break;
    }
  }
  return vals[static_cast<std::size_t>(root_id)][0];
}

double grad_check(const std::function<Var(Graph&, Var)>& f, const Tensor& x,
                  double eps) {
  if (eps <= 0.0) throw ContractError("grad_check: eps must be positive");

  auto eval = [&](const Tensor& xt) {
    Graph g;
    Var xv = g.leaf(xt);
    Var out = f(g, xv);
    if (!out.value().is_scalar())
      throw ContractError("grad_check: f must be scalar-valued, got " +
                          out.value().shape_str());
    return static_cast<double>(out.value().data[0]);
  };

  if (eval(x) != eval(x))
    throw ContractError("grad_check: f is not deterministic");
  {
    // bitwise determinism check on a second pair of evaluations
    const double a = eval(x), b = eval(x);
    if (std::memcmp(&a, &b, sizeof(double)) != 0)
      throw ContractError("grad_check: f is not deterministic");
  }

  Graph g;
  Var xv = g.leaf(x);
  Var out = f(g, xv);
  GradMap grads = g.backward(out);
  const Tensor& analytic = grads.at(xv.id);

  // Central differences replay the recorded tape in 64-bit so f32 forward
  // rounding cannot swamp the eps-sized signal.
  double worst = 0.0;
  Tensor xp = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const float orig = x.data[i];
    xp.data[i] = static_cast<float>(orig + eps);
    const double fp = g.replay_scalar_f64(out.id, xv.id, xp);
    xp.data[i] = static_cast<float>(orig - eps);
    const double fm = g.replay_scalar_f64(out.id, xv.id, xp);
    xp.data[i] = orig;
    const double numeric = (fp - fm) / (2.0 * eps);
    const double a = analytic.data[i];
    const double err = std::abs(a - numeric) /
                       std::max(1e-8, std::abs(a) + std::abs(numeric));
    if (err > worst) worst = err;
  }
  return worst;
}

}  // namespace daug
