#include "daug/layers.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <set>

#include "daug/rng.hpp"

namespace daug {

std::size_t LayeredEncoder::input_width() const {
  for (const Layer& l : layers)
    if (l.has_params()) return l.weight.cols();
  throw ContractError("encoder has no parametric layer");
}

std::size_t LayeredEncoder::width_at(int l) const {
  check_layer_index(l);
  if (l == -1) return input_width();
  // walk back to the nearest parametric layer at or below l
  for (int i = l; i >= 0; --i)
    if (layers[static_cast<std::size_t>(i)].has_params())
      return layers[static_cast<std::size_t>(i)].weight.rows();
  return input_width();
}

void LayeredEncoder::check_layer_index(int l) const {
  if (l < -1 || l >= layer_count())
    throw std::out_of_range("layer index " + std::to_string(l) +
                            " outside [-1, " + std::to_string(layer_count() - 1) + "]");
}

LayeredEncoder init_params(const std::vector<std::size_t>& widths, std::uint64_t seed) {
  if (widths.size() < 2) throw ContractError("init_params: need input width plus at least one layer");
  for (std::size_t w : widths)
    if (w == 0) throw ContractError("init_params: widths must be positive");

  LayeredEncoder enc;
  for (std::size_t i = 1; i < widths.size(); ++i) {
    const std::size_t fan_in = widths[i - 1];
    const std::size_t fan_out = widths[i];
    Layer layer;
    layer.kind = (i + 1 < widths.size()) ? LayerKind::DenseRelu : LayerKind::Dense;
    layer.weight = Tensor({fan_out, fan_in});
    layer.bias = Tensor({fan_out});
    const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    CounterRng rng(derive_seed(seed, "init_params", {i}));
    for (float& v : layer.weight.data)
      v = static_cast<float>((2.0 * rng.uniform() - 1.0) * a);
    enc.layers.push_back(std::move(layer));
  }
  Layer norm;
  norm.kind = LayerKind::L2Normalize;
  enc.layers.push_back(std::move(norm));
  return enc;
}

BoundEncoder bind(Graph& g, const LayeredEncoder& enc) {
  BoundEncoder b;
  b.encoder = &enc;
  for (const Layer& l : enc.layers) {
    if (l.has_params()) {
      b.weights.push_back(g.leaf(l.weight));
      b.biases.push_back(g.leaf(l.bias));
    } else {
      b.weights.push_back(Var{});
      b.biases.push_back(Var{});
    }
  }
  return b;
}

Var forward_layer(const BoundEncoder& b, Var x, int layer) {
  const Layer& l = b.encoder->layers[static_cast<std::size_t>(layer)];
  switch (l.kind) {
    case LayerKind::Dense:
      return add(matmul_nt(x, b.weights[static_cast<std::size_t>(layer)]),
                 b.biases[static_cast<std::size_t>(layer)]);
    case LayerKind::DenseRelu:
      return relu(add(matmul_nt(x, b.weights[static_cast<std::size_t>(layer)]),
                      b.biases[static_cast<std::size_t>(layer)]));
    case LayerKind::L2Normalize:
      return l2_normalize_rows(x);
  }
  throw ContractError("forward_layer: unknown layer kind");
}

Var forward_to(const BoundEncoder& b, Var x, int l) {
  b.encoder->check_layer_index(l);
  for (int i = 0; i <= l; ++i) x = forward_layer(b, x, i);
  return x;
}

Var forward_from(const BoundEncoder& b, Var h, int l) {
  b.encoder->check_layer_index(l);
  for (int i = l + 1; i < b.encoder->layer_count(); ++i) h = forward_layer(b, h, i);
  return h;
}

Var forward_all(const BoundEncoder& b, Var x) { return forward_from(b, x, -1); }

Tensor forward_to_eval(const LayeredEncoder& enc, const Tensor& x, int l) {
  Graph g;
  BoundEncoder b = bind(g, enc);
  return forward_to(b, g.leaf(x), l).value();
}

Tensor forward_eval(const LayeredEncoder& enc, const Tensor& x) {
  return forward_to_eval(enc, x, enc.layer_count() - 1);
}

void set_freeze(LayeredEncoder& enc, FreezeMode mode, int l) {
  if (mode != FreezeMode::None) enc.check_layer_index(l);
  for (int i = 0; i < enc.layer_count(); ++i) {
    bool f = false;
    if (mode == FreezeMode::Before) f = i <= l;
    if (mode == FreezeMode::After) f = i > l;
    enc.layers[static_cast<std::size_t>(i)].frozen = f;
  }
}

// ---- container io ----------------------------------------------------------

namespace {

template <typename T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));  // little-endian host assumed
}

struct Reader {
  const std::string& bytes;
  std::size_t pos = 0;

  template <typename T>
  T get(const char* what) {
    if (pos + sizeof(T) > bytes.size())
      throw TruncationError(std::string("checkpoint truncated while reading ") + what, pos);
    T v;
    std::memcpy(&v, bytes.data() + pos, sizeof(T));
    pos += sizeof(T);
    return v;
  }

  std::string get_str(std::size_t n, const char* what) {
    if (pos + n > bytes.size())
      throw TruncationError(std::string("checkpoint truncated while reading ") + what, pos);
    std::string s = bytes.substr(pos, n);
    pos += n;
    return s;
  }
};

}  // namespace

void write_tensor_file(const std::string& path, const NamedTensors& tensors) {
  std::set<std::string> seen;
  std::string out;
  out.append("DAUG", 4);
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) {
    if (!seen.insert(name).second)
      throw FormatError("duplicate tensor name '" + name + "'");
    put<std::uint16_t>(out, static_cast<std::uint16_t>(name.size()));
    out.append(name);
    put<std::uint8_t>(out, static_cast<std::uint8_t>(t.rank()));
    for (std::size_t d : t.shape) put<std::uint32_t>(out, static_cast<std::uint32_t>(d));
    out.append(reinterpret_cast<const char*>(t.data.data()), t.size() * sizeof(float));
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw std::runtime_error("write failed for '" + path + "'");
}

NamedTensors read_tensor_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open '" + path + "'");
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

  Reader r{bytes};
  const std::string magic = r.get_str(4, "magic");
  if (magic != "DAUG") throw FormatError("bad magic '" + magic + "', expected 'DAUG'");
  const auto version = r.get<std::uint32_t>("version");
  if (version > kCheckpointVersion)
    throw VersionError("unsupported checkpoint version " + std::to_string(version) +
                       ", max supported is " + std::to_string(kCheckpointVersion));
  const auto count = r.get<std::uint32_t>("tensor count");

  NamedTensors out;
  std::set<std::string> seen;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = r.get<std::uint16_t>("name length");
    std::string name = r.get_str(name_len, "name");
    if (!seen.insert(name).second)
      throw FormatError("duplicate tensor name '" + name + "'");
    const auto rank = r.get<std::uint8_t>("rank");
    std::vector<std::size_t> shape;
    std::size_t n = 1;
    for (std::uint8_t d = 0; d < rank; ++d) {
      const auto dim = r.get<std::uint32_t>("dimension");
      shape.push_back(dim);
      n *= dim;
    }
    Tensor t(shape);
    if (r.pos + n * sizeof(float) > bytes.size())
      throw TruncationError("checkpoint truncated inside payload of '" + name + "'", r.pos);
    std::memcpy(t.data.data(), bytes.data() + r.pos, n * sizeof(float));
    r.pos += n * sizeof(float);
    out.emplace_back(std::move(name), std::move(t));
  }
  return out;
}

void save_checkpoint(const LayeredEncoder& enc, const std::string& path) {
  NamedTensors tensors;
  Tensor arch({static_cast<std::size_t>(enc.layer_count())});
  for (int i = 0; i < enc.layer_count(); ++i)
    arch(static_cast<std::size_t>(i)) =
        static_cast<float>(static_cast<int>(enc.layers[static_cast<std::size_t>(i)].kind));
  tensors.emplace_back("__arch__", std::move(arch));
  for (int i = 0; i < enc.layer_count(); ++i) {
    const Layer& l = enc.layers[static_cast<std::size_t>(i)];
    if (!l.has_params()) continue;
    tensors.emplace_back("layers/" + std::to_string(i) + "/weight", l.weight);
    tensors.emplace_back("layers/" + std::to_string(i) + "/bias", l.bias);
  }
  write_tensor_file(path, tensors);
}

LayeredEncoder load_checkpoint(const std::string& path) {
  NamedTensors tensors = read_tensor_file(path);
  const Tensor* arch = nullptr;
  for (const auto& [name, t] : tensors)
    if (name == "__arch__") arch = &t;
  if (arch == nullptr) throw FormatError("checkpoint is missing the __arch__ tensor");

  LayeredEncoder enc;
  for (std::size_t i = 0; i < arch->size(); ++i) {
    const int kind = static_cast<int>(arch->data[i]);
    if (kind < 0 || kind > 2)
      throw FormatError("unknown layer kind " + std::to_string(kind) +
                        " at layer " + std::to_string(i));
    Layer l;
    l.kind = static_cast<LayerKind>(kind);
    if (l.has_params()) {
      const std::string wname = "layers/" + std::to_string(i) + "/weight";
      const std::string bname = "layers/" + std::to_string(i) + "/bias";
      const Tensor* w = nullptr;
      const Tensor* b = nullptr;
      for (const auto& [name, t] : tensors) {
        if (name == wname) w = &t;
        if (name == bname) b = &t;
      }
      if (w == nullptr || b == nullptr)
        throw FormatError("checkpoint is missing parameters for layer " + std::to_string(i));
      if (w->rank() != 2 || b->rank() != 1 || w->rows() != b->shape[0])
        throw FormatError("inconsistent parameter shapes for layer " + std::to_string(i));
      l.weight = *w;
      l.bias = *b;
    }
    enc.layers.push_back(std::move(l));
  }
  return enc;
}

}  // namespace daug
