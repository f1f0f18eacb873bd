#include "daug/config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace daug {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(key + " must be a boolean, got '" + v + "'");
}

long long parse_int(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    long long r = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("");
    return r;
  } catch (...) {
    throw ConfigError(key + " must be an integer, got '" + v + "'");
  }
}

double parse_float(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    double r = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("");
    return r;
  } catch (...) {
    throw ConfigError(key + " must be a number, got '" + v + "'");
  }
}

std::size_t parse_size(const std::string& key, const std::string& v,
                       std::size_t min_val = 0) {
  long long r = parse_int(key, v);
  if (r < static_cast<long long>(min_val))
    throw ConfigError(key + " must be >= " + std::to_string(min_val) + ", got '" + v + "'");
  return static_cast<std::size_t>(r);
}

std::vector<std::string> split_list(const std::string& v) {
  // "[a, b, c]" -> {"a","b","c"}
  std::string inner = trim(v.substr(1, v.size() - 2));
  std::vector<std::string> out;
  std::stringstream ss(inner);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  return out;
}

const std::set<std::string> kSweepable = {"target_layer", "rate",      "stop_grad",
                                          "batch_fraction", "freeze_mode", "all_layers"};

void apply_key(TrainConfig& cfg, const std::string& key, const std::string& v) {
  if (key == "hidden_widths") {
    if (v.size() < 2 || v.front() != '[' || v.back() != ']')
      throw ConfigError("hidden_widths must be a list like [64,64,64]");
    cfg.hidden_widths.clear();
    for (const std::string& s : split_list(v))
      cfg.hidden_widths.push_back(parse_size(key, s, 1));
    if (cfg.hidden_widths.empty()) throw ConfigError("hidden_widths must be non-empty");
  } else if (key == "proj_dim") {
    cfg.proj_dim = parse_size(key, v, 1);
  } else if (key == "target_layer") {
    cfg.aug.target_layer = static_cast<int>(parse_int(key, v));
  } else if (key == "all_layers") {
    cfg.aug.all_layers = parse_bool(key, v);
  } else if (key == "rate") {
    double r = parse_float(key, v);
    if (!(r >= 0.0 && r < 1.0)) throw ConfigError("rate must be in [0,1), got " + v);
    cfg.aug.rate = static_cast<float>(r);
  } else if (key == "batch_fraction") {
    double r = parse_float(key, v);
    if (!(r >= 0.0 && r <= 1.0))
      throw ConfigError("batch_fraction must be in [0,1], got " + v);
    cfg.aug.batch_fraction = static_cast<float>(r);
  } else if (key == "stop_grad") {
    cfg.aug.stop_grad = parse_bool(key, v);
  } else if (key == "pairing_mode") {
    if (v == "both-views")
      cfg.aug.pairing = PairingMode::BothViews;
    else if (v == "one-sided")
      cfg.aug.pairing = PairingMode::OneSided;
    else
      throw ConfigError("pairing_mode must be both-views or one-sided, got '" + v + "'");
  } else if (key == "input_aug") {
    if (v == "none")
      cfg.aug.input_aug.kind = InputAugKind::None;
    else if (v == "gaussian-noise")
      cfg.aug.input_aug.kind = InputAugKind::GaussianNoise;
    else if (v == "coordinate-mask")
      cfg.aug.input_aug.kind = InputAugKind::CoordinateMask;
    else
      throw ConfigError("input_aug must be none, gaussian-noise or coordinate-mask, got '" +
                        v + "'");
  } else if (key == "input_aug_param") {
    cfg.aug.input_aug.param = static_cast<float>(parse_float(key, v));
  } else if (key == "dropout_rescale") {
    cfg.aug.dropout_rescale = parse_bool(key, v);
  } else if (key == "plan_per_pair") {
    cfg.aug.plan_per_pair = parse_bool(key, v);
  } else if (key == "tau") {
    double t = parse_float(key, v);
    if (!(t > 0.0)) throw ConfigError("tau must be > 0, got " + v);
    cfg.tau = static_cast<float>(t);
  } else if (key == "symmetric_loss") {
    cfg.symmetric_loss = parse_bool(key, v);
  } else if (key == "batch_size") {
    cfg.batch_size = parse_size(key, v, 2);
  } else if (key == "epochs") {
    cfg.epochs = parse_size(key, v, 1);
  } else if (key == "lr") {
    double r = parse_float(key, v);
    if (!(r > 0.0)) throw ConfigError("lr must be > 0, got " + v);
    cfg.lr = static_cast<float>(r);
  } else if (key == "momentum") {
    double r = parse_float(key, v);
    if (!(r >= 0.0 && r < 1.0)) throw ConfigError("momentum must be in [0,1), got " + v);
    cfg.momentum = static_cast<float>(r);
  } else if (key == "cosine_decay") {
    cfg.cosine_decay = parse_bool(key, v);
  } else if (key == "seed") {
    cfg.seed = static_cast<std::uint64_t>(parse_int(key, v));
  } else if (key == "eval_every") {
    cfg.eval_every = parse_size(key, v, 1);
  } else if (key == "freeze_mode") {
    if (v == "none")
      cfg.freeze_mode = FreezeMode::None;
    else if (v == "before")
      cfg.freeze_mode = FreezeMode::Before;
    else if (v == "after")
      cfg.freeze_mode = FreezeMode::After;
    else
      throw ConfigError("freeze_mode must be none, before or after, got '" + v + "'");
  } else if (key == "freeze_layer") {
    cfg.freeze_layer = static_cast<int>(parse_int(key, v));
  } else if (key == "init") {
    cfg.init_checkpoint = v == "random" ? "" : v;
  } else if (key == "out") {
    cfg.out_dir = v;
  } else if (key == "dataset") {
    cfg.dataset_path = v == "synthetic" ? "" : v;
  } else if (key == "k_super") {
    cfg.data.K = parse_size(key, v, 1);
  } else if (key == "m_sub") {
    cfg.data.M = parse_size(key, v, 1);
  } else if (key == "data_dim") {
    cfg.data.d = parse_size(key, v, 1);
  } else if (key == "n_per_subclass") {
    cfg.data.n_per_subclass = parse_size(key, v, 1);
  } else if (key == "super_spread") {
    cfg.data.super_spread = parse_float(key, v);
  } else if (key == "sub_spread") {
    cfg.data.sub_spread = parse_float(key, v);
  } else if (key == "noise") {
    cfg.data.noise = parse_float(key, v);
  } else if (key == "data_seed") {
    cfg.data.seed = static_cast<std::uint64_t>(parse_int(key, v));
  } else if (key == "eval_subset") {
    cfg.eval_subset = parse_size(key, v, 2);
  } else if (key == "val_fraction") {
    double r = parse_float(key, v);
    if (!(r > 0.0 && r < 1.0)) throw ConfigError("val_fraction must be in (0,1), got " + v);
    cfg.val_fraction = r;
  } else if (key == "probe_epochs") {
    cfg.probe.epochs = static_cast<int>(parse_size(key, v, 1));
  } else if (key == "probe_lr") {
    double r = parse_float(key, v);
    if (!(r > 0.0)) throw ConfigError("probe_lr must be > 0, got " + v);
    cfg.probe.lr = r;
  } else if (key == "align_alpha") {
    double r = parse_float(key, v);
    if (!(r > 0.0)) throw ConfigError("align_alpha must be > 0, got " + v);
    cfg.align_alpha = r;
  } else if (key == "uniform_t") {
    double r = parse_float(key, v);
    if (!(r > 0.0)) throw ConfigError("uniform_t must be > 0, got " + v);
    cfg.uniform_t = r;
  } else {
    throw ConfigError("unknown config key '" + key + "'");
  }
}

std::string fmt_f(double v, const char* spec = "%.17g") {
  char buf[64];
  std::snprintf(buf, sizeof(buf), spec, v);
  return buf;
}

std::string fmt_f32(float v) { return fmt_f(static_cast<double>(v), "%.9g"); }

}  // namespace

ParsedConfig parse_config_text(const std::string& text) {
  std::vector<std::pair<std::string, std::string>> entries;
  bool sweep = false;
  bool cartesian = true;

  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty())
      throw ConfigError("line " + std::to_string(lineno) + ": empty key or value");
    if (key == "sweep") {
      sweep = parse_bool(key, value);
    } else if (key == "cartesian") {
      cartesian = parse_bool(key, value);
    } else {
      entries.emplace_back(std::move(key), std::move(value));
    }
  }

  TrainConfig base;
  std::vector<SweepAxis> axes;
  for (const auto& [key, value] : entries) {
    const bool is_list = key != "hidden_widths" && value.size() >= 2 &&
                         value.front() == '[' && value.back() == ']';
    if (is_list) {
      if (!sweep)
        throw ConfigError("list value for '" + key + "' requires sweep = true");
      if (kSweepable.find(key) == kSweepable.end())
        throw ConfigError("'" + key + "' is not a sweepable key");
      SweepAxis axis{key, split_list(value)};
      if (axis.values.empty()) throw ConfigError("empty sweep list for '" + key + "'");
      // validate each value eagerly so errors surface at parse time
      for (const std::string& v : axis.values) apply_key(base, key, v);
      apply_key(base, key, axis.values.front());
      axes.push_back(std::move(axis));
    } else {
      apply_key(base, key, value);
    }
  }

  if (!sweep) return base;
  SweepSpec spec;
  spec.base = std::move(base);
  spec.axes = std::move(axes);
  spec.cartesian = cartesian;
  return spec;
}

ParsedConfig parse_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file '" + path + "'");
  std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return parse_config_text(text);
}

std::vector<std::pair<std::string, TrainConfig>> SweepSpec::expand() const {
  std::vector<std::pair<std::string, TrainConfig>> points;

  auto label_part = [](const std::string& key, const std::string& value) {
    std::string v = value;
    std::replace(v.begin(), v.end(), '-', 'm');  // "-1" -> "m1"
    return key + v;
  };

  if (axes.empty()) {
    points.emplace_back("point0", base);
    return points;
  }

  if (!cartesian) {
    std::size_t len = 0;
    for (const auto& a : axes) len = std::max(len, a.values.size());
    for (const auto& a : axes)
      if (a.values.size() != len && a.values.size() != 1)
        throw ConfigError("zipped sweep axes must share length (or be length 1)");
    for (std::size_t i = 0; i < len; ++i) {
      TrainConfig cfg = base;
      std::string label;
      for (const auto& a : axes) {
        const std::string& v = a.values[a.values.size() == 1 ? 0 : i];
        apply_key(cfg, a.key, v);
        if (!label.empty()) label += "_";
        label += label_part(a.key, v);
      }
      points.emplace_back(std::move(label), std::move(cfg));
    }
    return points;
  }

  std::vector<std::size_t> counter(axes.size(), 0);
  while (true) {
    TrainConfig cfg = base;
    std::string label;
    for (std::size_t a = 0; a < axes.size(); ++a) {
      const std::string& v = axes[a].values[counter[a]];
      apply_key(cfg, axes[a].key, v);
      if (!label.empty()) label += "_";
      label += label_part(axes[a].key, v);
    }
    points.emplace_back(std::move(label), std::move(cfg));
    std::size_t a = axes.size();
    while (a > 0) {
      --a;
      if (++counter[a] < axes[a].values.size()) break;
      counter[a] = 0;
      if (a == 0) return points;
    }
  }
}

std::string serialize_config(const TrainConfig& cfg) {
  std::ostringstream out;
  out << "hidden_widths = [";
  for (std::size_t i = 0; i < cfg.hidden_widths.size(); ++i)
    out << (i ? "," : "") << cfg.hidden_widths[i];
  out << "]\n";
  out << "proj_dim = " << cfg.proj_dim << "\n";
  out << "target_layer = " << cfg.aug.target_layer << "\n";
  out << "all_layers = " << (cfg.aug.all_layers ? "true" : "false") << "\n";
  out << "rate = " << fmt_f32(cfg.aug.rate) << "\n";
  out << "batch_fraction = " << fmt_f32(cfg.aug.batch_fraction) << "\n";
  out << "stop_grad = " << (cfg.aug.stop_grad ? "true" : "false") << "\n";
  out << "pairing_mode = "
      << (cfg.aug.pairing == PairingMode::BothViews ? "both-views" : "one-sided") << "\n";
  out << "input_aug = "
      << (cfg.aug.input_aug.kind == InputAugKind::None
              ? "none"
              : cfg.aug.input_aug.kind == InputAugKind::GaussianNoise ? "gaussian-noise"
                                                                      : "coordinate-mask")
      << "\n";
  out << "input_aug_param = " << fmt_f32(cfg.aug.input_aug.param) << "\n";
  out << "dropout_rescale = " << (cfg.aug.dropout_rescale ? "true" : "false") << "\n";
  out << "plan_per_pair = " << (cfg.aug.plan_per_pair ? "true" : "false") << "\n";
  out << "tau = " << fmt_f32(cfg.tau) << "\n";
  out << "symmetric_loss = " << (cfg.symmetric_loss ? "true" : "false") << "\n";
  out << "batch_size = " << cfg.batch_size << "\n";
  out << "epochs = " << cfg.epochs << "\n";
  out << "lr = " << fmt_f32(cfg.lr) << "\n";
  out << "momentum = " << fmt_f32(cfg.momentum) << "\n";
  out << "cosine_decay = " << (cfg.cosine_decay ? "true" : "false") << "\n";
  out << "seed = " << cfg.seed << "\n";
  out << "eval_every = " << cfg.eval_every << "\n";
  out << "freeze_mode = "
      << (cfg.freeze_mode == FreezeMode::None
              ? "none"
              : cfg.freeze_mode == FreezeMode::Before ? "before" : "after")
      << "\n";
  out << "freeze_layer = " << cfg.freeze_layer << "\n";
  out << "init = " << (cfg.init_checkpoint.empty() ? "random" : cfg.init_checkpoint) << "\n";
  if (!cfg.out_dir.empty()) out << "out = " << cfg.out_dir << "\n";
  out << "dataset = " << (cfg.dataset_path.empty() ? "synthetic" : cfg.dataset_path) << "\n";
  out << "k_super = " << cfg.data.K << "\n";
  out << "m_sub = " << cfg.data.M << "\n";
  out << "data_dim = " << cfg.data.d << "\n";
  out << "n_per_subclass = " << cfg.data.n_per_subclass << "\n";
  out << "super_spread = " << fmt_f(cfg.data.super_spread) << "\n";
  out << "sub_spread = " << fmt_f(cfg.data.sub_spread) << "\n";
  out << "noise = " << fmt_f(cfg.data.noise) << "\n";
  out << "data_seed = " << cfg.data.seed << "\n";
  out << "eval_subset = " << cfg.eval_subset << "\n";
  out << "val_fraction = " << fmt_f(cfg.val_fraction) << "\n";
  out << "probe_epochs = " << cfg.probe.epochs << "\n";
  out << "probe_lr = " << fmt_f(cfg.probe.lr) << "\n";
  out << "align_alpha = " << fmt_f(cfg.align_alpha) << "\n";
  out << "uniform_t = " << fmt_f(cfg.uniform_t) << "\n";
  return out.str();
}

bool config_equal(const TrainConfig& a, const TrainConfig& b) {
  return serialize_config(a) == serialize_config(b);
}

}  // namespace daug
