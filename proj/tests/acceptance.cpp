// End-to-end acceptance gate. Each numbered criterion prints exactly one
// PASS/FAIL line; the process exits nonzero if any gated criterion fails.
// Criterion 10 is a trend check: it is reported but never gates the build.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

#include "daug/augment.hpp"
#include "daug/config.hpp"
#include "daug/contrastive.hpp"
#include "daug/data.hpp"
#include "daug/graph.hpp"
#include "daug/layers.hpp"
#include "daug/metrics.hpp"
#include "daug/reports.hpp"
#include "daug/rng.hpp"
#include "daug/trainer.hpp"
#include "op_checks.hpp"

using namespace daug;
namespace fs = std::filesystem;

namespace {

std::string read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

bool bitwise_equal(const Tensor& a, const Tensor& b) {
  return a.shape == b.shape &&
         std::memcmp(a.data.data(), b.data.data(), a.size() * sizeof(float)) == 0;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.3g", v);
  return buf;
}

struct TempRoot {
  fs::path path;
  TempRoot() {
    path = fs::temp_directory_path() / ("daug_acceptance_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempRoot() { fs::remove_all(path); }
  std::string dir(const std::string& name) const { return (path / name).string(); }
};

TempRoot g_tmp;

// ---------------------------------------------------------------------------
// criterion 1: autodiff soundness

// double-precision replica of the augmented contrastive forward used below;
// returns the smallest |preactivation| so candidates near a relu kink can be
// rejected before the finite-difference check
double min_preactivation(const LayeredEncoder& enc, const Tensor& x, int target_layer,
                         const Tensor& mult) {
  const std::size_t B = x.rows();
  std::vector<std::vector<double>> h(B);
  for (std::size_t r = 0; r < B; ++r) {
    h[r].assign(x.cols(), 0.0);
    for (std::size_t c = 0; c < x.cols(); ++c) h[r][c] = x(r, c);
  }
  double min_abs = 1e30;
  for (int l = 0; l < enc.layer_count(); ++l) {
    const Layer& layer = enc.layers[static_cast<std::size_t>(l)];
    if (layer.has_params()) {
      const std::size_t out_w = layer.weight.rows(), in_w = layer.weight.cols();
      for (std::size_t r = 0; r < B; ++r) {
        std::vector<double> pre(out_w, 0.0);
        for (std::size_t o = 0; o < out_w; ++o) {
          double acc = layer.bias(o);
          for (std::size_t i = 0; i < in_w; ++i) acc += double(layer.weight(o, i)) * h[r][i];
          pre[o] = acc;
          if (layer.kind == LayerKind::DenseRelu)
            min_abs = std::min(min_abs, std::abs(acc));
        }
        h[r] = pre;
        if (layer.kind == LayerKind::DenseRelu)
          for (double& v : h[r]) v = v > 0.0 ? v : 0.0;
      }
    } else {
      for (std::size_t r = 0; r < B; ++r) {
        double sq = 0.0;
        for (double v : h[r]) sq += v * v;
        min_abs = std::min(min_abs, std::sqrt(sq));  // normalize kink at zero
        const double inv = 1.0 / std::sqrt(sq);
        for (double& v : h[r]) v *= inv;
      }
    }
    if (l == target_layer)
      for (std::size_t r = 0; r < B; ++r)
        for (std::size_t c = 0; c < h[r].size(); ++c) h[r][c] *= mult(r, c);
  }
  return min_abs;
}

std::string criterion_autodiff() {
  // every op kind, 20 seeded instances each
  for (const auto& check : daug::testing::all_op_checks()) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const Tensor x = check.make_input(hash_u64(seed, seed_tag(check.name)));
      const double err = grad_check(check.f, x, 1e-3);
      if (err >= 1e-3)
        return "op " + check.name + " seed " + std::to_string(seed) +
               ": relative error " + fmt(err);
    }
  }

  // full contrastive loss through the augmented encoder: dense+relu stack,
  // targeted dropout multiplier, normalization, InfoNCE
  const LayeredEncoder enc = init_params({8, 10, 10, 6}, 99);
  const int target = 1;
  const std::size_t B = 4;
  const Tensor h2 = daug::testing::random_away_from_kinks({B, 6}, 4242);

  int accepted = 0;
  for (std::uint64_t candidate = 0; accepted < 20 && candidate < 400; ++candidate) {
    const Tensor x = daug::testing::random_away_from_kinks({B, 8}, hash_u64(candidate, 17));
    const Tensor mult =
        dropout(Tensor::ones({B, enc.width_at(target)}), 0.3f, hash_u64(candidate, 18))
            .first;
    // reject inputs whose hidden units sit near a relu kink; the check
    // requires a locally smooth function
    if (min_preactivation(enc, x, target, mult) < 1e-2) continue;
    ++accepted;

    auto f = [&](Graph& g, Var v) {
      BoundEncoder b = bind(g, enc);
      Var h = forward_to(b, v, target);
      h = mul(h, g.leaf(mult));
      Var z1 = forward_from(b, h, target);
      return info_nce(z1, g.leaf(h2), {0.5f, false});
    };
    const double err = grad_check(f, x, 1e-3);
    if (err >= 1e-3)
      return "full loss candidate " + std::to_string(candidate) + ": relative error " +
             fmt(err);
  }
  if (accepted < 20) return "could not find 20 kink-free loss instances";
  return "";
}

// ---------------------------------------------------------------------------
// criterion 2: stop-gradient exactness at every insertion point

std::string criterion_stop_gradient() {
  TrainConfig cfg;  // default architecture: 5x64 hidden + 32 projection
  cfg.aug.batch_fraction = 1.0f;
  cfg.aug.stop_grad = true;
  cfg.aug.rate = 0.2f;
  cfg.batch_size = 64;

  std::vector<std::size_t> widths{64};
  for (std::size_t w : cfg.hidden_widths) widths.push_back(w);
  widths.push_back(cfg.proj_dim);

  Tensor batch({64, 64});
  {
    CounterRng rng(7);
    for (float& v : batch.data) v = static_cast<float>(rng.normal());
  }

  const LayeredEncoder init = init_params(widths, 3);
  for (int l = 0; l < init.layer_count(); ++l) {
    TrainConfig c = cfg;
    c.aug.target_layer = l;

    // gradient exactness on a single step
    {
      Graph g;
      LayeredEncoder enc = init;
      BoundEncoder b = bind(g, enc);
      const ViewPlan plan = plan_views(c.aug, 64, 11);
      Var z1 = augmented_forward(b, g.leaf(batch), c.aug, plan, 0);
      Var z2 = augmented_forward(b, g.leaf(batch), c.aug, plan, 1);
      auto grads = g.backward(info_nce(z1, z2, {c.tau, false}));
      for (int i = 0; i <= l; ++i) {
        if (!b.weights[static_cast<std::size_t>(i)].valid()) continue;
        for (float v : grads.at(b.weights[static_cast<std::size_t>(i)].id).data)
          if (v != 0.0f)
            return "layer " + std::to_string(i) + " has nonzero gradient with target " +
                   std::to_string(l);
      }
    }

    // bit-equality after several optimizer steps
    LayeredEncoder enc = init;
    OptimizerState state = OptimizerState::zeros_like(enc);
    for (std::size_t step = 0; step < 3; ++step)
      train_step(enc, batch, c, state, 1, step, c.lr);
    for (int i = 0; i <= l; ++i) {
      if (!enc.layers[static_cast<std::size_t>(i)].has_params()) continue;
      if (!bitwise_equal(enc.layers[static_cast<std::size_t>(i)].weight,
                         init.layers[static_cast<std::size_t>(i)].weight) ||
          !bitwise_equal(enc.layers[static_cast<std::size_t>(i)].bias,
                         init.layers[static_cast<std::size_t>(i)].bias))
        return "layer " + std::to_string(i) + " drifted after steps with target " +
               std::to_string(l);
    }
  }
  return "";
}

// ---------------------------------------------------------------------------
// criterion 3: InfoNCE oracle equivalence

double info_nce_reference(const Tensor& h1, const Tensor& h2, double tau) {
  const std::size_t B = h1.rows(), d = h1.cols();
  auto normalize = [&](const Tensor& h) {
    std::vector<std::vector<double>> out(B, std::vector<double>(d));
    for (std::size_t r = 0; r < B; ++r) {
      double sq = 0.0;
      for (std::size_t c = 0; c < d; ++c) sq += double(h(r, c)) * h(r, c);
      const double inv = 1.0 / std::sqrt(sq);
      for (std::size_t c = 0; c < d; ++c) out[r][c] = h(r, c) * inv;
    }
    return out;
  };
  const auto a = normalize(h1), b = normalize(h2);
  double loss = 0.0;
  for (std::size_t i = 0; i < B; ++i) {
    double denom = 0.0, pos = 0.0;
    for (std::size_t j = 0; j < B; ++j) {
      double sim = 0.0;
      for (std::size_t c = 0; c < d; ++c) sim += a[i][c] * b[j][c];
      const double e = std::exp(sim / tau);
      denom += e;
      if (i == j) pos = e;
    }
    loss += -std::log(pos / denom);
  }
  return loss / double(B);
}

std::string criterion_infonce() {
  for (std::uint64_t trial = 0; trial < 100; ++trial) {
    CounterRng rng(hash_u64(trial, 5));
    const std::size_t B = 1 + static_cast<std::size_t>(rng.uniform() * 4.0);
    const std::size_t d = 3 + static_cast<std::size_t>(rng.uniform() * 8.0);
    Tensor h1({B, d}), h2({B, d});
    for (float& v : h1.data) v = static_cast<float>(rng.normal());
    for (float& v : h2.data) v = static_cast<float>(rng.normal());

    Graph g;
    Var v1 = g.leaf(h1);
    Var loss = info_nce(v1, g.leaf(h2), {0.5f, false});
    const float f32_val = loss.value().data[0];
    // the tape replayed in 64-bit isolates the algorithm from storage rounding
    const double f64_val = g.replay_scalar_f64(loss.id, v1.id, h1);
    const double want = info_nce_reference(h1, h2, 0.5);

    if (std::abs(f64_val - want) > 1e-6)
      return "trial " + std::to_string(trial) + ": |" + fmt(f64_val) + " - " +
             fmt(want) + "| > 1e-6";
    if (B == 1 && f32_val != 0.0f)
      return "trial " + std::to_string(trial) + ": B=1 loss " + fmt(f32_val) + " != 0";
    if (f32_val < 0.0f)
      return "trial " + std::to_string(trial) + ": negative loss " + fmt(f32_val);
  }
  return "";
}

// ---------------------------------------------------------------------------
// criterion 4: CKA properties

std::string criterion_cka() {
  for (std::uint64_t trial = 0; trial < 50; ++trial) {
    CounterRng rng(hash_u64(trial, 6));
    Tensor X({30, 8}), Y({30, 5});
    for (float& v : X.data) v = static_cast<float>(rng.normal());
    for (float& v : Y.data) v = static_cast<float>(rng.normal());

    if (std::abs(linear_cka(X, X) - 1.0) > 1e-6)
      return "self-similarity off at trial " + std::to_string(trial);
    if (std::abs(linear_cka(X, Y) - linear_cka(Y, X)) > 1e-6)
      return "symmetry off at trial " + std::to_string(trial);

    Tensor scaled = X;
    for (float& v : scaled.data) v *= 2.5f;
    if (std::abs(linear_cka(X, scaled) - 1.0) > 1e-6)
      return "scaling invariance off at trial " + std::to_string(trial);

    // rotation by a product of Givens rotations applied in double
    std::vector<std::vector<double>> rot(30, std::vector<double>(8));
    for (std::size_t r = 0; r < 30; ++r)
      for (std::size_t c = 0; c < 8; ++c) rot[r][c] = X(r, c);
    for (std::size_t a = 0; a + 1 < 8; ++a) {
      const std::size_t b = a + 1 + static_cast<std::size_t>(rng.uniform() * (7 - a));
      const double theta = rng.uniform() * 6.283185307179586;
      const double cth = std::cos(theta), sth = std::sin(theta);
      for (std::size_t r = 0; r < 30; ++r) {
        const double va = rot[r][a], vb = rot[r][b];
        rot[r][a] = cth * va - sth * vb;
        rot[r][b] = sth * va + cth * vb;
      }
    }
    Tensor rotated({30, 8});
    for (std::size_t r = 0; r < 30; ++r)
      for (std::size_t c = 0; c < 8; ++c) rotated(r, c) = static_cast<float>(rot[r][c]);
    const double rot_cka = linear_cka(X, rotated);
    if (std::abs(rot_cka - 1.0) > 1e-6)
      return "orthogonal invariance off at trial " + std::to_string(trial) + ": " +
             fmt(std::abs(rot_cka - 1.0));
  }

  Tensor X({20, 4});
  CounterRng rng(1);
  for (float& v : X.data) v = static_cast<float>(rng.normal());
  Tensor flat({20, 4});
  for (float& v : flat.data) v = 3.0f;
  try {
    linear_cka(X, flat);
    return "degenerate input did not raise";
  } catch (const DegenerateInputError&) {
  }
  return "";
}

// ---------------------------------------------------------------------------
// criterion 5: metric closed forms

std::string criterion_closed_forms() {
  Tensor antipodal({2, 2}, {1, 0, -1, 0});
  const double u = uniformity(antipodal, 2.0);
  if (std::abs(u - (-8.0)) > 1e-6)
    return "uniformity of antipodal pair is " + fmt(u) + ", want -8";

  Tensor f({5, 3});
  CounterRng rng(2);
  for (std::size_t r = 0; r < 5; ++r) {
    double sq = 0.0;
    for (std::size_t c = 0; c < 3; ++c) {
      f(r, c) = static_cast<float>(rng.normal());
      sq += double(f(r, c)) * f(r, c);
    }
    for (std::size_t c = 0; c < 3; ++c)
      f(r, c) = static_cast<float>(f(r, c) / std::sqrt(sq));
  }
  const double a = alignment(f, f, 2.0);
  if (a != 0.0) return "alignment of identical views is " + fmt(a) + ", want exactly 0";
  return "";
}

// ---------------------------------------------------------------------------
// criterion 6: dropout unbiasedness and pair-mix fractions

std::string criterion_dropout_stats() {
  Tensor unit({1, 8}, {1.0f, -2.0f, 0.5f, 3.0f, -0.25f, 1.5f, -1.0f, 2.5f});
  for (float p : {0.125f, 0.25f, 0.5f}) {
    std::vector<double> mean(8, 0.0);
    const std::size_t trials = 10000;
    for (std::uint64_t seed = 0; seed < trials; ++seed) {
      const Tensor out = dropout(unit, p, hash_u64(seed, std::uint64_t(p * 1000)), true).first;
      for (std::size_t i = 0; i < 8; ++i) mean[i] += out.data[i];
    }
    for (std::size_t i = 0; i < 8; ++i) {
      const double rel = std::abs(mean[i] / double(trials) - unit.data[i]) /
                         std::abs(unit.data[i]);
      if (rel > 0.02)
        return "p=" + fmt(p) + " unit " + std::to_string(i) + " mean off by " + fmt(rel);
    }
  }

  AugmentationSpec spec;
  spec.rate = 0.5f;
  spec.batch_fraction = 0.5f;
  std::size_t both = 0, one = 0, neither = 0;
  const std::size_t plans = 100, batch = 100;  // 10^4 pairs total
  for (std::uint64_t seed = 0; seed < plans; ++seed) {
    const ViewPlan plan = plan_views(spec, batch, seed);
    for (std::size_t i = 0; i < batch; ++i) {
      const int k = int(plan.apply[0][i]) + int(plan.apply[1][i]);
      both += (k == 2);
      one += (k == 1);
      neither += (k == 0);
    }
  }
  const double n = double(plans * batch);
  if (std::abs(both / n - 0.25) > 0.02) return "both-augmented fraction " + fmt(both / n);
  if (std::abs(one / n - 0.50) > 0.02) return "one-augmented fraction " + fmt(one / n);
  if (std::abs(neither / n - 0.25) > 0.02)
    return "neither-augmented fraction " + fmt(neither / n);
  return "";
}

// ---------------------------------------------------------------------------
// criteria 7 and 8: baseline equivalence and determinism of full runs

std::string compare_run_dirs(const std::string& a, const std::string& b) {
  std::vector<std::string> names;
  for (const auto& entry : fs::directory_iterator(a))
    names.push_back(entry.path().filename().string());
  if (names.empty()) return "no files written in " + a;
  std::sort(names.begin(), names.end());
  for (const std::string& name : names) {
    if (name == "resolved.cfg") continue;  // configs legitimately differ in c7
    if (!fs::exists(b + "/" + name)) return name + " missing from " + b;
    if (read_bytes(a + "/" + name) != read_bytes(b + "/" + name))
      return name + " differs between runs";
  }
  return "";
}

TrainConfig quick_default_config() {
  TrainConfig cfg;  // default data (4000 points, d=64) and architecture
  cfg.epochs = 5;
  cfg.eval_every = 5;
  return cfg;
}

std::string criterion_baseline_equivalence() {
  TrainConfig plain = quick_default_config();
  plain.aug.batch_fraction = 0.0f;
  plain.out_dir = g_tmp.dir("c7_plain");
  TrainConfig bypass = plain;
  bypass.bypass_augmentation = true;
  bypass.out_dir = g_tmp.dir("c7_bypass");

  const ExperimentResult ra = run_experiment(plain);
  const ExperimentResult rb = run_experiment(bypass);
  write_run_reports(plain.out_dir, ra.records, false);
  write_run_reports(bypass.out_dir, rb.records, false);
  return compare_run_dirs(plain.out_dir, bypass.out_dir);
}

std::string criterion_determinism(double* seconds_out) {
  TrainConfig cfg;  // the full default experiment: 50 epochs, batch 256
  cfg.out_dir = g_tmp.dir("c8_a");
  const auto t0 = std::chrono::steady_clock::now();
  const ExperimentResult ra = run_experiment(cfg);
  *seconds_out =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_run_reports(cfg.out_dir, ra.records, false);

  cfg.out_dir = g_tmp.dir("c8_b");
  const ExperimentResult rb = run_experiment(cfg);
  write_run_reports(cfg.out_dir, rb.records, false);

  const std::string diff = compare_run_dirs(g_tmp.dir("c8_a"), g_tmp.dir("c8_b"));
  if (!diff.empty()) return diff;
  if (*seconds_out > 600.0)
    return "default experiment took " + fmt(*seconds_out) + "s, budget 600s";
  return "";
}

// ---------------------------------------------------------------------------
// criterion 9: CIFAR parser fixtures

std::string criterion_cifar() {
  std::string bytes;
  for (int rec = 0; rec < 3; ++rec) {
    bytes.push_back(static_cast<char>(rec * 3));
    for (int p = 0; p < 3072; ++p) bytes.push_back(static_cast<char>((p * 7 + rec) % 256));
  }

  const Dataset ds = parse_cifar_bytes(bytes, CifarVariant::Cifar10, "fixture");
  if (ds.size() != 3) return "record-size arithmetic: parsed " + std::to_string(ds.size());
  if (ds.fine_labels != std::vector<int>{0, 3, 6}) return "labels misread";
  if (serialize_cifar(ds, CifarVariant::Cifar10) != bytes)
    return "round trip is not byte-identical";

  try {
    parse_cifar_bytes(bytes.substr(0, bytes.size() - 10), CifarVariant::Cifar10, "fixture");
    return "truncation not detected";
  } catch (const TruncationError& e) {
    if (e.offset != 2 * 3073) return "truncation offset " + std::to_string(e.offset);
  }

  std::string bad = bytes;
  bad[3073] = static_cast<char>(12);
  try {
    parse_cifar_bytes(bad, CifarVariant::Cifar10, "fixture");
    return "label range not checked";
  } catch (const FormatError& e) {
    if (std::string(e.what()).find("record 1") == std::string::npos)
      return "label error does not name the record";
  }

  // cifar100 layout: coarse byte, fine byte, pixels
  std::string b100;
  b100.push_back(4);
  b100.push_back(55);
  b100.append(3072, '\x10');
  const Dataset d100 = parse_cifar_bytes(b100, CifarVariant::Cifar100, "fixture");
  if (d100.coarse_labels != std::vector<int>{4} || d100.fine_labels != std::vector<int>{55})
    return "cifar100 label bytes misread";
  if (serialize_cifar(d100, CifarVariant::Cifar100) != b100)
    return "cifar100 round trip is not byte-identical";
  return "";
}

// ---------------------------------------------------------------------------
// criterion 10 (soft): layer-targeted trend vs baseline and all-layer dropout

std::string criterion_trend() {
  auto scaled = []() {
    TrainConfig cfg;  // default architecture and data, shortened schedule
    cfg.epochs = 12;
    cfg.eval_every = 12;
    cfg.aug.rate = 0.5f;
    cfg.aug.batch_fraction = 0.5f;
    cfg.aug.stop_grad = true;
    return cfg;
  };

  TrainConfig baseline = scaled();
  baseline.aug.batch_fraction = 0.0f;
  const double base_fine = run_experiment(baseline).records.back().probe_fine;

  double best_target = -1.0;
  int best_layer = -1;
  for (int l = 0; l <= 5; ++l) {
    TrainConfig cfg = scaled();
    cfg.aug.target_layer = l;
    const double fine = run_experiment(cfg).records.back().probe_fine;
    if (fine > best_target) {
      best_target = fine;
      best_layer = l;
    }
  }

  TrainConfig all = scaled();
  all.aug.all_layers = true;
  all.aug.stop_grad = false;
  const double all_fine = run_experiment(all).records.back().probe_fine;

  std::ostringstream detail;
  detail << "baseline " << fmt(base_fine) << ", best targeted layer " << best_layer
         << " at " << fmt(best_target) << ", all-layer dropout " << fmt(all_fine);
  if (best_target < base_fine)
    return "no targeted layer met the baseline (" + detail.str() + ")";
  if (all_fine >= best_target)
    return "all-layer dropout did not score below the best target (" + detail.str() + ")";
  return "trend holds: " + detail.str();
}

// ---------------------------------------------------------------------------
// criterion 11: freeze regimes

std::string criterion_freeze() {
  for (const FreezeMode mode : {FreezeMode::Before, FreezeMode::After}) {
    TrainConfig cfg = quick_default_config();
    cfg.epochs = 4;
    cfg.eval_every = 2;
    cfg.freeze_mode = mode;
    cfg.freeze_layer = 2;
    cfg.out_dir =
        g_tmp.dir(mode == FreezeMode::Before ? "c11_before" : "c11_after");
    const ExperimentResult res = run_experiment(cfg);
    if (res.records.empty()) return "no records produced";

    const LayeredEncoder init = load_checkpoint(cfg.out_dir + "/ckpt_epoch0.daug");
    for (std::size_t epoch : {std::size_t(2), std::size_t(4)}) {
      const LayeredEncoder ck =
          load_checkpoint(cfg.out_dir + "/ckpt_epoch" + std::to_string(epoch) + ".daug");
      for (int i = 0; i < ck.layer_count(); ++i) {
        if (!ck.layers[static_cast<std::size_t>(i)].has_params()) continue;
        const bool frozen = mode == FreezeMode::Before ? i <= cfg.freeze_layer
                                                       : i > cfg.freeze_layer;
        if (!frozen) continue;
        if (!bitwise_equal(ck.layers[static_cast<std::size_t>(i)].weight,
                           init.layers[static_cast<std::size_t>(i)].weight) ||
            !bitwise_equal(ck.layers[static_cast<std::size_t>(i)].bias,
                           init.layers[static_cast<std::size_t>(i)].bias))
          return "frozen layer " + std::to_string(i) + " drifted by epoch " +
                 std::to_string(epoch);
      }
    }
  }
  return "";
}

struct Criterion {
  int id;
  const char* name;
  std::function<std::string()> run;
  bool gated;
  double budget_seconds;  // 0 = no budget printed/enforced
};

}  // namespace

int main() {
  double c8_seconds = 0.0;
  const std::vector<Criterion> criteria{
      {1, "autodiff gradient soundness", criterion_autodiff, true, 60.0},
      {2, "stop-gradient exactness", criterion_stop_gradient, true, 60.0},
      {3, "InfoNCE oracle equivalence", criterion_infonce, true, 0.0},
      {4, "CKA properties", criterion_cka, true, 0.0},
      {5, "metric closed forms", criterion_closed_forms, true, 0.0},
      {6, "dropout unbiasedness and pair mix", criterion_dropout_stats, true, 0.0},
      {7, "baseline equivalence at s=0", criterion_baseline_equivalence, true, 0.0},
      {8, "run determinism and runtime",
       [&c8_seconds]() { return criterion_determinism(&c8_seconds); }, true, 0.0},
      {9, "CIFAR parser fixtures", criterion_cifar, true, 0.0},
      {10, "layer-trend check (reported, not gated)", criterion_trend, false, 0.0},
      {11, "freeze regimes", criterion_freeze, true, 0.0},
  };

  bool failed = false;
  for (const Criterion& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    std::string detail;
    try {
      detail = c.run();
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    if (!c.gated) {
      // trend outcomes are informative either way; only the wording differs
      const bool holds = detail.rfind("trend holds", 0) == 0;
      std::printf("criterion %2d %-42s %s (%.1fs) — %s\n", c.id, c.name,
                  holds ? "PASS" : "SOFT-FAIL", secs, detail.c_str());
      continue;
    }

    bool ok = detail.empty();
    if (ok && c.budget_seconds > 0.0 && secs > c.budget_seconds) {
      ok = false;
      detail = "exceeded " + fmt(c.budget_seconds) + "s budget (" + fmt(secs) + "s)";
    }
    if (ok) {
      std::printf("criterion %2d %-42s PASS (%.1fs)\n", c.id, c.name, secs);
    } else {
      std::printf("criterion %2d %-42s FAIL (%.1fs) — %s\n", c.id, c.name, secs,
                  detail.c_str());
      failed = true;
    }
    std::fflush(stdout);
  }
  return failed ? 1 : 0;
}
