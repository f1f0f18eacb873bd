#include "daug/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "daug/contrastive.hpp"
#include "daug/rng.hpp"

namespace daug {

void TrainConfig::validate() const {
  if (!(lr > 0.0f)) throw ContractError("lr must be positive");
  if (epochs < 1) throw ContractError("epochs must be >= 1");
  if (batch_size < 2) throw ContractError("batch_size must be >= 2");
  if (eval_every < 1) throw ContractError("eval_every must be >= 1");
  if (!(tau > 0.0f)) throw ContractError("tau must be positive");
  if (!(val_fraction > 0.0 && val_fraction < 1.0))
    throw ContractError("val_fraction must be in (0,1)");
  if (hidden_widths.empty() || proj_dim == 0)
    throw ContractError("encoder needs at least one hidden layer and a projection");
  aug.validate();
}

OptimizerState OptimizerState::zeros_like(const LayeredEncoder& enc) {
  OptimizerState s;
  for (const Layer& l : enc.layers) {
    s.vel_weight.push_back(l.has_params() ? Tensor(l.weight.shape) : Tensor());
    s.vel_bias.push_back(l.has_params() ? Tensor(l.bias.shape) : Tensor());
  }
  return s;
}

void sgd_step(LayeredEncoder& enc, const LayerGrads& grads, OptimizerState& state,
              float lr, float momentum) {
  for (int i = 0; i < enc.layer_count(); ++i) {
    Layer& l = enc.layers[static_cast<std::size_t>(i)];
    if (!l.has_params() || l.frozen) continue;
    auto apply = [&](Tensor& p, Tensor& v, const std::optional<Tensor>& g) {
      if (!g) return;
      if (!g->same_shape(p))
        throw ShapeError("sgd_step: gradient " + g->shape_str() +
                         " does not match parameter " + p.shape_str());
      for (std::size_t j = 0; j < p.size(); ++j) {
        v.data[j] = momentum * v.data[j] + g->data[j];
        p.data[j] -= lr * v.data[j];
      }
    };
    apply(l.weight, state.vel_weight[static_cast<std::size_t>(i)],
          grads.weight[static_cast<std::size_t>(i)]);
    apply(l.bias, state.vel_bias[static_cast<std::size_t>(i)],
          grads.bias[static_cast<std::size_t>(i)]);
  }
}

namespace {

LayerGrads collect_grads(const BoundEncoder& b, const GradMap& grads) {
  LayerGrads out;
  const int L = b.encoder->layer_count();
  out.weight.resize(static_cast<std::size_t>(L));
  out.bias.resize(static_cast<std::size_t>(L));
  for (int i = 0; i < L; ++i) {
    if (!b.weights[static_cast<std::size_t>(i)].valid()) continue;
    auto wi = grads.find(b.weights[static_cast<std::size_t>(i)].id);
    auto bi = grads.find(b.biases[static_cast<std::size_t>(i)].id);
    if (wi != grads.end()) out.weight[static_cast<std::size_t>(i)] = wi->second;
    if (bi != grads.end()) out.bias[static_cast<std::size_t>(i)] = bi->second;
  }
  return out;
}

Tensor gather_rows(const Tensor& features, const std::vector<std::size_t>& idx) {
  Tensor out({idx.size(), features.cols()});
  for (std::size_t r = 0; r < idx.size(); ++r)
    for (std::size_t c = 0; c < features.cols(); ++c)
      out(r, c) = features(idx[r], c);
  return out;
}

}  // namespace

float train_step(LayeredEncoder& enc, const Tensor& x_batch, const TrainConfig& cfg,
                 OptimizerState& state, std::size_t epoch, std::size_t step,
                 float lr_now) {
  if (x_batch.rows() < 2) throw ContractError("train_step: batch must have >= 2 rows");

  const Tensor x1 = input_augment(
      x_batch, cfg.aug.input_aug, derive_seed(cfg.seed, "view1", {epoch, step}));
  const Tensor x2 = input_augment(
      x_batch, cfg.aug.input_aug, derive_seed(cfg.seed, "view2", {epoch, step}));

  Graph g;
  BoundEncoder bound = bind(g, enc);
  Var z1, z2;
  if (cfg.bypass_augmentation) {
    z1 = forward_all(bound, g.leaf(x1));
    z2 = forward_all(bound, g.leaf(x2));
  } else {
    const ViewPlan plan = plan_views(cfg.aug, x_batch.rows(),
                                     derive_seed(cfg.seed, "plan", {epoch, step}));
    z1 = augmented_forward(bound, g.leaf(x1), cfg.aug, plan, 0);
    z2 = augmented_forward(bound, g.leaf(x2), cfg.aug, plan, 1);
  }
  Var loss = info_nce(z1, z2, InfoNceOptions{cfg.tau, cfg.symmetric_loss});
  LayerGrads grads = collect_grads(bound, g.backward(loss));
  sgd_step(enc, grads, state, lr_now, cfg.momentum);
  return loss.value().data[0];
}

void train_val_split(std::size_t n, double val_fraction, std::uint64_t seed,
                     std::vector<std::size_t>& train_idx,
                     std::vector<std::size_t>& val_idx) {
  auto perm = shuffled_indices(n, derive_seed(seed, "train_val_split"));
  const std::size_t n_val = std::max<std::size_t>(1, static_cast<std::size_t>(
                                                         static_cast<double>(n) * val_fraction));
  train_idx.assign(perm.begin(), perm.end() - static_cast<std::ptrdiff_t>(n_val));
  val_idx.assign(perm.end() - static_cast<std::ptrdiff_t>(n_val), perm.end());
}

Dataset provision_dataset(const TrainConfig& cfg) {
  if (!cfg.dataset_path.empty()) return load_dataset(cfg.dataset_path);
  return generate_synthetic(cfg.data);
}

MetricsReport evaluate(const LayeredEncoder& enc, const Dataset& ds,
                       const TrainConfig& cfg, std::size_t epoch, double loss) {
  MetricsReport rep;
  rep.epoch = epoch;
  rep.loss = loss;

  const std::uint64_t eval_seed = derive_seed(cfg.seed, "eval");

  // fixed seeded evaluation subset for activations/alignment/uniformity
  auto perm = shuffled_indices(ds.size(), derive_seed(eval_seed, "subset"));
  const std::size_t n_eval = std::min(cfg.eval_subset, ds.size());
  std::vector<std::size_t> eval_idx(perm.begin(),
                                    perm.begin() + static_cast<std::ptrdiff_t>(n_eval));
  const Tensor eval_x = gather_rows(ds.features, eval_idx);

  // alignment/uniformity on input-augmented positive pairs, no layer aug
  const Tensor v1 = input_augment(eval_x, cfg.aug.input_aug,
                                  derive_seed(eval_seed, "align_view1"));
  const Tensor v2 = input_augment(eval_x, cfg.aug.input_aug,
                                  derive_seed(eval_seed, "align_view2"));
  const Tensor e1 = forward_eval(enc, v1);
  const Tensor e2 = forward_eval(enc, v2);
  rep.alignment = alignment(e1, e2, cfg.align_alpha);
  rep.uniformity = uniformity(e1, cfg.uniform_t);

  // cross-layer CKA on clean activations
  std::vector<Tensor> acts;
  for (int l = 0; l < enc.layer_count(); ++l) {
    acts.push_back(forward_to_eval(enc, eval_x, l));
    rep.cka_layers.push_back(l);
  }
  rep.cka = cka_matrix(acts);

  // linear probes on the frozen final embedding, train/val split
  std::vector<std::size_t> train_idx, val_idx;
  train_val_split(ds.size(), cfg.val_fraction, eval_seed, train_idx, val_idx);
  if (train_idx.size() > cfg.eval_subset) train_idx.resize(cfg.eval_subset);
  const Tensor emb = forward_eval(enc, ds.features);
  rep.probe_fine = linear_probe(emb, ds.fine_labels, train_idx, val_idx, cfg.probe);
  rep.probe_coarse = ds.has_coarse()
                         ? linear_probe(emb, ds.coarse_labels, train_idx, val_idx, cfg.probe)
                         : rep.probe_fine;
  return rep;
}

namespace {

// loss over the eval subset with evaluation seeds; used for the epoch-0 record
double eval_loss(const LayeredEncoder& enc, const Dataset& ds, const TrainConfig& cfg) {
  const std::uint64_t eval_seed = derive_seed(cfg.seed, "eval_loss");
  auto perm = shuffled_indices(ds.size(), derive_seed(eval_seed, "subset"));
  const std::size_t n = std::min(std::min(cfg.eval_subset, ds.size()),
                                 static_cast<std::size_t>(512));
  std::vector<std::size_t> idx(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n));
  const Tensor x = gather_rows(ds.features, idx);
  const Tensor x1 = input_augment(x, cfg.aug.input_aug, derive_seed(eval_seed, "v1"));
  const Tensor x2 = input_augment(x, cfg.aug.input_aug, derive_seed(eval_seed, "v2"));
  Graph g;
  BoundEncoder b = bind(g, enc);
  Var loss = info_nce(forward_all(b, g.leaf(x1)), forward_all(b, g.leaf(x2)),
                      InfoNceOptions{cfg.tau, cfg.symmetric_loss});
  return loss.value().data[0];
}

void check_checkpoint_compatible(const LayeredEncoder& loaded,
                                 const LayeredEncoder& expected) {
  std::string mismatches;
  if (loaded.layer_count() != expected.layer_count()) {
    mismatches = "layer count " + std::to_string(loaded.layer_count()) + " vs " +
                 std::to_string(expected.layer_count());
  } else {
    for (int i = 0; i < expected.layer_count(); ++i) {
      const Layer& a = loaded.layers[static_cast<std::size_t>(i)];
      const Layer& e = expected.layers[static_cast<std::size_t>(i)];
      if (a.kind != e.kind) {
        mismatches += " layers/" + std::to_string(i) + "/kind";
        continue;
      }
      if (a.has_params() &&
          (!a.weight.same_shape(e.weight) || !a.bias.same_shape(e.bias)))
        mismatches += " layers/" + std::to_string(i) + " " + a.weight.shape_str() +
                      " vs " + e.weight.shape_str();
    }
  }
  if (!mismatches.empty())
    throw InitError("init checkpoint incompatible with configured architecture:" +
                    mismatches);
}

}  // namespace

ExperimentResult run_experiment(const TrainConfig& cfg) {
  cfg.validate();

  Dataset ds = provision_dataset(cfg);
  std::vector<std::size_t> train_idx, val_idx;
  train_val_split(ds.size(), cfg.val_fraction,
                  derive_seed(cfg.seed, "eval"), train_idx, val_idx);
  standardize(ds, train_idx);

  std::vector<std::size_t> widths;
  widths.push_back(ds.features.cols());
  for (std::size_t w : cfg.hidden_widths) widths.push_back(w);
  widths.push_back(cfg.proj_dim);

  LayeredEncoder enc;
  if (cfg.init_checkpoint.empty()) {
    enc = init_params(widths, derive_seed(cfg.seed, "init"));
  } else {
    enc = load_checkpoint(cfg.init_checkpoint);
    check_checkpoint_compatible(enc, init_params(widths, 0));
  }
  set_freeze(enc, cfg.freeze_mode, cfg.freeze_layer);

  const bool write_files = !cfg.out_dir.empty();
  if (write_files) std::filesystem::create_directories(cfg.out_dir);

  ExperimentResult result;
  OptimizerState state = OptimizerState::zeros_like(enc);

  auto checkpoint_path = [&](std::size_t epoch) {
    return cfg.out_dir + "/ckpt_epoch" + std::to_string(epoch) + ".daug";
  };

  result.records.push_back(evaluate(enc, ds, cfg, 0, eval_loss(enc, ds, cfg)));
  if (write_files) save_checkpoint(enc, checkpoint_path(0));

  const Tensor train_features = ds.features;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    float lr_now = cfg.lr;
    if (cfg.cosine_decay)
      lr_now = cfg.lr * 0.5f *
               (1.0f + std::cos(3.14159265358979323846f *
                                static_cast<float>(epoch - 1) /
                                static_cast<float>(cfg.epochs)));

    double epoch_loss = 0.0;
    std::size_t steps = 0;
    auto batches = batch_iter(train_idx.size(), cfg.batch_size,
                              derive_seed(cfg.seed, "batches"), epoch);
    for (const auto& batch : batches) {
      std::vector<std::size_t> rows;
      rows.reserve(batch.size());
      for (std::size_t b : batch) rows.push_back(train_idx[b]);
      const Tensor x = gather_rows(train_features, rows);
      const float l = train_step(enc, x, cfg, state, epoch, steps, lr_now);
      if (!std::isfinite(l))
        throw ContractError("train_step produced non-finite loss at epoch " +
                            std::to_string(epoch));
      epoch_loss += l;
      ++steps;
    }
    epoch_loss /= static_cast<double>(std::max<std::size_t>(1, steps));

    if (epoch % cfg.eval_every == 0 || epoch == cfg.epochs) {
      result.records.push_back(evaluate(enc, ds, cfg, epoch, epoch_loss));
      if (write_files) save_checkpoint(enc, checkpoint_path(epoch));
    }
  }

  result.encoder = std::move(enc);
  return result;
}

}  // namespace daug
