#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "daug/augment.hpp"
#include "daug/data.hpp"
#include "daug/layers.hpp"
#include "daug/metrics.hpp"

namespace daug {

struct TrainConfig {
  // architecture: hidden dense+relu widths then the projection width; the
  // input width is taken from the data, and an l2-normalize head is appended
  std::vector<std::size_t> hidden_widths{64, 64, 64, 64, 64};
  std::size_t proj_dim = 32;

  AugmentationSpec aug;
  float tau = 0.5f;
  bool symmetric_loss = false;

  std::size_t batch_size = 256;
  std::size_t epochs = 50;
  float lr = 0.05f;
  float momentum = 0.9f;
  bool cosine_decay = false;
  std::uint64_t seed = 0;
  std::size_t eval_every = 10;

  FreezeMode freeze_mode = FreezeMode::None;
  int freeze_layer = -1;

  std::string init_checkpoint;  // empty = random init
  std::string out_dir;          // empty = no files written

  // data: synthetic spec, or a dataset container path overriding it
  SyntheticSpec data;
  std::string dataset_path;

  std::size_t eval_subset = 2048;
  double val_fraction = 0.2;
  ProbeConfig probe;
  double align_alpha = 2.0;
  double uniform_t = 2.0;

  // test hook: route train_step through the plain forward pass, skipping the
  // augmentation machinery entirely
  bool bypass_augmentation = false;

  void validate() const;
};

struct OptimizerState {
  std::vector<Tensor> vel_weight;  // empty tensor for parameter-free layers
  std::vector<Tensor> vel_bias;

  static OptimizerState zeros_like(const LayeredEncoder& enc);
};

struct LayerGrads {
  std::vector<std::optional<Tensor>> weight;
  std::vector<std::optional<Tensor>> bias;
};

// v <- momentum·v + g; p <- p - lr·v. Frozen layers are skipped entirely and
// their velocity stays pinned at zero.
void sgd_step(LayeredEncoder& enc, const LayerGrads& grads, OptimizerState& state,
              float lr, float momentum);

// One contrastive step: two input-augmented views, per-view Deep
// Augmentation, InfoNCE, backward, SGD. Returns the loss value.
float train_step(LayeredEncoder& enc, const Tensor& x_batch, const TrainConfig& cfg,
                 OptimizerState& state, std::size_t epoch, std::size_t step,
                 float lr_now);

struct MetricsReport {
  std::size_t epoch = 0;
  double loss = 0.0;
  double probe_coarse = 0.0;  // equals probe_fine when no hierarchy exists
  double probe_fine = 0.0;
  double alignment = 0.0;
  double uniformity = 0.0;
  std::vector<std::vector<double>> cka;
  std::vector<int> cka_layers;
};

class InitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ExperimentResult {
  std::vector<MetricsReport> records;
  LayeredEncoder encoder;
};

// Full training run: dataset provisioning, init (random or checkpoint),
// freeze regime, per-epoch steps, periodic evaluation + checkpointing into
// cfg.out_dir. Deterministic in (config, seed).
ExperimentResult run_experiment(const TrainConfig& cfg);

// evaluation helper shared with the CLI analysis subcommands
MetricsReport evaluate(const LayeredEncoder& enc, const Dataset& ds,
                       const TrainConfig& cfg, std::size_t epoch, double loss);

Dataset provision_dataset(const TrainConfig& cfg);

// deterministic train/val split: seeded permutation, last val_fraction as val
void train_val_split(std::size_t n, double val_fraction, std::uint64_t seed,
                     std::vector<std::size_t>& train_idx,
                     std::vector<std::size_t>& val_idx);

}  // namespace daug
