#pragma once

#include <array>
#include <cstdint>
#include <utility>
#include <vector>

#include "daug/graph.hpp"
#include "daug/layers.hpp"
#include "daug/tensor.hpp"

namespace daug {

enum class PairingMode { BothViews, OneSided };

enum class InputAugKind { None, GaussianNoise, CoordinateMask };

struct InputAug {
  InputAugKind kind = InputAugKind::GaussianNoise;
  float param = 0.1f;  // sigma for gaussian-noise, q for coordinate-mask
};

// One Deep Augmentation configuration: dropout at insertion point
// `target_layer` applied to a `batch_fraction` subset of each batch, with
// optional per-sample stop-gradient below the targeted layer.
struct AugmentationSpec {
  int target_layer = -1;
  bool all_layers = false;  // dropout at every insertion point 0..L-2 instead
  float rate = 0.5f;        // dropout probability p in [0, 1)
  float batch_fraction = 0.5f;
  bool stop_grad = false;
  PairingMode pairing = PairingMode::BothViews;
  InputAug input_aug;
  bool dropout_rescale = true;  // inverted dropout: kept units scaled 1/(1-p)
  bool plan_per_pair = false;   // draw the apply flag once per pair, not per view
  std::uint64_t alt_seed = 0;   // reserved

  void validate() const;
};

// Per-step realization of an AugmentationSpec over one batch: which of the 2B views
// receive layer augmentation and which rows block gradients. Dropout masks
// are realized lazily in augmented_forward from mask_seed, so the plan stays
// independent of layer widths.
struct ViewPlan {
  std::size_t batch_size = 0;
  std::array<std::vector<std::uint8_t>, 2> apply;
  std::array<std::vector<std::uint8_t>, 2> stop;
  std::uint64_t mask_seed = 0;
};

Tensor input_augment(const Tensor& x, const InputAug& aug, std::uint64_t seed);

// Inverted dropout over the whole tensor: each unit kept with probability
// 1-p, kept units scaled by 1/(1-p) when rescale is on. Returns the output
// and the realized keep mask.
std::pair<Tensor, std::vector<std::uint8_t>> dropout(const Tensor& h, float p,
                                                     std::uint64_t seed,
                                                     bool rescale = true);

ViewPlan plan_views(const AugmentationSpec& spec, std::size_t batch_size,
                    std::uint64_t seed);

// g^l(x) = f^{l+1,L-1}( A( f^{-1,l}(x) ) ): forward to the targeted layer,
// dropout on the plan's flagged rows, stop-gradient on its stop rows, then
// forward through the remaining layers. Input augmentation is applied to
// x_view before this call.
Var augmented_forward(const BoundEncoder& enc, Var x_view,
                      const AugmentationSpec& spec, const ViewPlan& plan,
                      int view);

}  // namespace daug
