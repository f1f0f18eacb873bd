#include "daug/augment.hpp"

#include <string>

#include "daug/rng.hpp"

namespace daug {

void AugmentationSpec::validate() const {
  if (!(rate >= 0.0f && rate < 1.0f))
    throw ContractError("rate must be in [0,1), got " + std::to_string(rate) +
                        " (degenerate: all units dropped)");
  if (!(batch_fraction >= 0.0f && batch_fraction <= 1.0f))
    throw ContractError("batch_fraction must be in [0,1], got " +
                        std::to_string(batch_fraction));
  if (input_aug.kind == InputAugKind::GaussianNoise && !(input_aug.param >= 0.0f))
    throw ContractError("gaussian-noise sigma must be >= 0");
  if (input_aug.kind == InputAugKind::CoordinateMask &&
      !(input_aug.param >= 0.0f && input_aug.param < 1.0f))
    throw ContractError("coordinate-mask q must be in [0,1)");
}

Tensor input_augment(const Tensor& x, const InputAug& aug, std::uint64_t seed) {
  switch (aug.kind) {
    case InputAugKind::None:
      return x;
    case InputAugKind::GaussianNoise: {
      if (!(aug.param >= 0.0f)) throw ContractError("gaussian-noise sigma must be >= 0");
      if (aug.param == 0.0f) return x;
      Tensor out = x;
      CounterRng rng(seed);
      for (float& v : out.data)
        v += static_cast<float>(aug.param * rng.normal());
      return out;
    }
    case InputAugKind::CoordinateMask: {
      if (!(aug.param >= 0.0f && aug.param < 1.0f))
        throw ContractError("coordinate-mask q must be in [0,1)");
      if (aug.param == 0.0f) return x;
      Tensor out = x;
      CounterRng rng(seed);
      for (float& v : out.data)
        if (rng.uniform() < aug.param) v = 0.0f;
      return out;
    }
  }
  throw ContractError("input_augment: unknown kind");
}

std::pair<Tensor, std::vector<std::uint8_t>> dropout(const Tensor& h, float p,
                                                     std::uint64_t seed, bool rescale) {
  if (!(p >= 0.0f && p < 1.0f))
    throw ContractError("dropout p must be in [0,1), got " + std::to_string(p) +
                        " (degenerate: all units dropped)");
  Tensor out = h;
  std::vector<std::uint8_t> mask(h.size(), 1);
  const float keep_scale = rescale ? 1.0f / (1.0f - p) : 1.0f;
  CounterRng rng(seed);
  for (std::size_t i = 0; i < h.size(); ++i) {
    if (rng.uniform() < p) {
      out.data[i] = 0.0f;
      mask[i] = 0;
    } else {
      out.data[i] *= keep_scale;
    }
  }
  return {std::move(out), std::move(mask)};
}

ViewPlan plan_views(const AugmentationSpec& spec, std::size_t batch_size,
                    std::uint64_t seed) {
  spec.validate();
  if (batch_size < 1) throw ContractError("plan_views: batch_size must be >= 1");

  ViewPlan plan;
  plan.batch_size = batch_size;
  plan.mask_seed = derive_seed(seed, "dropout_mask");
  for (int v = 0; v < 2; ++v) {
    plan.apply[v].assign(batch_size, 0);
    plan.stop[v].assign(batch_size, 0);
  }

  const double s = spec.batch_fraction;
  CounterRng rng(derive_seed(seed, "plan_views"));
  if (spec.pairing == PairingMode::OneSided) {
    // pair selected with prob s; only view 2 of a selected pair is flagged
    for (std::size_t i = 0; i < batch_size; ++i)
      if (rng.uniform() < s) plan.apply[1][i] = 1;
  } else if (spec.plan_per_pair) {
    for (std::size_t i = 0; i < batch_size; ++i)
      if (rng.uniform() < s) plan.apply[0][i] = plan.apply[1][i] = 1;
  } else {
    // each of the 2B views flagged independently; at s=0.5 this gives the
    // 25/50/25 mix of both/one/neither-augmented pairs
    for (int v = 0; v < 2; ++v)
      for (std::size_t i = 0; i < batch_size; ++i)
        if (rng.uniform() < s) plan.apply[v][i] = 1;
  }

  // rate 0 makes the layer augmentation the identity; a stop-gradient alone
  // would still change dynamics, so it is gated on an actual augmentation
  const bool active = spec.rate > 0.0f;
  if (spec.stop_grad && active)
    for (int v = 0; v < 2; ++v)
      for (std::size_t i = 0; i < batch_size; ++i)
        plan.stop[v][i] = plan.apply[v][i];
  return plan;
}

namespace {

// multiplier tensor for flagged rows: realized dropout mask times keep scale;
// unflagged rows stay at exactly 1
Tensor row_dropout_multiplier(const std::vector<std::uint8_t>& flags,
                              std::size_t width, float p, bool rescale,
                              std::uint64_t seed) {
  Tensor mult = Tensor::ones({flags.size(), width});
  const float keep_scale = rescale ? 1.0f / (1.0f - p) : 1.0f;
  for (std::size_t r = 0; r < flags.size(); ++r) {
    if (!flags[r]) continue;
    CounterRng rng(hash_u64(seed, r));
    for (std::size_t c = 0; c < width; ++c)
      mult(r, c) = rng.uniform() < p ? 0.0f : keep_scale;
  }
  return mult;
}

bool any_set(const std::vector<std::uint8_t>& v) {
  for (std::uint8_t x : v)
    if (x) return true;
  return false;
}

}  // namespace

Var augmented_forward(const BoundEncoder& enc, Var x_view,
                      const AugmentationSpec& spec, const ViewPlan& plan, int view) {
  spec.validate();
  const auto& flags = plan.apply[static_cast<std::size_t>(view)];
  const auto& stops = plan.stop[static_cast<std::size_t>(view)];
  if (flags.size() != x_view.value().rows())
    throw ShapeError("augmented_forward: plan batch size " +
                     std::to_string(flags.size()) + " does not match input " +
                     x_view.value().shape_str());

  const bool active = spec.rate > 0.0f && any_set(flags);
  if (!active) return forward_all(enc, x_view);

  Graph* g = x_view.graph;
  const int L = enc.encoder->layer_count();

  if (spec.all_layers) {
    // plain dropout after every layer except the final normalize; no
    // stop-gradient in this regime
    Var h = x_view;
    for (int l = 0; l < L; ++l) {
      h = forward_layer(enc, h, l);
      if (l == L - 1) break;
      Tensor mult = row_dropout_multiplier(
          flags, h.value().cols(), spec.rate, spec.dropout_rescale,
          derive_seed(plan.mask_seed, "all_layers", {static_cast<std::uint64_t>(view),
                                                    static_cast<std::uint64_t>(l)}));
      h = mul(h, g->leaf(std::move(mult)));
    }
    return h;
  }

  enc.encoder->check_layer_index(spec.target_layer);
  Var h = forward_to(enc, x_view, spec.target_layer);
  Tensor mult = row_dropout_multiplier(
      flags, h.value().cols(), spec.rate, spec.dropout_rescale,
      derive_seed(plan.mask_seed, "target_layer", {static_cast<std::uint64_t>(view)}));
  h = mul(h, g->leaf(std::move(mult)));
  if (any_set(stops)) h = stop_gradient(h, stops);
  return forward_from(enc, h, spec.target_layer);
}

}  // namespace daug
