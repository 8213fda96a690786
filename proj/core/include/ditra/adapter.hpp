#pragma once

#include <string>
#include <utility>
#include <vector>

#include "ditra/backbone.hpp"
#include "ditra/fusion.hpp"
#include "ditra/rng.hpp"
#include "ditra/tensor.hpp"

namespace ditra {

enum class GateStrategy {
  global,          // one gate vector per forward, shared by all layers
  layer_specific,  // per-layer gate networks over the same pooled context
  token_dependent, // gate per row from [pooled context ; row activation]
  layer_plus_token,
  fixed_value,
  random_gate,
  none,  // adapters absent entirely
};

enum class InsertionMode { uniform, early, late };

GateStrategy gate_strategy_from_string(const std::string& s);
std::string to_string(GateStrategy g);
InsertionMode insertion_mode_from_string(const std::string& s);
std::string to_string(InsertionMode m);

struct InsertionPlan {
  std::vector<int> layers;       // backbone layer indices receiving adapters
  std::vector<int> r_per_layer;  // bottleneck width per such layer
};

// uniform: every layer at base_r; early/late: first/second half at 2*base_r,
// which keeps the total bottleneck parameter count identical
InsertionPlan build_insertion_plan(InsertionMode mode, int n_layers,
                                   int base_r);

struct AdapterConfig {
  GateStrategy gate = GateStrategy::global;
  InsertionMode insertion = InsertionMode::uniform;
  int n_layers = 4;
  int d_llm = 64;
  int r = 8;
  double fixed_value = 1.0;
  double random_mu = 0.5;
  double random_sigma = 0.1;
};

// Bottleneck adapters on the FFN outputs of selected decoder layers, scaled
// by a visually conditioned gate: z = ReLU(x W_down) W_up, out = x + g * z.
// Up-projections start at zero so an untrained stack is an exact identity.
class AdapterStack {
 public:
  AdapterStack(AdapterConfig cfg, Rng& rng);

  const AdapterConfig& config() const { return cfg_; }
  const InsertionPlan& plan() const { return plan_; }

  // Builds the per-forward hook from the fused visual rows. gate_rng is
  // consumed only by the random strategy (fresh sample per forward pass).
  // Returns an empty hook when the strategy is `none`.
  AdapterHook make_hook(const Tensor& fused, Rng* gate_rng) const;

  std::vector<std::pair<std::string, Tensor>> named_params() const;
  std::vector<Tensor> trainable_params() const;
  std::size_t param_count() const;
  std::size_t bottleneck_param_count() const;

 private:
  int slot_of_layer(int layer) const;

  AdapterConfig cfg_;
  InsertionPlan plan_;
  std::vector<Tensor> down_, up_;
  std::vector<Mlp2> gate_mlps_;  // sigmoid applied at the call site
};

}  // namespace ditra
