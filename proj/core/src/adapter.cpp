#include "ditra/adapter.hpp"

#include <algorithm>

#include "ditra/error.hpp"

namespace ditra {

GateStrategy gate_strategy_from_string(const std::string& s) {
  if (s == "global") return GateStrategy::global;
  if (s == "layer_specific") return GateStrategy::layer_specific;
  if (s == "token_dependent") return GateStrategy::token_dependent;
  if (s == "layer_plus_token") return GateStrategy::layer_plus_token;
  if (s == "fixed") return GateStrategy::fixed_value;
  if (s == "random") return GateStrategy::random_gate;
  if (s == "none") return GateStrategy::none;
  throw ConfigError("unknown gate strategy: " + s);
}

std::string to_string(GateStrategy g) {
  switch (g) {
    case GateStrategy::global: return "global";
    case GateStrategy::layer_specific: return "layer_specific";
    case GateStrategy::token_dependent: return "token_dependent";
    case GateStrategy::layer_plus_token: return "layer_plus_token";
    case GateStrategy::fixed_value: return "fixed";
    case GateStrategy::random_gate: return "random";
    case GateStrategy::none: return "none";
  }
  return "?";
}

InsertionMode insertion_mode_from_string(const std::string& s) {
  if (s == "uniform") return InsertionMode::uniform;
  if (s == "early") return InsertionMode::early;
  if (s == "late") return InsertionMode::late;
  throw ConfigError("unknown insertion mode: " + s);
}

std::string to_string(InsertionMode m) {
  switch (m) {
    case InsertionMode::uniform: return "uniform";
    case InsertionMode::early: return "early";
    case InsertionMode::late: return "late";
  }
  return "?";
}

InsertionPlan build_insertion_plan(InsertionMode mode, int n_layers,
                                   int base_r) {
  if (n_layers <= 0 || base_r <= 0)
    throw ConfigError("insertion plan needs positive layer count and width");
  InsertionPlan plan;
  switch (mode) {
    case InsertionMode::uniform:
      for (int l = 0; l < n_layers; ++l) {
        plan.layers.push_back(l);
        plan.r_per_layer.push_back(base_r);
      }
      break;
    case InsertionMode::early:
      for (int l = 0; l < n_layers / 2; ++l) {
        plan.layers.push_back(l);
        plan.r_per_layer.push_back(2 * base_r);
      }
      break;
    case InsertionMode::late:
      for (int l = n_layers - n_layers / 2; l < n_layers; ++l) {
        plan.layers.push_back(l);
        plan.r_per_layer.push_back(2 * base_r);
      }
      break;
  }
  return plan;
}

namespace {
bool per_layer_gate(GateStrategy g) {
  return g == GateStrategy::layer_specific ||
         g == GateStrategy::layer_plus_token;
}
bool token_gate(GateStrategy g) {
  return g == GateStrategy::token_dependent ||
         g == GateStrategy::layer_plus_token;
}
bool mlp_gate(GateStrategy g) {
  return g == GateStrategy::global || per_layer_gate(g) || token_gate(g);
}
}  // namespace

AdapterStack::AdapterStack(AdapterConfig cfg, Rng& rng)
    : cfg_(cfg),
      plan_(cfg.gate == GateStrategy::none
                ? InsertionPlan{}
                : build_insertion_plan(cfg.insertion, cfg.n_layers, cfg.r)) {
  if (cfg_.gate == GateStrategy::none) return;
  for (std::size_t i = 0; i < plan_.layers.size(); ++i) {
    const int r = plan_.r_per_layer[i];
    down_.push_back(Tensor::gaussian({cfg_.d_llm, r}, rng, 0.02)
                        .set_requires_grad(true));
    up_.push_back(Tensor({r, cfg_.d_llm}).set_requires_grad(true));
  }
  if (mlp_gate(cfg_.gate)) {
    const int in = token_gate(cfg_.gate) ? 2 * cfg_.d_llm : cfg_.d_llm;
    const int n_mlps = per_layer_gate(cfg_.gate) ? int(plan_.layers.size()) : 1;
    for (int i = 0; i < n_mlps; ++i)
      gate_mlps_.emplace_back(in, cfg_.d_llm / 2, cfg_.d_llm, rng);
  }
}

int AdapterStack::slot_of_layer(int layer) const {
  for (std::size_t i = 0; i < plan_.layers.size(); ++i)
    if (plan_.layers[i] == layer) return int(i);
  return -1;
}

AdapterHook AdapterStack::make_hook(const Tensor& fused, Rng* gate_rng) const {
  if (cfg_.gate == GateStrategy::none) return AdapterHook{};

  Tensor h_g = row_mean(fused);  // 1 x d pooled visual context

  // gates that do not depend on the incoming activation are computed once
  // per forward pass and captured by the hook
  std::vector<Tensor> fixed_gates;  // per adapter slot (or a single shared)
  const bool tokenwise = token_gate(cfg_.gate);
  if (!tokenwise) {
    switch (cfg_.gate) {
      case GateStrategy::global:
        fixed_gates.push_back(sigmoid(gate_mlps_[0].forward(h_g)));
        break;
      case GateStrategy::layer_specific:
        for (const Mlp2& m : gate_mlps_)
          fixed_gates.push_back(sigmoid(m.forward(h_g)));
        break;
      case GateStrategy::fixed_value:
        fixed_gates.push_back(Tensor({1, cfg_.d_llm}, cfg_.fixed_value));
        break;
      case GateStrategy::random_gate: {
        if (!gate_rng) throw ConfigError("random gate needs an rng");
        Tensor g({1, cfg_.d_llm});
        for (double& x : g.values()) {
          x = cfg_.random_mu + cfg_.random_sigma * gate_rng->next_gaussian();
          x = std::clamp(x, 1e-6, 1.0 - 1e-6);
        }
        fixed_gates.push_back(g);
        break;
      }
      default: break;
    }
  }

  // copy of the stack's tensors by value: handles share storage
  auto down = down_;
  auto up = up_;
  auto mlps = gate_mlps_;
  auto plan = plan_;
  GateStrategy strat = cfg_.gate;

  return [down, up, mlps, plan, strat, h_g, fixed_gates](
             const Tensor& f, int layer) -> Tensor {
    int slot = -1;
    for (std::size_t i = 0; i < plan.layers.size(); ++i)
      if (plan.layers[i] == layer) slot = int(i);
    if (slot < 0) return f;

    Tensor z = matmul(relu(matmul(f, down[std::size_t(slot)])),
                      up[std::size_t(slot)]);
    if (strat == GateStrategy::token_dependent ||
        strat == GateStrategy::layer_plus_token) {
      const Mlp2& m = strat == GateStrategy::layer_plus_token
                          ? mlps[std::size_t(slot)]
                          : mlps[0];
      Tensor ctx = repeat_rows(h_g, f.rows());
      Tensor g = sigmoid(m.forward(concat_cols({ctx, f})));
      return add(f, mul(z, g));
    }
    const Tensor& g = fixed_gates.size() == 1 ? fixed_gates[0]
                                              : fixed_gates[std::size_t(slot)];
    return add(f, mul_rowvec(z, g));
  };
}

std::vector<std::pair<std::string, Tensor>> AdapterStack::named_params() const {
  std::vector<std::pair<std::string, Tensor>> out;
  for (std::size_t i = 0; i < down_.size(); ++i) {
    const std::string p = "adapter.layer" + std::to_string(plan_.layers[i]);
    out.emplace_back(p + ".down", down_[i]);
    out.emplace_back(p + ".up", up_[i]);
  }
  for (std::size_t i = 0; i < gate_mlps_.size(); ++i)
    gate_mlps_[i].collect("adapter.gate" + std::to_string(i), out);
  return out;
}

std::vector<Tensor> AdapterStack::trainable_params() const {
  std::vector<Tensor> out;
  for (auto& [name, t] : named_params()) out.push_back(t);
  return out;
}

std::size_t AdapterStack::param_count() const {
  std::size_t n = 0;
  for (auto& [name, t] : named_params()) n += t.size();
  return n;
}

std::size_t AdapterStack::bottleneck_param_count() const {
  std::size_t n = 0;
  for (const Tensor& t : down_) n += t.size();
  for (const Tensor& t : up_) n += t.size();
  return n;
}

}  // namespace ditra
