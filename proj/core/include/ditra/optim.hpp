#pragma once

#include <cstdint>
#include <vector>

#include "ditra/autograd.hpp"
#include "ditra/tensor.hpp"

namespace ditra {

struct AdamWConfig {
  double lr = 1e-3;
  double beta1 = 0.8;
  double beta2 = 0.95;
  double eps = 1e-8;
  double weight_decay = 3e-6;
  double clip_norm = 1.0;     // global-norm clip applied to raw grads; <=0 off
  double warmup_frac = 0.08;  // fraction of total_steps spent in linear warmup
  std::int64_t total_steps = 0;  // 0 -> constant lr (no warmup, no decay)
};

// AdamW with decoupled weight decay. Gradients are clipped by global norm
// across all parameters before the moment update.
class AdamW {
 public:
  AdamW(std::vector<Tensor> params, AdamWConfig cfg);

  // One update using grads.of(param) for every managed parameter
  // (zeros when a parameter did not reach the loss). Returns the lr used.
  double step(const GradMap& grads);

  // linear warmup then cosine decay to zero; step counts from 0
  double lr_at(std::int64_t step) const;

  std::int64_t steps_taken() const { return t_; }
  double last_grad_norm() const { return last_norm_; }
  const AdamWConfig& config() const { return cfg_; }

 private:
  std::vector<Tensor> params_;
  std::vector<std::vector<double>> m_, v_;
  AdamWConfig cfg_;
  std::int64_t t_ = 0;       // completed steps
  double last_norm_ = 0.0;   // pre-clip global grad norm of the last step
};

}  // namespace ditra
