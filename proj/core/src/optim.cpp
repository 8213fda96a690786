#include "ditra/optim.hpp"

#include <cmath>

#include "ditra/error.hpp"

namespace ditra {

AdamW::AdamW(std::vector<Tensor> params, AdamWConfig cfg)
    : params_(std::move(params)), cfg_(cfg) {
  if (params_.empty()) throw ConfigError("optimizer needs at least one parameter");
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const Tensor& p : params_) {
    m_.emplace_back(p.size(), 0.0);
    v_.emplace_back(p.size(), 0.0);
  }
}

double AdamW::lr_at(std::int64_t step) const {
  if (cfg_.total_steps <= 0) return cfg_.lr;
  const std::int64_t w =
      std::max<std::int64_t>(1, std::int64_t(cfg_.warmup_frac * double(cfg_.total_steps)));
  if (step < w) return cfg_.lr * double(step + 1) / double(w);
  const double p =
      double(step - w) / double(std::max<std::int64_t>(1, cfg_.total_steps - w));
  return cfg_.lr * 0.5 * (1.0 + std::cos(M_PI * p));
}

double AdamW::step(const GradMap& grads) {
  const double lr = lr_at(t_);

  std::vector<Tensor> g;
  g.reserve(params_.size());
  double sq = 0.0;
  for (const Tensor& p : params_) {
    g.push_back(grads.of(p));
    const double* gd = g.back().data();
    for (std::size_t i = 0; i < p.size(); ++i) sq += gd[i] * gd[i];
  }
  last_norm_ = std::sqrt(sq);
  const double clip = (cfg_.clip_norm > 0.0 && last_norm_ > cfg_.clip_norm)
                          ? cfg_.clip_norm / last_norm_
                          : 1.0;

  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, double(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, double(t_));
  for (std::size_t k = 0; k < params_.size(); ++k) {
    double* p = params_[k].data();
    const double* gd = g[k].data();
    double* m = m_[k].data();
    double* v = v_[k].data();
    const std::size_t n = params_[k].size();
    for (std::size_t i = 0; i < n; ++i) {
      const double gi = gd[i] * clip;
      m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * gi;
      v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * gi * gi;
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      p[i] -= lr * cfg_.weight_decay * p[i];
      p[i] -= lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
  }
  return lr;
}

}  // namespace ditra
