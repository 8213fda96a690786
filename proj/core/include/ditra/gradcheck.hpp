#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>

#include "ditra/tensor.hpp"

namespace ditra {

// Central finite differences through one parameter of a scalar closure.
// The closure must rebuild its full forward pass on every call; it never
// sees a tape, so the estimate is independent of the reverse-mode engine.
inline Tensor numeric_grad(const std::function<double()>& f, Tensor param,
                           double eps = 1e-5) {
  Tensor g(param.shape());
  auto& v = param.values();
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double keep = v[i];
    v[i] = keep + eps;
    const double fp = f();
    v[i] = keep - eps;
    const double fm = f();
    v[i] = keep;
    g.values()[i] = (fp - fm) / (2.0 * eps);
  }
  return g;
}

// worst elementwise |a-b| / max(floor, |a|, |b|)
inline double max_rel_err(const Tensor& a, const Tensor& b,
                          double floor = 1e-6) {
  double worst = 0.0;
  const auto& av = a.values();
  const auto& bv = b.values();
  for (std::size_t i = 0; i < av.size(); ++i) {
    const double denom =
        std::max({floor, std::fabs(av[i]), std::fabs(bv[i])});
    worst = std::max(worst, std::fabs(av[i] - bv[i]) / denom);
  }
  return worst;
}

}  // namespace ditra
