#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "smoa/rng.hpp"
#include "smoa/tensor.hpp"

namespace testutil {

inline smoa::Tensor random_tensor(smoa::Shape shape, smoa::Rng& rng, double scale = 1.0,
                                  bool requires_grad = false) {
  int64_t n = 1;
  for (int64_t e : shape) n *= e;
  std::vector<double> v(static_cast<size_t>(n));
  for (double& x : v) x = scale * rng.normal();
  return smoa::Tensor::from_data(std::move(shape), v, requires_grad);
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
  return m;
}

// Central finite differences of a scalar-valued rebuildable loss with respect
// to one tensor's data, compared against the analytic grad already in place.
inline double fd_max_rel_err(const std::function<smoa::Tensor()>& make_loss,
                             const smoa::Tensor& param, const std::vector<double>& analytic,
                             double h = 1e-5) {
  double worst = 0.0;
  std::vector<double>& data = param.node()->value;
  for (size_t i = 0; i < data.size(); ++i) {
    const double keep = data[i];
    data[i] = keep + h;
    double up, down;
    {
      smoa::NoGradGuard ng;
      up = make_loss().item();
      data[i] = keep - h;
      down = make_loss().item();
    }
    data[i] = keep;
    const double fd = (up - down) / (2.0 * h);
    const double a = analytic[i];
    const double rel = std::fabs(a - fd) / std::max({std::fabs(a), std::fabs(fd), 1.0});
    worst = std::max(worst, rel);
  }
  return worst;
}

}  // namespace testutil
