#pragma once

#include <functional>
#include <string>
#include <vector>

#include "smoa/registry.hpp"

namespace smoa {

struct GradcheckParamResult {
  std::string name;
  double max_abs_diff = 0.0;
  double max_rel_err = 0.0;  // |analytic - numeric| / max(|analytic|, |numeric|, 1)
  bool pass = false;
};

struct GradcheckReport {
  double tolerance = 0.0;
  double step = 0.0;
  int64_t scalars_checked = 0;
  std::vector<GradcheckParamResult> params;
  bool pass = false;
};

// Central-difference check of reverse-mode gradients. make_loss must rebuild
// the same scalar loss from current parameter values on every call (fixed
// data, fixed everything else). Each listed parameter is perturbed one scalar
// at a time, so cost is two forward passes per scalar. Non-finite losses
// raise NumericError naming the parameter under test.
GradcheckReport gradcheck_params(const std::function<Tensor()>& make_loss,
                                 const std::vector<std::pair<std::string, Tensor>>& params,
                                 double tolerance = 1e-4, double step = 1e-5);

// Checks every trainable entry of the registry.
GradcheckReport gradcheck(const std::function<Tensor()>& make_loss, ParamRegistry& reg,
                          double tolerance = 1e-4, double step = 1e-5);

}  // namespace smoa
