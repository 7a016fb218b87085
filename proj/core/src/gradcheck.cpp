#include "smoa/gradcheck.hpp"

#include <cmath>

#include "smoa/ops.hpp"

namespace smoa {

GradcheckReport gradcheck_params(const std::function<Tensor()>& make_loss,
                                 const std::vector<std::pair<std::string, Tensor>>& params,
                                 double tolerance, double step) {
  if (params.empty()) throw ValidationError("gradcheck: no parameters to check");
  if (step <= 0.0) throw ValidationError("gradcheck: step must be positive");
  if (tolerance <= 0.0) throw ValidationError("gradcheck: tolerance must be positive");

  for (const auto& [name, t] : params) {
    if (!t.defined()) throw ValidationError("gradcheck: parameter " + name + " is undefined");
    if (!t.requires_grad())
      throw ValidationError("gradcheck: parameter " + name + " does not require grad");
  }

  // Analytic pass.
  std::vector<std::vector<double>> analytic;
  {
    for (const auto& [name, t] : params) {
      Tensor tt = t;
      tt.ensure_grad();
      tt.zero_grad();
    }
    Tensor loss = make_loss();
    if (!std::isfinite(loss.item())) throw NumericError("gradcheck: loss is not finite");
    backward(loss);
    analytic.reserve(params.size());
    for (const auto& [name, t] : params) analytic.push_back(t.grad_buffer());
  }

  GradcheckReport report;
  report.tolerance = tolerance;
  report.step = step;
  report.pass = true;

  NoGradGuard guard;
  for (size_t pi = 0; pi < params.size(); ++pi) {
    const std::string& name = params[pi].first;
    Tensor t = params[pi].second;
    double* w = t.data();
    const int64_t n = t.numel();
    if (analytic[pi].empty()) analytic[pi].assign(static_cast<size_t>(n), 0.0);

    GradcheckParamResult res;
    res.name = name;
    for (int64_t i = 0; i < n; ++i) {
      const double orig = w[i];
      w[i] = orig + step;
      const double up = make_loss().item();
      w[i] = orig - step;
      const double down = make_loss().item();
      w[i] = orig;
      if (!std::isfinite(up) || !std::isfinite(down))
        throw NumericError("gradcheck: loss is not finite while perturbing " + name);
      const double numeric = (up - down) / (2.0 * step);
      const double a = analytic[pi][static_cast<size_t>(i)];
      const double diff = std::abs(a - numeric);
      const double rel = diff / std::max({std::abs(a), std::abs(numeric), 1.0});
      res.max_abs_diff = std::max(res.max_abs_diff, diff);
      res.max_rel_err = std::max(res.max_rel_err, rel);
    }
    res.pass = res.max_rel_err <= tolerance;
    report.pass = report.pass && res.pass;
    report.scalars_checked += n;
    report.params.push_back(std::move(res));
  }
  return report;
}

GradcheckReport gradcheck(const std::function<Tensor()>& make_loss, ParamRegistry& reg,
                          double tolerance, double step) {
  std::vector<std::pair<std::string, Tensor>> params;
  for (ParamEntry& e : reg)
    if (e.trainable) params.emplace_back(e.name, e.tensor);
  return gradcheck_params(make_loss, params, tolerance, step);
}

}  // namespace smoa
