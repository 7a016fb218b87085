#include "smoa/moa.hpp"

#include "smoa/ops.hpp"

namespace smoa {

DenseMoaLayer make_dense_moa(int64_t d, int64_t n, int64_t r, Activation act,
                             const std::string& prefix, uint64_t seed, ParamRegistry& reg,
                             bool trainable) {
  if (n < 1) throw ValidationError("make_dense_moa: need at least one expert");
  DenseMoaLayer layer;
  layer.d = d;
  layer.n = n;
  layer.router_w = make_param(reg, prefix + ".router.weight", {d, n}, trainable, seed, 0.02);
  layer.experts.reserve(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i)
    layer.experts.push_back(make_adapter(d, r, act, prefix + ".experts." + std::to_string(i),
                                         seed, reg, trainable));
  return layer;
}

SoftMoaLayer make_soft_moa(int64_t d, int64_t n, int64_t p, int64_t r, Activation act,
                           const std::string& prefix, uint64_t seed, ParamRegistry& reg,
                           bool trainable) {
  if (n < 1) throw ValidationError("make_soft_moa: need at least one expert");
  if (p < 1) throw ValidationError("make_soft_moa: need at least one slot per expert");
  SoftMoaLayer layer;
  layer.d = d;
  layer.n = n;
  layer.p = p;
  layer.phi = make_param(reg, prefix + ".slots.phi", {d, n * p}, trainable, seed, 0.02);
  layer.experts.reserve(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i)
    layer.experts.push_back(make_adapter(d, r, act, prefix + ".experts." + std::to_string(i),
                                         seed, reg, trainable));
  return layer;
}

Tensor router_gates(const Tensor& x, const Tensor& router_w) {
  return softmax_rows(matmul(x, router_w));
}

Tensor dispatch_weights(const Tensor& x, const Tensor& phi) {
  return softmax_cols(matmul(x, phi));
}

Tensor combine_weights(const Tensor& x, const Tensor& phi) {
  return softmax_rows(matmul(x, phi));
}

Tensor dense_moa_forward(const DenseMoaLayer& layer, const Tensor& x, RoutingTrace* trace) {
  if (static_cast<int64_t>(layer.experts.size()) != layer.n)
    throw ContractError("dense_moa_forward: expert list does not match n");
  if (x.cols() != layer.d)
    throw DimensionError("dense_moa_forward: input has " + std::to_string(x.cols()) +
                         " features, layer expects " + std::to_string(layer.d));
  Tensor g = router_gates(x, layer.router_w);  // [L×n]
  if (trace) {
    trace->n = layer.n;
    trace->p = 1;
    trace->gates = g.to_matrix();
  }
  Tensor acc;
  for (int64_t i = 0; i < layer.n; ++i) {
    Tensor gi = slice_cols(g, i, 1);
    Tensor yi = adapter_forward(layer.experts[static_cast<size_t>(i)], x);
    Tensor term = scale_rows(yi, gi);
    acc = acc.defined() ? add(acc, term) : term;
  }
  return acc;
}

Tensor soft_moa_forward(const SoftMoaLayer& layer, const Tensor& x, RoutingTrace* trace) {
  if (static_cast<int64_t>(layer.experts.size()) != layer.n)
    throw ContractError("soft_moa_forward: expert list does not match n");
  if (x.cols() != layer.d)
    throw DimensionError("soft_moa_forward: input has " + std::to_string(x.cols()) +
                         " features, layer expects " + std::to_string(layer.d));
  Tensor d_w = dispatch_weights(x, layer.phi);  // [L×(n·p)]
  Tensor c_w = combine_weights(x, layer.phi);   // [L×(n·p)]
  if (trace) {
    trace->n = layer.n;
    trace->p = layer.p;
    trace->dispatch = d_w.to_matrix();
    trace->combine = c_w.to_matrix();
  }
  Tensor slot_in = matmul(transpose(d_w), x);  // [(n·p)×d]
  std::vector<Tensor> slot_out;
  slot_out.reserve(static_cast<size_t>(layer.n));
  for (int64_t e = 0; e < layer.n; ++e) {
    Tensor xe = layer.n == 1 ? slot_in : slice_rows(slot_in, e * layer.p, layer.p);
    slot_out.push_back(adapter_forward(layer.experts[static_cast<size_t>(e)], xe));
  }
  Tensor y_slots = slot_out.size() == 1 ? slot_out[0] : concat_rows(slot_out);
  return matmul(c_w, y_slots);  // [L×d]
}

std::vector<double> expert_contribution(const RoutingTrace& trace, int64_t p) {
  if (p < 1) throw ValidationError("expert_contribution: p must be at least 1");
  const Matrix& w = trace.soft() ? trace.combine : trace.gates;
  if (w.rows < 1 || w.cols < 1) throw ContractError("expert_contribution: empty trace");
  if (w.cols % p != 0)
    throw ValidationError("expert_contribution: " + std::to_string(w.cols) +
                          " slot columns not divisible by p=" + std::to_string(p));
  const int64_t n = w.cols / p;
  std::vector<double> out(static_cast<size_t>(n), 0.0);
  for (int64_t t = 0; t < w.rows; ++t)
    for (int64_t j = 0; j < w.cols; ++j) out[static_cast<size_t>(j / p)] += w.at(t, j);
  const double inv = 1.0 / static_cast<double>(w.rows);
  for (double& v : out) v *= inv;
  return out;
}

std::vector<double> expert_contribution(const RoutingTrace& trace) {
  return expert_contribution(trace, trace.soft() ? trace.p : 1);
}

ClassContribution per_class_contribution(const std::vector<RoutingTrace>& traces,
                                         const std::vector<int>& labels, int64_t p,
                                         int64_t n_classes) {
  if (traces.empty()) throw ValidationError("per_class_contribution: no traces");
  if (traces.size() != labels.size())
    throw DimensionError("per_class_contribution: " + std::to_string(traces.size()) +
                         " traces vs " + std::to_string(labels.size()) + " labels");
  if (n_classes < 1) throw ValidationError("per_class_contribution: n_classes must be positive");
  const int64_t n = traces[0].n;

  ClassContribution cc;
  cc.table = Matrix(n, n_classes);
  cc.class_present.assign(static_cast<size_t>(n_classes), false);
  std::vector<int64_t> counts(static_cast<size_t>(n_classes), 0);

  for (size_t i = 0; i < traces.size(); ++i) {
    const int label = labels[i];
    if (label < 0 || label >= n_classes)
      throw ValidationError("per_class_contribution: label " + std::to_string(label) +
                            " outside [0, " + std::to_string(n_classes) + ")");
    if (traces[i].n != n)
      throw ValidationError("per_class_contribution: traces disagree on expert count");
    const std::vector<double> c = expert_contribution(traces[i], p);
    if (static_cast<int64_t>(c.size()) != n)
      throw ValidationError("per_class_contribution: p inconsistent with trace shape");
    for (int64_t e = 0; e < n; ++e) cc.table.at(e, label) += c[static_cast<size_t>(e)];
    ++counts[static_cast<size_t>(label)];
  }
  for (int64_t k = 0; k < n_classes; ++k) {
    if (counts[static_cast<size_t>(k)] == 0) continue;
    cc.class_present[static_cast<size_t>(k)] = true;
    const double inv = 1.0 / static_cast<double>(counts[static_cast<size_t>(k)]);
    for (int64_t e = 0; e < n; ++e) cc.table.at(e, k) *= inv;
  }
  return cc;
}

int64_t moa_param_count(int64_t n, int64_t p, int64_t r, int64_t d, int64_t layers, bool soft) {
  if (layers < 1 || d < 1 || r < 1 || n < 1 || p < 1)
    throw ValidationError("moa_param_count: all sizes must be at least 1");
  const int64_t routing = soft ? d * n * p : d * n;
  return layers * (n * adapter_param_count(d, r) + routing);
}

}  // namespace smoa
