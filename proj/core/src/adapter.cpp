#include "smoa/adapter.hpp"

namespace smoa {

BottleneckAdapter make_adapter(int64_t d, int64_t r, Activation act, const std::string& prefix,
                               uint64_t seed, ParamRegistry& reg, bool trainable) {
  if (d < 1 || r < 1)
    throw ValidationError("make_adapter: d and r must be at least 1, got d=" + std::to_string(d) +
                          " r=" + std::to_string(r));
  if (r > d)
    throw ValidationError("make_adapter: bottleneck r=" + std::to_string(r) +
                          " exceeds width d=" + std::to_string(d));
  BottleneckAdapter a;
  a.act = act;
  a.w_down = make_param(reg, prefix + ".w_down", {d, r}, trainable, seed, 0.02);
  a.b_down = make_param(reg, prefix + ".b_down", {r}, trainable, seed, 0.0);
  a.w_up = make_param(reg, prefix + ".w_up", {r, d}, trainable, seed, 0.0);
  a.b_up = make_param(reg, prefix + ".b_up", {d}, trainable, seed, 0.0);
  return a;
}

Tensor adapter_forward(const BottleneckAdapter& a, const Tensor& x) {
  if (!x.defined() || x.ndim() != 2)
    throw DimensionError("adapter_forward: input must be rank-2");
  if (x.cols() != a.w_down.rows())
    throw DimensionError("adapter_forward: input has " + std::to_string(x.cols()) +
                         " features, adapter expects " + std::to_string(a.w_down.rows()));
  Tensor h = linear(x, a.w_down, a.b_down);
  h = a.act == Activation::Gelu ? gelu(h) : relu(h);
  Tensor y = linear(h, a.w_up, a.b_up);
  add_adapter_rows(static_cast<uint64_t>(x.rows()));
  return y;
}

int64_t adapter_param_count(int64_t d, int64_t r) { return d * r + r + r * d + d; }

}  // namespace smoa
