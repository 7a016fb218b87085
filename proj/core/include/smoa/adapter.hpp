#pragma once

#include <string>

#include "smoa/ops.hpp"
#include "smoa/registry.hpp"

namespace smoa {

enum class Activation { Gelu, Relu };

// Bottleneck adapter: project d -> r, nonlinearity, project r -> d. The up
// projection starts at zero so a fresh adapter is an exact no-op.
struct BottleneckAdapter {
  Tensor w_down;  // [d×r]
  Tensor b_down;  // [r]
  Tensor w_up;    // [r×d]
  Tensor b_up;    // [d]
  Activation act = Activation::Gelu;
};

// Registers four parameters named <prefix>.{w_down,b_down,w_up,b_up}.
// w_down is drawn N(0, 0.02) from a stream keyed by (seed, name); the rest
// start at zero.
BottleneckAdapter make_adapter(int64_t d, int64_t r, Activation act, const std::string& prefix,
                               uint64_t seed, ParamRegistry& reg, bool trainable);

// x [rows×d] -> [rows×d]. Bumps the adapter-row counter by rows.
Tensor adapter_forward(const BottleneckAdapter& a, const Tensor& x);

// Scalars in one adapter: d*r + r + r*d + d.
int64_t adapter_param_count(int64_t d, int64_t r);

}  // namespace smoa
