#pragma once

#include <string>
#include <vector>

#include "smoa/adapter.hpp"
#include "smoa/common.hpp"

namespace smoa {

// Every expert sees every token, weighted per token by a learned router.
struct DenseMoaLayer {
  int64_t d = 0, n = 0;
  Tensor router_w;  // [d×n]
  std::vector<BottleneckAdapter> experts;
};

// Experts see weighted token mixtures instead: tokens are averaged into
// n*p slot inputs (dispatch), each expert transforms its p slots, and the
// slot outputs are averaged back per token (combine).
struct SoftMoaLayer {
  int64_t d = 0, n = 0, p = 0;
  Tensor phi;  // [d×(n·p)]
  std::vector<BottleneckAdapter> experts;
};

DenseMoaLayer make_dense_moa(int64_t d, int64_t n, int64_t r, Activation act,
                             const std::string& prefix, uint64_t seed, ParamRegistry& reg,
                             bool trainable);
SoftMoaLayer make_soft_moa(int64_t d, int64_t n, int64_t p, int64_t r, Activation act,
                           const std::string& prefix, uint64_t seed, ParamRegistry& reg,
                           bool trainable);

// Per-token expert weights: row-softmax of x·w. [L×d] -> [L×n], rows sum to 1.
Tensor router_gates(const Tensor& x, const Tensor& router_w);

// Per-slot token weights: column-softmax of x·phi. [L×d] -> [L×(n·p)],
// columns sum to 1 over the L tokens.
Tensor dispatch_weights(const Tensor& x, const Tensor& phi);

// Per-token slot weights: row-softmax of x·phi. Rows sum to 1 over slots.
Tensor combine_weights(const Tensor& x, const Tensor& phi);

// Routing snapshot of one block during one forward pass. Detached values.
struct RoutingTrace {
  int64_t n = 0, p = 1;
  Matrix gates;     // dense: [L×n]
  Matrix dispatch;  // soft: [L×(n·p)]
  Matrix combine;   // soft: [L×(n·p)]
  bool soft() const { return combine.rows > 0; }
};

Tensor dense_moa_forward(const DenseMoaLayer& layer, const Tensor& x,
                         RoutingTrace* trace = nullptr);

// Slot s is owned by expert s/p; an expert's slots are contiguous.
Tensor soft_moa_forward(const SoftMoaLayer& layer, const Tensor& x, RoutingTrace* trace = nullptr);

// Mean mixing weight per expert, averaged over tokens (dense: gate columns;
// soft: combine columns summed over each expert's p contiguous slots).
// Sums to 1. The convenience overload reads p from the trace.
std::vector<double> expert_contribution(const RoutingTrace& trace, int64_t p);
std::vector<double> expert_contribution(const RoutingTrace& trace);

// Per-expert contribution averaged within each class. table is [n×classes];
// columns for classes with no samples are zero and flagged absent.
struct ClassContribution {
  Matrix table;
  std::vector<bool> class_present;
};
ClassContribution per_class_contribution(const std::vector<RoutingTrace>& traces,
                                         const std::vector<int>& labels, int64_t p,
                                         int64_t n_classes);

// Adapter-module scalars across all layers: experts plus routing table.
// Dense routing is d*n per layer; soft is d*n*p.
int64_t moa_param_count(int64_t n, int64_t p, int64_t r, int64_t d, int64_t layers, bool soft);

}  // namespace smoa
