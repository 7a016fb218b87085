#pragma once

#include <cstdint>

#include "smoa/encoder.hpp"

namespace smoa {

// Adapter-path cost of one MoA block forward pass, in multiply-accumulate
// pairs, broken down by stage. Matches the mac counter instrumented into the
// op kernels exactly (see tests).
struct FlopReport {
  PetlKind kind = PetlKind::DenseMoa;
  int64_t L = 0, d = 0, r = 0, n = 0, p = 1;
  uint64_t router = 0;    // routing logits: dense x·W once; soft x·phi twice
                          // (dispatch and combine weights each compute theirs)
  uint64_t dispatch = 0;  // soft slot-input mixing Dt·x
  uint64_t combine = 0;   // output mixing: soft C·Y~; dense per-expert row gating
  uint64_t expert = 0;    // bottleneck projections
  uint64_t total() const { return router + dispatch + combine + expert; }
};

FlopReport flop_model(int64_t L, int64_t d, int64_t r, int64_t n, int64_t p, PetlKind kind);

}  // namespace smoa
