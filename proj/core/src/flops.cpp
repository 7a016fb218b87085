#include "smoa/flops.hpp"

namespace smoa {

FlopReport flop_model(int64_t L, int64_t d, int64_t r, int64_t n, int64_t p, PetlKind kind) {
  if (L < 1 || d < 1 || r < 1 || n < 1 || p < 1)
    throw ValidationError("flop_model: all dimensions must be positive");
  if (kind != PetlKind::DenseMoa && kind != PetlKind::SoftMoa)
    throw ValidationError("flop_model: kind must be a mixture variant");

  FlopReport rep;
  rep.kind = kind;
  rep.L = L;
  rep.d = d;
  rep.r = r;
  rep.n = n;
  rep.p = p;
  const uint64_t uL = L, ud = d, ur = r, un = n, up = p;
  if (kind == PetlKind::DenseMoa) {
    rep.router = uL * ud * un;
    rep.dispatch = 0;
    rep.combine = un * uL * ud;
    rep.expert = un * uL * 2 * ud * ur;
  } else {
    rep.router = 2 * uL * ud * un * up;
    rep.dispatch = un * up * uL * ud;
    rep.combine = uL * un * up * ud;
    rep.expert = un * up * 2 * ud * ur;
  }
  return rep;
}

}  // namespace smoa
