#include "doctest.h"

#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "helpers.hpp"
#include "oracles.hpp"
#include "smoa/moa.hpp"
#include "smoa/ops.hpp"

using namespace smoa;
using testutil::max_abs_diff;
using testutil::random_tensor;

namespace {

std::vector<double> tensor_vec(const Tensor& t) {
  return {t.data(), t.data() + t.numel()};
}

void randomize(Tensor& t, Rng& rng, double scale = 1.0) {
  for (int64_t i = 0; i < t.numel(); ++i) t.data()[i] = rng.uniform(-scale, scale);
}

oracle::AdapterParams mirror(const BottleneckAdapter& a) {
  oracle::AdapterParams p;
  p.w_down = tensor_vec(a.w_down);
  p.b_down = tensor_vec(a.b_down);
  p.w_up = tensor_vec(a.w_up);
  p.b_up = tensor_vec(a.b_up);
  p.relu = a.act == Activation::Relu;
  return p;
}

// Fills every expert and the routing table with uniform noise so outputs
// are nontrivial, and returns the oracle-side copies of the experts.
std::vector<oracle::AdapterParams> randomize_dense(DenseMoaLayer& layer, Rng& rng) {
  randomize(layer.router_w, rng);
  std::vector<oracle::AdapterParams> out;
  for (BottleneckAdapter& e : layer.experts) {
    randomize(e.w_down, rng);
    randomize(e.b_down, rng, 0.2);
    randomize(e.w_up, rng);
    randomize(e.b_up, rng, 0.2);
    out.push_back(mirror(e));
  }
  return out;
}

std::vector<oracle::AdapterParams> randomize_soft(SoftMoaLayer& layer, Rng& rng) {
  randomize(layer.phi, rng);
  std::vector<oracle::AdapterParams> out;
  for (BottleneckAdapter& e : layer.experts) {
    randomize(e.w_down, rng);
    randomize(e.b_down, rng, 0.2);
    randomize(e.w_up, rng);
    randomize(e.b_up, rng, 0.2);
    out.push_back(mirror(e));
  }
  return out;
}

// Identity-on-positives expert: relu with unit projections, zero biases.
void make_identity_expert(BottleneckAdapter& e) {
  e.act = Activation::Relu;
  for (int64_t i = 0; i < e.w_down.numel(); ++i) e.w_down.data()[i] = 0.0;
  for (int64_t i = 0; i < e.w_up.numel(); ++i) e.w_up.data()[i] = 0.0;
  const int64_t d = e.w_down.rows();
  const int64_t r = e.w_down.cols();
  REQUIRE(r == d);
  for (int64_t i = 0; i < d; ++i) {
    e.w_down.data()[i * r + i] = 1.0;
    e.w_up.data()[i * d + i] = 1.0;
  }
}

}  // namespace

TEST_CASE("router gates frozen examples") {
  Tensor w0 = Tensor::zeros({3, 4});
  Rng rng(2);
  Tensor x = random_tensor({5, 3}, rng);
  Tensor g = router_gates(x, w0);
  for (int64_t i = 0; i < g.numel(); ++i) CHECK(g.data()[i] == doctest::Approx(0.25).epsilon(1e-13));

  Tensor w1 = random_tensor({3, 1}, rng);
  Tensor g1 = router_gates(x, w1);
  for (int64_t i = 0; i < g1.numel(); ++i) CHECK(g1.data()[i] == 1.0);

  Tensor x2 = random_tensor({2, 2}, rng);
  Tensor w2 = random_tensor({2, 2}, rng);
  Tensor g2 = router_gates(x2, w2);
  const oracle::Vec ref =
      oracle::softmax_rows(oracle::matmul(tensor_vec(x2), 2, 2, tensor_vec(w2), 2), 2, 2);
  CHECK(max_abs_diff(tensor_vec(g2), ref) < 1e-12);

  CHECK_THROWS_AS(router_gates(x2, w0), DimensionError);
}

TEST_CASE("dense moa single expert passes through") {
  ParamRegistry reg;
  DenseMoaLayer layer = make_dense_moa(4, 1, 2, Activation::Gelu, "m", 5, reg, true);
  Rng rng(6);
  randomize_dense(layer, rng);
  Tensor x = random_tensor({3, 4}, rng);
  Tensor y = dense_moa_forward(layer, x);
  Tensor e = adapter_forward(layer.experts[0], x);
  CHECK(max_abs_diff(tensor_vec(y), tensor_vec(e)) < 1e-12);
}

TEST_CASE("dense moa with identical experts ignores the router") {
  ParamRegistry reg;
  DenseMoaLayer layer = make_dense_moa(4, 3, 2, Activation::Gelu, "m", 5, reg, true);
  Rng rng(7);
  randomize_dense(layer, rng);
  for (size_t i = 1; i < layer.experts.size(); ++i) {
    BottleneckAdapter& e = layer.experts[i];
    const BottleneckAdapter& e0 = layer.experts[0];
    for (int64_t k = 0; k < e.w_down.numel(); ++k) e.w_down.data()[k] = e0.w_down.data()[k];
    for (int64_t k = 0; k < e.b_down.numel(); ++k) e.b_down.data()[k] = e0.b_down.data()[k];
    for (int64_t k = 0; k < e.w_up.numel(); ++k) e.w_up.data()[k] = e0.w_up.data()[k];
    for (int64_t k = 0; k < e.b_up.numel(); ++k) e.b_up.data()[k] = e0.b_up.data()[k];
  }
  Tensor x = random_tensor({3, 4}, rng);
  Tensor y1 = dense_moa_forward(layer, x);
  randomize(layer.router_w, rng);
  Tensor y2 = dense_moa_forward(layer, x);
  CHECK(max_abs_diff(tensor_vec(y1), tensor_vec(y2)) < 1e-12);
}

TEST_CASE("dense moa two linear experts under uniform gates") {
  ParamRegistry reg;
  DenseMoaLayer layer = make_dense_moa(1, 2, 1, Activation::Relu, "m", 5, reg, true);
  for (int64_t i = 0; i < layer.router_w.numel(); ++i) layer.router_w.data()[i] = 0.0;
  // Expert 0 computes x, expert 1 computes 2x on positive inputs.
  layer.experts[0].act = Activation::Relu;
  layer.experts[0].w_down.data()[0] = 1.0;
  layer.experts[0].w_up.data()[0] = 1.0;
  layer.experts[1].act = Activation::Relu;
  layer.experts[1].w_down.data()[0] = 1.0;
  layer.experts[1].w_up.data()[0] = 2.0;
  Tensor x = Tensor::from_data({1, 1}, {2.0});
  CHECK(dense_moa_forward(layer, x).item() == doctest::Approx(3.0).epsilon(1e-13));
}

TEST_CASE("dense moa matches brute-force oracle") {
  Rng rng(8);
  for (int trial = 0; trial < 5; ++trial) {
    const int64_t d = 3, n = 2, r = 2, L = 4;
    ParamRegistry reg;
    DenseMoaLayer layer = make_dense_moa(d, n, r, Activation::Gelu, "m", 5, reg, true);
    const auto experts = randomize_dense(layer, rng);
    Tensor x = random_tensor({L, d}, rng);
    Tensor y = dense_moa_forward(layer, x);
    const oracle::Vec ref =
        oracle::dense_moa(tensor_vec(x), L, d, tensor_vec(layer.router_w), n, r, experts);
    CHECK(max_abs_diff(tensor_vec(y), ref) < 1e-10);
  }
}

TEST_CASE("dispatch weights frozen examples") {
  Tensor phi0 = Tensor::zeros({3, 4});
  Rng rng(9);
  Tensor x = random_tensor({5, 3}, rng);
  Tensor d0 = dispatch_weights(x, phi0);
  for (int64_t i = 0; i < d0.numel(); ++i) CHECK(d0.data()[i] == doctest::Approx(0.2).epsilon(1e-13));

  Tensor x1 = random_tensor({1, 3}, rng);
  Tensor phi = random_tensor({3, 4}, rng);
  Tensor d1 = dispatch_weights(x1, phi);
  for (int64_t i = 0; i < d1.numel(); ++i) CHECK(d1.data()[i] == 1.0);

  Tensor x3 = random_tensor({3, 3}, rng);
  Tensor phi2 = random_tensor({3, 2}, rng);
  Tensor d3 = dispatch_weights(x3, phi2);
  const oracle::Vec ref =
      oracle::softmax_cols(oracle::matmul(tensor_vec(x3), 3, 3, tensor_vec(phi2), 2), 3, 2);
  CHECK(max_abs_diff(tensor_vec(d3), ref) < 1e-12);
}

TEST_CASE("combine weights frozen examples") {
  Rng rng(10);
  Tensor x = random_tensor({4, 3}, rng);
  Tensor phi1 = random_tensor({3, 1}, rng);
  Tensor c1 = combine_weights(x, phi1);
  for (int64_t i = 0; i < c1.numel(); ++i) CHECK(c1.data()[i] == 1.0);

  Tensor phi0 = Tensor::zeros({3, 5});
  Tensor c0 = combine_weights(x, phi0);
  for (int64_t i = 0; i < c0.numel(); ++i) CHECK(c0.data()[i] == doctest::Approx(0.2).epsilon(1e-13));

  Tensor phi = random_tensor({3, 5}, rng);
  Tensor c = combine_weights(x, phi);
  const oracle::Vec ref =
      oracle::softmax_rows(oracle::matmul(tensor_vec(x), 4, 3, tensor_vec(phi), 5), 4, 5);
  CHECK(max_abs_diff(tensor_vec(c), ref) < 1e-12);
}

TEST_CASE("soft moa pools two tokens into one identity slot") {
  ParamRegistry reg;
  SoftMoaLayer layer = make_soft_moa(1, 1, 1, 1, Activation::Relu, "m", 5, reg, true);
  for (int64_t i = 0; i < layer.phi.numel(); ++i) layer.phi.data()[i] = 0.0;
  make_identity_expert(layer.experts[0]);
  Tensor x = Tensor::from_data({2, 1}, {1.0, 3.0});
  Tensor y = soft_moa_forward(layer, x);
  CHECK(y.at(0, 0) == doctest::Approx(2.0).epsilon(1e-13));
  CHECK(y.at(1, 0) == doctest::Approx(2.0).epsilon(1e-13));
}

TEST_CASE("soft moa single token single slot is the expert itself") {
  ParamRegistry reg;
  SoftMoaLayer layer = make_soft_moa(3, 1, 1, 2, Activation::Gelu, "m", 5, reg, true);
  Rng rng(11);
  randomize_soft(layer, rng);
  Tensor x = random_tensor({1, 3}, rng);
  Tensor y = soft_moa_forward(layer, x);
  Tensor e = adapter_forward(layer.experts[0], x);
  CHECK(max_abs_diff(tensor_vec(y), tensor_vec(e)) < 1e-12);
}

TEST_CASE("soft moa matches brute-force oracle") {
  Rng rng(12);
  for (int trial = 0; trial < 5; ++trial) {
    const int64_t d = 3, L = 4, n = 2, p = 2, r = 2;
    ParamRegistry reg;
    SoftMoaLayer layer = make_soft_moa(d, n, p, r, Activation::Gelu, "m", 5, reg, true);
    const auto experts = randomize_soft(layer, rng);
    Tensor x = random_tensor({L, d}, rng);
    RoutingTrace trace;
    Tensor y = soft_moa_forward(layer, x, &trace);
    const oracle::SoftMoaRef ref =
        oracle::soft_moa(tensor_vec(x), L, d, tensor_vec(layer.phi), n, p, r, experts);
    CHECK(max_abs_diff(tensor_vec(y), ref.y) < 1e-10);
    CHECK(max_abs_diff(trace.dispatch.v, ref.dispatch) < 1e-10);
    CHECK(max_abs_diff(trace.combine.v, ref.combine) < 1e-10);
  }
}

TEST_CASE("dispatch columns and combine rows are stochastic") {
  Rng rng(13);
  for (int trial = 0; trial < 10; ++trial) {
    const int64_t L = 2 + static_cast<int64_t>(rng.uniform(0.0, 5.0));
    const int64_t d = 2 + static_cast<int64_t>(rng.uniform(0.0, 3.0));
    const int64_t s = 1 + static_cast<int64_t>(rng.uniform(0.0, 5.0));
    Tensor x = random_tensor({L, d}, rng, 3.0);
    Tensor phi = random_tensor({d, s}, rng, 3.0);
    Tensor dw = dispatch_weights(x, phi);
    Tensor cw = combine_weights(x, phi);
    for (int64_t j = 0; j < s; ++j) {
      double sum = 0.0;
      for (int64_t t = 0; t < L; ++t) {
        CHECK(dw.at(t, j) > 0.0);
        sum += dw.at(t, j);
      }
      CHECK(std::fabs(sum - 1.0) < 1e-9);
    }
    for (int64_t t = 0; t < L; ++t) {
      double sum = 0.0;
      for (int64_t j = 0; j < s; ++j) {
        CHECK(cw.at(t, j) > 0.0);
        sum += cw.at(t, j);
      }
      CHECK(std::fabs(sum - 1.0) < 1e-9);
    }
  }
}

TEST_CASE("soft moa outputs stay inside the slot-output hull") {
  ParamRegistry reg;
  const int64_t d = 3, L = 5, n = 2, p = 3, r = 2;
  SoftMoaLayer layer = make_soft_moa(d, n, p, r, Activation::Gelu, "m", 5, reg, true);
  Rng rng(14);
  randomize_soft(layer, rng);
  Tensor x = random_tensor({L, d}, rng);
  Tensor y = soft_moa_forward(layer, x);

  // Rebuild the slot outputs from the layer's own building blocks.
  Tensor dw = dispatch_weights(x, layer.phi);
  Tensor slot_in = matmul(transpose(dw), x);
  std::vector<Tensor> slot_rows;
  for (int64_t j = 0; j < n * p; ++j) {
    Tensor row = slice_rows(slot_in, j, 1);
    slot_rows.push_back(adapter_forward(layer.experts[static_cast<size_t>(j / p)], row));
  }
  for (int64_t c = 0; c < d; ++c) {
    double lo = slot_rows[0].at(0, c), hi = slot_rows[0].at(0, c);
    for (const Tensor& row : slot_rows) {
      lo = std::min(lo, row.at(0, c));
      hi = std::max(hi, row.at(0, c));
    }
    for (int64_t t = 0; t < L; ++t) {
      CHECK(y.at(t, c) >= lo - 1e-9);
      CHECK(y.at(t, c) <= hi + 1e-9);
    }
  }
}

TEST_CASE("soft moa commutes with token permutations") {
  ParamRegistry reg;
  const int64_t d = 3, L = 6, n = 2, p = 2, r = 2;
  SoftMoaLayer layer = make_soft_moa(d, n, p, r, Activation::Gelu, "m", 5, reg, true);
  Rng rng(15);
  randomize_soft(layer, rng);
  Tensor x = random_tensor({L, d}, rng);
  const int64_t perm[L] = {3, 0, 5, 1, 4, 2};
  std::vector<double> px(static_cast<size_t>(L * d));
  for (int64_t t = 0; t < L; ++t) {
    for (int64_t c = 0; c < d; ++c) px[t * d + c] = x.at(perm[t], c);
  }
  Tensor y = soft_moa_forward(layer, x);
  Tensor yp = soft_moa_forward(layer, Tensor::from_data({L, d}, px));
  for (int64_t t = 0; t < L; ++t) {
    for (int64_t c = 0; c < d; ++c) {
      CHECK(std::fabs(yp.at(t, c) - y.at(perm[t], c)) < 1e-9);
    }
  }
}

TEST_CASE("soft moa is invariant to permuting experts with their slot blocks") {
  ParamRegistry reg;
  const int64_t d = 3, L = 4, n = 3, p = 2, r = 2;
  SoftMoaLayer layer = make_soft_moa(d, n, p, r, Activation::Gelu, "m", 5, reg, true);
  Rng rng(16);
  randomize_soft(layer, rng);
  Tensor x = random_tensor({L, d}, rng);
  Tensor y = soft_moa_forward(layer, x);

  // Swap experts 0 and 2 together with their contiguous phi column blocks.
  std::swap(layer.experts[0], layer.experts[2]);
  for (int64_t row = 0; row < d; ++row) {
    for (int64_t k = 0; k < p; ++k) {
      std::swap(layer.phi.data()[row * n * p + 0 * p + k],
                layer.phi.data()[row * n * p + 2 * p + k]);
    }
  }
  Tensor y2 = soft_moa_forward(layer, x);
  CHECK(max_abs_diff(tensor_vec(y), tensor_vec(y2)) < 1e-9);
}

TEST_CASE("dense moa is invariant to permuting experts with router columns") {
  ParamRegistry reg;
  const int64_t d = 3, L = 4, n = 3, r = 2;
  DenseMoaLayer layer = make_dense_moa(d, n, r, Activation::Gelu, "m", 5, reg, true);
  Rng rng(17);
  randomize_dense(layer, rng);
  Tensor x = random_tensor({L, d}, rng);
  Tensor y = dense_moa_forward(layer, x);

  std::swap(layer.experts[1], layer.experts[2]);
  for (int64_t row = 0; row < d; ++row) {
    std::swap(layer.router_w.data()[row * n + 1], layer.router_w.data()[row * n + 2]);
  }
  Tensor y2 = dense_moa_forward(layer, x);
  CHECK(max_abs_diff(tensor_vec(y), tensor_vec(y2)) < 1e-9);
}

TEST_CASE("gate rows always sum to one") {
  Rng rng(18);
  for (int trial = 0; trial < 10; ++trial) {
    Tensor x = random_tensor({5, 4}, rng, 4.0);
    Tensor w = random_tensor({4, 3}, rng, 4.0);
    Tensor g = router_gates(x, w);
    for (int64_t t = 0; t < 5; ++t) {
      double sum = 0.0;
      for (int64_t i = 0; i < 3; ++i) sum += g.at(t, i);
      CHECK(std::fabs(sum - 1.0) < 1e-9);
    }
  }
}

TEST_CASE("expert contribution examples and oracle") {
  // Uniform combine table -> every expert gets 1/n.
  RoutingTrace uniform;
  uniform.n = 3;
  uniform.p = 2;
  uniform.combine = Matrix(4, 6);
  for (double& v : uniform.combine.v) v = 1.0 / 6.0;
  const std::vector<double> cu = expert_contribution(uniform);
  REQUIRE(cu.size() == 3);
  for (double v : cu) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-12));

  // Single expert -> contribution exactly 1 by row totality.
  ParamRegistry reg;
  SoftMoaLayer one = make_soft_moa(3, 1, 2, 1, Activation::Gelu, "m", 5, reg, true);
  Rng rng(19);
  randomize_soft(one, rng);
  RoutingTrace t1;
  soft_moa_forward(one, random_tensor({4, 3}, rng), &t1);
  const std::vector<double> c1 = expert_contribution(t1);
  REQUIRE(c1.size() == 1);
  CHECK(c1[0] == doctest::Approx(1.0).epsilon(1e-9));

  // Random traced pass matches the double-loop oracle and sums to one.
  ParamRegistry reg2;
  SoftMoaLayer layer = make_soft_moa(3, 3, 2, 2, Activation::Gelu, "m2", 6, reg2, true);
  randomize_soft(layer, rng);
  RoutingTrace tr;
  soft_moa_forward(layer, random_tensor({5, 3}, rng), &tr);
  const std::vector<double> got = expert_contribution(tr, 2);
  const oracle::Vec want = oracle::contribution(tr.combine.v, 5, 3, 2);
  REQUIRE(got.size() == want.size());
  double total = 0.0;
  for (size_t i = 0; i < got.size(); ++i) {
    CHECK(std::fabs(got[i] - want[i]) < 1e-12);
    CHECK(got[i] > 0.0);
    total += got[i];
  }
  CHECK(std::fabs(total - 1.0) < 1e-9);

  RoutingTrace empty;
  CHECK_THROWS_AS(expert_contribution(empty, 1), ContractError);
}

TEST_CASE("dense trace contribution averages gate columns") {
  ParamRegistry reg;
  DenseMoaLayer layer = make_dense_moa(3, 2, 1, Activation::Gelu, "m", 5, reg, true);
  Rng rng(20);
  randomize_dense(layer, rng);
  RoutingTrace tr;
  dense_moa_forward(layer, random_tensor({4, 3}, rng), &tr);
  CHECK_FALSE(tr.soft());
  const std::vector<double> got = expert_contribution(tr);
  REQUIRE(got.size() == 2);
  double mean0 = 0.0;
  for (int64_t t = 0; t < 4; ++t) mean0 += tr.gates.at(t, 0);
  mean0 /= 4.0;
  CHECK(got[0] == doctest::Approx(mean0).epsilon(1e-12));
  CHECK(got[0] + got[1] == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("per-class contribution examples") {
  // One class with uniform combine weights: its column is 1/n.
  RoutingTrace uniform;
  uniform.n = 4;
  uniform.p = 1;
  uniform.combine = Matrix(3, 4);
  for (double& v : uniform.combine.v) v = 0.25;
  ClassContribution cc = per_class_contribution({uniform, uniform}, {0, 0}, 1, 1);
  REQUIRE(cc.table.rows == 4);
  REQUIRE(cc.table.cols == 1);
  CHECK(cc.class_present[0]);
  for (int64_t i = 0; i < 4; ++i) CHECK(cc.table.at(i, 0) == doctest::Approx(0.25).epsilon(1e-12));

  // Two classes fed identical traces produce identical columns.
  ClassContribution two = per_class_contribution({uniform, uniform}, {0, 1}, 1, 2);
  for (int64_t i = 0; i < 4; ++i) {
    CHECK(two.table.at(i, 0) == doctest::Approx(two.table.at(i, 1)).epsilon(1e-15));
  }

  // A class with no samples is flagged absent rather than silently zero.
  ClassContribution gap = per_class_contribution({uniform, uniform}, {0, 2}, 1, 3);
  CHECK(gap.class_present[0]);
  CHECK_FALSE(gap.class_present[1]);
  CHECK(gap.class_present[2]);
}

TEST_CASE("per-class contribution matches per-sample recomputation") {
  ParamRegistry reg;
  const int64_t d = 3, L = 4, n = 3, p = 2, r = 2;
  SoftMoaLayer layer = make_soft_moa(d, n, p, r, Activation::Gelu, "m", 5, reg, true);
  Rng rng(21);
  randomize_soft(layer, rng);
  std::vector<RoutingTrace> traces;
  std::vector<int> labels = {0, 1, 2, 0, 1, 2, 0};
  for (size_t s = 0; s < labels.size(); ++s) {
    RoutingTrace tr;
    soft_moa_forward(layer, random_tensor({L, d}, rng), &tr);
    traces.push_back(tr);
  }
  ClassContribution cc = per_class_contribution(traces, labels, p, 3);
  for (int k = 0; k < 3; ++k) {
    oracle::Vec mean(static_cast<size_t>(n), 0.0);
    int64_t count = 0;
    for (size_t s = 0; s < labels.size(); ++s) {
      if (labels[s] != k) continue;
      const oracle::Vec c = oracle::contribution(traces[s].combine.v, L, n, p);
      for (int64_t i = 0; i < n; ++i) mean[static_cast<size_t>(i)] += c[static_cast<size_t>(i)];
      ++count;
    }
    for (int64_t i = 0; i < n; ++i) {
      CHECK(cc.table.at(i, k) ==
            doctest::Approx(mean[static_cast<size_t>(i)] / count).epsilon(1e-12));
    }
  }
}

TEST_CASE("moa parameter counts") {
  CHECK(moa_param_count(14, 1, 1, 768, 12, true) == 516264);
  CHECK(moa_param_count(14, 1, 1, 768, 12, false) == 516264);
  CHECK(moa_param_count(1, 1, 1, 1, 1, true) == 5);

  const int64_t ns[] = {1, 2, 7, 14};
  const int64_t rs[] = {1, 3};
  const int64_t ds[] = {4, 16};
  for (int64_t n : ns) {
    for (int64_t r : rs) {
      for (int64_t d : ds) {
        CHECK(moa_param_count(n, 1, r, d, 3, false) == moa_param_count(n, 1, r, d, 3, true));
      }
    }
  }
}

TEST_CASE("count formula equals registry enumeration") {
  const int64_t cases[][4] = {{1, 1, 1, 2}, {2, 3, 1, 4}, {3, 2, 2, 5}, {14, 1, 1, 16}};
  for (const auto& c : cases) {
    const int64_t n = c[0], p = c[1], r = c[2], d = c[3];
    ParamRegistry sreg;
    make_soft_moa(d, n, p, r, Activation::Gelu, "m", 1, sreg, true);
    CHECK(sreg.count_scalars() == moa_param_count(n, p, r, d, 1, true));
    ParamRegistry dreg;
    make_dense_moa(d, n, r, Activation::Gelu, "m", 1, dreg, true);
    CHECK(dreg.count_scalars() == moa_param_count(n, 1, r, d, 1, false));
  }
}

TEST_CASE("expert compute is slot count, not token count") {
  ParamRegistry reg;
  const int64_t d = 3, n = 2, p = 3, r = 2;
  SoftMoaLayer layer = make_soft_moa(d, n, p, r, Activation::Gelu, "m", 5, reg, true);
  Rng rng(22);
  randomize_soft(layer, rng);
  for (int64_t L : {2, 9, 33}) {
    reset_adapter_rows_count();
    soft_moa_forward(layer, random_tensor({L, d}, rng));
    CHECK(adapter_rows_count() == n * p);
  }
  // Dense cost scales with tokens instead.
  ParamRegistry dreg;
  DenseMoaLayer dl = make_dense_moa(d, n, r, Activation::Gelu, "m", 5, dreg, true);
  reset_adapter_rows_count();
  dense_moa_forward(dl, random_tensor({9, d}, rng));
  CHECK(adapter_rows_count() == n * 9);
  reset_adapter_rows_count();
}

TEST_CASE("layer construction validates its arguments") {
  ParamRegistry reg;
  CHECK_THROWS_AS(make_dense_moa(4, 0, 1, Activation::Gelu, "m", 1, reg, true), ValidationError);
  ParamRegistry reg2;
  CHECK_THROWS_AS(make_soft_moa(4, 2, 0, 1, Activation::Gelu, "m", 1, reg2, true),
                  ValidationError);
  ParamRegistry reg3;
  SoftMoaLayer layer = make_soft_moa(4, 2, 3, 1, Activation::Gelu, "m", 1, reg3, true);
  CHECK(layer.phi.rows() == 4);
  CHECK(layer.phi.cols() == 6);
  CHECK(layer.experts.size() == 2);

  Tensor bad = Tensor::zeros({2, 5});
  CHECK_THROWS_AS(soft_moa_forward(layer, bad), DimensionError);
}
