#include "doctest.h"

#include <cmath>

#include "helpers.hpp"
#include "smoa/ops.hpp"
#include "smoa/tensor.hpp"

using namespace smoa;
using testutil::fd_max_rel_err;
using testutil::random_tensor;

TEST_CASE("grad of sum of squares") {
  Tensor x = Tensor::from_data({2}, {1.0, 2.0}, true);
  Tensor loss = sum_all(mul(x, x));
  backward(loss);
  CHECK(x.grad_buffer()[0] == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(x.grad_buffer()[1] == doctest::Approx(4.0).epsilon(1e-14));
}

TEST_CASE("constant loss leaves grads zero") {
  Tensor x = Tensor::from_data({2}, {1.0, 2.0}, true);
  x.ensure_grad();
  Tensor c = Tensor::from_data({1}, {3.0}, true);
  backward(sum_all(c));
  CHECK(x.grad_buffer()[0] == 0.0);
  CHECK(x.grad_buffer()[1] == 0.0);
}

TEST_CASE("grads accumulate until zeroed") {
  Tensor x = Tensor::from_data({1}, {3.0}, true);
  backward(sum_all(mul(x, x)));
  backward(sum_all(mul(x, x)));
  CHECK(x.grad_buffer()[0] == doctest::Approx(12.0).epsilon(1e-14));
  x.zero_grad();
  backward(sum_all(mul(x, x)));
  CHECK(x.grad_buffer()[0] == doctest::Approx(6.0).epsilon(1e-14));
}

TEST_CASE("backward rejects non-scalar loss") {
  Tensor x = Tensor::from_data({2}, {1.0, 2.0}, true);
  CHECK_THROWS_AS(backward(add(x, x)), ContractError);
}

TEST_CASE("backward rejects loss without grad path") {
  Tensor x = Tensor::from_data({1}, {1.0}, false);
  CHECK_THROWS_AS(backward(sum_all(x)), ContractError);
}

TEST_CASE("no-grad guard suppresses graph construction") {
  Tensor x = Tensor::from_data({2}, {1.0, 2.0}, true);
  NoGradGuard ng;
  Tensor y = mul(x, x);
  CHECK_FALSE(y.requires_grad());
  CHECK(y.is_leaf());
}

TEST_CASE("deterministic forward: identical inputs give bit-identical outputs") {
  Rng rng1(99), rng2(99);
  Tensor a1 = random_tensor({4, 5}, rng1);
  Tensor b1 = random_tensor({5, 3}, rng1);
  Tensor a2 = random_tensor({4, 5}, rng2);
  Tensor b2 = random_tensor({5, 3}, rng2);
  Tensor c1 = matmul(a1, b1);
  Tensor c2 = matmul(a2, b2);
  for (int64_t i = 0; i < c1.numel(); ++i) CHECK(c1.data()[i] == c2.data()[i]);
}

// Every differentiable primitive against central differences at h = 1e-5.
namespace {

void check_fd(const char* what, const std::function<Tensor()>& make_loss, const Tensor& param,
              double tol = 1e-6) {
  param.node()->grad.clear();
  Tensor loss = make_loss();
  backward(loss);
  const std::vector<double> analytic = param.grad_buffer();
  REQUIRE(analytic.size() == static_cast<size_t>(param.numel()));
  const double rel = fd_max_rel_err(make_loss, param, analytic);
  INFO(what);
  CHECK(rel < tol);
}

}  // namespace

TEST_CASE("finite differences over every primitive") {
  Rng rng(4242);

  Tensor a = random_tensor({3, 4}, rng, 0.8, true);
  Tensor b = random_tensor({4, 2}, rng, 0.8, true);
  check_fd("matmul lhs", [&] { return sum_all(mul(matmul(a, b), matmul(a, b))); }, a);
  check_fd("matmul rhs", [&] { return sum_all(mul(matmul(a, b), matmul(a, b))); }, b);

  Tensor t = random_tensor({3, 4}, rng, 1.0, true);
  check_fd("transpose", [&] { return sum_all(mul(transpose(t), transpose(t))); }, t);

  Tensor u = random_tensor({2, 3}, rng, 1.0, true);
  Tensor v = random_tensor({2, 3}, rng, 1.0, true);
  check_fd("add", [&] { return sum_all(mul(add(u, v), add(u, v))); }, u);
  check_fd("sub", [&] { return sum_all(mul(sub(u, v), sub(u, v))); }, v);
  check_fd("mul", [&] { return sum_all(mul(mul(u, v), mul(u, v))); }, u);
  check_fd("scale", [&] { return sum_all(mul(scale(u, 1.7), scale(u, 1.7))); }, u);

  Tensor bias = random_tensor({3}, rng, 0.5, true);
  check_fd("add_row_broadcast x",
           [&] { return sum_all(mul(add_row_broadcast(u, bias), add_row_broadcast(u, bias))); },
           u);
  check_fd("add_row_broadcast bias",
           [&] { return sum_all(mul(add_row_broadcast(u, bias), add_row_broadcast(u, bias))); },
           bias);

  Tensor w = random_tensor({2}, rng, 0.5, true);
  check_fd("scale_rows x", [&] { return sum_all(mul(scale_rows(u, w), scale_rows(u, w))); }, u);
  check_fd("scale_rows w", [&] { return sum_all(mul(scale_rows(u, w), scale_rows(u, w))); }, w);

  Tensor s = random_tensor({3, 4}, rng, 1.5, true);
  check_fd("softmax rows",
           [&] { return sum_all(mul(softmax_axis(s, 1), softmax_axis(s, 1))); }, s);
  check_fd("softmax cols",
           [&] { return sum_all(mul(softmax_axis(s, 0), softmax_axis(s, 0))); }, s);

  Tensor xn = random_tensor({3, 6}, rng, 1.2, true);
  Tensor gamma = random_tensor({6}, rng, 0.3, true);
  Tensor beta = random_tensor({6}, rng, 0.3, true);
  auto ln_loss = [&] {
    Tensor y = layernorm(xn, gamma, beta);
    return sum_all(mul(y, y));
  };
  check_fd("layernorm x", ln_loss, xn);
  check_fd("layernorm gamma", ln_loss, gamma);
  check_fd("layernorm beta", ln_loss, beta);

  Tensor g = random_tensor({2, 5}, rng, 1.0, true);
  check_fd("gelu", [&] { return sum_all(mul(gelu(g), gelu(g))); }, g);

  // Keep inputs away from the kink where one-sided curvature breaks FD.
  std::vector<double> rv = {0.7, -0.9, 1.3, -0.4, 2.0, 0.6};
  Tensor rt = Tensor::from_data({2, 3}, rv, true);
  check_fd("relu", [&] { return sum_all(mul(relu(rt), relu(rt))); }, rt);

  Tensor logits = random_tensor({3, 4}, rng, 1.0, true);
  const std::vector<int> labels = {1, 3, 0};
  check_fd("cross_entropy", [&] { return cross_entropy(logits, labels); }, logits);

  Tensor big = random_tensor({4, 6}, rng, 1.0, true);
  check_fd("slice_rows",
           [&] { return sum_all(mul(slice_rows(big, 1, 2), slice_rows(big, 1, 2))); }, big);
  check_fd("slice_cols",
           [&] { return sum_all(mul(slice_cols(big, 2, 3), slice_cols(big, 2, 3))); }, big);

  Tensor part = random_tensor({2, 3}, rng, 1.0, true);
  check_fd("concat_rows", [&] {
    Tensor cat = concat_rows({part, scale(part, 2.0)});
    return sum_all(mul(cat, cat));
  }, part);
  check_fd("concat_cols", [&] {
    Tensor cat = concat_cols({part, scale(part, -1.5)});
    return sum_all(mul(cat, cat));
  }, part);

  check_fd("mean_rows", [&] { return sum_all(mul(mean_rows(big), mean_rows(big))); }, big);
}

TEST_CASE("release_graph frees intermediate buffers after backward") {
  Tensor x = Tensor::from_data({2, 2}, {1.0, 2.0, 3.0, 4.0}, true);
  Tensor mid = mul(x, x);
  backward(sum_all(mid));
  CHECK(mid.node()->value.empty());
  CHECK_FALSE(x.node()->value.empty());
  CHECK(x.grad_buffer().size() == 4);
}

TEST_CASE("mac counter counts matmul multiply-accumulates") {
  Rng rng(5);
  Tensor a = random_tensor({3, 4}, rng);
  Tensor b = random_tensor({4, 2}, rng);
  reset_mac_count();
  matmul(a, b);
  CHECK(mac_count() == 3u * 4u * 2u);
}
