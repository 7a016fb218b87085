#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "smoa/common.hpp"
#include "smoa/rng.hpp"

namespace smoa {

using Shape = std::vector<int64_t>;

std::string shape_str(const Shape& s);
int64_t shape_numel(const Shape& s);

struct Node;
using NodePtr = std::shared_ptr<Node>;

// One vertex of the computation graph. Values and gradients are f64,
// row-major. Non-leaf nodes hold their parents plus a closure that routes
// d(loss)/d(this) into the parents' grad buffers.
struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // sized lazily, on first accumulation
  bool requires_grad = false;
  bool is_leaf = true;
  std::vector<NodePtr> parents;
  std::function<void(Node&)> backward_fn;
  std::vector<double> aux;  // forward-pass scratch some backward closures need

  void ensure_grad() {
    if (grad.empty()) grad.assign(value.size(), 0.0);
  }
};

// Value-semantics handle to a graph node.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(NodePtr n) : n_(std::move(n)) {}

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double fill, bool requires_grad = false);
  static Tensor from_data(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor randn(Shape shape, Rng& rng, double stddev, bool requires_grad = false);

  bool defined() const { return n_ != nullptr; }
  const Shape& shape() const { return n_->shape; }
  int64_t ndim() const { return static_cast<int64_t>(n_->shape.size()); }
  int64_t dim(int64_t i) const { return n_->shape[static_cast<size_t>(i)]; }
  int64_t numel() const { return static_cast<int64_t>(n_->value.size()); }

  // Rank-2 helpers; most of the model lives in matrices.
  int64_t rows() const { return n_->shape[0]; }
  int64_t cols() const { return n_->shape[1]; }

  double* data() { return n_->value.data(); }
  const double* data() const { return n_->value.data(); }
  double at(int64_t r, int64_t c) const { return n_->value[static_cast<size_t>(r * cols() + c)]; }

  // Value of a single-element tensor.
  double item() const;

  bool requires_grad() const { return n_->requires_grad; }
  bool is_leaf() const { return n_->is_leaf; }
  std::vector<double>& grad_buffer() { return n_->grad; }
  const std::vector<double>& grad_buffer() const { return n_->grad; }
  void ensure_grad() { n_->ensure_grad(); }
  void zero_grad() {
    if (!n_->grad.empty()) std::fill(n_->grad.begin(), n_->grad.end(), 0.0);
  }

  // Value copy with no graph attachment.
  Matrix to_matrix() const;

  const NodePtr& node() const { return n_; }

 private:
  NodePtr n_;
};

// Reverse-mode sweep from a scalar loss. Gradients accumulate into the
// grad buffers of every reachable node with requires_grad; buffers are not
// zeroed first, so repeated calls without zero_grad sum their results.
// With release_graph (the default), each non-leaf node's buffers and parent
// links are freed as soon as its backward closure has run, which caps peak
// memory at roughly the forward-pass footprint.
void backward(const Tensor& loss, bool release_graph = true);

// While any guard is alive, ops record no parents and no backward closures;
// results are plain values.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;
};

bool grad_enabled();

// Multiply-accumulate counter, incremented by the op kernels that do real
// arithmetic (matmul, colscale). One count = one a*b+c. Thread-local.
uint64_t mac_count();
void reset_mac_count();
void add_macs(uint64_t n);

// Rows pushed through bottleneck adapters since the last reset. Thread-local.
uint64_t adapter_rows_count();
void reset_adapter_rows_count();
void add_adapter_rows(uint64_t n);

}  // namespace smoa
