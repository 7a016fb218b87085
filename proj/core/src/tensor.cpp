#include "smoa/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace smoa {

std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(s[i]);
  }
  out += "]";
  return out;
}

int64_t shape_numel(const Shape& s) {
  int64_t n = 1;
  for (int64_t d : s) {
    if (d < 0) throw ValidationError("negative dimension in shape " + shape_str(s));
    n *= d;
  }
  return n;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double fill, bool requires_grad) {
  auto n = std::make_shared<Node>();
  const int64_t count = shape_numel(shape);
  n->shape = std::move(shape);
  n->value.assign(static_cast<size_t>(count), fill);
  n->requires_grad = requires_grad;
  return Tensor(std::move(n));
}

Tensor Tensor::from_data(Shape shape, std::vector<double> values, bool requires_grad) {
  const int64_t count = shape_numel(shape);
  if (count != static_cast<int64_t>(values.size()))
    throw DimensionError("from_data: shape " + shape_str(shape) + " wants " +
                         std::to_string(count) + " values, got " +
                         std::to_string(values.size()));
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->value = std::move(values);
  n->requires_grad = requires_grad;
  return Tensor(std::move(n));
}

Tensor Tensor::randn(Shape shape, Rng& rng, double stddev, bool requires_grad) {
  Tensor t = zeros(std::move(shape), requires_grad);
  double* p = t.data();
  const int64_t n = t.numel();
  for (int64_t i = 0; i < n; ++i) p[i] = rng.normal(0.0, stddev);
  return t;
}

double Tensor::item() const {
  if (numel() != 1)
    throw DimensionError("item: tensor has shape " + shape_str(shape()) + ", expected 1 element");
  return n_->value[0];
}

Matrix Tensor::to_matrix() const {
  if (ndim() != 2) throw DimensionError("to_matrix: tensor has shape " + shape_str(shape()));
  Matrix m(rows(), cols());
  m.v = n_->value;
  return m;
}

namespace {

// Iterative post-order DFS over the requires_grad subgraph. Branches that
// cannot receive gradient are not descended into. Parents are visited in
// stored order, so the topological order is deterministic for a given graph.
void topo_sort(const NodePtr& root, std::vector<NodePtr>& order) {
  std::unordered_set<Node*> seen;
  std::vector<std::pair<NodePtr, size_t>> stack;
  stack.emplace_back(root, 0);
  seen.insert(root.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      NodePtr child = node->parents[next++];
      if (child->requires_grad && seen.insert(child.get()).second)
        stack.emplace_back(std::move(child), 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
}

thread_local int g_no_grad_depth = 0;
thread_local uint64_t g_mac_count = 0;
thread_local uint64_t g_adapter_rows = 0;

}  // namespace

void backward(const Tensor& loss, bool release_graph) {
  if (!loss.defined()) throw ValidationError("backward: undefined tensor");
  if (loss.numel() != 1)
    throw ContractError("backward: loss has shape " + shape_str(loss.shape()) +
                        ", expected a scalar");
  if (!loss.requires_grad())
    throw ContractError("backward: loss does not require grad");
  if (!std::isfinite(loss.data()[0]))
    throw NumericError("backward: loss is not finite");

  std::vector<NodePtr> order;
  topo_sort(loss.node(), order);
  for (const NodePtr& n : order) n->ensure_grad();

  loss.node()->grad[0] += 1.0;

  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = it->get();
    if (n->backward_fn) n->backward_fn(*n);
    if (release_graph && !n->is_leaf) {
      n->value = {};
      n->grad = {};
      n->aux = {};
      n->backward_fn = nullptr;
      n->parents = {};
    }
  }
}

NoGradGuard::NoGradGuard() { ++g_no_grad_depth; }
NoGradGuard::~NoGradGuard() { --g_no_grad_depth; }

bool grad_enabled() { return g_no_grad_depth == 0; }

uint64_t mac_count() { return g_mac_count; }
void reset_mac_count() { g_mac_count = 0; }
void add_macs(uint64_t n) { g_mac_count += n; }

uint64_t adapter_rows_count() { return g_adapter_rows; }
void reset_adapter_rows_count() { g_adapter_rows = 0; }
void add_adapter_rows(uint64_t n) { g_adapter_rows += n; }

}  // namespace smoa
