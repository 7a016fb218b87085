#include "smoa/ops.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

namespace smoa {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;
using MapArr = Eigen::Map<Eigen::ArrayXd>;
using CMapArr = Eigen::Map<const Eigen::ArrayXd>;

void req_defined(const Tensor& t, const char* op) {
  if (!t.defined()) throw ValidationError(std::string(op) + ": undefined tensor");
}

void req_rank2(const Tensor& t, const char* op) {
  req_defined(t, op);
  if (t.ndim() != 2)
    throw DimensionError(std::string(op) + ": expected rank-2 tensor, got " +
                         shape_str(t.shape()));
}

void req_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                         " vs " + shape_str(b.shape()));
}

// Allocates the result node and wires requires_grad/parents when gradients
// are enabled. Callers fill the value buffer and attach backward_fn when
// out.requires_grad(). Results that record no backward path stay leaves:
// they are detached values, not part of any graph.
Tensor make_node(Shape shape, const std::vector<Tensor>& inputs) {
  auto n = std::make_shared<Node>();
  n->value.resize(static_cast<size_t>(shape_numel(shape)));
  n->shape = std::move(shape);
  if (grad_enabled()) {
    bool rg = false;
    for (const Tensor& t : inputs)
      if (t.requires_grad()) {
        rg = true;
        break;
      }
    if (rg) {
      n->requires_grad = true;
      n->is_leaf = false;
      n->parents.reserve(inputs.size());
      for (const Tensor& t : inputs) n->parents.push_back(t.node());
    }
  }
  return Tensor(std::move(n));
}

MapMat gmat(Node& n) { return MapMat(n.grad.data(), n.shape[0], n.shape[1]); }

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  req_rank2(a, "matmul");
  req_rank2(b, "matmul");
  if (a.cols() != b.rows())
    throw DimensionError("matmul: inner dimensions differ, " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  const int64_t m = a.rows(), k = a.cols(), n = b.cols();
  Tensor out = make_node({m, n}, {a, b});
  CMapMat A(a.data(), m, k), B(b.data(), k, n);
  MapMat C(out.data(), m, n);
  C.noalias() = A * B;
  add_macs(static_cast<uint64_t>(m) * static_cast<uint64_t>(k) * static_cast<uint64_t>(n));
  if (out.requires_grad()) {
    out.node()->backward_fn = [](Node& self) {
      Node& pa = *self.parents[0];
      Node& pb = *self.parents[1];
      const int64_t m2 = self.shape[0], n2 = self.shape[1], k2 = pa.shape[1];
      CMapMat dC(self.grad.data(), m2, n2);
      if (pa.requires_grad) {
        CMapMat B2(pb.value.data(), k2, n2);
        MapMat dA(pa.grad.data(), m2, k2);
        dA.noalias() += dC * B2.transpose();
      }
      if (pb.requires_grad) {
        CMapMat A2(pa.value.data(), m2, k2);
        MapMat dB(pb.grad.data(), k2, n2);
        dB.noalias() += A2.transpose() * dC;
      }
    };
  }
  return out;
}

Tensor transpose(const Tensor& a) {
  req_rank2(a, "transpose");
  const int64_t m = a.rows(), n = a.cols();
  Tensor out = make_node({n, m}, {a});
  CMapMat A(a.data(), m, n);
  MapMat T(out.data(), n, m);
  T = A.transpose();
  if (out.requires_grad()) {
    out.node()->backward_fn = [](Node& self) {
      Node& p = *self.parents[0];
      if (!p.requires_grad) return;
      CMapMat dT(self.grad.data(), self.shape[0], self.shape[1]);
      MapMat dA(p.grad.data(), p.shape[0], p.shape[1]);
      dA += dT.transpose();
    };
  }
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
  req_defined(a, "add");
  req_defined(b, "add");
  req_same_shape(a, b, "add");
  Tensor out = make_node(a.shape(), {a, b});
  const int64_t n = a.numel();
  MapArr(out.data(), n) = CMapArr(a.data(), n) + CMapArr(b.data(), n);
  if (out.requires_grad()) {
    out.node()->backward_fn = [](Node& self) {
      const int64_t n2 = static_cast<int64_t>(self.grad.size());
      for (int idx = 0; idx < 2; ++idx) {
        Node& p = *self.parents[idx];
        if (p.requires_grad) MapArr(p.grad.data(), n2) += CMapArr(self.grad.data(), n2);
      }
    };
  }
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  req_defined(a, "sub");
  req_defined(b, "sub");
  req_same_shape(a, b, "sub");
  Tensor out = make_node(a.shape(), {a, b});
  const int64_t n = a.numel();
  MapArr(out.data(), n) = CMapArr(a.data(), n) - CMapArr(b.data(), n);
  if (out.requires_grad()) {
    out.node()->backward_fn = [](Node& self) {
      const int64_t n2 = static_cast<int64_t>(self.grad.size());
      Node& pa = *self.parents[0];
      Node& pb = *self.parents[1];
      if (pa.requires_grad) MapArr(pa.grad.data(), n2) += CMapArr(self.grad.data(), n2);
      if (pb.requires_grad) MapArr(pb.grad.data(), n2) -= CMapArr(self.grad.data(), n2);
    };
  }
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  req_defined(a, "mul");
  req_defined(b, "mul");
  req_same_shape(a, b, "mul");
  Tensor out = make_node(a.shape(), {a, b});
  const int64_t n = a.numel();
  MapArr(out.data(), n) = CMapArr(a.data(), n) * CMapArr(b.data(), n);
  if (out.requires_grad()) {
    out.node()->backward_fn = [](Node& self) {
      const int64_t n2 = static_cast<int64_t>(self.grad.size());
      Node& pa = *self.parents[0];
      Node& pb = *self.parents[1];
      CMapArr dC(self.grad.data(), n2);
      if (pa.requires_grad)
        MapArr(pa.grad.data(), n2) += dC * CMapArr(pb.value.data(), n2);
      if (pb.requires_grad)
        MapArr(pb.grad.data(), n2) += dC * CMapArr(pa.value.data(), n2);
    };
  }
  return out;
}

Tensor scale(const Tensor& a, double s) {
  req_defined(a, "scale");
  Tensor out = make_node(a.shape(), {a});
  const int64_t n = a.numel();
  MapArr(out.data(), n) = CMapArr(a.data(), n) * s;
  if (out.requires_grad()) {
    out.node()->backward_fn = [s](Node& self) {
      Node& p = *self.parents[0];
      if (!p.requires_grad) return;
      const int64_t n2 = static_cast<int64_t>(self.grad.size());
      MapArr(p.grad.data(), n2) += CMapArr(self.grad.data(), n2) * s;
    };
  }
  return out;
}

Tensor add_row_broadcast(const Tensor& a, const Tensor& bias) {
  req_rank2(a, "add_row_broadcast");
  req_defined(bias, "add_row_broadcast");
  const int64_t m = a.rows(), n = a.cols();
  if (bias.numel() != n)
    throw DimensionError("add_row_broadcast: bias has " + std::to_string(bias.numel()) +
                         " elements, expected " + std::to_string(n));
  Tensor out = make_node({m, n}, {a, bias});
  CMapMat A(a.data(), m, n);
  MapMat C(out.data(), m, n);
  C = A;
  C.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(bias.data(), n);
  if (out.requires_grad()) {
    out.node()->backward_fn = [](Node& self) {
      Node& pa = *self.parents[0];
      Node& pb = *self.parents[1];
      const int64_t m2 = self.shape[0], n2 = self.shape[1];
      CMapMat dC(self.grad.data(), m2, n2);
      if (pa.requires_grad) gmat(pa) += dC;
      if (pb.requires_grad) {
        const double* dc = self.grad.data();
        double* db = pb.grad.data();
        for (int64_t i = 0; i < m2; ++i)
          for (int64_t j = 0; j < n2; ++j) db[j] += dc[i * n2 + j];
      }
    };
  }
  return out;
}

Tensor scale_rows(const Tensor& a, const Tensor& w) {
  req_rank2(a, "scale_rows");
  req_defined(w, "scale_rows");
  const int64_t m = a.rows(), n = a.cols();
  if (w.numel() != m)
    throw DimensionError("scale_rows: weight has " + std::to_string(w.numel()) +
                         " elements, expected " + std::to_string(m));
  Tensor out = make_node({m, n}, {a, w});
  CMapMat A(a.data(), m, n);
  MapMat C(out.data(), m, n);
  C.array() = A.array().colwise() * CMapArr(w.data(), m);
  add_macs(static_cast<uint64_t>(m) * static_cast<uint64_t>(n));
  if (out.requires_grad()) {
    out.node()->backward_fn = [](Node& self) {
      Node& pa = *self.parents[0];
      Node& pw = *self.parents[1];
      const int64_t m2 = self.shape[0], n2 = self.shape[1];
      CMapMat dC(self.grad.data(), m2, n2);
      if (pa.requires_grad)
        gmat(pa).array() += dC.array().colwise() * CMapArr(pw.value.data(), m2);
      if (pw.requires_grad) {
        const double* dc = self.grad.data();
        const double* av = pa.value.data();
        double* dw = pw.grad.data();
        for (int64_t i = 0; i < m2; ++i) {
          double acc = 0.0;
          for (int64_t j = 0; j < n2; ++j) acc += dc[i * n2 + j] * av[i * n2 + j];
          dw[i] += acc;
        }
      }
    };
  }
  return out;
}

namespace {

// Scalar softmax along an axis expressed as (outer, axis extent, inner)
// strides. Index-ordered on purpose: results must not depend on how any
// buffer happens to be aligned.
void softmax_forward_generic(const double* x, double* y, int64_t outer, int64_t s, int64_t inner) {
  for (int64_t o = 0; o < outer; ++o)
    for (int64_t i = 0; i < inner; ++i) {
      const int64_t base = o * s * inner + i;
      double mx = x[base];
      for (int64_t j = 1; j < s; ++j) mx = std::max(mx, x[base + j * inner]);
      double sum = 0.0;
      for (int64_t j = 0; j < s; ++j) {
        const double e = std::exp(x[base + j * inner] - mx);
        y[base + j * inner] = e;
        sum += e;
      }
      const double inv = 1.0 / sum;
      for (int64_t j = 0; j < s; ++j) y[base + j * inner] *= inv;
    }
}

void softmax_backward_generic(const double* y, const double* dy, double* dx, int64_t outer,
                              int64_t s, int64_t inner) {
  for (int64_t o = 0; o < outer; ++o)
    for (int64_t i = 0; i < inner; ++i) {
      const int64_t base = o * s * inner + i;
      double dot = 0.0;
      for (int64_t j = 0; j < s; ++j) dot += dy[base + j * inner] * y[base + j * inner];
      for (int64_t j = 0; j < s; ++j) {
        const int64_t k = base + j * inner;
        dx[k] += y[k] * (dy[k] - dot);
      }
    }
}

}  // namespace

Tensor softmax_axis(const Tensor& a, int64_t axis) {
  req_defined(a, "softmax_axis");
  const int64_t rank = a.ndim();
  if (axis < 0 || axis >= rank)
    throw ValidationError("softmax_axis: axis " + std::to_string(axis) +
                          " out of range for rank " + std::to_string(rank));
  const Shape& sh = a.shape();
  int64_t outer = 1, inner = 1;
  for (int64_t i = 0; i < axis; ++i) outer *= sh[static_cast<size_t>(i)];
  for (int64_t i = axis + 1; i < rank; ++i) inner *= sh[static_cast<size_t>(i)];
  const int64_t s = sh[static_cast<size_t>(axis)];
  if (s == 0) throw ValidationError("softmax_axis: axis has extent 0");

  Tensor out = make_node(sh, {a});
  softmax_forward_generic(a.data(), out.data(), outer, s, inner);

  if (out.requires_grad()) {
    out.node()->backward_fn = [outer, s, inner](Node& self) {
      Node& p = *self.parents[0];
      if (!p.requires_grad) return;
      softmax_backward_generic(self.value.data(), self.grad.data(), p.grad.data(), outer, s,
                               inner);
    };
  }
  return out;
}

Tensor layernorm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  req_rank2(x, "layernorm");
  req_defined(gamma, "layernorm");
  req_defined(beta, "layernorm");
  const int64_t m = x.rows(), n = x.cols();
  if (gamma.numel() != n || beta.numel() != n)
    throw DimensionError("layernorm: gain/shift must have " + std::to_string(n) + " elements");
  if (eps <= 0.0) throw ValidationError("layernorm: eps must be positive");

  Tensor out = make_node({m, n}, {x, gamma, beta});
  Node& node = *out.node();
  const bool save_aux = out.requires_grad();
  if (save_aux) node.aux.resize(static_cast<size_t>(m * n + m));
  const double* xp = x.data();
  const double* gp = gamma.data();
  const double* bp = beta.data();
  double* yp = out.data();
  const double inv_n = 1.0 / static_cast<double>(n);
  for (int64_t i = 0; i < m; ++i) {
    CMapArr row(xp + i * n, n);
    // Scalar accumulation in index order keeps results independent of
    // buffer alignment (vectorized reductions split at aligned addresses).
    double sum = 0.0;
    for (int64_t j = 0; j < n; ++j) sum += xp[i * n + j];
    const double mean = sum * inv_n;
    double sq = 0.0;
    for (int64_t j = 0; j < n; ++j) {
      const double c = xp[i * n + j] - mean;
      sq += c * c;
    }
    const double var = sq * inv_n;
    const double inv_std = 1.0 / std::sqrt(var + eps);
    if (save_aux) {
      MapArr xhat(node.aux.data() + i * n, n);
      xhat = (row - mean) * inv_std;
      node.aux[static_cast<size_t>(m * n + i)] = inv_std;
      MapArr(yp + i * n, n) = xhat * CMapArr(gp, n) + CMapArr(bp, n);
    } else {
      MapArr(yp + i * n, n) = ((row - mean) * inv_std) * CMapArr(gp, n) + CMapArr(bp, n);
    }
  }

  if (out.requires_grad()) {
    out.node()->backward_fn = [m, n](Node& self) {
      Node& px = *self.parents[0];
      Node& pg = *self.parents[1];
      Node& pb = *self.parents[2];
      const double* xhat_all = self.aux.data();
      const double* inv_std_all = self.aux.data() + m * n;
      const double* gp2 = pg.value.data();
      const double inv_n = 1.0 / static_cast<double>(n);
      Eigen::ArrayXd dxhat(n);
      for (int64_t i = 0; i < m; ++i) {
        CMapArr dy(self.grad.data() + i * n, n);
        CMapArr xhat(xhat_all + i * n, n);
        if (pg.requires_grad) MapArr(pg.grad.data(), n) += dy * xhat;
        if (pb.requires_grad) MapArr(pb.grad.data(), n) += dy;
        if (px.requires_grad) {
          dxhat = dy * CMapArr(gp2, n);
          double s1 = 0.0, s2 = 0.0;
          for (int64_t j = 0; j < n; ++j) {
            s1 += dxhat[j];
            s2 += dxhat[j] * xhat[j];
          }
          MapArr(px.grad.data() + i * n, n) +=
              inv_std_all[i] * (dxhat - inv_n * s1 - xhat * (inv_n * s2));
        }
      }
    };
  }
  return out;
}

Tensor gelu(const Tensor& x) {
  req_defined(x, "gelu");
  Tensor out = make_node(x.shape(), {x});
  Node& node = *out.node();
  const int64_t n = x.numel();
  constexpr double c1 = 0.7978845608028654;  // sqrt(2/pi)
  constexpr double c2 = 0.044715;
  const double* xp = x.data();
  double* yp = out.data();
  const bool save_aux = out.requires_grad();
  if (save_aux) node.aux.resize(static_cast<size_t>(n));
  // Scalar tanh everywhere: a vectorized evaluation would mix libm and
  // packet approximations depending on buffer alignment.
  for (int64_t i = 0; i < n; ++i) {
    const double v = xp[i];
    const double t = std::tanh(c1 * (v + c2 * v * v * v));
    if (save_aux) node.aux[static_cast<size_t>(i)] = t;
    yp[i] = 0.5 * v * (1.0 + t);
  }
  if (out.requires_grad()) {
    out.node()->backward_fn = [n](Node& self) {
      Node& p = *self.parents[0];
      if (!p.requires_grad) return;
      constexpr double c1b = 0.7978845608028654;
      constexpr double c2b = 0.044715;
      CMapArr xa2(p.value.data(), n);
      CMapArr t(self.aux.data(), n);
      CMapArr dy(self.grad.data(), n);
      MapArr(p.grad.data(), n) +=
          dy * (0.5 * (1.0 + t) + 0.5 * xa2 * (1.0 - t.square()) * c1b * (1.0 + 3.0 * c2b * xa2.square()));
    };
  }
  return out;
}

Tensor relu(const Tensor& x) {
  req_defined(x, "relu");
  Tensor out = make_node(x.shape(), {x});
  const int64_t n = x.numel();
  MapArr(out.data(), n) = CMapArr(x.data(), n).max(0.0);
  if (out.requires_grad()) {
    out.node()->backward_fn = [n](Node& self) {
      Node& p = *self.parents[0];
      if (!p.requires_grad) return;
      const double* xp = p.value.data();
      const double* dy = self.grad.data();
      double* dx = p.grad.data();
      for (int64_t i = 0; i < n; ++i)
        if (xp[i] > 0.0) dx[i] += dy[i];
    };
  }
  return out;
}

Tensor cross_entropy(const Tensor& logits, const std::vector<int>& labels) {
  req_rank2(logits, "cross_entropy");
  const int64_t b = logits.rows(), k = logits.cols();
  if (static_cast<int64_t>(labels.size()) != b)
    throw DimensionError("cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                         std::to_string(b) + " rows");
  for (int lab : labels)
    if (lab < 0 || lab >= k)
      throw ValidationError("cross_entropy: label " + std::to_string(lab) +
                            " outside [0, " + std::to_string(k) + ")");

  Tensor out = make_node({1}, {logits});
  Node& node = *out.node();
  const bool save_aux = out.requires_grad();
  if (save_aux) node.aux.resize(static_cast<size_t>(b * k));
  const double* zp = logits.data();
  double total = 0.0;
  for (int64_t i = 0; i < b; ++i) {
    const double* row = zp + i * k;
    double mx = row[0];
    for (int64_t j = 1; j < k; ++j) mx = std::max(mx, row[j]);
    double sum = 0.0;
    for (int64_t j = 0; j < k; ++j) sum += std::exp(row[j] - mx);
    const double lse = mx + std::log(sum);
    total += lse - row[labels[static_cast<size_t>(i)]];
    if (save_aux) {
      for (int64_t j = 0; j < k; ++j)
        node.aux[static_cast<size_t>(i * k + j)] = std::exp(row[j] - lse);
    }
  }
  out.data()[0] = total / static_cast<double>(b);

  if (out.requires_grad()) {
    out.node()->backward_fn = [b, k, labels](Node& self) {
      Node& p = *self.parents[0];
      if (!p.requires_grad) return;
      const double g = self.grad[0] / static_cast<double>(b);
      double* dz = p.grad.data();
      const double* probs = self.aux.data();
      for (int64_t i = 0; i < b; ++i) {
        MapArr(dz + i * k, k) += g * CMapArr(probs + i * k, k);
        dz[i * k + labels[static_cast<size_t>(i)]] -= g;
      }
    };
  }
  return out;
}

Tensor slice_rows(const Tensor& a, int64_t start, int64_t count) {
  req_rank2(a, "slice_rows");
  if (start < 0 || count < 1 || start + count > a.rows())
    throw ValidationError("slice_rows: rows [" + std::to_string(start) + ", " +
                          std::to_string(start + count) + ") outside " + shape_str(a.shape()));
  const int64_t n = a.cols();
  Tensor out = make_node({count, n}, {a});
  std::copy_n(a.data() + start * n, count * n, out.data());
  if (out.requires_grad()) {
    out.node()->backward_fn = [start, count, n](Node& self) {
      Node& p = *self.parents[0];
      if (!p.requires_grad) return;
      MapArr(p.grad.data() + start * n, count * n) += CMapArr(self.grad.data(), count * n);
    };
  }
  return out;
}

Tensor slice_cols(const Tensor& a, int64_t start, int64_t count) {
  req_rank2(a, "slice_cols");
  if (start < 0 || count < 1 || start + count > a.cols())
    throw ValidationError("slice_cols: cols [" + std::to_string(start) + ", " +
                          std::to_string(start + count) + ") outside " + shape_str(a.shape()));
  const int64_t m = a.rows(), n = a.cols();
  Tensor out = make_node({m, count}, {a});
  CMapMat A(a.data(), m, n);
  MapMat C(out.data(), m, count);
  C = A.middleCols(start, count);
  if (out.requires_grad()) {
    out.node()->backward_fn = [start, count, n](Node& self) {
      Node& p = *self.parents[0];
      if (!p.requires_grad) return;
      const int64_t m2 = self.shape[0];
      CMapMat dC(self.grad.data(), m2, count);
      MapMat dA(p.grad.data(), m2, n);
      dA.middleCols(start, count) += dC;
    };
  }
  return out;
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ValidationError("concat_rows: no parts");
  int64_t rows = 0;
  const int64_t n = [&] {
    req_rank2(parts[0], "concat_rows");
    return parts[0].cols();
  }();
  for (const Tensor& t : parts) {
    req_rank2(t, "concat_rows");
    if (t.cols() != n)
      throw DimensionError("concat_rows: column mismatch, " + shape_str(t.shape()) +
                           " vs expected " + std::to_string(n) + " cols");
    rows += t.rows();
  }
  Tensor out = make_node({rows, n}, parts);
  double* dst = out.data();
  for (const Tensor& t : parts) {
    std::copy_n(t.data(), t.numel(), dst);
    dst += t.numel();
  }
  if (out.requires_grad()) {
    out.node()->backward_fn = [](Node& self) {
      const double* src = self.grad.data();
      for (const NodePtr& p : self.parents) {
        const int64_t count = static_cast<int64_t>(p->value.size());
        if (p->requires_grad)
          MapArr(p->grad.data(), count) += CMapArr(src, count);
        src += count;
      }
    };
  }
  return out;
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ValidationError("concat_cols: no parts");
  req_rank2(parts[0], "concat_cols");
  const int64_t m = parts[0].rows();
  int64_t cols = 0;
  for (const Tensor& t : parts) {
    req_rank2(t, "concat_cols");
    if (t.rows() != m)
      throw DimensionError("concat_cols: row mismatch, " + shape_str(t.shape()) +
                           " vs expected " + std::to_string(m) + " rows");
    cols += t.cols();
  }
  Tensor out = make_node({m, cols}, parts);
  MapMat C(out.data(), m, cols);
  int64_t at = 0;
  for (const Tensor& t : parts) {
    C.middleCols(at, t.cols()) = CMapMat(t.data(), m, t.cols());
    at += t.cols();
  }
  if (out.requires_grad()) {
    out.node()->backward_fn = [m, cols](Node& self) {
      CMapMat dC(self.grad.data(), m, cols);
      int64_t at2 = 0;
      for (const NodePtr& p : self.parents) {
        const int64_t w = p->shape[1];
        if (p->requires_grad) {
          MapMat dP(p->grad.data(), m, w);
          dP += dC.middleCols(at2, w);
        }
        at2 += w;
      }
    };
  }
  return out;
}

Tensor mean_rows(const Tensor& a) {
  req_rank2(a, "mean_rows");
  const int64_t m = a.rows(), n = a.cols();
  if (m == 0) throw ValidationError("mean_rows: zero rows");
  Tensor out = make_node({1, n}, {a});
  const double* ap = a.data();
  double* op = out.data();
  const double inv = 1.0 / static_cast<double>(m);
  for (int64_t j = 0; j < n; ++j) op[j] = 0.0;
  for (int64_t i = 0; i < m; ++i)
    for (int64_t j = 0; j < n; ++j) op[j] += ap[i * n + j];
  for (int64_t j = 0; j < n; ++j) op[j] *= inv;
  if (out.requires_grad()) {
    out.node()->backward_fn = [m, n](Node& self) {
      Node& p = *self.parents[0];
      if (!p.requires_grad) return;
      const double inv_m = 1.0 / static_cast<double>(m);
      CMapArr dC(self.grad.data(), n);
      for (int64_t i = 0; i < m; ++i) MapArr(p.grad.data() + i * n, n) += inv_m * dC;
    };
  }
  return out;
}

Tensor sum_all(const Tensor& a) {
  req_defined(a, "sum_all");
  Tensor out = make_node({1}, {a});
  const double* ap = a.data();
  double acc = 0.0;
  for (int64_t i = 0; i < a.numel(); ++i) acc += ap[i];
  out.data()[0] = acc;
  if (out.requires_grad()) {
    out.node()->backward_fn = [](Node& self) {
      Node& p = *self.parents[0];
      if (!p.requires_grad) return;
      const int64_t n = static_cast<int64_t>(p.grad.size());
      MapArr(p.grad.data(), n) += self.grad[0];
    };
  }
  return out;
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  return add_row_broadcast(matmul(x, w), b);
}

}  // namespace smoa
