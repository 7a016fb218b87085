#pragma once

// Standalone reference implementations used to check the library. These
// share no code with the production kernels: plain loops, long double where
// precision helps, no Eigen.

#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

namespace oracle {

using Vec = std::vector<double>;

// Triple-loop matrix product, [m×k]·[k×n].
inline Vec matmul(const Vec& a, int64_t m, int64_t k, const Vec& b, int64_t n) {
  Vec c(static_cast<size_t>(m * n), 0.0);
  for (int64_t i = 0; i < m; ++i) {
    for (int64_t j = 0; j < n; ++j) {
      long double acc = 0.0L;
      for (int64_t t = 0; t < k; ++t) {
        acc += static_cast<long double>(a[i * k + t]) * static_cast<long double>(b[t * n + j]);
      }
      c[i * n + j] = static_cast<double>(acc);
    }
  }
  return c;
}

// Row softmax of an [m×n] matrix, long double exponentials, no max shift.
inline Vec softmax_rows(const Vec& x, int64_t m, int64_t n) {
  Vec y(x.size(), 0.0);
  for (int64_t i = 0; i < m; ++i) {
    long double sum = 0.0L;
    for (int64_t j = 0; j < n; ++j) sum += expl(static_cast<long double>(x[i * n + j]));
    for (int64_t j = 0; j < n; ++j) {
      y[i * n + j] = static_cast<double>(expl(static_cast<long double>(x[i * n + j])) / sum);
    }
  }
  return y;
}

// Column softmax of an [m×n] matrix.
inline Vec softmax_cols(const Vec& x, int64_t m, int64_t n) {
  Vec y(x.size(), 0.0);
  for (int64_t j = 0; j < n; ++j) {
    long double sum = 0.0L;
    for (int64_t i = 0; i < m; ++i) sum += expl(static_cast<long double>(x[i * n + j]));
    for (int64_t i = 0; i < m; ++i) {
      y[i * n + j] = static_cast<double>(expl(static_cast<long double>(x[i * n + j])) / sum);
    }
  }
  return y;
}

// Two-pass per-row mean/variance normalization with affine rescale.
inline Vec layernorm(const Vec& x, int64_t m, int64_t n, const Vec& gamma, const Vec& beta,
                     double eps = 1e-5) {
  Vec y(x.size(), 0.0);
  for (int64_t i = 0; i < m; ++i) {
    long double mean = 0.0L;
    for (int64_t j = 0; j < n; ++j) mean += x[i * n + j];
    mean /= n;
    long double var = 0.0L;
    for (int64_t j = 0; j < n; ++j) {
      const long double dlt = x[i * n + j] - mean;
      var += dlt * dlt;
    }
    var /= n;
    const long double inv = 1.0L / sqrtl(var + static_cast<long double>(eps));
    for (int64_t j = 0; j < n; ++j) {
      y[i * n + j] = static_cast<double>(
          (static_cast<long double>(x[i * n + j]) - mean) * inv * gamma[j] + beta[j]);
    }
  }
  return y;
}

// Tanh-form GELU evaluated in long double.
inline double gelu(double x) {
  const long double c = sqrtl(2.0L / 3.14159265358979323846264338327950288L);
  const long double u = c * (static_cast<long double>(x) +
                             0.044715L * static_cast<long double>(x) * x * x);
  return static_cast<double>(0.5L * x * (1.0L + tanhl(u)));
}

// Mean negative log-likelihood via direct log-sum-exp.
inline double cross_entropy(const Vec& logits, int64_t b, int64_t k,
                            const std::vector<int>& labels) {
  long double total = 0.0L;
  for (int64_t i = 0; i < b; ++i) {
    long double lse = 0.0L;
    for (int64_t j = 0; j < k; ++j) lse += expl(static_cast<long double>(logits[i * k + j]));
    lse = logl(lse);
    total += lse - static_cast<long double>(logits[i * k + labels[static_cast<size_t>(i)]]);
  }
  return static_cast<double>(total / b);
}

// Two-loop bottleneck adapter: up(act(down(x))) with row-wise biases.
inline Vec adapter(const Vec& x, int64_t L, int64_t d, int64_t r, const Vec& w_down,
                   const Vec& b_down, const Vec& w_up, const Vec& b_up, bool use_relu) {
  Vec h(static_cast<size_t>(L * r), 0.0);
  for (int64_t i = 0; i < L; ++i) {
    for (int64_t j = 0; j < r; ++j) {
      long double acc = b_down[j];
      for (int64_t t = 0; t < d; ++t) acc += x[i * d + t] * w_down[t * r + j];
      const double pre = static_cast<double>(acc);
      h[i * r + j] = use_relu ? (pre > 0.0 ? pre : 0.0) : gelu(pre);
    }
  }
  Vec y(static_cast<size_t>(L * d), 0.0);
  for (int64_t i = 0; i < L; ++i) {
    for (int64_t j = 0; j < d; ++j) {
      long double acc = b_up[j];
      for (int64_t t = 0; t < r; ++t) acc += h[i * r + t] * w_up[t * d + j];
      y[i * d + j] = static_cast<double>(acc);
    }
  }
  return y;
}

struct AdapterParams {
  Vec w_down, b_down, w_up, b_up;
  bool relu = false;
};

// Gated sum of every expert's output, gates = row softmax of x·w.
inline Vec dense_moa(const Vec& x, int64_t L, int64_t d, const Vec& w, int64_t n, int64_t r,
                     const std::vector<AdapterParams>& experts) {
  const Vec gates = softmax_rows(matmul(x, L, d, w, n), L, n);
  Vec y(static_cast<size_t>(L * d), 0.0);
  for (int64_t i = 0; i < n; ++i) {
    const AdapterParams& e = experts[static_cast<size_t>(i)];
    const Vec out = adapter(x, L, d, r, e.w_down, e.b_down, e.w_up, e.b_up, e.relu);
    for (int64_t t = 0; t < L; ++t) {
      for (int64_t c = 0; c < d; ++c) {
        y[t * d + c] += gates[t * n + i] * out[t * d + c];
      }
    }
  }
  return y;
}

struct SoftMoaRef {
  Vec dispatch, combine, slot_in, slot_out, y;
};

// Direct materialization of dispatch, slot inputs, expert outputs, combine.
inline SoftMoaRef soft_moa(const Vec& x, int64_t L, int64_t d, const Vec& phi, int64_t n,
                           int64_t p, int64_t r, const std::vector<AdapterParams>& experts) {
  const int64_t s = n * p;
  SoftMoaRef ref;
  const Vec logits = matmul(x, L, d, phi, s);
  ref.dispatch = softmax_cols(logits, L, s);
  ref.combine = softmax_rows(logits, L, s);
  ref.slot_in.assign(static_cast<size_t>(s * d), 0.0);
  for (int64_t j = 0; j < s; ++j) {
    for (int64_t c = 0; c < d; ++c) {
      long double acc = 0.0L;
      for (int64_t t = 0; t < L; ++t) acc += ref.dispatch[t * s + j] * x[t * d + c];
      ref.slot_in[j * d + c] = static_cast<double>(acc);
    }
  }
  ref.slot_out.assign(static_cast<size_t>(s * d), 0.0);
  for (int64_t j = 0; j < s; ++j) {
    const AdapterParams& e = experts[static_cast<size_t>(j / p)];
    Vec row(ref.slot_in.begin() + j * d, ref.slot_in.begin() + (j + 1) * d);
    const Vec out = adapter(row, 1, d, r, e.w_down, e.b_down, e.w_up, e.b_up, e.relu);
    for (int64_t c = 0; c < d; ++c) ref.slot_out[j * d + c] = out[c];
  }
  ref.y.assign(static_cast<size_t>(L * d), 0.0);
  for (int64_t t = 0; t < L; ++t) {
    for (int64_t c = 0; c < d; ++c) {
      long double acc = 0.0L;
      for (int64_t j = 0; j < s; ++j) acc += ref.combine[t * s + j] * ref.slot_out[j * d + c];
      ref.y[t * d + c] = static_cast<double>(acc);
    }
  }
  return ref;
}

// Mean combine mass per expert over tokens: double loop over (token, slot).
inline Vec contribution(const Vec& combine, int64_t L, int64_t n, int64_t p) {
  Vec out(static_cast<size_t>(n), 0.0);
  for (int64_t t = 0; t < L; ++t) {
    for (int64_t j = 0; j < n * p; ++j) out[static_cast<size_t>(j / p)] += combine[t * n * p + j];
  }
  for (double& v : out) v /= static_cast<double>(L);
  return out;
}

// Nearest-centroid classifier accuracy: train centroids, score test items.
inline double centroid_accuracy(const std::vector<Vec>& train, const std::vector<int>& train_y,
                                const std::vector<Vec>& test, const std::vector<int>& test_y,
                                int64_t n_classes) {
  const size_t dim = train[0].size();
  std::vector<Vec> centroid(static_cast<size_t>(n_classes), Vec(dim, 0.0));
  std::vector<int64_t> count(static_cast<size_t>(n_classes), 0);
  for (size_t i = 0; i < train.size(); ++i) {
    for (size_t j = 0; j < dim; ++j) centroid[train_y[i]][j] += train[i][j];
    ++count[train_y[i]];
  }
  for (int64_t c = 0; c < n_classes; ++c) {
    for (size_t j = 0; j < dim; ++j) centroid[c][j] /= static_cast<double>(count[c]);
  }
  int64_t hits = 0;
  for (size_t i = 0; i < test.size(); ++i) {
    double best = 0.0;
    int best_c = -1;
    for (int64_t c = 0; c < n_classes; ++c) {
      double dist = 0.0;
      for (size_t j = 0; j < dim; ++j) {
        const double delta = test[i][j] - centroid[c][j];
        dist += delta * delta;
      }
      if (best_c < 0 || dist < best) {
        best = dist;
        best_c = static_cast<int>(c);
      }
    }
    if (best_c == test_y[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(test.size());
}

}  // namespace oracle
