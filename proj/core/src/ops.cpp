#include "shvit/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "shvit/error.hpp"

namespace shvit::ops {
namespace {

void require_defined(const Tensor& t, const char* op) {
  if (!t.defined()) throw Error(std::string(op) + ": undefined tensor");
}

void require_matrix(const Tensor& t, const char* op) {
  require_defined(t, op);
  if (t.rank() != 2)
    throw ShapeError(std::string(op) + ": expected a matrix, got " + shape_to_string(t.shape()));
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  require_defined(a, op);
  require_defined(b, op);
  if (a.shape() != b.shape())
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_to_string(a.shape()) + " vs " +
                     shape_to_string(b.shape()));
}

// Accumulating gradient view; empty when the tensor does not want one.
std::span<double> grad_of(const Tensor& t) {
  return t.requires_grad() ? t.mutable_grad() : std::span<double>{};
}

Tensor finish(Tensor out, const char* op) {
  out.check_finite(op);
  return out;
}

}  // namespace

Tensor matmul(Graph& g, const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k)
    throw ShapeError("matmul: inner dimensions differ, " + shape_to_string(a.shape()) + " x " +
                     shape_to_string(b.shape()));
  a.check_finite("matmul lhs");
  b.check_finite("matmul rhs");
  Tensor out(Shape{m, n});
  {
    auto A = a.data();
    auto B = b.data();
    auto C = out.mutable_data();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t p = 0; p < k; ++p) {
        const double aip = A[i * k + p];
        const double* brow = &B[p * n];
        double* crow = &C[i * n];
        for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
      }
  }
  out = finish(out, "matmul");
  if (g.needs_grad({&a, &b})) {
    g.record(out, [a, b, out, m, k, n]() mutable {
      auto dC = out.grad();
      if (auto dA = grad_of(a); !dA.empty()) {
        auto B = b.data();
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t p = 0; p < k; ++p) {
            double s = 0.0;
            for (std::size_t j = 0; j < n; ++j) s += dC[i * n + j] * B[p * n + j];
            dA[i * k + p] += s;
          }
      }
      if (auto dB = grad_of(b); !dB.empty()) {
        auto A = a.data();
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t p = 0; p < k; ++p) {
            const double aip = A[i * k + p];
            for (std::size_t j = 0; j < n; ++j) dB[p * n + j] += aip * dC[i * n + j];
          }
      }
    });
  }
  return out;
}

Tensor matmul_nt(Graph& g, const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul_nt");
  require_matrix(b, "matmul_nt");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(0);
  if (b.dim(1) != k)
    throw ShapeError("matmul_nt: inner dimensions differ, " + shape_to_string(a.shape()) +
                     " x " + shape_to_string(b.shape()) + "^T");
  a.check_finite("matmul_nt lhs");
  b.check_finite("matmul_nt rhs");
  Tensor out(Shape{m, n});
  {
    auto A = a.data();
    auto B = b.data();
    auto C = out.mutable_data();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        double s = 0.0;
        for (std::size_t p = 0; p < k; ++p) s += A[i * k + p] * B[j * k + p];
        C[i * n + j] = s;
      }
  }
  out = finish(out, "matmul_nt");
  if (g.needs_grad({&a, &b})) {
    g.record(out, [a, b, out, m, k, n]() mutable {
      auto dC = out.grad();
      if (auto dA = grad_of(a); !dA.empty()) {
        auto B = b.data();
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < n; ++j) {
            const double d = dC[i * n + j];
            for (std::size_t p = 0; p < k; ++p) dA[i * k + p] += d * B[j * k + p];
          }
      }
      if (auto dB = grad_of(b); !dB.empty()) {
        auto A = a.data();
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < n; ++j) {
            const double d = dC[i * n + j];
            for (std::size_t p = 0; p < k; ++p) dB[j * k + p] += d * A[i * k + p];
          }
      }
    });
  }
  return out;
}

Tensor transpose(Graph& g, const Tensor& a) {
  require_matrix(a, "transpose");
  const std::size_t m = a.dim(0), n = a.dim(1);
  Tensor out(Shape{n, m});
  {
    auto A = a.data();
    auto O = out.mutable_data();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) O[j * m + i] = A[i * n + j];
  }
  if (g.needs_grad({&a})) {
    g.record(out, [a, out, m, n]() mutable {
      auto dO = out.grad();
      auto dA = a.mutable_grad();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) dA[i * n + j] += dO[j * m + i];
    });
  }
  return out;
}

Tensor add(Graph& g, const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  Tensor out(a.shape());
  {
    auto A = a.data();
    auto B = b.data();
    auto O = out.mutable_data();
    for (std::size_t i = 0; i < O.size(); ++i) O[i] = A[i] + B[i];
  }
  out = finish(out, "add");
  if (g.needs_grad({&a, &b})) {
    g.record(out, [a, b, out]() mutable {
      auto dO = out.grad();
      if (auto dA = grad_of(a); !dA.empty())
        for (std::size_t i = 0; i < dO.size(); ++i) dA[i] += dO[i];
      if (auto dB = grad_of(b); !dB.empty())
        for (std::size_t i = 0; i < dO.size(); ++i) dB[i] += dO[i];
    });
  }
  return out;
}

Tensor mul(Graph& g, const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  Tensor out(a.shape());
  {
    auto A = a.data();
    auto B = b.data();
    auto O = out.mutable_data();
    for (std::size_t i = 0; i < O.size(); ++i) O[i] = A[i] * B[i];
  }
  out = finish(out, "mul");
  if (g.needs_grad({&a, &b})) {
    g.record(out, [a, b, out]() mutable {
      auto dO = out.grad();
      if (auto dA = grad_of(a); !dA.empty()) {
        auto B = b.data();
        for (std::size_t i = 0; i < dO.size(); ++i) dA[i] += dO[i] * B[i];
      }
      if (auto dB = grad_of(b); !dB.empty()) {
        auto A = a.data();
        for (std::size_t i = 0; i < dO.size(); ++i) dB[i] += dO[i] * A[i];
      }
    });
  }
  return out;
}

Tensor scale(Graph& g, const Tensor& a, double factor) {
  require_defined(a, "scale");
  Tensor out(a.shape());
  {
    auto A = a.data();
    auto O = out.mutable_data();
    for (std::size_t i = 0; i < O.size(); ++i) O[i] = A[i] * factor;
  }
  out = finish(out, "scale");
  if (g.needs_grad({&a})) {
    g.record(out, [a, out, factor]() mutable {
      auto dO = out.grad();
      auto dA = a.mutable_grad();
      for (std::size_t i = 0; i < dO.size(); ++i) dA[i] += dO[i] * factor;
    });
  }
  return out;
}

Tensor add_bias(Graph& g, const Tensor& x, const Tensor& bias) {
  require_matrix(x, "add_bias");
  require_defined(bias, "add_bias");
  const std::size_t m = x.dim(0), n = x.dim(1);
  if (bias.size() != n)
    throw ShapeError("add_bias: bias " + shape_to_string(bias.shape()) + " does not match " +
                     shape_to_string(x.shape()));
  Tensor out(x.shape());
  {
    auto X = x.data();
    auto B = bias.data();
    auto O = out.mutable_data();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) O[i * n + j] = X[i * n + j] + B[j];
  }
  out = finish(out, "add_bias");
  if (g.needs_grad({&x, &bias})) {
    g.record(out, [x, bias, out, m, n]() mutable {
      auto dO = out.grad();
      if (auto dX = grad_of(x); !dX.empty())
        for (std::size_t i = 0; i < m * n; ++i) dX[i] += dO[i];
      if (auto dB = grad_of(bias); !dB.empty())
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < n; ++j) dB[j] += dO[i * n + j];
    });
  }
  return out;
}

Tensor linear(Graph& g, const Tensor& x, const Tensor& w, const Tensor& b) {
  return add_bias(g, matmul(g, x, w), b);
}

Tensor softmax(Graph& g, const Tensor& x, std::size_t axis) {
  require_defined(x, "softmax");
  const Shape& s = x.shape();
  if (axis >= s.size())
    throw ShapeError("softmax: axis " + std::to_string(axis) + " invalid for " + shape_to_string(s));
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
  const std::size_t n = s[axis];
  Tensor out(s);
  {
    auto X = x.data();
    auto Y = out.mutable_data();
    for (std::size_t o = 0; o < outer; ++o)
      for (std::size_t j = 0; j < inner; ++j) {
        const std::size_t base = o * n * inner + j;
        double mx = X[base];
        for (std::size_t i = 1; i < n; ++i) mx = std::max(mx, X[base + i * inner]);
        double z = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          const double e = std::exp(X[base + i * inner] - mx);
          Y[base + i * inner] = e;
          z += e;
        }
        for (std::size_t i = 0; i < n; ++i) Y[base + i * inner] /= z;
      }
  }
  out = finish(out, "softmax");
  if (g.needs_grad({&x})) {
    g.record(out, [x, out, outer, inner, n]() mutable {
      auto Y = out.data();
      auto dY = out.grad();
      auto dX = x.mutable_grad();
      for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t j = 0; j < inner; ++j) {
          const std::size_t base = o * n * inner + j;
          double dot = 0.0;
          for (std::size_t i = 0; i < n; ++i) dot += dY[base + i * inner] * Y[base + i * inner];
          for (std::size_t i = 0; i < n; ++i) {
            const std::size_t at = base + i * inner;
            dX[at] += Y[at] * (dY[at] - dot);
          }
        }
    });
  }
  return out;
}

Tensor layer_norm(Graph& g, const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  require_defined(x, "layer_norm");
  require_defined(gamma, "layer_norm");
  require_defined(beta, "layer_norm");
  if (!(eps > 0.0)) throw Error("layer_norm: eps must be positive");
  const std::size_t d = x.shape().back();
  if (gamma.size() != d || beta.size() != d)
    throw ShapeError("layer_norm: last dimension " + std::to_string(d) + " vs gamma " +
                     shape_to_string(gamma.shape()) + ", beta " + shape_to_string(beta.shape()));
  const std::size_t rows = x.size() / d;
  Tensor out(x.shape());
  std::vector<double> xhat(x.size());
  std::vector<double> rstd(rows);
  {
    auto X = x.data();
    auto G = gamma.data();
    auto B = beta.data();
    auto Y = out.mutable_data();
    for (std::size_t r = 0; r < rows; ++r) {
      const double* xr = &X[r * d];
      double mu = 0.0;
      for (std::size_t i = 0; i < d; ++i) mu += xr[i];
      mu /= static_cast<double>(d);
      double var = 0.0;
      for (std::size_t i = 0; i < d; ++i) var += (xr[i] - mu) * (xr[i] - mu);
      var /= static_cast<double>(d);
      rstd[r] = 1.0 / std::sqrt(var + eps);
      for (std::size_t i = 0; i < d; ++i) {
        const double h = (xr[i] - mu) * rstd[r];
        xhat[r * d + i] = h;
        Y[r * d + i] = h * G[i] + B[i];
      }
    }
  }
  out = finish(out, "layer_norm");
  if (g.needs_grad({&x, &gamma, &beta})) {
    g.record(out, [x, gamma, beta, out, xhat = std::move(xhat), rstd = std::move(rstd), rows,
                   d]() mutable {
      auto dY = out.grad();
      auto G = gamma.data();
      auto dG = grad_of(gamma);
      auto dB = grad_of(beta);
      auto dX = grad_of(x);
      std::vector<double> dxhat(d);
      for (std::size_t r = 0; r < rows; ++r) {
        const double* dy = &dY[r * d];
        const double* h = &xhat[r * d];
        if (!dG.empty())
          for (std::size_t i = 0; i < d; ++i) dG[i] += dy[i] * h[i];
        if (!dB.empty())
          for (std::size_t i = 0; i < d; ++i) dB[i] += dy[i];
        if (dX.empty()) continue;
        double m1 = 0.0, m2 = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
          dxhat[i] = dy[i] * G[i];
          m1 += dxhat[i];
          m2 += dxhat[i] * h[i];
        }
        m1 /= static_cast<double>(d);
        m2 /= static_cast<double>(d);
        for (std::size_t i = 0; i < d; ++i) dX[r * d + i] += rstd[r] * (dxhat[i] - m1 - h[i] * m2);
      }
    });
  }
  return out;
}

Tensor gelu(Graph& g, const Tensor& x) {
  require_defined(x, "gelu");
  Tensor out(x.shape());
  {
    auto X = x.data();
    auto Y = out.mutable_data();
    for (std::size_t i = 0; i < X.size(); ++i) {
      const double v = X[i];
      const double t = std::tanh(kGeluSqrt2OverPi * (v + kGeluCubic * v * v * v));
      Y[i] = 0.5 * v * (1.0 + t);
    }
  }
  out = finish(out, "gelu");
  if (g.needs_grad({&x})) {
    g.record(out, [x, out]() mutable {
      auto X = x.data();
      auto dY = out.grad();
      auto dX = x.mutable_grad();
      for (std::size_t i = 0; i < X.size(); ++i) {
        const double v = X[i];
        const double u = kGeluSqrt2OverPi * (v + kGeluCubic * v * v * v);
        const double t = std::tanh(u);
        const double du = kGeluSqrt2OverPi * (1.0 + 3.0 * kGeluCubic * v * v);
        dX[i] += dY[i] * (0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * du);
      }
    });
  }
  return out;
}

Tensor dropout(Graph& g, const Tensor& x, double rate, Rng& rng) {
  if (rate < 0.0 || rate >= 1.0) throw ConfigError("dropout: rate must be in [0, 1)");
  if (rate == 0.0) return x;
  std::vector<double> keep(x.size());
  const double inv = 1.0 / (1.0 - rate);
  for (double& k : keep) k = rng.bernoulli(rate) ? 0.0 : inv;
  return mul(g, x, Tensor(x.shape(), std::move(keep)));
}

Tensor cross_entropy(Graph& g, const Tensor& logits, std::span<const std::size_t> labels) {
  require_matrix(logits, "cross_entropy");
  const std::size_t b = logits.dim(0), c = logits.dim(1);
  if (labels.size() != b)
    throw ShapeError("cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(b) + " rows");
  for (std::size_t y : labels)
    if (y >= c)
      throw Error("cross_entropy: label " + std::to_string(y) + " out of range [0, " +
                  std::to_string(c) + ")");
  std::vector<double> prob(b * c);
  double total = 0.0;
  auto Z = logits.data();
  for (std::size_t i = 0; i < b; ++i) {
    const double* z = &Z[i * c];
    const double mx = *std::max_element(z, z + c);
    double s = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      prob[i * c + j] = std::exp(z[j] - mx);
      s += prob[i * c + j];
    }
    for (std::size_t j = 0; j < c; ++j) prob[i * c + j] /= s;
    total += (std::log(s) + mx) - z[labels[i]];
  }
  Tensor out = finish(Tensor::scalar(total / static_cast<double>(b)), "cross_entropy");
  if (g.needs_grad({&logits})) {
    std::vector<std::size_t> y(labels.begin(), labels.end());
    g.record(out, [logits, out, prob = std::move(prob), y = std::move(y), b, c]() mutable {
      const double d = out.grad()[0] / static_cast<double>(b);
      auto dZ = logits.mutable_grad();
      for (std::size_t i = 0; i < b; ++i)
        for (std::size_t j = 0; j < c; ++j)
          dZ[i * c + j] += d * (prob[i * c + j] - (j == y[i] ? 1.0 : 0.0));
    });
  }
  return out;
}

Tensor sum(Graph& g, const Tensor& x) {
  require_defined(x, "sum");
  double s = 0.0;
  for (double v : x.data()) s += v;
  Tensor out = finish(Tensor::scalar(s), "sum");
  if (g.needs_grad({&x})) {
    g.record(out, [x, out]() mutable {
      const double d = out.grad()[0];
      for (double& v : x.mutable_grad()) v += d;
    });
  }
  return out;
}

Tensor mean(Graph& g, const Tensor& x) {
  return scale(g, sum(g, x), 1.0 / static_cast<double>(x.size()));
}

Tensor reshape(Graph& g, const Tensor& x, Shape shape) {
  require_defined(x, "reshape");
  if (shape_size(shape) != x.size())
    throw ShapeError("reshape: " + shape_to_string(x.shape()) + " to " + shape_to_string(shape));
  Tensor out(std::move(shape), std::vector<double>(x.data().begin(), x.data().end()));
  if (g.needs_grad({&x})) {
    g.record(out, [x, out]() mutable {
      auto dO = out.grad();
      auto dX = x.mutable_grad();
      for (std::size_t i = 0; i < dO.size(); ++i) dX[i] += dO[i];
    });
  }
  return out;
}

Tensor slice_rows(Graph& g, const Tensor& x, std::size_t begin, std::size_t count) {
  require_matrix(x, "slice_rows");
  const std::size_t n = x.dim(1);
  if (count == 0 || begin + count > x.dim(0))
    throw ShapeError("slice_rows: rows [" + std::to_string(begin) + ", " +
                     std::to_string(begin + count) + ") outside " + shape_to_string(x.shape()));
  auto X = x.data();
  Tensor out(Shape{count, n},
             std::vector<double>(X.begin() + static_cast<std::ptrdiff_t>(begin * n),
                                 X.begin() + static_cast<std::ptrdiff_t>((begin + count) * n)));
  if (g.needs_grad({&x})) {
    g.record(out, [x, out, begin, n]() mutable {
      auto dO = out.grad();
      auto dX = x.mutable_grad();
      for (std::size_t i = 0; i < dO.size(); ++i) dX[begin * n + i] += dO[i];
    });
  }
  return out;
}

Tensor slice_cols(Graph& g, const Tensor& x, std::size_t begin, std::size_t count) {
  require_matrix(x, "slice_cols");
  const std::size_t m = x.dim(0), n = x.dim(1);
  if (count == 0 || begin + count > n)
    throw ShapeError("slice_cols: cols [" + std::to_string(begin) + ", " +
                     std::to_string(begin + count) + ") outside " + shape_to_string(x.shape()));
  Tensor out(Shape{m, count});
  {
    auto X = x.data();
    auto O = out.mutable_data();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < count; ++j) O[i * count + j] = X[i * n + begin + j];
  }
  if (g.needs_grad({&x})) {
    g.record(out, [x, out, m, n, begin, count]() mutable {
      auto dO = out.grad();
      auto dX = x.mutable_grad();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < count; ++j) dX[i * n + begin + j] += dO[i * count + j];
    });
  }
  return out;
}

Tensor concat_rows(Graph& g, std::span<const Tensor> parts) {
  if (parts.empty()) throw ShapeError("concat_rows: nothing to concatenate");
  const std::size_t n = parts[0].dim(1);
  std::size_t rows = 0;
  for (const Tensor& p : parts) {
    require_matrix(p, "concat_rows");
    if (p.dim(1) != n)
      throw ShapeError("concat_rows: column count " + shape_to_string(p.shape()) + " vs " +
                       std::to_string(n));
    rows += p.dim(0);
  }
  std::vector<double> values;
  values.reserve(rows * n);
  for (const Tensor& p : parts) values.insert(values.end(), p.data().begin(), p.data().end());
  Tensor out(Shape{rows, n}, std::move(values));
  bool any = false;
  for (const Tensor& p : parts) any = any || g.needs_grad({&p});
  if (any) {
    std::vector<Tensor> inputs(parts.begin(), parts.end());
    g.record(out, [inputs, out]() mutable {
      auto dO = out.grad();
      std::size_t off = 0;
      for (Tensor& p : inputs) {
        if (auto dP = grad_of(p); !dP.empty())
          for (std::size_t i = 0; i < dP.size(); ++i) dP[i] += dO[off + i];
        off += p.size();
      }
    });
  }
  return out;
}

Tensor concat_cols(Graph& g, std::span<const Tensor> parts) {
  if (parts.empty()) throw ShapeError("concat_cols: nothing to concatenate");
  const std::size_t m = parts[0].dim(0);
  std::size_t cols = 0;
  for (const Tensor& p : parts) {
    require_matrix(p, "concat_cols");
    if (p.dim(0) != m)
      throw ShapeError("concat_cols: row count " + shape_to_string(p.shape()) + " vs " +
                       std::to_string(m));
    cols += p.dim(1);
  }
  Tensor out(Shape{m, cols});
  {
    auto O = out.mutable_data();
    std::size_t off = 0;
    for (const Tensor& p : parts) {
      const std::size_t w = p.dim(1);
      auto P = p.data();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < w; ++j) O[i * cols + off + j] = P[i * w + j];
      off += w;
    }
  }
  bool any = false;
  for (const Tensor& p : parts) any = any || g.needs_grad({&p});
  if (any) {
    std::vector<Tensor> inputs(parts.begin(), parts.end());
    g.record(out, [inputs, out, m, cols]() mutable {
      auto dO = out.grad();
      std::size_t off = 0;
      for (Tensor& p : inputs) {
        const std::size_t w = p.dim(1);
        if (auto dP = grad_of(p); !dP.empty())
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < w; ++j) dP[i * w + j] += dO[i * cols + off + j];
        off += w;
      }
    });
  }
  return out;
}

Tensor gather_rows(Graph& g, const Tensor& x, std::span<const std::size_t> index) {
  require_matrix(x, "gather_rows");
  const std::size_t m = x.dim(0), n = x.dim(1);
  if (index.empty()) throw ShapeError("gather_rows: empty index");
  for (std::size_t r : index)
    if (r >= m)
      throw ShapeError("gather_rows: row " + std::to_string(r) + " outside " +
                       shape_to_string(x.shape()));
  Tensor out(Shape{index.size(), n});
  {
    auto X = x.data();
    auto O = out.mutable_data();
    for (std::size_t i = 0; i < index.size(); ++i)
      std::copy_n(&X[index[i] * n], n, &O[i * n]);
  }
  if (g.needs_grad({&x})) {
    std::vector<std::size_t> idx(index.begin(), index.end());
    g.record(out, [x, out, idx = std::move(idx), n]() mutable {
      auto dO = out.grad();
      auto dX = x.mutable_grad();
      for (std::size_t i = 0; i < idx.size(); ++i)
        for (std::size_t j = 0; j < n; ++j) dX[idx[i] * n + j] += dO[i * n + j];
    });
  }
  return out;
}

Tensor scale_rows(Graph& g, const Tensor& x, std::span<const double> factor) {
  require_matrix(x, "scale_rows");
  const std::size_t m = x.dim(0), n = x.dim(1);
  if (factor.size() != m)
    throw ShapeError("scale_rows: " + std::to_string(factor.size()) + " factors for " +
                     shape_to_string(x.shape()));
  Tensor out(x.shape());
  {
    auto X = x.data();
    auto O = out.mutable_data();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) O[i * n + j] = X[i * n + j] * factor[i];
  }
  out = finish(out, "scale_rows");
  if (g.needs_grad({&x})) {
    std::vector<double> f(factor.begin(), factor.end());
    g.record(out, [x, out, f = std::move(f), m, n]() mutable {
      auto dO = out.grad();
      auto dX = x.mutable_grad();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) dX[i * n + j] += dO[i * n + j] * f[i];
    });
  }
  return out;
}

Tensor l2_normalize(Graph& g, const Tensor& x) {
  require_defined(x, "l2_normalize");
  double ss = 0.0;
  for (double v : x.data()) ss += v * v;
  const double norm = std::sqrt(ss);
  if (!(norm > 0.0)) throw NumericError("l2_normalize: zero vector");
  Tensor out(x.shape());
  {
    auto X = x.data();
    auto O = out.mutable_data();
    for (std::size_t i = 0; i < X.size(); ++i) O[i] = X[i] / norm;
  }
  out = finish(out, "l2_normalize");
  if (g.needs_grad({&x})) {
    g.record(out, [x, out, norm]() mutable {
      auto Y = out.data();
      auto dY = out.grad();
      auto dX = x.mutable_grad();
      double dot = 0.0;
      for (std::size_t i = 0; i < Y.size(); ++i) dot += dY[i] * Y[i];
      for (std::size_t i = 0; i < Y.size(); ++i) dX[i] += (dY[i] - Y[i] * dot) / norm;
    });
  }
  return out;
}

}  // namespace shvit::ops
