#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "shvit/graph.hpp"
#include "shvit/rng.hpp"
#include "shvit/tensor.hpp"

// Differentiable primitives. Every op takes the tape it records onto; under
// an inference graph (or when no input requires a gradient) nothing is
// recorded. Outputs are checked for NaN/Inf and a NumericError is thrown
// instead of storing them.
namespace shvit::ops {

/// GELU tanh-approximation constants: sqrt(2/pi) and the cubic coefficient.
inline constexpr double kGeluSqrt2OverPi = 0.7978845608028654;
inline constexpr double kGeluCubic = 0.044715;

/// a[m x k] * b[k x n].
Tensor matmul(Graph& g, const Tensor& a, const Tensor& b);
/// a[m x k] * b[n x k]^T, without materializing the transpose.
Tensor matmul_nt(Graph& g, const Tensor& a, const Tensor& b);
Tensor transpose(Graph& g, const Tensor& a);

Tensor add(Graph& g, const Tensor& a, const Tensor& b);
Tensor mul(Graph& g, const Tensor& a, const Tensor& b);
Tensor scale(Graph& g, const Tensor& a, double factor);
/// x[m x n] + bias[n] broadcast over rows.
Tensor add_bias(Graph& g, const Tensor& x, const Tensor& bias);
/// x[m x in] * w[in x out] + b[out].
Tensor linear(Graph& g, const Tensor& x, const Tensor& w, const Tensor& b);

/// Numerically stable softmax (max subtraction) along `axis`.
Tensor softmax(Graph& g, const Tensor& x, std::size_t axis);
/// Normalizes each vector along the last dimension, then applies gamma/beta.
Tensor layer_norm(Graph& g, const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps);
/// 0.5 x (1 + tanh(sqrt(2/pi) (x + 0.044715 x^3))).
Tensor gelu(Graph& g, const Tensor& x);
/// Inverted dropout; identity when rate == 0 (no random draws).
Tensor dropout(Graph& g, const Tensor& x, double rate, Rng& rng);

/// Mean over the batch of -log softmax(logits)[label].
Tensor cross_entropy(Graph& g, const Tensor& logits, std::span<const std::size_t> labels);

Tensor sum(Graph& g, const Tensor& x);
Tensor mean(Graph& g, const Tensor& x);

Tensor reshape(Graph& g, const Tensor& x, Shape shape);
Tensor slice_rows(Graph& g, const Tensor& x, std::size_t begin, std::size_t count);
Tensor slice_cols(Graph& g, const Tensor& x, std::size_t begin, std::size_t count);
Tensor concat_rows(Graph& g, std::span<const Tensor> parts);
Tensor concat_cols(Graph& g, std::span<const Tensor> parts);
/// out[i] = x[index[i]] for matrices (row gather).
Tensor gather_rows(Graph& g, const Tensor& x, std::span<const std::size_t> index);
/// out[i, :] = factor[i] * x[i, :].
Tensor scale_rows(Graph& g, const Tensor& x, std::span<const double> factor);
/// x / ||x||_2 over all elements.
Tensor l2_normalize(Graph& g, const Tensor& x);

}  // namespace shvit::ops
