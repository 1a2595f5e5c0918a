#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "shvit/tensor.hpp"

namespace shvit {

enum class OptimizerKind { sgd, adam };

std::string to_string(OptimizerKind kind);
OptimizerKind optimizer_kind_from_string(const std::string& name);

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::sgd;
  double lr = 0.05;
  double momentum = 0.9;  // SGD only
  double beta1 = 0.9;     // Adam only
  double beta2 = 0.999;
  double eps = 1e-8;
  /// Decoupled: p <- p - lr * weight_decay * p, applied to the parameter
  /// before the gradient update, for both optimizers.
  double weight_decay = 0.0;

  void validate() const;
};

/// Per-parameter optimizer buffers plus the step counter.
///
/// SGD with momentum:   v <- momentum * v + g;             p <- p - lr * v
/// Adam (t = step + 1): m <- beta1 * m + (1 - beta1) * g
///                      v <- beta2 * v + (1 - beta2) * g^2
///                      p <- p - lr * (m / (1 - beta1^t)) / (sqrt(v / (1 - beta2^t)) + eps)
struct OptimizerState {
  OptimizerConfig config;
  std::uint64_t step = 0;
  /// Momentum (SGD) or first moment (Adam), one per parameter.
  std::vector<std::vector<double>> first;
  /// Second moment (Adam only).
  std::vector<std::vector<double>> second;

  explicit OptimizerState(OptimizerConfig cfg = {});
};

/// Applies one update to `params` from their gradients; gradients are left
/// untouched. Throws when a parameter has no gradient buffer or when the
/// parameter list no longer matches the state's buffers.
void optimizer_step(OptimizerState& state, std::span<Tensor> params);

}  // namespace shvit
