#pragma once

// Finite-difference scenarios shared by the unit tests and the acceptance
// runner.

#include <string>
#include <vector>

#include "oracles.hpp"
#include "shvit/vit.hpp"

namespace shvit::oracle {

/// Names of the single-op scenarios, one per differentiable op (softmax
/// appears once per axis).
const std::vector<std::string>& op_gradient_cases();

/// Gradient check of one op on small random inputs. Each output element is
/// weighted by a distinct constant before summing, so every element gets its
/// own upstream gradient. Throws std::invalid_argument for an unknown name.
GradCheck check_op_gradient(const std::string& op);

/// Two-layer, width-16 model on 8x8 images (2x2 patches, 3 classes).
ModelConfig gradient_check_model_config();

/// Gradient check of every parameter of the full model in training mode
/// with the shuffle branch active (group 2, noise 0.1, mask 0.2). Parameters
/// are re-drawn from U(-0.5, 0.5) (LayerNorm gains around 1) because the
/// default initialization leaves most activations near zero. The loss is
/// cross-entropy plus a random linear probe of the descriptor.
GradCheck check_model_gradient(std::uint64_t seed);

}  // namespace shvit::oracle
