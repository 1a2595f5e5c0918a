#include "shvit/optim.hpp"

#include <cmath>

#include "shvit/error.hpp"

namespace shvit {

std::string to_string(OptimizerKind kind) { return kind == OptimizerKind::sgd ? "sgd" : "adam"; }

OptimizerKind optimizer_kind_from_string(const std::string& name) {
  if (name == "sgd") return OptimizerKind::sgd;
  if (name == "adam") return OptimizerKind::adam;
  throw ConfigError("unknown optimizer '" + name + "' (expected sgd or adam)");
}

void OptimizerConfig::validate() const {
  if (!(lr > 0.0)) throw ConfigError("optim.lr must be positive");
  if (momentum < 0.0 || momentum >= 1.0) throw ConfigError("optim.momentum must be in [0, 1)");
  if (beta1 < 0.0 || beta1 >= 1.0) throw ConfigError("optim.beta1 must be in [0, 1)");
  if (beta2 < 0.0 || beta2 >= 1.0) throw ConfigError("optim.beta2 must be in [0, 1)");
  if (!(eps > 0.0)) throw ConfigError("optim.eps must be positive");
  if (weight_decay < 0.0) throw ConfigError("optim.weight_decay must be nonnegative");
}

OptimizerState::OptimizerState(OptimizerConfig cfg) : config(cfg) { config.validate(); }

void optimizer_step(OptimizerState& state, std::span<Tensor> params) {
  const OptimizerConfig& c = state.config;
  const bool adam = c.kind == OptimizerKind::adam;
  if (state.first.empty()) {
    state.first.resize(params.size());
    if (adam) state.second.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      state.first[i].assign(params[i].size(), 0.0);
      if (adam) state.second[i].assign(params[i].size(), 0.0);
    }
  }
  if (state.first.size() != params.size() || (adam && state.second.size() != params.size()))
    throw ShapeError("optimizer_step: state tracks " + std::to_string(state.first.size()) +
                     " parameters, got " + std::to_string(params.size()));
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i].has_grad())
      throw GraphError("optimizer_step: parameter " + std::to_string(i) + " has no gradient");
    if (state.first[i].size() != params[i].size() ||
        (adam && state.second[i].size() != params[i].size()))
      throw ShapeError("optimizer_step: buffer shape mismatch for parameter " + std::to_string(i));
  }

  const double t = static_cast<double>(state.step + 1);
  const double bc1 = 1.0 - std::pow(c.beta1, t);
  const double bc2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i].mutable_data();
    auto g = params[i].grad();
    auto& m = state.first[i];
    for (std::size_t j = 0; j < p.size(); ++j) {
      if (c.weight_decay != 0.0) p[j] -= c.lr * c.weight_decay * p[j];
      if (adam) {
        auto& v = state.second[i];
        m[j] = c.beta1 * m[j] + (1.0 - c.beta1) * g[j];
        v[j] = c.beta2 * v[j] + (1.0 - c.beta2) * g[j] * g[j];
        p[j] -= c.lr * (m[j] / bc1) / (std::sqrt(v[j] / bc2) + c.eps);
      } else {
        m[j] = c.momentum * m[j] + g[j];
        p[j] -= c.lr * m[j];
      }
    }
    params[i].check_finite("optimizer_step");
  }
  ++state.step;
}

}  // namespace shvit
