#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "shvit/graph.hpp"
#include "shvit/rng.hpp"
#include "shvit/tensor.hpp"

namespace shvit {

/// Token perturbation applied at the final encoder block.
///
/// Config keys: shuffle.enabled, shuffle.group_size, shuffle.noise_sigma,
/// shuffle.mask_prob, shuffle.apply_in_eval, shuffle.per_token,
/// shuffle.identity_perm.
struct ShuffleConfig {
  bool enabled = true;
  /// Patch tokens are cut into contiguous groups of this many tokens (the
  /// last group may be short); the groups are permuted as blocks.
  std::size_t group_size = 4;
  double noise_sigma = 0.1;
  double mask_prob = 0.1;
  /// Off by default: eval-mode descriptors stay deterministic.
  bool apply_in_eval = false;
  /// Permute individual tokens instead of groups.
  bool per_token = false;
  /// Force the identity permutation (noise and masking still apply).
  bool identity_perm = false;

  void validate() const;
};

struct NoiseSummary {
  std::size_t count = 0;
  double sum = 0.0;
  double sum_sq = 0.0;
};

/// What one perturbation draw did, in sequence coordinates. The leading
/// `num_fixed` rows (class token, and the distillation token when present)
/// are fixed points of every step.
struct ShuffleRecord {
  /// Output row i holds input row permutation[i].
  std::vector<std::size_t> permutation;
  std::size_t num_fixed = 1;
  NoiseSummary noise;
  /// Output rows zeroed by masking, ascending.
  std::vector<std::size_t> masked;

  bool identity_permutation() const;
  /// No permutation, no noise and nothing masked.
  bool is_identity() const;
  std::vector<std::size_t> inverse() const;
};

/// Block permutation of the patch-token indices 0..num_patches-1.
/// A single group (group_size >= num_patches) or `identity` yields the
/// identity and consumes no randomness.
std::vector<std::size_t> draw_patch_permutation(std::size_t num_patches, std::size_t group_size,
                                                bool per_token, bool identity, Rng& rng);

struct ShuffledTokens {
  Tensor tokens;
  ShuffleRecord record;
};

/// Permutes the patch rows of `seq` ([num_fixed + N] x d) in groups.
ShuffledTokens shuffle_tokens(Graph& g, const Tensor& seq, const ShuffleConfig& cfg, Rng& rng,
                              std::size_t num_fixed = 1);

/// Adds i.i.d. N(0, sigma^2) to every patch-token component. sigma == 0
/// returns `seq` itself and draws nothing.
Tensor inject_noise(Graph& g, const Tensor& seq, double sigma, Rng& rng, std::size_t num_fixed = 1,
                    NoiseSummary* summary = nullptr);

struct MaskedTokens {
  Tensor tokens;
  std::vector<std::size_t> masked;
};

/// Zeroes each patch token (whole row) independently with probability
/// mask_prob. mask_prob == 0 returns `seq` itself and draws nothing.
MaskedTokens zero_mask(Graph& g, const Tensor& seq, double mask_prob, Rng& rng,
                       std::size_t num_fixed = 1);

/// shuffle -> noise -> mask, in that order.
ShuffledTokens perturb_tokens(Graph& g, const Tensor& seq, const ShuffleConfig& cfg, Rng& rng,
                              std::size_t num_fixed = 1);

/// Maps a token sequence through the final encoder block and the final norm.
using FinalBlockFn = std::function<Tensor(Graph&, const Tensor&)>;

struct BranchFeatures {
  Tensor clean_out;  ///< final block output on the clean sequence, all rows
  Tensor f_g;        ///< [d] class-token readout, clean branch
  Tensor f_n;        ///< [d] class-token readout, perturbed branch
  Tensor fused;      ///< [2d] concat(f_g, f_n)
  ShuffleRecord record;
};

/// Runs the shared final block twice: once on the clean sequence (F_g) and
/// once on the perturbed sequence (F_n), and concatenates the class-token
/// readouts. When perturbation is inactive (`active` false) or the drawn
/// perturbation is the identity, F_n is F_g.
BranchFeatures shuffle_layer_forward(Graph& g, const Tensor& seq, const FinalBlockFn& final_block,
                                     const ShuffleConfig& cfg, bool active, Rng* rng,
                                     std::size_t num_fixed = 1);

/// True iff the patch rows of `before` and `after` are the same multiset of
/// vectors (bitwise) and the fixed rows are unchanged.
bool multiset_preserved(const Tensor& before, const Tensor& after, std::size_t num_fixed = 1);

}  // namespace shvit
