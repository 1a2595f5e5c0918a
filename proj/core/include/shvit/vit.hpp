#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "shvit/graph.hpp"
#include "shvit/rng.hpp"
#include "shvit/shuffle.hpp"
#include "shvit/tensor.hpp"

namespace shvit {

struct ModelConfig {
  std::size_t channels = 3;
  std::size_t image_height = 16;
  std::size_t image_width = 8;
  std::size_t patch_size = 2;
  std::size_t embed_dim = 32;
  std::size_t num_heads = 4;
  std::size_t num_layers = 2;
  double mlp_ratio = 2.0;
  std::size_t num_classes = 10;
  double dropout = 0.0;
  double norm_eps = 1e-6;
  /// Classifier input: the raw fused feature (default) or its L2-normalized
  /// form. Retrieval always uses the normalized descriptor.
  bool classifier_on_normalized = false;

  /// "vit-tiny" (desk scale, used by the tests) or "vit-base".
  static ModelConfig preset(const std::string& name);

  void validate() const;
  std::size_t grid_rows() const { return image_height / patch_size; }
  std::size_t grid_cols() const { return image_width / patch_size; }
  std::size_t num_patches() const { return grid_rows() * grid_cols(); }
  std::size_t patch_dim() const { return channels * patch_size * patch_size; }
  std::size_t head_dim() const { return embed_dim / num_heads; }
  std::size_t mlp_hidden() const;
  std::size_t descriptor_dim() const { return 2 * embed_dim; }
};

struct BlockParams {
  Tensor ln1_gamma, ln1_beta;
  Tensor qkv_w, qkv_b;    // [d x 3d], [3d]; columns ordered Q | K | V
  Tensor proj_w, proj_b;  // [d x d], [d]
  Tensor ln2_gamma, ln2_beta;
  Tensor fc1_w, fc1_b;    // [d x hidden], [hidden]
  Tensor fc2_w, fc2_b;    // [hidden x d], [d]
};

struct ModelParams {
  Tensor patch_w, patch_b;  // [patch_dim x d], [d]
  Tensor cls_token;         // [1 x d]
  Tensor distill_token;     // [1 x d]; undefined until attach_distill_token
  Tensor pos_embed;         // [(num_fixed + N) x d]
  std::vector<BlockParams> blocks;
  Tensor norm_gamma, norm_beta;
  Tensor head_w, head_b;          // [2d x classes], [classes]
  Tensor dist_head_w, dist_head_b;  // [d x classes]; with the distillation token
};

using NamedTensor = std::pair<std::string, Tensor>;

/// [C x H x W] -> [N x C*p*p]; patches in row-major grid order, each patch
/// flattened channel-major (c, then row, then column within the patch).
Tensor patchify(Graph& g, const Tensor& image, std::size_t patch_size);
/// Inverse of patchify (not differentiable); used by round-trip checks.
Tensor unpatchify(const Tensor& patches, std::size_t channels, std::size_t height,
                  std::size_t width, std::size_t patch_size);

/// Attention probabilities of one block, [heads][tokens x tokens].
struct AttentionTrace {
  std::vector<Tensor> weights;
};

/// Pre-norm encoder block:
///   x <- x + Proj(MHSA(LN1(x)));  x <- x + FC2(GELU(FC1(LN2(x))))
/// with per-head weights softmax(Q K^T / sqrt(d / heads)).
Tensor attention_block(Graph& g, const Tensor& seq, const BlockParams& p, std::size_t num_heads,
                       double norm_eps, AttentionTrace* trace = nullptr, double dropout = 0.0,
                       Rng* rng = nullptr);

enum class RunMode { train, eval };

struct ForwardOptions {
  RunMode mode = RunMode::eval;
  ShuffleConfig shuffle{};
  /// Randomness for the shuffle branch and dropout. Required only when
  /// train-mode randomness is actually in play.
  Rng* rng = nullptr;
  /// Per-block attention probabilities, when non-null.
  std::vector<AttentionTrace>* attention = nullptr;
};

struct ForwardOutput {
  Tensor f_g, f_n;
  Tensor fused;       ///< [2d] concat(F_g, F_n), un-normalized
  Tensor descriptor;  ///< [2d] L2-normalized fused feature
  Tensor logits;      ///< [num_classes]
  Tensor distill_logits;  ///< [num_classes]; only with a distillation token
  ShuffleRecord shuffle;
};

/// Vision Transformer with the token-shuffle branch at its final block.
///
/// Parameters are Tensor handles, so copies of a VisionTransformer share
/// weights; use clone() for an independent copy (e.g. a frozen teacher).
class VisionTransformer {
 public:
  VisionTransformer(ModelConfig cfg, std::uint64_t init_seed);

  const ModelConfig& config() const { return cfg_; }
  ModelParams& params() { return params_; }
  const ModelParams& params() const { return params_; }

  /// 1 (class token) or 2 (class + distillation token).
  std::size_t num_fixed_tokens() const { return has_distill_token() ? 2 : 1; }
  std::size_t sequence_length() const { return num_fixed_tokens() + cfg_.num_patches(); }
  bool has_distill_token() const { return params_.distill_token.defined(); }

  /// Adds a learnable distillation token at sequence index 1 (patches move to
  /// 2..N+1) and a separate distillation head. Throws on a second call.
  void attach_distill_token(std::uint64_t seed);

  /// Linear patch projection, fixed tokens prepended, positional embedding added.
  Tensor embed(Graph& g, const Tensor& patches) const;
  /// All blocks but the last.
  Tensor encode_body(Graph& g, const Tensor& tokens, const ForwardOptions& opt) const;
  /// Final block followed by the final layer norm.
  Tensor final_block(Graph& g, const Tensor& tokens, const ForwardOptions& opt) const;

  ForwardOutput forward(Graph& g, const Tensor& image, const ForwardOptions& opt) const;

  /// Stable order; names such as "blocks.0.qkv_w".
  std::vector<NamedTensor> named_parameters() const;
  std::vector<Tensor> parameters() const;
  std::size_t num_parameters() const;
  void zero_grad();

  VisionTransformer clone() const;

 private:
  ModelConfig cfg_;
  ModelParams params_;
};

}  // namespace shvit
