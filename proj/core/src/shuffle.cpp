#include "shvit/shuffle.hpp"

#include <algorithm>
#include <cstring>
#include <numeric>
#include <string>

#include "shvit/error.hpp"
#include "shvit/ops.hpp"

namespace shvit {

void ShuffleConfig::validate() const {
  if (group_size < 1) throw ConfigError("shuffle.group_size must be >= 1");
  if (!(noise_sigma >= 0.0)) throw ConfigError("shuffle.noise_sigma must be >= 0");
  if (!(mask_prob >= 0.0 && mask_prob <= 1.0))
    throw ConfigError("shuffle.mask_prob must be in [0, 1]");
}

bool ShuffleRecord::identity_permutation() const {
  for (std::size_t i = 0; i < permutation.size(); ++i)
    if (permutation[i] != i) return false;
  return true;
}

bool ShuffleRecord::is_identity() const {
  return identity_permutation() && noise.count == 0 && masked.empty();
}

std::vector<std::size_t> ShuffleRecord::inverse() const {
  std::vector<std::size_t> inv(permutation.size());
  for (std::size_t i = 0; i < permutation.size(); ++i) inv[permutation[i]] = i;
  return inv;
}

std::vector<std::size_t> draw_patch_permutation(std::size_t num_patches, std::size_t group_size,
                                                bool per_token, bool identity, Rng& rng) {
  std::vector<std::size_t> perm(num_patches);
  std::iota(perm.begin(), perm.end(), 0);
  if (identity || num_patches < 2) return perm;
  const std::size_t g = per_token ? 1 : group_size;
  const std::size_t num_groups = (num_patches + g - 1) / g;
  if (num_groups < 2) return perm;

  std::vector<std::size_t> order(num_groups);
  std::iota(order.begin(), order.end(), 0);
  // Fisher-Yates: every group order is equally likely.
  for (std::size_t i = num_groups - 1; i > 0; --i) std::swap(order[i], order[rng.uniform_index(i + 1)]);

  perm.clear();
  for (std::size_t grp : order) {
    const std::size_t begin = grp * g;
    const std::size_t end = std::min(begin + g, num_patches);
    for (std::size_t t = begin; t < end; ++t) perm.push_back(t);
  }
  return perm;
}

namespace {

void require_sequence(const Tensor& seq, std::size_t num_fixed, const char* op) {
  if (!seq.defined() || seq.rank() != 2)
    throw ShapeError(std::string(op) + ": token sequence must be a matrix");
  if (seq.dim(0) <= num_fixed)
    throw ShapeError(std::string(op) + ": sequence has no patch tokens");
}

}  // namespace

ShuffledTokens shuffle_tokens(Graph& g, const Tensor& seq, const ShuffleConfig& cfg, Rng& rng,
                              std::size_t num_fixed) {
  require_sequence(seq, num_fixed, "shuffle_tokens");
  cfg.validate();
  const std::size_t n = seq.dim(0) - num_fixed;
  const auto patch_perm =
      draw_patch_permutation(n, cfg.group_size, cfg.per_token, cfg.identity_perm, rng);

  ShuffleRecord rec;
  rec.num_fixed = num_fixed;
  rec.permutation.resize(seq.dim(0));
  std::iota(rec.permutation.begin(), rec.permutation.begin() + static_cast<std::ptrdiff_t>(num_fixed), 0);
  for (std::size_t i = 0; i < n; ++i) rec.permutation[num_fixed + i] = num_fixed + patch_perm[i];

  if (rec.identity_permutation()) return {seq, std::move(rec)};
  Tensor out = ops::gather_rows(g, seq, rec.permutation);
  return {out, std::move(rec)};
}

Tensor inject_noise(Graph& g, const Tensor& seq, double sigma, Rng& rng, std::size_t num_fixed,
                    NoiseSummary* summary) {
  require_sequence(seq, num_fixed, "inject_noise");
  if (!(sigma >= 0.0)) throw ConfigError("inject_noise: sigma must be >= 0");
  if (sigma == 0.0) return seq;
  const std::size_t d = seq.dim(1);
  Tensor noise(seq.shape());
  auto z = noise.mutable_data();
  NoiseSummary s;
  for (std::size_t i = num_fixed * d; i < z.size(); ++i) {
    z[i] = sigma * rng.normal();
    ++s.count;
    s.sum += z[i];
    s.sum_sq += z[i] * z[i];
  }
  if (summary) *summary = s;
  return ops::add(g, seq, noise);
}

MaskedTokens zero_mask(Graph& g, const Tensor& seq, double mask_prob, Rng& rng,
                       std::size_t num_fixed) {
  require_sequence(seq, num_fixed, "zero_mask");
  if (!(mask_prob >= 0.0 && mask_prob <= 1.0))
    throw ConfigError("zero_mask: mask_prob must be in [0, 1]");
  if (mask_prob == 0.0) return {seq, {}};
  std::vector<double> keep(seq.dim(0), 1.0);
  std::vector<std::size_t> masked;
  for (std::size_t r = num_fixed; r < keep.size(); ++r)
    if (rng.bernoulli(mask_prob)) {
      keep[r] = 0.0;
      masked.push_back(r);
    }
  if (masked.empty()) return {seq, {}};
  return {ops::scale_rows(g, seq, keep), std::move(masked)};
}

ShuffledTokens perturb_tokens(Graph& g, const Tensor& seq, const ShuffleConfig& cfg, Rng& rng,
                              std::size_t num_fixed) {
  ShuffledTokens out = shuffle_tokens(g, seq, cfg, rng, num_fixed);
  out.tokens = inject_noise(g, out.tokens, cfg.noise_sigma, rng, num_fixed, &out.record.noise);
  MaskedTokens m = zero_mask(g, out.tokens, cfg.mask_prob, rng, num_fixed);
  out.tokens = m.tokens;
  out.record.masked = std::move(m.masked);
  return out;
}

BranchFeatures shuffle_layer_forward(Graph& g, const Tensor& seq, const FinalBlockFn& final_block,
                                     const ShuffleConfig& cfg, bool active, Rng* rng,
                                     std::size_t num_fixed) {
  require_sequence(seq, num_fixed, "shuffle_layer_forward");
  BranchFeatures out;
  out.clean_out = final_block(g, seq);
  out.f_g = ops::reshape(g, ops::slice_rows(g, out.clean_out, 0, 1), Shape{out.clean_out.dim(1)});

  out.record.num_fixed = num_fixed;
  out.record.permutation.resize(seq.dim(0));
  std::iota(out.record.permutation.begin(), out.record.permutation.end(), 0);

  out.f_n = out.f_g;
  if (active && cfg.enabled) {
    if (rng == nullptr) throw Error("shuffle_layer_forward: active shuffle needs an Rng");
    ShuffledTokens p = perturb_tokens(g, seq, cfg, *rng, num_fixed);
    out.record = std::move(p.record);
    if (!out.record.is_identity()) {
      Tensor perturbed_out = final_block(g, p.tokens);
      out.f_n = ops::reshape(g, ops::slice_rows(g, perturbed_out, 0, 1), Shape{perturbed_out.dim(1)});
    }
  }
  const std::size_t d = out.f_g.size();
  const Tensor parts[] = {ops::reshape(g, out.f_g, Shape{1, d}), ops::reshape(g, out.f_n, Shape{1, d})};
  out.fused = ops::reshape(g, ops::concat_cols(g, parts), Shape{2 * d});
  return out;
}

bool multiset_preserved(const Tensor& before, const Tensor& after, std::size_t num_fixed) {
  if (before.shape() != after.shape() || before.rank() != 2) return false;
  const std::size_t rows = before.dim(0), d = before.dim(1);
  if (rows < num_fixed) return false;
  auto a = before.data();
  auto b = after.data();
  if (std::memcmp(a.data(), b.data(), num_fixed * d * sizeof(double)) != 0) return false;

  auto sorted_rows = [&](std::span<const double> v) {
    std::vector<std::vector<double>> r;
    for (std::size_t i = num_fixed; i < rows; ++i)
      r.emplace_back(v.begin() + static_cast<std::ptrdiff_t>(i * d),
                     v.begin() + static_cast<std::ptrdiff_t>((i + 1) * d));
    std::sort(r.begin(), r.end());
    return r;
  };
  const auto ra = sorted_rows(a);
  const auto rb = sorted_rows(b);
  for (std::size_t i = 0; i < ra.size(); ++i)
    if (std::memcmp(ra[i].data(), rb[i].data(), d * sizeof(double)) != 0) return false;
  return true;
}

}  // namespace shvit
