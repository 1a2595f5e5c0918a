#include "shvit/vit.hpp"

#include <cmath>

#include "shvit/error.hpp"
#include "shvit/ops.hpp"

namespace shvit {

ModelConfig ModelConfig::preset(const std::string& name) {
  ModelConfig c;
  if (name == "vit-tiny") return c;
  if (name == "vit-base") {
    c.image_height = 256;
    c.image_width = 128;
    c.patch_size = 16;
    c.embed_dim = 768;
    c.num_heads = 12;
    c.num_layers = 12;
    c.mlp_ratio = 4.0;
    return c;
  }
  throw ConfigError("unknown model preset '" + name + "' (expected vit-tiny or vit-base)");
}

std::size_t ModelConfig::mlp_hidden() const {
  return static_cast<std::size_t>(std::llround(mlp_ratio * static_cast<double>(embed_dim)));
}

void ModelConfig::validate() const {
  if (channels == 0 || image_height == 0 || image_width == 0 || patch_size == 0)
    throw ConfigError("model: image and patch dimensions must be positive");
  if (image_height % patch_size != 0 || image_width % patch_size != 0)
    throw ConfigError("model: image " + std::to_string(image_height) + "x" +
                      std::to_string(image_width) + " not divisible by patch size " +
                      std::to_string(patch_size));
  if (embed_dim == 0 || num_heads == 0 || embed_dim % num_heads != 0)
    throw ConfigError("model: embed_dim " + std::to_string(embed_dim) +
                      " must be a positive multiple of num_heads " + std::to_string(num_heads));
  if (num_layers == 0) throw ConfigError("model: num_layers must be positive");
  if (!(mlp_ratio > 0.0) || mlp_hidden() == 0) throw ConfigError("model: mlp_ratio must be positive");
  if (num_classes == 0) throw ConfigError("model: num_classes must be positive");
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("model: dropout must be in [0, 1)");
  if (!(norm_eps > 0.0)) throw ConfigError("model: norm_eps must be positive");
}

namespace {

Tensor trunc_normal(Shape shape, double std_dev, Rng& rng) {
  Tensor t(std::move(shape));
  for (double& v : t.mutable_data()) {
    double z = rng.normal();
    while (std::abs(z) > 2.0) z = rng.normal();
    v = z * std_dev;
  }
  return t.set_requires_grad(true);
}

Tensor zeros(Shape shape) { return Tensor(std::move(shape)).set_requires_grad(true); }
Tensor ones(Shape shape) { return Tensor(std::move(shape), 1.0).set_requires_grad(true); }

constexpr double kInitStd = 0.02;

}  // namespace

VisionTransformer::VisionTransformer(ModelConfig cfg, std::uint64_t init_seed) : cfg_(cfg) {
  cfg_.validate();
  Rng rng(init_seed);
  const std::size_t d = cfg_.embed_dim, hidden = cfg_.mlp_hidden();
  params_.patch_w = trunc_normal({cfg_.patch_dim(), d}, kInitStd, rng);
  params_.patch_b = zeros({d});
  params_.cls_token = trunc_normal({1, d}, kInitStd, rng);
  params_.pos_embed = trunc_normal({1 + cfg_.num_patches(), d}, kInitStd, rng);
  for (std::size_t l = 0; l < cfg_.num_layers; ++l) {
    BlockParams b;
    b.ln1_gamma = ones({d});
    b.ln1_beta = zeros({d});
    b.qkv_w = trunc_normal({d, 3 * d}, kInitStd, rng);
    b.qkv_b = zeros({3 * d});
    b.proj_w = trunc_normal({d, d}, kInitStd, rng);
    b.proj_b = zeros({d});
    b.ln2_gamma = ones({d});
    b.ln2_beta = zeros({d});
    b.fc1_w = trunc_normal({d, hidden}, kInitStd, rng);
    b.fc1_b = zeros({hidden});
    b.fc2_w = trunc_normal({hidden, d}, kInitStd, rng);
    b.fc2_b = zeros({d});
    params_.blocks.push_back(std::move(b));
  }
  params_.norm_gamma = ones({d});
  params_.norm_beta = zeros({d});
  params_.head_w = trunc_normal({cfg_.descriptor_dim(), cfg_.num_classes}, kInitStd, rng);
  params_.head_b = zeros({cfg_.num_classes});
}

void VisionTransformer::attach_distill_token(std::uint64_t seed) {
  if (has_distill_token()) throw Error("attach_distill_token: model already has a distillation token");
  Rng rng(seed);
  const std::size_t d = cfg_.embed_dim;
  params_.distill_token = trunc_normal({1, d}, kInitStd, rng);

  // New positional row for the distillation token, inserted at index 1.
  Tensor extra = trunc_normal({1, d}, kInitStd, rng);
  const auto old = params_.pos_embed.data();
  std::vector<double> merged;
  merged.reserve(old.size() + d);
  merged.insert(merged.end(), old.begin(), old.begin() + static_cast<std::ptrdiff_t>(d));
  merged.insert(merged.end(), extra.data().begin(), extra.data().end());
  merged.insert(merged.end(), old.begin() + static_cast<std::ptrdiff_t>(d), old.end());
  params_.pos_embed = Tensor(Shape{2 + cfg_.num_patches(), d}, std::move(merged));
  params_.pos_embed.set_requires_grad(true);

  params_.dist_head_w = trunc_normal({d, cfg_.num_classes}, kInitStd, rng);
  params_.dist_head_b = zeros({cfg_.num_classes});
}

Tensor patchify(Graph& g, const Tensor& image, std::size_t p) {
  if (!image.defined() || image.rank() != 3)
    throw ShapeError("patchify: expected a [C x H x W] image");
  const std::size_t C = image.dim(0), H = image.dim(1), W = image.dim(2);
  if (p == 0 || H % p != 0 || W % p != 0)
    throw ShapeError("patchify: image " + shape_to_string(image.shape()) +
                     " not divisible by patch size " + std::to_string(p));
  const std::size_t gr = H / p, gc = W / p, pd = C * p * p;
  std::vector<std::size_t> src(gr * gc * pd);
  for (std::size_t pr = 0; pr < gr; ++pr)
    for (std::size_t pc = 0; pc < gc; ++pc)
      for (std::size_t c = 0; c < C; ++c)
        for (std::size_t i = 0; i < p; ++i)
          for (std::size_t j = 0; j < p; ++j)
            src[(pr * gc + pc) * pd + c * p * p + i * p + j] =
                c * H * W + (pr * p + i) * W + pc * p + j;

  Tensor out(Shape{gr * gc, pd});
  {
    auto X = image.data();
    auto O = out.mutable_data();
    for (std::size_t k = 0; k < src.size(); ++k) O[k] = X[src[k]];
  }
  if (g.needs_grad({&image})) {
    g.record(out, [image, out, src = std::move(src)]() mutable {
      auto dO = out.grad();
      auto dX = image.mutable_grad();
      for (std::size_t k = 0; k < src.size(); ++k) dX[src[k]] += dO[k];
    });
  }
  return out;
}

Tensor unpatchify(const Tensor& patches, std::size_t C, std::size_t H, std::size_t W, std::size_t p) {
  const std::size_t gc = W / p, pd = C * p * p;
  if (patches.rank() != 2 || patches.dim(0) != (H / p) * gc || patches.dim(1) != pd)
    throw ShapeError("unpatchify: patches " + shape_to_string(patches.shape()) +
                     " do not match the requested image");
  Tensor img(Shape{C, H, W});
  auto P = patches.data();
  auto I = img.mutable_data();
  for (std::size_t pr = 0; pr < H / p; ++pr)
    for (std::size_t pc = 0; pc < gc; ++pc)
      for (std::size_t c = 0; c < C; ++c)
        for (std::size_t i = 0; i < p; ++i)
          for (std::size_t j = 0; j < p; ++j)
            I[c * H * W + (pr * p + i) * W + pc * p + j] =
                P[(pr * gc + pc) * pd + c * p * p + i * p + j];
  return img;
}

Tensor attention_block(Graph& g, const Tensor& seq, const BlockParams& p, std::size_t num_heads,
                       double norm_eps, AttentionTrace* trace, double dropout, Rng* rng) {
  if (!seq.defined() || seq.rank() != 2) throw ShapeError("attention_block: expected [T x d] tokens");
  const std::size_t d = seq.dim(1);
  if (num_heads == 0 || d % num_heads != 0)
    throw ShapeError("attention_block: embed dim " + std::to_string(d) +
                     " not divisible by heads " + std::to_string(num_heads));
  if (p.qkv_w.dim(0) != d) throw ShapeError("attention_block: token width does not match weights");
  const std::size_t dh = d / num_heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  Rng dummy(0);
  Rng& drng = rng ? *rng : dummy;

  Tensor x1 = ops::layer_norm(g, seq, p.ln1_gamma, p.ln1_beta, norm_eps);
  Tensor qkv = ops::linear(g, x1, p.qkv_w, p.qkv_b);
  std::vector<Tensor> heads;
  heads.reserve(num_heads);
  if (trace) trace->weights.clear();
  for (std::size_t h = 0; h < num_heads; ++h) {
    Tensor q = ops::slice_cols(g, qkv, h * dh, dh);
    Tensor k = ops::slice_cols(g, qkv, d + h * dh, dh);
    Tensor v = ops::slice_cols(g, qkv, 2 * d + h * dh, dh);
    Tensor a = ops::softmax(g, ops::scale(g, ops::matmul_nt(g, q, k), inv_sqrt), 1);
    if (trace) trace->weights.push_back(a);
    heads.push_back(ops::matmul(g, a, v));
  }
  Tensor attn = ops::linear(g, ops::concat_cols(g, heads), p.proj_w, p.proj_b);
  Tensor x = ops::add(g, seq, ops::dropout(g, attn, dropout, drng));

  Tensor x2 = ops::layer_norm(g, x, p.ln2_gamma, p.ln2_beta, norm_eps);
  Tensor hidden = ops::gelu(g, ops::linear(g, x2, p.fc1_w, p.fc1_b));
  Tensor mlp = ops::linear(g, hidden, p.fc2_w, p.fc2_b);
  return ops::add(g, x, ops::dropout(g, mlp, dropout, drng));
}

Tensor VisionTransformer::embed(Graph& g, const Tensor& patches) const {
  if (!patches.defined() || patches.rank() != 2 || patches.dim(1) != cfg_.patch_dim())
    throw ShapeError("embed: patches " +
                     (patches.defined() ? shape_to_string(patches.shape()) : std::string("undefined")) +
                     " do not match patch dim " + std::to_string(cfg_.patch_dim()));
  if (patches.dim(0) + num_fixed_tokens() != params_.pos_embed.dim(0))
    throw ShapeError("embed: " + std::to_string(patches.dim(0)) +
                     " patches do not match the positional embedding");
  Tensor proj = ops::linear(g, patches, params_.patch_w, params_.patch_b);
  std::vector<Tensor> parts{params_.cls_token};
  if (has_distill_token()) parts.push_back(params_.distill_token);
  parts.push_back(proj);
  return ops::add(g, ops::concat_rows(g, parts), params_.pos_embed);
}

Tensor VisionTransformer::encode_body(Graph& g, const Tensor& tokens, const ForwardOptions& opt) const {
  const bool train = opt.mode == RunMode::train;
  const double drop = train ? cfg_.dropout : 0.0;
  Tensor x = tokens;
  for (std::size_t l = 0; l + 1 < params_.blocks.size(); ++l) {
    AttentionTrace* tr = nullptr;
    if (opt.attention) {
      opt.attention->resize(params_.blocks.size());
      tr = &(*opt.attention)[l];
    }
    x = attention_block(g, x, params_.blocks[l], cfg_.num_heads, cfg_.norm_eps, tr, drop, opt.rng);
  }
  return x;
}

Tensor VisionTransformer::final_block(Graph& g, const Tensor& tokens, const ForwardOptions& opt) const {
  const bool train = opt.mode == RunMode::train;
  const double drop = train ? cfg_.dropout : 0.0;
  AttentionTrace* tr = nullptr;
  if (opt.attention) {
    opt.attention->resize(params_.blocks.size());
    tr = &opt.attention->back();
  }
  Tensor x = attention_block(g, tokens, params_.blocks.back(), cfg_.num_heads, cfg_.norm_eps, tr,
                             drop, opt.rng);
  return ops::layer_norm(g, x, params_.norm_gamma, params_.norm_beta, cfg_.norm_eps);
}

ForwardOutput VisionTransformer::forward(Graph& g, const Tensor& image, const ForwardOptions& opt) const {
  if (!image.defined() || image.shape() != Shape{cfg_.channels, cfg_.image_height, cfg_.image_width})
    throw ShapeError("forward: image " +
                     (image.defined() ? shape_to_string(image.shape()) : std::string("undefined")) +
                     " does not match model input " +
                     shape_to_string({cfg_.channels, cfg_.image_height, cfg_.image_width}));
  const bool train = opt.mode == RunMode::train;
  if (train && cfg_.dropout > 0.0 && opt.rng == nullptr)
    throw Error("forward: train-mode dropout needs an Rng");

  Tensor tokens = embed(g, patchify(g, image, cfg_.patch_size));
  Tensor body = encode_body(g, tokens, opt);

  const bool active = train || opt.shuffle.apply_in_eval;
  BranchFeatures br = shuffle_layer_forward(
      g, body, [this, &opt](Graph& gg, const Tensor& t) { return final_block(gg, t, opt); },
      opt.shuffle, active, opt.rng, num_fixed_tokens());

  ForwardOutput out;
  out.f_g = br.f_g;
  out.f_n = br.f_n;
  out.fused = br.fused;
  out.shuffle = std::move(br.record);
  out.descriptor = ops::l2_normalize(g, out.fused);
  const Tensor& head_in = cfg_.classifier_on_normalized ? out.descriptor : out.fused;
  const std::size_t two_d = cfg_.descriptor_dim();
  out.logits = ops::reshape(
      g, ops::linear(g, ops::reshape(g, head_in, Shape{1, two_d}), params_.head_w, params_.head_b),
      Shape{cfg_.num_classes});
  if (has_distill_token()) {
    Tensor dtok = ops::slice_rows(g, br.clean_out, 1, 1);
    out.distill_logits = ops::reshape(
        g, ops::linear(g, dtok, params_.dist_head_w, params_.dist_head_b), Shape{cfg_.num_classes});
  }
  return out;
}

std::vector<NamedTensor> VisionTransformer::named_parameters() const {
  std::vector<NamedTensor> out;
  out.emplace_back("patch_w", params_.patch_w);
  out.emplace_back("patch_b", params_.patch_b);
  out.emplace_back("cls_token", params_.cls_token);
  if (has_distill_token()) out.emplace_back("distill_token", params_.distill_token);
  out.emplace_back("pos_embed", params_.pos_embed);
  for (std::size_t l = 0; l < params_.blocks.size(); ++l) {
    const BlockParams& b = params_.blocks[l];
    const std::string pre = "blocks." + std::to_string(l) + ".";
    out.emplace_back(pre + "ln1_gamma", b.ln1_gamma);
    out.emplace_back(pre + "ln1_beta", b.ln1_beta);
    out.emplace_back(pre + "qkv_w", b.qkv_w);
    out.emplace_back(pre + "qkv_b", b.qkv_b);
    out.emplace_back(pre + "proj_w", b.proj_w);
    out.emplace_back(pre + "proj_b", b.proj_b);
    out.emplace_back(pre + "ln2_gamma", b.ln2_gamma);
    out.emplace_back(pre + "ln2_beta", b.ln2_beta);
    out.emplace_back(pre + "fc1_w", b.fc1_w);
    out.emplace_back(pre + "fc1_b", b.fc1_b);
    out.emplace_back(pre + "fc2_w", b.fc2_w);
    out.emplace_back(pre + "fc2_b", b.fc2_b);
  }
  out.emplace_back("norm_gamma", params_.norm_gamma);
  out.emplace_back("norm_beta", params_.norm_beta);
  out.emplace_back("head_w", params_.head_w);
  out.emplace_back("head_b", params_.head_b);
  if (has_distill_token()) {
    out.emplace_back("dist_head_w", params_.dist_head_w);
    out.emplace_back("dist_head_b", params_.dist_head_b);
  }
  return out;
}

std::vector<Tensor> VisionTransformer::parameters() const {
  std::vector<Tensor> out;
  for (auto& [name, t] : named_parameters()) out.push_back(t);
  return out;
}

std::size_t VisionTransformer::num_parameters() const {
  std::size_t n = 0;
  for (auto& [name, t] : named_parameters()) n += t.size();
  return n;
}

void VisionTransformer::zero_grad() {
  for (auto& [name, t] : named_parameters()) t.zero_grad();
}

VisionTransformer VisionTransformer::clone() const {
  VisionTransformer copy = *this;
  auto deep = [](Tensor& t) {
    if (!t.defined()) return;
    t = t.clone();
    t.set_requires_grad(true);
  };
  ModelParams& p = copy.params_;
  deep(p.patch_w);
  deep(p.patch_b);
  deep(p.cls_token);
  deep(p.distill_token);
  deep(p.pos_embed);
  for (BlockParams& b : p.blocks)
    for (Tensor* t : {&b.ln1_gamma, &b.ln1_beta, &b.qkv_w, &b.qkv_b, &b.proj_w, &b.proj_b,
                      &b.ln2_gamma, &b.ln2_beta, &b.fc1_w, &b.fc1_b, &b.fc2_w, &b.fc2_b})
      deep(*t);
  for (Tensor* t : {&p.norm_gamma, &p.norm_beta, &p.head_w, &p.head_b, &p.dist_head_w, &p.dist_head_b})
    deep(*t);
  return copy;
}

}  // namespace shvit
