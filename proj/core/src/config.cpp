#include "shvit/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <sstream>

#include "shvit/checkpoint.hpp"
#include "shvit/error.hpp"
#include "shvit/fileio.hpp"

namespace shvit {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size() || !std::isfinite(out))
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  return out;
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size() || v.empty())
    throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

std::string fmt_bool(bool b) { return b ? "true" : "false"; }

struct Field {
  std::function<void(RunConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename Member>
Field real_field(Member member) {
  return {[member](RunConfig& c, const std::string& k, const std::string& v) { member(c) = to_double(k, v); },
          [member](const RunConfig& c) { return fmt_double(member(c)); }};
}

template <typename Member>
Field size_field(Member member) {
  return {[member](RunConfig& c, const std::string& k, const std::string& v) {
            member(c) = static_cast<std::size_t>(to_u64(k, v));
          },
          [member](const RunConfig& c) { return std::to_string(member(c)); }};
}

template <typename Member>
Field bool_field(Member member) {
  return {[member](RunConfig& c, const std::string& k, const std::string& v) { member(c) = to_bool(k, v); },
          [member](const RunConfig& c) { return fmt_bool(member(c)); }};
}

template <typename Member>
Field string_field(Member member) {
  return {[member](RunConfig& c, const std::string&, const std::string& v) { member(c) = v; },
          [member](const RunConfig& c) { return member(c); }};
}

#define SHVIT_REF(expr) [](auto& c) -> auto& { return c.expr; }

const std::vector<std::pair<std::string, Field>>& field_table() {
  static const std::vector<std::pair<std::string, Field>> table = [] {
    std::vector<std::pair<std::string, Field>> t;
    t.push_back({"model.preset",
                 {[](RunConfig& c, const std::string&, const std::string& v) {
                    c.model = ModelConfig::preset(v);
                    c.preset = v;
                  },
                  [](const RunConfig& c) { return c.preset; }}});
    t.push_back({"model.channels", size_field(SHVIT_REF(model.channels))});
    t.push_back({"model.image_height", size_field(SHVIT_REF(model.image_height))});
    t.push_back({"model.image_width", size_field(SHVIT_REF(model.image_width))});
    t.push_back({"model.patch_size", size_field(SHVIT_REF(model.patch_size))});
    t.push_back({"model.embed_dim", size_field(SHVIT_REF(model.embed_dim))});
    t.push_back({"model.num_heads", size_field(SHVIT_REF(model.num_heads))});
    t.push_back({"model.num_layers", size_field(SHVIT_REF(model.num_layers))});
    t.push_back({"model.mlp_ratio", real_field(SHVIT_REF(model.mlp_ratio))});
    t.push_back({"model.num_classes", size_field(SHVIT_REF(model.num_classes))});
    t.push_back({"model.dropout", real_field(SHVIT_REF(model.dropout))});
    t.push_back({"model.norm_eps", real_field(SHVIT_REF(model.norm_eps))});
    t.push_back({"model.classifier_on_normalized", bool_field(SHVIT_REF(model.classifier_on_normalized))});

    t.push_back({"shuffle.enabled", bool_field(SHVIT_REF(shuffle.enabled))});
    t.push_back({"shuffle.group_size", size_field(SHVIT_REF(shuffle.group_size))});
    t.push_back({"shuffle.noise_sigma", real_field(SHVIT_REF(shuffle.noise_sigma))});
    t.push_back({"shuffle.mask_prob", real_field(SHVIT_REF(shuffle.mask_prob))});
    t.push_back({"shuffle.apply_in_eval", bool_field(SHVIT_REF(shuffle.apply_in_eval))});
    t.push_back({"shuffle.per_token", bool_field(SHVIT_REF(shuffle.per_token))});
    t.push_back({"shuffle.identity_perm", bool_field(SHVIT_REF(shuffle.identity_perm))});

    t.push_back({"augment.enabled", bool_field(SHVIT_REF(augment.enabled))});
    t.push_back({"augment.p_affine", real_field(SHVIT_REF(augment.p_affine))});
    t.push_back({"augment.p_perspective", real_field(SHVIT_REF(augment.p_perspective))});
    t.push_back({"augment.p_color", real_field(SHVIT_REF(augment.p_color))});
    t.push_back({"augment.p_blur", real_field(SHVIT_REF(augment.p_blur))});
    t.push_back({"augment.p_erase", real_field(SHVIT_REF(augment.p_erase))});
    t.push_back({"augment.erase_area_min", real_field(SHVIT_REF(augment.erase_area_min))});
    t.push_back({"augment.erase_area_max", real_field(SHVIT_REF(augment.erase_area_max))});
    t.push_back({"augment.erase_aspect_min", real_field(SHVIT_REF(augment.erase_aspect_min))});
    t.push_back({"augment.erase_aspect_max", real_field(SHVIT_REF(augment.erase_aspect_max))});
    t.push_back({"augment.erase_fill",
                 {[](RunConfig& c, const std::string& k, const std::string& v) {
                    if (v == "noise")
                      c.augment.erase_fill = EraseFill::noise;
                    else if (v == "mean")
                      c.augment.erase_fill = EraseFill::mean;
                    else
                      throw ConfigError(k + ": expected noise or mean, got '" + v + "'");
                  },
                  [](const RunConfig& c) {
                    return std::string(c.augment.erase_fill == EraseFill::noise ? "noise" : "mean");
                  }}});
    t.push_back({"augment.blur_sigma_min", real_field(SHVIT_REF(augment.blur_sigma_min))});
    t.push_back({"augment.blur_sigma_max", real_field(SHVIT_REF(augment.blur_sigma_max))});
    t.push_back({"augment.affine_rotation_deg", real_field(SHVIT_REF(augment.affine_rotation_deg))});
    t.push_back({"augment.affine_translate", real_field(SHVIT_REF(augment.affine_translate))});
    t.push_back({"augment.affine_scale_min", real_field(SHVIT_REF(augment.affine_scale_min))});
    t.push_back({"augment.affine_scale_max", real_field(SHVIT_REF(augment.affine_scale_max))});
    t.push_back({"augment.perspective_distortion", real_field(SHVIT_REF(augment.perspective_distortion))});
    t.push_back({"augment.brightness_min", real_field(SHVIT_REF(augment.brightness_min))});
    t.push_back({"augment.brightness_max", real_field(SHVIT_REF(augment.brightness_max))});
    t.push_back({"augment.contrast_min", real_field(SHVIT_REF(augment.contrast_min))});
    t.push_back({"augment.contrast_max", real_field(SHVIT_REF(augment.contrast_max))});
    t.push_back({"augment.saturation_min", real_field(SHVIT_REF(augment.saturation_min))});
    t.push_back({"augment.saturation_max", real_field(SHVIT_REF(augment.saturation_max))});
    t.push_back({"augment.mean",
                 {[](RunConfig& c, const std::string&, const std::string& v) { c.augment.stats.mean = parse_triple(v); },
                  [](const RunConfig& c) { return format_triple(c.augment.stats.mean); }}});
    t.push_back({"augment.std",
                 {[](RunConfig& c, const std::string&, const std::string& v) {
                    c.augment.stats.std = parse_triple(v);
                    for (std::size_t i = 0; i < 3; ++i) c.augment.stats.zero_std[i] = c.augment.stats.std[i] == 0.0;
                  },
                  [](const RunConfig& c) { return format_triple(c.augment.stats.std); }}});

    t.push_back({"distill.mode",
                 {[](RunConfig& c, const std::string&, const std::string& v) {
                    c.distill.mode = distill_mode_from_string(v);
                  },
                  [](const RunConfig& c) { return to_string(c.distill.mode); }}});
    t.push_back({"distill.alpha", real_field(SHVIT_REF(distill.alpha))});
    t.push_back({"distill.temperature", real_field(SHVIT_REF(distill.temperature))});
    t.push_back({"distill.use_token", bool_field(SHVIT_REF(distill.use_token))});
    t.push_back({"distill.teacher_checkpoint", string_field(SHVIT_REF(distill.teacher_checkpoint))});

    t.push_back({"optim.kind",
                 {[](RunConfig& c, const std::string&, const std::string& v) {
                    c.optim.kind = optimizer_kind_from_string(v);
                  },
                  [](const RunConfig& c) { return to_string(c.optim.kind); }}});
    t.push_back({"optim.lr", real_field(SHVIT_REF(optim.lr))});
    t.push_back({"optim.momentum", real_field(SHVIT_REF(optim.momentum))});
    t.push_back({"optim.beta1", real_field(SHVIT_REF(optim.beta1))});
    t.push_back({"optim.beta2", real_field(SHVIT_REF(optim.beta2))});
    t.push_back({"optim.eps", real_field(SHVIT_REF(optim.eps))});
    t.push_back({"optim.weight_decay", real_field(SHVIT_REF(optim.weight_decay))});

    t.push_back({"train.epochs", size_field(SHVIT_REF(epochs))});
    t.push_back({"train.batch_size", size_field(SHVIT_REF(batch_size))});
    t.push_back({"train.seed",
                 {[](RunConfig& c, const std::string& k, const std::string& v) { c.seed = to_u64(k, v); },
                  [](const RunConfig& c) { return std::to_string(c.seed); }}});

    t.push_back({"data.root", string_field(SHVIT_REF(data_root))});
    t.push_back({"data.stats_file", string_field(SHVIT_REF(stats_file))});
    t.push_back({"data.strict", bool_field(SHVIT_REF(strict))});

    t.push_back({"output.dir", string_field(SHVIT_REF(output_dir))});

    t.push_back({"eval.metric",
                 {[](RunConfig& c, const std::string&, const std::string& v) { c.metric = metric_from_string(v); },
                  [](const RunConfig& c) { return to_string(c.metric); }}});
    t.push_back({"eval.max_rank", size_field(SHVIT_REF(max_rank))});
    t.push_back({"eval.batch_size", size_field(SHVIT_REF(eval_batch_size))});
    t.push_back({"eval.camera_filter", bool_field(SHVIT_REF(camera_filter))});
    return t;
  }();
  return table;
}

#undef SHVIT_REF

const Field& lookup(const std::string& key) {
  static const std::map<std::string, const Field*> index = [] {
    std::map<std::string, const Field*> m;
    for (const auto& [k, f] : field_table()) m.emplace(k, &f);
    return m;
  }();
  const auto it = index.find(key);
  if (it == index.end()) throw ConfigError("unknown config key '" + key + "'");
  return *it->second;
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
  try {
    lookup(key).set(*this, key, trim(value));
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(key + ": " + e.what());
  }
}

std::string RunConfig::get(const std::string& key) const { return lookup(key).get(*this); }

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> k = [] {
    std::vector<std::string> out;
    for (const auto& entry : field_table()) out.push_back(entry.first);
    return out;
  }();
  return k;
}

void RunConfig::validate() const {
  model.validate();
  shuffle.validate();
  augment.validate();
  distill.validate();
  optim.validate();
  if (epochs == 0) throw ConfigError("train.epochs must be positive");
  if (batch_size == 0) throw ConfigError("train.batch_size must be positive");
  if (max_rank == 0) throw ConfigError("eval.max_rank must be positive");
  if (eval_batch_size == 0) throw ConfigError("eval.batch_size must be positive");
  if (distill.mode != DistillMode::off && distill.teacher_checkpoint.empty())
    throw ConfigError("distill.mode " + to_string(distill.mode) + " needs distill.teacher_checkpoint");
}

std::string RunConfig::to_text() const {
  std::string out;
  for (const auto& [key, field] : field_table()) out += key + " = " + field.get(*this) + "\n";
  return out;
}

ConfigOverrides parse_config_lines(const std::string& text) {
  ConfigOverrides out;
  std::istringstream is(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + ": expected 'key = value', got '" + line + "'");
    out.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return out;
}

namespace {

void apply_entries(RunConfig& cfg, const ConfigOverrides& entries) {
  for (const auto& [k, v] : entries)
    if (k != "model.preset") cfg.set(k, v);
}

std::optional<std::string> find_preset(const ConfigOverrides& entries) {
  std::optional<std::string> preset;
  for (const auto& [k, v] : entries)
    if (k == "model.preset") preset = v;
  return preset;
}

}  // namespace

RunConfig parse_config_text(const std::string& text) {
  const ConfigOverrides entries = parse_config_lines(text);
  RunConfig cfg;
  if (const auto preset = find_preset(entries)) cfg.set("model.preset", *preset);
  apply_entries(cfg, entries);
  return cfg;
}

RunConfig resolve_config(const std::optional<std::string>& file, const ConfigOverrides& overrides) {
  ConfigOverrides from_file;
  if (file) from_file = parse_config_lines(read_file(*file));
  RunConfig cfg;
  auto preset = find_preset(overrides);
  if (!preset) preset = find_preset(from_file);
  if (preset) cfg.set("model.preset", *preset);
  apply_entries(cfg, from_file);
  apply_entries(cfg, overrides);
  return cfg;
}

std::string format_stats(const ChannelStats& stats) {
  std::string out = "mean=" + format_triple(stats.mean) + "\nstd=" + format_triple(stats.std) + "\n";
  out += "zero_std=[";
  for (std::size_t c = 0; c < 3; ++c) out += std::string(c ? "," : "") + (stats.zero_std[c] ? "1" : "0");
  return out + "]\n";
}

ChannelStats parse_stats(const std::string& text) {
  ChannelStats st;
  bool have_mean = false, have_std = false;
  for (const auto& [k, v] : parse_config_lines(text)) {
    if (k == "mean") {
      st.mean = parse_triple(v);
      have_mean = true;
    } else if (k == "std") {
      st.std = parse_triple(v);
      have_std = true;
    } else if (k != "zero_std") {
      throw DataError("stats file: unknown key '" + k + "'");
    }
  }
  if (!have_mean || !have_std) throw DataError("stats file: needs both mean and std");
  for (std::size_t c = 0; c < 3; ++c) st.zero_std[c] = st.std[c] == 0.0;
  return st;
}

ChannelStats read_stats_file(const std::string& path) {
  try {
    return parse_stats(read_file(path));
  } catch (const ConfigError& e) {
    throw DataError(path + ": " + e.what());
  }
}

void write_stats_file(const ChannelStats& stats, const std::string& path) {
  write_file_atomic(path, format_stats(stats));
}

}  // namespace shvit
