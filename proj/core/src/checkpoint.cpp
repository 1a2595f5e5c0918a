#include "shvit/checkpoint.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <sstream>

#include <json.hpp>
#include <zlib.h>

#include "shvit/error.hpp"
#include "shvit/fileio.hpp"

namespace shvit {
namespace {

constexpr char kMagic[8] = {'S', 'H', 'V', 'I', 'T', 'C', 'K', 'P'};

template <typename T>
void put_le(std::string& out, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

template <typename T>
T get_le(const std::string& in, std::size_t at) {
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i)
    v |= static_cast<T>(static_cast<unsigned char>(in[at + i])) << (8 * i);
  return v;
}

std::uint32_t crc32_of(const char* data, std::size_t n) {
  uLong crc = crc32(0L, Z_NULL, 0);
  while (n > 0) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(n, 1u << 30));
    crc = crc32(crc, reinterpret_cast<const Bytef*>(data), chunk);
    data += chunk;
    n -= chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

}  // namespace

const NamedArray* Checkpoint::find(const std::string& name) const {
  for (const auto& a : arrays)
    if (a.name == name) return &a;
  return nullptr;
}

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  std::string payload;
  nlohmann::json index = nlohmann::json::array();
  for (const NamedArray& a : ckpt.arrays) {
    if (shape_size(a.shape) != a.values.size())
      throw ShapeError("checkpoint array '" + a.name + "': shape " + shape_to_string(a.shape) + " vs " +
                       std::to_string(a.values.size()) + " values");
    index.push_back({{"name", a.name}, {"shape", a.shape}, {"offset", payload.size()}, {"count", a.values.size()}});
    for (double v : a.values) put_le<std::uint64_t>(payload, std::bit_cast<std::uint64_t>(v));
  }
  nlohmann::json header;
  header["kind"] = ckpt.kind;
  header["config"] = ckpt.config_text;
  header["meta"] = ckpt.meta;
  header["arrays"] = std::move(index);
  header["payload_bytes"] = payload.size();
  header["payload_crc32"] = crc32_of(payload.data(), payload.size());
  const std::string text = header.dump();

  std::string out(kMagic, sizeof kMagic);
  put_le<std::uint32_t>(out, ckpt.version);
  put_le<std::uint64_t>(out, text.size());
  out += text;
  out += payload;
  return out;
}

Checkpoint parse_checkpoint(const std::string& bytes) {
  constexpr std::size_t kFixed = sizeof kMagic + 4 + 8;
  if (bytes.size() < kFixed || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0)
    throw DataError("checkpoint: bad magic");
  Checkpoint ck;
  ck.version = get_le<std::uint32_t>(bytes, sizeof kMagic);
  if (ck.version != Checkpoint::kFormatVersion)
    throw DataError("checkpoint: format version " + std::to_string(ck.version) + " does not match supported version " +
                    std::to_string(Checkpoint::kFormatVersion));
  const auto header_len = get_le<std::uint64_t>(bytes, sizeof kMagic + 4);
  if (header_len > bytes.size() - kFixed) throw DataError("checkpoint: truncated header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(kFixed, header_len));
    ck.kind = header.at("kind").get<std::string>();
    ck.config_text = header.at("config").get<std::string>();
    ck.meta = header.at("meta").get<std::map<std::string, std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("checkpoint: malformed header: ") + e.what());
  }
  const std::size_t base = kFixed + header_len;
  const std::size_t payload_bytes = header.value("payload_bytes", std::size_t{0});
  if (bytes.size() - base != payload_bytes)
    throw DataError("checkpoint: payload is " + std::to_string(bytes.size() - base) + " bytes, header says " +
                    std::to_string(payload_bytes));
  if (crc32_of(bytes.data() + base, payload_bytes) != header.value("payload_crc32", std::uint32_t{0}))
    throw DataError("checkpoint: checksum mismatch (corrupted payload)");

  std::size_t expected_offset = 0;
  try {
    for (const auto& entry : header.at("arrays")) {
      NamedArray a;
      a.name = entry.at("name").get<std::string>();
      a.shape = entry.at("shape").get<Shape>();
      const auto offset = entry.at("offset").get<std::size_t>();
      const auto count = entry.at("count").get<std::size_t>();
      if (offset != expected_offset || count != shape_size(a.shape) || offset + count * 8 > payload_bytes)
        throw DataError("checkpoint: inconsistent index entry for '" + a.name + "'");
      a.values.resize(count);
      for (std::size_t i = 0; i < count; ++i)
        a.values[i] = std::bit_cast<double>(get_le<std::uint64_t>(bytes, base + offset + 8 * i));
      expected_offset = offset + count * 8;
      ck.arrays.push_back(std::move(a));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("checkpoint: malformed array index: ") + e.what());
  }
  if (expected_offset != payload_bytes) throw DataError("checkpoint: payload has trailing bytes");
  return ck;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  write_file_atomic(path, serialize_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::string& path) {
  try {
    return parse_checkpoint(read_file(path));
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

void store_parameters(Checkpoint& ckpt, const VisionTransformer& model) {
  for (const auto& [name, t] : model.named_parameters())
    ckpt.arrays.push_back({"param." + name, t.shape(), std::vector<double>(t.data().begin(), t.data().end())});
}

void load_parameters(const Checkpoint& ckpt, VisionTransformer& model) {
  for (auto& [name, t] : model.named_parameters()) {
    const NamedArray* a = ckpt.find("param." + name);
    if (!a) throw DataError("checkpoint: missing parameter '" + name + "'");
    if (a->shape != t.shape())
      throw DataError("checkpoint: parameter '" + name + "' has shape " + shape_to_string(a->shape) +
                      ", model expects " + shape_to_string(t.shape()));
    std::copy(a->values.begin(), a->values.end(), t.mutable_data().begin());
  }
}

void store_optimizer(Checkpoint& ckpt, const OptimizerState& state, const VisionTransformer& model) {
  ckpt.meta["optim.kind"] = to_string(state.config.kind);
  ckpt.meta["optim.step"] = std::to_string(state.step);
  const auto params = model.named_parameters();
  for (std::size_t i = 0; i < state.first.size() && i < params.size(); ++i) {
    ckpt.arrays.push_back({"optim.first." + params[i].first, params[i].second.shape(), state.first[i]});
    if (i < state.second.size())
      ckpt.arrays.push_back({"optim.second." + params[i].first, params[i].second.shape(), state.second[i]});
  }
}

std::optional<OptimizerState> load_optimizer(const Checkpoint& ckpt, const VisionTransformer& model) {
  const auto kind = ckpt.meta.find("optim.kind");
  if (kind == ckpt.meta.end()) return std::nullopt;
  OptimizerConfig oc;
  oc.kind = optimizer_kind_from_string(kind->second);
  OptimizerState st(oc);
  st.step = std::stoull(ckpt.meta.at("optim.step"));
  for (const auto& [name, t] : model.named_parameters()) {
    const NamedArray* f = ckpt.find("optim.first." + name);
    if (!f) {
      if (st.step == 0) break;
      throw DataError("checkpoint: missing optimizer buffer for '" + name + "'");
    }
    st.first.push_back(f->values);
    if (oc.kind == OptimizerKind::adam) {
      const NamedArray* s = ckpt.find("optim.second." + name);
      if (!s) throw DataError("checkpoint: missing Adam second moment for '" + name + "'");
      st.second.push_back(s->values);
    }
  }
  return st;
}

std::string format_triple(const std::array<double, 3>& v) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "[%.17g,%.17g,%.17g]", v[0], v[1], v[2]);
  return buf;
}

std::array<double, 3> parse_triple(const std::string& text) {
  std::string s = text;
  for (char& c : s)
    if (c == '[' || c == ']' || c == ',') c = ' ';
  std::istringstream is(s);
  std::array<double, 3> v{};
  if (!(is >> v[0] >> v[1] >> v[2])) throw ConfigError("expected a triple [a,b,c], got '" + text + "'");
  std::string rest;
  if (is >> rest) throw ConfigError("expected a triple [a,b,c], got '" + text + "'");
  return v;
}

void store_stats(Checkpoint& ckpt, const ChannelStats& stats) {
  ckpt.meta["stats.mean"] = format_triple(stats.mean);
  ckpt.meta["stats.std"] = format_triple(stats.std);
}

std::optional<ChannelStats> load_stats(const Checkpoint& ckpt) {
  const auto m = ckpt.meta.find("stats.mean");
  const auto s = ckpt.meta.find("stats.std");
  if (m == ckpt.meta.end() || s == ckpt.meta.end()) return std::nullopt;
  ChannelStats st;
  st.mean = parse_triple(m->second);
  st.std = parse_triple(s->second);
  for (std::size_t c = 0; c < 3; ++c) st.zero_std[c] = st.std[c] == 0.0;
  return st;
}

}  // namespace shvit
