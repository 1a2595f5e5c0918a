#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "shvit/augment.hpp"
#include "shvit/optim.hpp"
#include "shvit/tensor.hpp"
#include "shvit/vit.hpp"

namespace shvit {

struct NamedArray {
  std::string name;
  Shape shape;
  std::vector<double> values;
};

/// On-disk container (extension .shvit):
///
///   bytes 0..7   magic "SHVITCKP"
///   u32 LE       format version
///   u64 LE       header length H
///   H bytes      JSON header: kind, config text, string metadata, and the
///                array index (name, shape, byte offset, count), payload size
///                and CRC-32 of the payload
///   payload      arrays back to back as little-endian IEEE-754 doubles
///
/// Saving a loaded checkpoint reproduces the file byte for byte.
struct Checkpoint {
  static constexpr std::uint32_t kFormatVersion = 1;

  std::uint32_t version = kFormatVersion;
  /// "model" (parameters + optional optimizer/RNG state) or "logits"
  /// (recorded teacher logits; one row per path in meta["paths"]).
  std::string kind = "model";
  std::string config_text;
  std::map<std::string, std::string> meta;
  std::vector<NamedArray> arrays;

  const NamedArray* find(const std::string& name) const;
};

std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint parse_checkpoint(const std::string& bytes);

/// Atomic (temp file + rename).
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
/// DataError on bad magic, version mismatch, inconsistent index or checksum failure.
Checkpoint load_checkpoint(const std::string& path);

// Helpers for model checkpoints.

void store_parameters(Checkpoint& ckpt, const VisionTransformer& model);
/// Copies every parameter by name; shapes must match exactly.
void load_parameters(const Checkpoint& ckpt, VisionTransformer& model);

void store_optimizer(Checkpoint& ckpt, const OptimizerState& state, const VisionTransformer& model);
std::optional<OptimizerState> load_optimizer(const Checkpoint& ckpt, const VisionTransformer& model);

void store_stats(Checkpoint& ckpt, const ChannelStats& stats);
std::optional<ChannelStats> load_stats(const Checkpoint& ckpt);

/// "[a,b,c]" with round-trip precision.
std::string format_triple(const std::array<double, 3>& v);
std::array<double, 3> parse_triple(const std::string& text);

}  // namespace shvit
