#pragma once

#include <cstdint>
#include <string>

#include "adakd/model.hpp"

namespace adakd {

/// Self-describing fields stored alongside the weights.
struct CheckpointMeta {
  uint64_t config_hash = 0;  // hash of the resolved run configuration
  std::string note;          // free-form tag: "teacher", "best", "final", ...
};

struct LoadedCheckpoint {
  TinyTransformerLM model;
  CheckpointMeta meta;
};

/// Versioned binary container: magic header, architecture, meta, then every
/// parameter as (name, shape, raw 64-bit values). The write is atomic
/// (temp file + rename), so a crash never leaves a half-written file behind.
void save_checkpoint(const std::string& path, const TinyTransformerLM& model,
                     const CheckpointMeta& meta);

/// Rebuilds the model from the stored architecture and restores every value
/// bitwise. Throws on wrong magic, unsupported version, truncation, or any
/// mismatch between stored parameters and the architecture.
LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace adakd
