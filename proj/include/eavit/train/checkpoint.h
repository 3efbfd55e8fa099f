#pragma once

#include <cstdint>
#include <filesystem>

#include "eavit/train/config_file.h"
#include "eavit/train/trainer.h"

namespace eavit::train {

inline constexpr std::uint32_t kCheckpointVersion = 1;

// Layout, all integers little-endian:
//   "EAVT" | u32 version | u32 scalar bytes (4 or 8)
//   u64 length + config text (format_config)
//   u64 tensor count, then per tensor: u64 name length + name, u64 numel, raw values
//   u64 optimizer step, f64 beta1, beta2, eps, then per tensor raw m and v
//   u64 completed epochs
//   u64 length + engine state text
//   u64 history rows, then per row u64 epoch and four f64
//   u32 CRC-32 of everything before it
// Written to a temporary file and renamed into place.
template <typename T>
void save_checkpoint(const std::filesystem::path& path, const RunConfig& config, const TrainingState<T>& state);

template <typename T>
struct Checkpoint {
  RunConfig config;
  TrainingState<T> state;
};

// Throws DataError for an unreadable file, bad magic, a checksum mismatch
// (including truncation), an unsupported version, a precision other than
// T's, or tensors that do not match the stored config.
template <typename T>
Checkpoint<T> load_checkpoint(const std::filesystem::path& path);

// Verifies the file and returns its config; precision tells which
// load_checkpoint instantiation to use.
RunConfig checkpoint_config(const std::filesystem::path& path);

}  // namespace eavit::train
