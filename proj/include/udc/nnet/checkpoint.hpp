#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "udc/nnet/params.hpp"

namespace udc::nn {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointEntry {
  std::string name;
  Matrix value;  // stored as little-endian f32
};

/// Container layout:
///   "UDCCKPT\0" | u32 version | u64 config hash | u32 header bytes | header JSON
///   | u32 entry count | entries (u32 name bytes, name, u32 rows, u32 cols, f32 data)
struct Checkpoint {
  std::uint64_t config_hash = 0;
  nlohmann::json header = nlohmann::json::object();
  std::vector<CheckpointEntry> entries;

  const CheckpointEntry* find(const std::string& name) const;
};

/// Writes to a sibling temp file and renames it into place.
void write_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::string& path);

/// Appends values plus Adam moments ("<prefix><name>", "...#m", "...#v") and
/// records the optimizer scalars in the header under `prefix`.
void store_to_checkpoint(Checkpoint& ckpt, const std::string& prefix, const ParamStore& store);
/// Loads every parameter of `store` from entries under `prefix`; names and
/// shapes must match exactly.
void store_from_checkpoint(const Checkpoint& ckpt, const std::string& prefix, ParamStore& store);

/// FNV-1a over the file bytes.
std::uint64_t file_hash(const std::string& path);

}  // namespace udc::nn
