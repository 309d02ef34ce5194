#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dacl/model.hpp"

namespace dacl {

// Binary parameter snapshot, little-endian:
//   magic "DACLSNAP" (8 bytes), u32 version = 1, u32 group count,
//   per group: u32 name length, name bytes, u32 matrix count,
//              per matrix: u64 rows, u64 cols,
//   then every matrix's f64 entries row-major, groups and matrices in
//   declaration order.
// Loading requires a model built with the same spec: group names and shapes
// must match exactly.
inline constexpr char kSnapshotMagic[8] = {'D', 'A', 'C', 'L', 'S', 'N', 'A', 'P'};
inline constexpr std::uint32_t kSnapshotVersion = 1;

std::vector<std::uint8_t> snapshot_bytes(const ModelParams& params);
void save_snapshot(const std::string& path, const ModelParams& params);
// Throws DataError on bad magic/version or any group/shape mismatch.
void load_snapshot(const std::string& path, ModelParams& params);

}  // namespace dacl
