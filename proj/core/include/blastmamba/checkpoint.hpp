#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "blastmamba/network.hpp"

namespace bm {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Binary checkpoint layout (all integers and floats little-endian):
///
///   "BMCKPT\0\0"                       8-byte magic
///   u32 version
///   u32 config_bytes, config text     ModelConfig::serialize()
///   u32 tensor_count
///   per tensor:
///     u32 name_bytes, name
///     u32 rank, u64 extents[rank]
///     f64 values[product(extents)]
std::vector<std::uint8_t> encode_checkpoint(const ModelWeights& w);
ModelWeights decode_checkpoint(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const std::filesystem::path& path, const ModelWeights& w);
ModelWeights load_checkpoint(const std::filesystem::path& path);

}  // namespace bm
