#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "dtrack/layers.hpp"

namespace dtrack {

// Flat binary tensor archive, all integers little-endian:
//   "DTCK" | version u32 | count u32 |
//   per tensor: name_len u32 | name (UTF-8) | rank u32 | dims u64[rank] | f64[numel]
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<std::uint8_t> encode_checkpoint(const ParameterSet& tensors);
// Throws Format on bad magic, unknown version or truncated data.
ParameterSet decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const std::filesystem::path& path, const ParameterSet& tensors);
ParameterSet load_checkpoint(const std::filesystem::path& path);

}  // namespace dtrack
