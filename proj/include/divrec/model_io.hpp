#pragma once

#include <string>
#include <string_view>

#include "divrec/network.hpp"

namespace divrec {

inline constexpr std::string_view kModelMagic = "DIVMODL1";
inline constexpr std::uint8_t kModelVersion = 1;

/// Model file layout (all integers and reals little-endian):
///   "DIVMODL1" | version u8 | layer count u32 |
///   per layer: in_dim u32, out_dim u32, activation u8, dropout f64 (NaN = none) |
///   per layer: weights row-major f64, then biases f64 |
///   CRC-32 u32 over every byte between the magic and the checksum.
std::string encode_model(const Network& params);
Network decode_model(std::string_view bytes);

void save_model(const Network& params, const std::string& path);
Network load_model(const std::string& path);

/// CRC-32 (IEEE) as computed by zlib.
std::uint32_t crc32_of(std::string_view bytes);

} // namespace divrec
