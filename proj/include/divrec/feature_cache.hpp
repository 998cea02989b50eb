#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "divrec/features.hpp"

namespace divrec {

inline constexpr std::string_view kFeatureCacheMagic = "DIVFEAT1";
inline constexpr std::uint8_t kUnlabeled = 0xFF;

/// Binary layout, little-endian:
///   "DIVFEAT1" | record count u64 |
///   per record: label u8 (0-7, 0xFF unlabeled) | source-id length u32 |
///               UTF-8 source id | 26 x f64
std::string encode_feature_cache(const std::vector<AggregatedFeature>& records);
std::vector<AggregatedFeature> decode_feature_cache(std::string_view bytes);

void save_feature_cache(const std::vector<AggregatedFeature>& records, const std::string& path);
std::vector<AggregatedFeature> load_feature_cache(const std::string& path);

/// Text mirror: header `label,source_id,f0,...,f25`, label as its canonical
/// name (empty when unlabeled), reals printed with 17 significant digits.
std::string feature_cache_to_csv(const std::vector<AggregatedFeature>& records);
std::vector<AggregatedFeature> feature_cache_from_csv(std::string_view text);

} // namespace divrec
