#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>

namespace divrec {

/// The eight administrative divisions. The numeric order is canonical for
/// every file format, matrix row/column and network output index.
enum class Division : std::uint8_t {
    Barisal = 0,
    Chittagong = 1,
    Dhaka = 2,
    Khulna = 3,
    Mymensingh = 4,
    Rajshahi = 5,
    Rangpur = 6,
    Sylhet = 7,
};

inline constexpr int kNumDivisions = 8;

inline constexpr std::array<std::string_view, kNumDivisions> kDivisionNames = {
    "Barisal", "Chittagong", "Dhaka", "Khulna", "Mymensingh", "Rajshahi", "Rangpur", "Sylhet",
};

constexpr int index_of(Division d) noexcept { return static_cast<int>(d); }

constexpr std::string_view name_of(Division d) noexcept { return kDivisionNames[index_of(d)]; }

constexpr std::optional<Division> division_from_index(int i) noexcept
{
    if (i < 0 || i >= kNumDivisions)
        return std::nullopt;
    return static_cast<Division>(i);
}

constexpr std::optional<Division> division_from_name(std::string_view name) noexcept
{
    for (int i = 0; i < kNumDivisions; ++i)
        if (kDivisionNames[i] == name)
            return static_cast<Division>(i);
    return std::nullopt;
}

} // namespace divrec
