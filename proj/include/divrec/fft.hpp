#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace divrec {

/// Iterative radix-2 complex FFT with precomputed twiddles and bit-reversal
/// table. Size must be a power of two. The inverse transform is unscaled.
class FftPlan {
public:
    explicit FftPlan(std::size_t size);

    std::size_t size() const noexcept { return size_; }

    void forward(std::span<std::complex<double>> data) const { transform(data, false); }
    void inverse(std::span<std::complex<double>> data) const { transform(data, true); }

private:
    void transform(std::span<std::complex<double>> data, bool inverse) const;

    std::size_t size_;
    std::vector<std::complex<double>> twiddles_;
    std::vector<std::size_t> bitrev_;
};

constexpr bool is_power_of_two(std::size_t n) noexcept { return n != 0 && (n & (n - 1)) == 0; }

} // namespace divrec
