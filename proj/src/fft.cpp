#include "divrec/fft.hpp"

#include <cmath>
#include <numbers>

#include "divrec/error.hpp"

namespace divrec {

FftPlan::FftPlan(std::size_t size) : size_(size)
{
    if (!is_power_of_two(size))
        throw Error(ErrorCode::InvalidArgument, "FFT size " + std::to_string(size) + " is not a power of two");
    twiddles_.resize(size / 2);
    for (std::size_t k = 0; k < size / 2; ++k) {
        const double angle = -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(size);
        twiddles_[k] = {std::cos(angle), std::sin(angle)};
    }
    bitrev_.resize(size);
    std::size_t bits = 0;
    while ((std::size_t{1} << bits) < size)
        ++bits;
    for (std::size_t i = 0; i < size; ++i) {
        std::size_t r = 0;
        for (std::size_t b = 0; b < bits; ++b)
            if (i & (std::size_t{1} << b))
                r |= std::size_t{1} << (bits - 1 - b);
        bitrev_[i] = r;
    }
}

void FftPlan::transform(std::span<std::complex<double>> data, bool inverse) const
{
    if (data.size() != size_)
        throw Error(ErrorCode::ShapeMismatch, "FFT input length does not match plan");
    for (std::size_t i = 0; i < size_; ++i)
        if (i < bitrev_[i])
            std::swap(data[i], data[bitrev_[i]]);

    for (std::size_t len = 2; len <= size_; len <<= 1) {
        const std::size_t half = len / 2;
        const std::size_t stride = size_ / len;
        for (std::size_t start = 0; start < size_; start += len) {
            for (std::size_t k = 0; k < half; ++k) {
                std::complex<double> w = twiddles_[k * stride];
                if (inverse)
                    w = std::conj(w);
                const std::complex<double> x = data[start + k + half];
                // Explicit product skips the NaN/Inf recovery path of operator*.
                const std::complex<double> t(w.real() * x.real() - w.imag() * x.imag(),
                                             w.real() * x.imag() + w.imag() * x.real());
                data[start + k + half] = data[start + k] - t;
                data[start + k] += t;
            }
        }
    }
}

} // namespace divrec
