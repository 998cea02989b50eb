#include "divrec/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <numeric>

#include "divrec/error.hpp"
#include "divrec/fft.hpp"

namespace divrec {

void SegmentationPolicy::validate() const
{
    if (!(min_tail_seconds > 0.0 && min_tail_seconds <= chunk_seconds))
        throw Error(ErrorCode::InvalidArgument, "segmentation requires 0 < min_tail_seconds <= chunk_seconds");
}

void NoiseReductionConfig::validate() const
{
    if (hop == 0 || hop > frame_len)
        throw Error(ErrorCode::InvalidArgument, "noise reduction requires 0 < hop <= frame_len");
    if (!is_power_of_two(frame_len))
        throw Error(ErrorCode::InvalidArgument, "noise reduction frame_len must be a power of two");
    if (!(spectral_floor >= 0.0 && spectral_floor < 1.0))
        throw Error(ErrorCode::InvalidArgument, "spectral floor must lie in [0, 1)");
    if (!(oversubtraction > 0.0))
        throw Error(ErrorCode::InvalidArgument, "oversubtraction factor must be positive");
    if (noise_frames == 0)
        throw Error(ErrorCode::InvalidArgument, "noise_frames must be positive");
}

std::vector<AudioClip> segment(const AudioClip& clip, const SegmentationPolicy& policy)
{
    policy.validate();
    const AudioClip mono = to_mono(clip);
    const auto chunk = static_cast<std::size_t>(std::llround(policy.chunk_seconds * mono.sample_rate));
    const auto min_tail = static_cast<std::size_t>(std::llround(policy.min_tail_seconds * mono.sample_rate));

    std::vector<AudioClip> out;
    std::size_t start = 0;
    const std::size_t n = mono.samples.size();
    while (start < n) {
        const std::size_t len = std::min(chunk, n - start);
        if (len < chunk && len < min_tail)
            break;
        AudioClip seg;
        seg.sample_rate = mono.sample_rate;
        seg.source_id = mono.source_id + "#" + std::to_string(out.size());
        seg.samples.assign(mono.samples.begin() + static_cast<std::ptrdiff_t>(start),
                           mono.samples.begin() + static_cast<std::ptrdiff_t>(start + len));
        out.push_back(std::move(seg));
        start += len;
    }
    return out;
}

AudioClip reduce_noise(const AudioClip& clip, const NoiseReductionConfig& config)
{
    config.validate();
    const AudioClip mono = to_mono(clip);
    const std::size_t n = mono.samples.size();
    const std::size_t frame_len = config.frame_len;
    const std::size_t hop = config.hop;
    if (n < frame_len)
        throw Error(ErrorCode::ClipTooShort, "clip has " + std::to_string(n) + " samples, noise reduction needs " +
                                                 std::to_string(frame_len));

    // Pad so that every input sample is covered by the same number of frames
    // as an interior sample; the window-sum normalisation below then makes
    // the unmodified STFT an exact identity.
    const std::size_t pad = frame_len - hop;
    std::size_t num_frames = (n + pad + hop - 1) / hop + 1;
    const std::size_t padded_len = (num_frames - 1) * hop + frame_len;
    std::vector<double> padded(padded_len, 0.0);
    std::copy(mono.samples.begin(), mono.samples.end(), padded.begin() + static_cast<std::ptrdiff_t>(pad));

    // Periodic Hann.
    std::vector<double> window(frame_len);
    for (std::size_t i = 0; i < frame_len; ++i)
        window[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(frame_len));

    const FftPlan plan(frame_len);
    const std::size_t bins = frame_len / 2 + 1;
    std::vector<std::vector<std::complex<double>>> spectra(num_frames, std::vector<std::complex<double>>(frame_len));
    std::vector<double> energy(num_frames, 0.0);
    for (std::size_t f = 0; f < num_frames; ++f) {
        auto& spec = spectra[f];
        for (std::size_t i = 0; i < frame_len; ++i) {
            const double x = padded[f * hop + i];
            energy[f] += x * x;
            spec[i] = {x * window[i], 0.0};
        }
        plan.forward(spec);
    }

    // Noise profile from frames lying wholly inside the original signal.
    std::vector<std::size_t> candidates;
    for (std::size_t f = 0; f < num_frames; ++f) {
        const std::size_t begin = f * hop;
        if (begin >= pad && begin + frame_len <= pad + n)
            candidates.push_back(f);
    }
    if (candidates.empty()) {
        candidates.resize(num_frames);
        std::iota(candidates.begin(), candidates.end(), std::size_t{0});
    }
    std::stable_sort(candidates.begin(), candidates.end(),
                     [&](std::size_t a, std::size_t b) { return energy[a] < energy[b]; });
    const std::size_t used = std::min(config.noise_frames, candidates.size());
    std::vector<double> noise(bins, 0.0);
    for (std::size_t j = 0; j < used; ++j)
        for (std::size_t k = 0; k < bins; ++k)
            noise[k] += std::abs(spectra[candidates[j]][k]);
    for (double& v : noise)
        v /= static_cast<double>(used);

    std::vector<double> output(padded_len, 0.0);
    std::vector<double> weight(padded_len, 0.0);
    std::vector<double> gains(bins);
    for (std::size_t f = 0; f < num_frames; ++f) {
        auto& spec = spectra[f];
        double before = 0.0, after = 0.0;
        for (std::size_t k = 0; k < bins; ++k) {
            const double mag = std::abs(spec[k]);
            const double cleaned = std::max(mag - config.oversubtraction * noise[k], config.spectral_floor * mag);
            gains[k] = mag > 0.0 ? cleaned / mag : 1.0;
            before += mag * mag;
            after += cleaned * cleaned;
        }
        // A frame that runs into the padding sees a gated fragment of the
        // signal; shaping its spectrum smears the gate edge across the frame.
        // Those frames get a single broadband gain instead.
        const std::size_t begin = f * hop;
        if (begin < pad || begin + frame_len > pad + n) {
            const double flat = before > 0.0 ? std::sqrt(after / before) : 1.0;
            std::fill(gains.begin(), gains.end(), flat);
        }
        for (std::size_t k = 0; k < bins; ++k) {
            spec[k] *= gains[k];
            if (k > 0 && k < frame_len / 2)
                spec[frame_len - k] = std::conj(spec[k]);
        }
        plan.inverse(spec);
        for (std::size_t i = 0; i < frame_len; ++i) {
            output[f * hop + i] += window[i] * spec[i].real() / static_cast<double>(frame_len);
            weight[f * hop + i] += window[i] * window[i];
        }
    }

    AudioClip out;
    out.sample_rate = mono.sample_rate;
    out.source_id = mono.source_id;
    out.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double w = weight[pad + i];
        const double v = w > 1e-12 ? output[pad + i] / w : 0.0;
        out.samples[i] = std::clamp(v, -1.0, 1.0);
    }
    return out;
}

} // namespace divrec
