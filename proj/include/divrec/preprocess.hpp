#pragma once

#include <cstddef>
#include <vector>

#include "divrec/audio_io.hpp"

namespace divrec {

struct SegmentationPolicy {
    double chunk_seconds = 10.0;
    double min_tail_seconds = 8.0;

    void validate() const;
};

/// Magnitude spectral subtraction parameters.
struct NoiseReductionConfig {
    std::size_t frame_len = 512;
    std::size_t hop = 256;
    std::size_t noise_frames = 10;
    double oversubtraction = 1.0; // alpha
    double spectral_floor = 0.02; // beta

    void validate() const;
};

/// Cuts consecutive non-overlapping chunks of chunk_seconds from the start of
/// the clip. The remainder is kept only if it lasts at least min_tail_seconds.
/// Segment i carries source_id "<parent>#<i>".
std::vector<AudioClip> segment(const AudioClip& clip, const SegmentationPolicy& policy = {});

/// Spectral subtraction on a Hann-windowed STFT with overlap-add resynthesis.
/// The noise magnitude profile is the mean spectrum of the lowest-energy
/// frames; each bin becomes max(|Y| - alpha * N, beta * |Y|) with the noisy
/// phase kept. Output has the input's length and is clamped to [-1, 1].
AudioClip reduce_noise(const AudioClip& clip, const NoiseReductionConfig& config = {});

} // namespace divrec
