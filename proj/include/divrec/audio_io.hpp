#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace divrec {

inline constexpr int kTargetSampleRate = 16000;

/// Audio samples in [-1, 1]. Multi-channel audio is stored interleaved; after
/// ingestion (to_mono + resample_linear) every clip is mono at 16 kHz.
struct AudioClip {
    std::vector<double> samples;
    int sample_rate = kTargetSampleRate;
    int channels = 1;
    std::string source_id;

    std::size_t frames() const noexcept { return channels > 0 ? samples.size() / channels : 0; }
    double duration_seconds() const noexcept
    {
        return static_cast<double>(frames()) / static_cast<double>(sample_rate);
    }
};

/// Decodes a RIFF/WAVE PCM16 little-endian file. Raw integers are divided by
/// 32768, so -32768 maps to exactly -1.0. Channel count and the declared
/// sample rate are kept on the clip.
AudioClip read_wav(const std::string& path);
AudioClip decode_wav(std::string_view bytes, std::string source_id = {});

/// Writes a mono PCM16 file with the canonical 44-byte header
/// (`RIFF` size `WAVE`, a 16-byte `fmt ` block, `data`).
/// An amplitude a is stored as round(a * 32768) clamped to [-32768, 32767].
void write_wav(const AudioClip& clip, const std::string& path);
std::string encode_wav(const AudioClip& clip);

std::int16_t quantize_sample(double amplitude) noexcept;

/// Per-sample mean across channels; a mono clip is returned unchanged.
AudioClip to_mono(const AudioClip& clip);

/// Linear interpolation onto a uniform grid at target_rate. Output length is
/// round(frames * target_rate / sample_rate).
AudioClip resample_linear(const AudioClip& clip, int target_rate);

/// read_wav, to_mono and resample_linear to 16 kHz in one call.
AudioClip load_clip(const std::string& path);

} // namespace divrec
