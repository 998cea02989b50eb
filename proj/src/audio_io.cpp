#include "divrec/audio_io.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include "divrec/binary_io.hpp"
#include "divrec/error.hpp"

namespace divrec {

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

struct FormatChunk {
    std::uint16_t channels = 0;
    std::uint32_t sample_rate = 0;
    std::uint16_t block_align = 0;
};

FormatChunk parse_fmt(std::string_view body)
{
    if (body.size() < 16)
        throw Error(ErrorCode::MalformedHeader, "fmt chunk shorter than 16 bytes");
    bin::Reader r(body, ErrorCode::MalformedHeader);
    std::uint16_t format = r.u16();
    FormatChunk fmt;
    fmt.channels = r.u16();
    fmt.sample_rate = r.u32();
    r.u32(); // byte rate
    fmt.block_align = r.u16();
    const std::uint16_t bits = r.u16();

    if (format == kFormatExtensible) {
        // cbSize, valid bits, channel mask, then the sub-format GUID whose
        // first two bytes carry the real format tag.
        if (body.size() < 40)
            throw Error(ErrorCode::MalformedHeader, "truncated WAVE_FORMAT_EXTENSIBLE block");
        r.skip(8);
        format = r.u16();
    }
    if (format != kFormatPcm)
        throw Error(ErrorCode::UnsupportedEncoding,
                    "format tag " + std::to_string(format) + " is not integer PCM");
    if (bits != 16)
        throw Error(ErrorCode::UnsupportedEncoding,
                    std::to_string(bits) + "-bit samples; only 16-bit PCM is accepted");
    if (fmt.channels == 0 || fmt.sample_rate == 0)
        throw Error(ErrorCode::MalformedHeader, "zero channels or zero sample rate");
    if (fmt.block_align != 2 * fmt.channels)
        throw Error(ErrorCode::MalformedHeader, "block align inconsistent with channel count");
    return fmt;
}

} // namespace

AudioClip decode_wav(std::string_view bytes, std::string source_id)
{
    bin::Reader r(bytes, ErrorCode::MalformedHeader);
    if (bytes.size() < 12 || r.bytes(4) != "RIFF")
        throw Error(ErrorCode::MalformedHeader, "missing RIFF tag");
    r.u32();
    if (r.bytes(4) != "WAVE")
        throw Error(ErrorCode::MalformedHeader, "missing WAVE tag");

    std::optional<FormatChunk> fmt;
    while (r.remaining() >= 8) {
        const std::string_view id = r.bytes(4);
        const std::uint32_t size = r.u32();
        if (id == "data") {
            if (!fmt)
                throw Error(ErrorCode::MalformedHeader, "data chunk precedes fmt chunk");
            if (size > r.remaining())
                throw Error(ErrorCode::TruncatedData,
                            "data chunk declares " + std::to_string(size) + " bytes, " +
                                std::to_string(r.remaining()) + " present");
            if (size % fmt->block_align != 0)
                throw Error(ErrorCode::TruncatedData, "data chunk ends mid-frame");
            bin::Reader data(r.bytes(size), ErrorCode::TruncatedData);
            AudioClip clip;
            clip.sample_rate = static_cast<int>(fmt->sample_rate);
            clip.channels = fmt->channels;
            clip.source_id = std::move(source_id);
            clip.samples.resize(size / 2);
            for (double& s : clip.samples)
                s = static_cast<double>(data.i16()) / 32768.0;
            return clip;
        }
        if (size > r.remaining())
            throw Error(ErrorCode::MalformedHeader, "chunk '" + std::string(id) + "' overruns file");
        const std::string_view body = r.bytes(size);
        if (id == "fmt ")
            fmt = parse_fmt(body);
        if (size % 2 == 1 && r.remaining() > 0)
            r.skip(1);
    }
    throw Error(ErrorCode::MalformedHeader, fmt ? "no data chunk" : "no fmt chunk");
}

AudioClip read_wav(const std::string& path)
{
    return decode_wav(bin::read_file(path), path);
}

std::int16_t quantize_sample(double amplitude) noexcept
{
    const double scaled = std::round(amplitude * 32768.0);
    return static_cast<std::int16_t>(std::clamp(scaled, -32768.0, 32767.0));
}

std::string encode_wav(const AudioClip& clip)
{
    const AudioClip mono = to_mono(clip);
    const auto data_bytes = static_cast<std::uint32_t>(mono.samples.size() * 2);
    bin::Writer w;
    w.data().reserve(44 + data_bytes);
    w.bytes("RIFF");
    w.u32(36 + data_bytes);
    w.bytes("WAVE");
    w.bytes("fmt ");
    w.u32(16);
    w.u16(kFormatPcm);
    w.u16(1);
    w.u32(static_cast<std::uint32_t>(mono.sample_rate));
    w.u32(static_cast<std::uint32_t>(mono.sample_rate) * 2);
    w.u16(2);
    w.u16(16);
    w.bytes("data");
    w.u32(data_bytes);
    for (double s : mono.samples)
        w.i16(quantize_sample(s));
    return std::move(w.data());
}

void write_wav(const AudioClip& clip, const std::string& path)
{
    bin::write_file(path, encode_wav(clip));
}

AudioClip to_mono(const AudioClip& clip)
{
    if (clip.channels <= 1)
        return clip;
    AudioClip out;
    out.sample_rate = clip.sample_rate;
    out.channels = 1;
    out.source_id = clip.source_id;
    const std::size_t n = clip.frames();
    const auto c = static_cast<std::size_t>(clip.channels);
    out.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (std::size_t ch = 0; ch < c; ++ch)
            acc += clip.samples[i * c + ch];
        out.samples[i] = acc / static_cast<double>(c);
    }
    return out;
}

AudioClip resample_linear(const AudioClip& clip, int target_rate)
{
    if (target_rate <= 0)
        throw Error(ErrorCode::InvalidArgument, "target rate must be positive");
    if (target_rate == clip.sample_rate)
        return clip;

    const std::size_t n_in = clip.frames();
    const auto c = static_cast<std::size_t>(clip.channels);
    const double ratio = static_cast<double>(clip.sample_rate) / target_rate;
    const auto n_out = static_cast<std::size_t>(
        std::llround(static_cast<double>(n_in) * target_rate / clip.sample_rate));

    AudioClip out;
    out.sample_rate = target_rate;
    out.channels = clip.channels;
    out.source_id = clip.source_id;
    out.samples.resize(n_out * c);
    if (n_in == 0)
        return out;
    for (std::size_t i = 0; i < n_out; ++i) {
        const double pos = static_cast<double>(i) * ratio;
        auto left = static_cast<std::size_t>(pos);
        double frac = pos - static_cast<double>(left);
        if (left >= n_in - 1) {
            left = n_in - 1;
            frac = 0.0;
        }
        const std::size_t right = std::min(left + 1, n_in - 1);
        for (std::size_t ch = 0; ch < c; ++ch) {
            const double a = clip.samples[left * c + ch];
            const double b = clip.samples[right * c + ch];
            out.samples[i * c + ch] = a + frac * (b - a);
        }
    }
    return out;
}

AudioClip load_clip(const std::string& path)
{
    return resample_linear(to_mono(read_wav(path)), kTargetSampleRate);
}

} // namespace divrec
