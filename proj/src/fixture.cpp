#include "divrec/fixture.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numbers>

#include "divrec/error.hpp"
#include "divrec/random.hpp"

namespace fs = std::filesystem;

namespace divrec {

namespace {

struct Voice {
    double pitch_hz;
    std::array<double, 3> formants_hz;
    std::array<double, 3> bandwidths_hz;
};

// Pitch and formants drift monotonically across divisions so that the
// per-class mean cepstra are well apart.
Voice base_voice(Division d)
{
    const double c = index_of(d);
    return {100.0 + 20.0 * c,
            {350.0 + 70.0 * c, 2300.0 - 130.0 * c, 3600.0 + 90.0 * c},
            {90.0, 140.0, 220.0}};
}

constexpr std::size_t kTableSize = 4096;

/// One period of the harmonic waveform, peak-normalised.
std::vector<double> wavetable(const Voice& v, int sample_rate)
{
    const int harmonics = std::max(1, static_cast<int>((0.45 * sample_rate) / v.pitch_hz));
    std::vector<double> table(kTableSize, 0.0);
    for (int h = 1; h <= harmonics; ++h) {
        const double f = h * v.pitch_hz;
        double amp = 0.02;
        for (std::size_t k = 0; k < v.formants_hz.size(); ++k) {
            const double x = (f - v.formants_hz[k]) / v.bandwidths_hz[k];
            amp += std::exp(-0.5 * x * x) / static_cast<double>(k + 1);
        }
        for (std::size_t i = 0; i < kTableSize; ++i)
            table[i] += amp * std::sin(2.0 * std::numbers::pi * h * static_cast<double>(i) / kTableSize);
    }
    double peak = 0.0;
    for (double x : table)
        peak = std::max(peak, std::abs(x));
    for (double& x : table)
        x /= peak;
    return table;
}

} // namespace

void FixtureSpec::validate() const
{
    if (files_per_class < 1 || speakers_per_class < 1 || !(file_seconds > 0.0) || sample_rate < 8000)
        throw Error(ErrorCode::InvalidArgument, "fixture needs positive counts, duration, and sample rate >= 8 kHz");
    if (!(noise_amplitude >= 0.0 && noise_amplitude < 0.5))
        throw Error(ErrorCode::InvalidArgument, "fixture noise amplitude must lie in [0, 0.5)");
}

AudioClip synthesize_utterance(Division division, int speaker, int utterance, const FixtureSpec& spec)
{
    spec.validate();
    // Speaker traits come from their own stream so that every utterance of a
    // speaker shares them.
    Rng speaker_rng(derive_seed(spec.seed, 1000 * static_cast<std::uint64_t>(index_of(division)) + speaker));
    Voice voice = base_voice(division);
    voice.pitch_hz *= 1.0 + 0.03 * speaker_rng.uniform(-1.0, 1.0);
    for (double& f : voice.formants_hz)
        f *= 1.0 + 0.02 * speaker_rng.uniform(-1.0, 1.0);
    const double loudness = 0.35 + 0.15 * speaker_rng.uniform();
    const std::vector<double> table = wavetable(voice, spec.sample_rate);

    Rng rng(derive_seed(spec.seed, (static_cast<std::uint64_t>(index_of(division)) << 40) ^
                                       (static_cast<std::uint64_t>(speaker) << 20) ^
                                       static_cast<std::uint64_t>(utterance)));
    const auto n = static_cast<std::size_t>(std::llround(spec.file_seconds * spec.sample_rate));
    const double rate = spec.sample_rate;
    const double ramp = 0.01 * rate;

    AudioClip clip;
    clip.sample_rate = spec.sample_rate;
    clip.samples.resize(n);
    double phase = rng.uniform();
    std::size_t i = 0;
    while (i < n) {
        // Syllable burst, then pause.
        const auto on = static_cast<std::size_t>(rng.uniform(0.12, 0.30) * rate);
        const auto off = static_cast<std::size_t>(rng.uniform(0.04, 0.15) * rate);
        const double syllable_gain = loudness * rng.uniform(0.7, 1.0);
        const double glide = rng.uniform(-0.04, 0.04); // relative pitch change over the syllable
        for (std::size_t k = 0; k < on && i < n; ++k, ++i) {
            const double pos = static_cast<double>(k);
            double env = 1.0;
            if (pos < ramp)
                env = 0.5 - 0.5 * std::cos(std::numbers::pi * pos / ramp);
            else if (pos > static_cast<double>(on) - ramp)
                env = 0.5 - 0.5 * std::cos(std::numbers::pi * (static_cast<double>(on) - pos) / ramp);
            const double pitch = voice.pitch_hz * (1.0 + glide * pos / static_cast<double>(on));
            phase += pitch / rate;
            phase -= std::floor(phase);
            const double idx = phase * kTableSize;
            const auto lo = static_cast<std::size_t>(idx);
            const double frac = idx - static_cast<double>(lo);
            const double wave = table[lo] + frac * (table[(lo + 1) % kTableSize] - table[lo]);
            clip.samples[i] = syllable_gain * env * wave;
        }
        i += std::min(off, n - i);
    }
    for (double& s : clip.samples)
        s = std::clamp(s + spec.noise_amplitude * rng.uniform(-1.0, 1.0), -1.0, 1.0);
    return clip;
}

std::vector<std::string> make_fixture(const std::string& root, const FixtureSpec& spec)
{
    spec.validate();
    std::vector<std::string> written;
    for (int c = 0; c < kNumDivisions; ++c) {
        const auto division = static_cast<Division>(c);
        for (int f = 0; f < spec.files_per_class; ++f) {
            const int speaker = f % spec.speakers_per_class;
            char name[64];
            std::snprintf(name, sizeof name, "spk%02d", speaker);
            const fs::path dir = fs::path(root) / std::string(name_of(division)) / name;
            fs::create_directories(dir);
            std::snprintf(name, sizeof name, "utt%03d.wav", f);
            const std::string path = (dir / name).generic_string();
            AudioClip clip = synthesize_utterance(division, speaker, f, spec);
            clip.source_id = path;
            write_wav(clip, path);
            written.push_back(path);
        }
    }
    return written;
}

} // namespace divrec
