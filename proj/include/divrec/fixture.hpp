#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "divrec/audio_io.hpp"
#include "divrec/labels.hpp"

namespace divrec {

/// Synthetic stand-in corpus: each division is a "pseudo-dialect" with its
/// own pitch and formant pattern, spoken in syllable bursts separated by
/// noisy pauses. Speakers perturb pitch and formants by a few percent.
struct FixtureSpec {
    int files_per_class = 125;
    int speakers_per_class = 5;
    double file_seconds = 20.0;
    int sample_rate = kTargetSampleRate;
    double noise_amplitude = 0.01;
    std::uint64_t seed = 1;

    void validate() const;
};

AudioClip synthesize_utterance(Division division, int speaker, int utterance, const FixtureSpec& spec);

/// Writes root/<Division>/spkNN/uttNNN.wav and returns the written paths.
std::vector<std::string> make_fixture(const std::string& root, const FixtureSpec& spec);

} // namespace divrec
