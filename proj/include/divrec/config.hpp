#pragma once

#include <string>
#include <string_view>

#include "divrec/features.hpp"
#include "divrec/preprocess.hpp"
#include "divrec/training.hpp"

namespace divrec {

/// Every tunable of the pipeline.
struct PipelineConfig {
    SegmentationPolicy segmentation;
    NoiseReductionConfig noise;
    FeatureConfig features;
    TrainingConfig training;

    void validate() const;
};

/// Applies `key = value` lines; `#` starts a comment. Keys:
///   segmentation: chunk_seconds, min_tail_seconds
///   noise: nr_frame_len, nr_hop, noise_frames, oversubtraction, spectral_floor
///   features: frame_len, hop, fft_size, num_filters, f_min, f_max,
///             preemphasis, delta_window, log_floor
///   training: learning_rate, batch_size, epochs, train_fraction,
///             test_fraction, validation_fraction, seed, beta1, beta2,
///             epsilon, plateau_factor, plateau_patience, plateau_min_delta,
///             min_lr, group_by_speaker, allow_missing_classes,
///             checkpoint_every, checkpoint_dir
/// Unknown keys and unparsable values throw InvalidArgument.
void apply_config_text(std::string_view text, PipelineConfig& config);
void apply_config_file(const std::string& path, PipelineConfig& config);

} // namespace divrec
