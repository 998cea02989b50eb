#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "divrec/features.hpp"
#include "divrec/network.hpp"

namespace divrec {

struct TrainingConfig {
    double learning_rate = 0.001;
    std::size_t batch_size = 128;
    int epochs = 35;
    double train_fraction = 0.8;
    double test_fraction = 0.1;
    double validation_fraction = 0.1;
    std::uint64_t seed = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double plateau_factor = 0.5;
    int plateau_patience = 3;
    double plateau_min_delta = 1e-4;
    double min_lr = 1e-6;
    /// Split whole speakers (parent directory of the source id) rather than
    /// individual segments.
    bool group_by_speaker = false;
    /// Permit datasets in which some divisions have no samples.
    bool allow_missing_classes = false;
    /// Write a model + optimizer checkpoint every N epochs; 0 disables.
    int checkpoint_every = 0;
    std::string checkpoint_dir;

    void validate() const;
};

struct DatasetSplit {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
    std::vector<std::size_t> validation;
};

/// Seeded, label-stratified split. Global part sizes are
/// round(N * test_fraction) and round(N * validation_fraction), the rest is
/// training. The three parts are apportioned over labels jointly, so every
/// label's count in every part is within one sample of its proportional
/// share. Index lists are sorted ascending.
DatasetSplit split_dataset(const std::vector<AggregatedFeature>& data, const TrainingConfig& config);

/// Speaker key used by group_by_speaker: the parent directory of the source
/// id, or the whole id when it has no directory part.
std::string speaker_key(std::string_view source_id);

/// -ln(max(p_true, 1e-12)) for a one-hot target; in general
/// -sum_j t_j ln(max(p_j, 1e-12)).
double cross_entropy(const Eigen::Ref<const Eigen::VectorXd>& probabilities,
                     const Eigen::Ref<const Eigen::VectorXd>& target);

/// Mean of the per-column losses.
double mean_cross_entropy(const Eigen::Ref<const Eigen::MatrixXd>& probabilities,
                          const Eigen::Ref<const Eigen::MatrixXd>& targets);

struct AdamHyper {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// First/second moments per parameter block, the step count and the
/// learning rate currently in effect.
struct AdamState {
    std::vector<Eigen::ArrayXd> m;
    std::vector<Eigen::ArrayXd> v;
    std::int64_t t = 0;
    double learning_rate = 0.001;
};

struct ParamBlock {
    std::span<double> value;
    std::span<const double> grad;
};

AdamState make_adam_state(std::span<const Eigen::Index> block_sizes, double learning_rate);
AdamState make_adam_state(const Network& params, double learning_rate);

/// One Adam update: t += 1; m = b1 m + (1 - b1) g; v = b2 v + (1 - b2) g^2;
/// theta -= lr * m_hat / (sqrt(v_hat) + eps) with m_hat = m / (1 - b1^t),
/// v_hat = v / (1 - b2^t). Throws NonFiniteGradient before touching anything
/// if any gradient entry is NaN or infinite.
void adam_step(std::span<const ParamBlock> blocks, AdamState& state, const AdamHyper& hyper);
void adam_step(Network& params, const Gradients<double>& grads, AdamState& state, const AdamHyper& hyper);

struct EpochMetrics {
    int epoch = 0;
    double train_loss = 0.0;
    double train_accuracy = 0.0;
    double validation_loss = 0.0;
    double validation_accuracy = 0.0;
    double learning_rate = 0.0;
};

struct PlateauState {
    double best = std::numeric_limits<double>::infinity();
    int wait = 0;
};

/// Consumes the newest epoch of `history`. Validation loss must beat the best
/// so far by more than plateau_min_delta to count as an improvement;
/// plateau_patience epochs without one multiply the rate by plateau_factor
/// (never below min_lr) and reset the counter. Returns the rate for the next
/// epoch.
double reduce_lr_on_plateau(const std::vector<EpochMetrics>& history, double current_lr, PlateauState& state,
                            const TrainingConfig& config);

/// Inference-mode loss and accuracy over the selected records.
struct SetMetrics {
    double loss = 0.0;
    double accuracy = 0.0;
    std::size_t correct = 0;
    std::size_t count = 0;
};
SetMetrics measure(const Network& params, const std::vector<AggregatedFeature>& data,
                   std::span<const std::size_t> indices);

/// Packs the selected records as columns (26 x n) with label indices.
Eigen::MatrixXd batch_matrix(const std::vector<AggregatedFeature>& data, std::span<const std::size_t> indices);
std::vector<int> batch_labels(const std::vector<AggregatedFeature>& data, std::span<const std::size_t> indices);

struct TrainingResult {
    Network params;
    std::vector<EpochMetrics> history;
    DatasetSplit split;
};

using EpochCallback = std::function<void(const EpochMetrics&, const Network&, const AdamState&)>;

/// Splits, initialises from the seed, then for each epoch reshuffles the
/// training part, runs ceil(N_train / batch) minibatches (last one partial)
/// of training-mode forward, backward and Adam, measures both parts in
/// inference mode and applies the plateau schedule.
TrainingResult train(const std::vector<AggregatedFeature>& data, const TrainingConfig& config,
                     const EpochCallback& on_epoch = {});

/// Same loop on an explicit split.
TrainingResult train_on_split(const std::vector<AggregatedFeature>& data, const DatasetSplit& split,
                              const TrainingConfig& config, const EpochCallback& on_epoch = {});

/// `epoch,train_loss,train_acc,val_loss,val_acc,lr`, reals with 17 digits.
std::string metrics_to_csv(const std::vector<EpochMetrics>& history);

/// Optimizer sidecar: "DIVADAM1" | t u64 | lr f64 | block count u32 |
/// per block: size u32, m f64 x size, v f64 x size | CRC-32 u32.
std::string encode_adam_state(const AdamState& state);
AdamState decode_adam_state(std::string_view bytes);

/// Writes <dir>/epoch_NNN.model and <dir>/epoch_NNN.adam.
void save_checkpoint(const std::string& dir, int epoch, const Network& params, const AdamState& state);

} // namespace divrec
