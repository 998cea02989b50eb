#include "divrec/training.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <numeric>

#include "divrec/binary_io.hpp"
#include "divrec/csv.hpp"
#include "divrec/model_io.hpp"

namespace divrec {

namespace {

enum Stream : std::uint64_t { kInitStream = 0, kSplitStream = 1, kShuffleStream = 2, kDropoutStream = 3 };

bool in_unit_interval(double x) { return x > 0.0 && x <= 1.0; }

enum Part : std::size_t { kTrain = 0, kTest = 1, kValidation = 2 };
using PartCounts = std::array<std::size_t, 3>;

/// Per-class part sizes whose every entry is the floor or ceiling of the
/// exact share size_c * part_p / total, with each class and each part summing
/// to its integer total. The leftover units after flooring are placed by
/// augmenting paths in the class/part bipartite graph; a table with integer
/// margins always admits such a rounding.
std::vector<PartCounts> stratified_quotas(const std::vector<std::size_t>& sizes, const PartCounts& parts)
{
    const std::size_t total = std::accumulate(sizes.begin(), sizes.end(), std::size_t{0});
    const std::size_t classes = sizes.size();
    std::vector<PartCounts> quota(classes, PartCounts{});
    std::vector<std::array<std::size_t, 3>> remainder(classes);
    std::vector<std::array<bool, 3>> bumped(classes, {false, false, false});
    std::vector<std::size_t> row_need(classes);
    PartCounts col_need = parts;
    for (std::size_t c = 0; c < classes; ++c) {
        std::size_t assigned = 0;
        for (std::size_t p = 0; p < 3; ++p) {
            quota[c][p] = sizes[c] * parts[p] / total;
            remainder[c][p] = sizes[c] * parts[p] % total;
            assigned += quota[c][p];
            col_need[p] -= quota[c][p];
        }
        row_need[c] = sizes[c] - assigned;
    }

    // Columns tried in order of decreasing remainder, so the result matches
    // plain largest-remainder rounding whenever that is already consistent.
    auto column_order = [&](std::size_t c) {
        std::array<std::size_t, 3> order{0, 1, 2};
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return remainder[c][a] > remainder[c][b]; });
        return order;
    };
    std::vector<bool> seen_row;
    std::array<bool, 3> seen_col{};
    std::function<bool(std::size_t)> augment = [&](std::size_t c) -> bool {
        seen_row[c] = true;
        for (std::size_t p : column_order(c)) {
            if (remainder[c][p] == 0 || bumped[c][p] || seen_col[p])
                continue;
            seen_col[p] = true;
            bool placed = col_need[p] > 0;
            if (placed) {
                --col_need[p];
            } else {
                // Column p is full: free a unit by moving another class's
                // bump in this column elsewhere.
                for (std::size_t other = 0; other < classes && !placed; ++other)
                    if (bumped[other][p] && !seen_row[other] && augment(other)) {
                        bumped[other][p] = false;
                        placed = true;
                    }
            }
            if (placed) {
                bumped[c][p] = true;
                return true;
            }
        }
        return false;
    };
    for (std::size_t c = 0; c < classes; ++c)
        while (row_need[c] > 0) {
            seen_row.assign(classes, false);
            seen_col = {};
            if (!augment(c))
                throw Error(ErrorCode::InvalidArgument, "stratified split has no consistent rounding");
            --row_need[c];
        }
    for (std::size_t c = 0; c < classes; ++c)
        for (std::size_t p = 0; p < 3; ++p)
            quota[c][p] += bumped[c][p] ? 1 : 0;
    return quota;
}

} // namespace

void TrainingConfig::validate() const
{
    if (!(learning_rate > 0.0 && learning_rate <= 1.0))
        throw Error(ErrorCode::InvalidArgument, "learning rate must lie in (0, 1]");
    if (batch_size < 1 || epochs < 1)
        throw Error(ErrorCode::InvalidArgument, "batch size and epoch count must be positive");
    if (train_fraction < 0.0 || test_fraction < 0.0 || validation_fraction <= 0.0 ||
        std::abs(train_fraction + test_fraction + validation_fraction - 1.0) > 1e-9)
        throw Error(ErrorCode::InvalidArgument, "split fractions must be non-negative and sum to 1");
    if (!in_unit_interval(beta1) || beta1 >= 1.0 || !in_unit_interval(beta2) || beta2 >= 1.0 || !(epsilon > 0.0))
        throw Error(ErrorCode::InvalidArgument, "Adam needs beta1, beta2 in (0, 1) and epsilon > 0");
    if (!in_unit_interval(plateau_factor) || plateau_patience < 1 || !in_unit_interval(min_lr) || plateau_min_delta < 0.0)
        throw Error(ErrorCode::InvalidArgument, "invalid plateau schedule settings");
    if (checkpoint_every < 0)
        throw Error(ErrorCode::InvalidArgument, "checkpoint interval must be non-negative");
}

std::string speaker_key(std::string_view source_id)
{
    std::string_view id = source_id.substr(0, source_id.find('#'));
    const std::size_t slash = id.find_last_of('/');
    return std::string(slash == std::string_view::npos ? id : id.substr(0, slash));
}

DatasetSplit split_dataset(const std::vector<AggregatedFeature>& data, const TrainingConfig& config)
{
    config.validate();
    if (data.size() < 10)
        throw Error(ErrorCode::InvalidArgument, "need at least 10 records to split, got " + std::to_string(data.size()));

    std::vector<std::vector<std::size_t>> by_label(kNumDivisions);
    for (std::size_t i = 0; i < data.size(); ++i) {
        if (!data[i].label)
            throw Error(ErrorCode::InvalidArgument, "record '" + data[i].source_id + "' has no label");
        by_label[index_of(*data[i].label)].push_back(i);
    }
    for (int c = 0; c < kNumDivisions; ++c)
        if (by_label[c].empty() && !config.allow_missing_classes)
            throw Error(ErrorCode::EmptyClass,
                        "no records for division " + std::string(name_of(static_cast<Division>(c))));

    Rng rng(derive_seed(config.seed, kSplitStream));
    std::vector<std::size_t> sizes(kNumDivisions);
    for (int c = 0; c < kNumDivisions; ++c) {
        rng.shuffle(by_label[c]);
        sizes[c] = by_label[c].size();
    }

    const std::size_t n = data.size();
    const auto n_test = static_cast<std::size_t>(std::llround(static_cast<double>(n) * config.test_fraction));
    const auto n_val = static_cast<std::size_t>(std::llround(static_cast<double>(n) * config.validation_fraction));
    const auto quotas = stratified_quotas(sizes, {n - n_test - n_val, n_test, n_val});
    std::vector<std::size_t> test_quota(kNumDivisions), val_quota(kNumDivisions);
    for (int c = 0; c < kNumDivisions; ++c) {
        test_quota[c] = quotas[c][kTest];
        val_quota[c] = quotas[c][kValidation];
    }

    DatasetSplit split;
    for (int c = 0; c < kNumDivisions; ++c) {
        const auto& members = by_label[c];
        if (!config.group_by_speaker) {
            for (std::size_t j = 0; j < members.size(); ++j) {
                if (j < test_quota[c])
                    split.test.push_back(members[j]);
                else if (j < test_quota[c] + val_quota[c])
                    split.validation.push_back(members[j]);
                else
                    split.train.push_back(members[j]);
            }
            continue;
        }
        // Whole speakers go to one part; parts are filled in test,
        // validation, train order until each reaches its quota.
        std::map<std::string, std::vector<std::size_t>> groups;
        for (std::size_t idx : members)
            groups[speaker_key(data[idx].source_id)].push_back(idx);
        std::vector<std::string> keys;
        for (const auto& [key, _] : groups)
            keys.push_back(key);
        rng.shuffle(keys);
        std::size_t in_test = 0, in_val = 0;
        for (const std::string& key : keys) {
            const auto& group = groups[key];
            if (in_test < test_quota[c]) {
                split.test.insert(split.test.end(), group.begin(), group.end());
                in_test += group.size();
            } else if (in_val < val_quota[c]) {
                split.validation.insert(split.validation.end(), group.begin(), group.end());
                in_val += group.size();
            } else {
                split.train.insert(split.train.end(), group.begin(), group.end());
            }
        }
    }
    std::sort(split.train.begin(), split.train.end());
    std::sort(split.test.begin(), split.test.end());
    std::sort(split.validation.begin(), split.validation.end());
    return split;
}

double cross_entropy(const Eigen::Ref<const Eigen::VectorXd>& probabilities, const Eigen::Ref<const Eigen::VectorXd>& target)
{
    if (probabilities.size() != target.size())
        throw Error(ErrorCode::ShapeMismatch, "probability and target lengths differ");
    double loss = 0.0;
    for (Eigen::Index j = 0; j < target.size(); ++j)
        if (target(j) != 0.0)
            loss -= target(j) * std::log(std::max(probabilities(j), 1e-12));
    return loss;
}

double mean_cross_entropy(const Eigen::Ref<const Eigen::MatrixXd>& probabilities, const Eigen::Ref<const Eigen::MatrixXd>& targets)
{
    if (probabilities.rows() != targets.rows() || probabilities.cols() != targets.cols() || targets.cols() == 0)
        throw Error(ErrorCode::ShapeMismatch, "probability and target batches differ or are empty");
    double total = 0.0;
    for (Eigen::Index i = 0; i < targets.cols(); ++i)
        total += cross_entropy(probabilities.col(i), targets.col(i));
    return total / static_cast<double>(targets.cols());
}

AdamState make_adam_state(std::span<const Eigen::Index> block_sizes, double learning_rate)
{
    AdamState state;
    state.learning_rate = learning_rate;
    for (Eigen::Index size : block_sizes) {
        state.m.push_back(Eigen::ArrayXd::Zero(size));
        state.v.push_back(Eigen::ArrayXd::Zero(size));
    }
    return state;
}

AdamState make_adam_state(const Network& params, double learning_rate)
{
    std::vector<Eigen::Index> sizes;
    for (std::size_t l = 0; l < params.num_layers(); ++l) {
        sizes.push_back(params.layer(l).weights.size());
        sizes.push_back(params.layer(l).bias.size());
    }
    return make_adam_state(sizes, learning_rate);
}

void adam_step(std::span<const ParamBlock> blocks, AdamState& state, const AdamHyper& hyper)
{
    if (blocks.size() != state.m.size() || blocks.size() != state.v.size())
        throw Error(ErrorCode::ShapeMismatch, "optimizer state does not match parameter blocks");
    for (std::size_t b = 0; b < blocks.size(); ++b) {
        const auto size = static_cast<Eigen::Index>(blocks[b].value.size());
        if (blocks[b].grad.size() != blocks[b].value.size() || state.m[b].size() != size)
            throw Error(ErrorCode::ShapeMismatch, "gradient block " + std::to_string(b) + " has the wrong size");
        for (double g : blocks[b].grad)
            if (!std::isfinite(g))
                throw Error(ErrorCode::NonFiniteGradient, "gradient block " + std::to_string(b) + " is not finite");
    }

    ++state.t;
    const double t = static_cast<double>(state.t);
    const double correction1 = 1.0 - std::pow(hyper.beta1, t);
    const double correction2 = 1.0 - std::pow(hyper.beta2, t);
    for (std::size_t b = 0; b < blocks.size(); ++b) {
        const auto size = static_cast<Eigen::Index>(blocks[b].value.size());
        Eigen::Map<Eigen::ArrayXd> theta(blocks[b].value.data(), size);
        const Eigen::Map<const Eigen::ArrayXd> g(blocks[b].grad.data(), size);
        auto& m = state.m[b];
        auto& v = state.v[b];
        m = hyper.beta1 * m + (1.0 - hyper.beta1) * g;
        v = hyper.beta2 * v + (1.0 - hyper.beta2) * g.square();
        theta -= state.learning_rate * (m / correction1) / ((v / correction2).sqrt() + hyper.epsilon);
    }
}

void adam_step(Network& params, const Gradients<double>& grads, AdamState& state, const AdamHyper& hyper)
{
    if (grads.specs() != params.specs())
        throw Error(ErrorCode::ShapeMismatch, "gradients do not match parameter shapes");
    std::vector<ParamBlock> blocks;
    for (std::size_t l = 0; l < params.num_layers(); ++l) {
        auto& p = params.layer(l);
        const auto& g = grads.layer(l);
        blocks.push_back({{p.weights.data(), static_cast<std::size_t>(p.weights.size())},
                          {g.weights.data(), static_cast<std::size_t>(g.weights.size())}});
        blocks.push_back({{p.bias.data(), static_cast<std::size_t>(p.bias.size())},
                          {g.bias.data(), static_cast<std::size_t>(g.bias.size())}});
    }
    adam_step(blocks, state, hyper);
}

double reduce_lr_on_plateau(const std::vector<EpochMetrics>& history, double current_lr, PlateauState& state,
                            const TrainingConfig& config)
{
    if (history.empty())
        throw Error(ErrorCode::InvalidArgument, "plateau schedule needs at least one completed epoch");
    const double loss = history.back().validation_loss;
    if (loss < state.best - config.plateau_min_delta) {
        state.best = loss;
        state.wait = 0;
        return current_lr;
    }
    if (++state.wait >= config.plateau_patience) {
        state.wait = 0;
        return std::max(config.min_lr, current_lr * config.plateau_factor);
    }
    return current_lr;
}

Eigen::MatrixXd batch_matrix(const std::vector<AggregatedFeature>& data, std::span<const std::size_t> indices)
{
    Eigen::MatrixXd x(kFeatureDim, static_cast<Eigen::Index>(indices.size()));
    for (std::size_t i = 0; i < indices.size(); ++i)
        x.col(static_cast<Eigen::Index>(i)) = data.at(indices[i]).vector;
    return x;
}

std::vector<int> batch_labels(const std::vector<AggregatedFeature>& data, std::span<const std::size_t> indices)
{
    std::vector<int> labels;
    labels.reserve(indices.size());
    for (std::size_t idx : indices) {
        const auto& rec = data.at(idx);
        if (!rec.label)
            throw Error(ErrorCode::InvalidArgument, "record '" + rec.source_id + "' has no label");
        labels.push_back(index_of(*rec.label));
    }
    return labels;
}

SetMetrics measure(const Network& params, const std::vector<AggregatedFeature>& data, std::span<const std::size_t> indices)
{
    if (indices.empty())
        throw Error(ErrorCode::EmptySet, "cannot measure an empty set");
    constexpr std::size_t chunk = 1024;
    SetMetrics out;
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < indices.size(); start += chunk) {
        const auto part = indices.subspan(start, std::min(chunk, indices.size() - start));
        const auto labels = batch_labels(data, part);
        const auto cache = forward<double>(batch_matrix(data, part), params);
        const Eigen::MatrixXd targets = one_hot(labels, params.output_dim());
        for (Eigen::Index i = 0; i < targets.cols(); ++i) {
            loss_sum += cross_entropy(cache.probabilities.col(i), targets.col(i));
            if (argmax(cache.probabilities.col(i)) == labels[static_cast<std::size_t>(i)])
                ++out.correct;
        }
    }
    out.count = indices.size();
    out.loss = loss_sum / static_cast<double>(out.count);
    out.accuracy = static_cast<double>(out.correct) / static_cast<double>(out.count);
    return out;
}

TrainingResult train_on_split(const std::vector<AggregatedFeature>& data, const DatasetSplit& split,
                              const TrainingConfig& config, const EpochCallback& on_epoch)
{
    config.validate();
    if (split.train.empty() || split.validation.empty())
        throw Error(ErrorCode::EmptySet, "training and validation parts must be non-empty");

    TrainingResult result{init_params(derive_seed(config.seed, kInitStream)), {}, split};
    Network& params = result.params;
    AdamState adam = make_adam_state(params, config.learning_rate);
    const AdamHyper hyper{config.beta1, config.beta2, config.epsilon};
    PlateauState plateau;
    Rng shuffle_rng(derive_seed(config.seed, kShuffleStream));
    Rng dropout_rng(derive_seed(config.seed, kDropoutStream));
    std::vector<std::size_t> order = split.train;

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const auto batch = std::span<const std::size_t>(order).subspan(
                start, std::min(config.batch_size, order.size() - start));
            const Eigen::MatrixXd x = batch_matrix(data, batch);
            const Eigen::MatrixXd targets = one_hot(batch_labels(data, batch), params.output_dim());
            const auto cache = forward(x, params, Mode::Training, &dropout_rng);
            adam_step(params, backward(cache, params, targets), adam, hyper);
        }
        if (!params.all_finite())
            throw Error(ErrorCode::NonFiniteGradient, "parameters diverged in epoch " + std::to_string(epoch));

        const SetMetrics train_metrics = measure(params, data, split.train);
        const SetMetrics val_metrics = measure(params, data, split.validation);
        result.history.push_back({epoch, train_metrics.loss, train_metrics.accuracy, val_metrics.loss,
                                  val_metrics.accuracy, adam.learning_rate});
        if (on_epoch)
            on_epoch(result.history.back(), params, adam);
        if (config.checkpoint_every > 0 && epoch % config.checkpoint_every == 0)
            save_checkpoint(config.checkpoint_dir, epoch, params, adam);
        adam.learning_rate = reduce_lr_on_plateau(result.history, adam.learning_rate, plateau, config);
    }
    return result;
}

TrainingResult train(const std::vector<AggregatedFeature>& data, const TrainingConfig& config, const EpochCallback& on_epoch)
{
    return train_on_split(data, split_dataset(data, config), config, on_epoch);
}

std::string metrics_to_csv(const std::vector<EpochMetrics>& history)
{
    std::string out = "epoch,train_loss,train_acc,val_loss,val_acc,lr\n";
    for (const EpochMetrics& m : history) {
        out += std::to_string(m.epoch);
        for (double v : {m.train_loss, m.train_accuracy, m.validation_loss, m.validation_accuracy, m.learning_rate}) {
            out += ',';
            out += csv::format_real(v);
        }
        out += '\n';
    }
    return out;
}

namespace {
constexpr std::string_view kAdamMagic = "DIVADAM1";
}

std::string encode_adam_state(const AdamState& state)
{
    bin::Writer w;
    w.bytes(kAdamMagic);
    w.u64(static_cast<std::uint64_t>(state.t));
    w.f64(state.learning_rate);
    w.u32(static_cast<std::uint32_t>(state.m.size()));
    for (std::size_t b = 0; b < state.m.size(); ++b) {
        w.u32(static_cast<std::uint32_t>(state.m[b].size()));
        for (double x : state.m[b])
            w.f64(x);
        for (double x : state.v[b])
            w.f64(x);
    }
    w.u32(crc32_of(std::string_view(w.data()).substr(kAdamMagic.size())));
    return std::move(w.data());
}

AdamState decode_adam_state(std::string_view bytes)
{
    if (bytes.size() < kAdamMagic.size() + 4 || bytes.substr(0, kAdamMagic.size()) != kAdamMagic)
        throw Error(ErrorCode::MalformedFile, "not a DIVADAM1 optimizer file");
    const std::string_view payload = bytes.substr(kAdamMagic.size(), bytes.size() - kAdamMagic.size() - 4);
    if (bin::Reader(bytes.substr(bytes.size() - 4), ErrorCode::MalformedFile).u32() != crc32_of(payload))
        throw Error(ErrorCode::MalformedFile, "optimizer checksum mismatch");
    bin::Reader r(payload, ErrorCode::MalformedFile);
    AdamState state;
    state.t = static_cast<std::int64_t>(r.u64());
    state.learning_rate = r.f64();
    const std::uint32_t blocks = r.u32();
    for (std::uint32_t b = 0; b < blocks; ++b) {
        const std::uint32_t size = r.u32();
        if (size > r.remaining() / 16)
            throw Error(ErrorCode::MalformedFile, "optimizer block overruns file");
        Eigen::ArrayXd m(size), v(size);
        for (double& x : m)
            x = r.f64();
        for (double& x : v)
            x = r.f64();
        state.m.push_back(std::move(m));
        state.v.push_back(std::move(v));
    }
    if (r.remaining() != 0)
        throw Error(ErrorCode::MalformedFile, "trailing bytes in optimizer file");
    return state;
}

void save_checkpoint(const std::string& dir, int epoch, const Network& params, const AdamState& state)
{
    std::filesystem::create_directories(dir);
    char stem[32];
    std::snprintf(stem, sizeof stem, "epoch_%03d", epoch);
    const auto base = std::filesystem::path(dir) / stem;
    save_model(params, base.string() + ".model");
    bin::write_file(base.string() + ".adam", encode_adam_state(state));
}

} // namespace divrec
