#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <set>

#include "divrec/binary_io.hpp"
#include "divrec/model_io.hpp"
#include "divrec/training.hpp"
#include "oracles.hpp"
#include "test_helpers.hpp"

using namespace divrec;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

// Unequal classes: the first three divisions get twice the share of the rest.
std::vector<AggregatedFeature> labelled(std::size_t n)
{
    std::vector<AggregatedFeature> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t r = i % 11;
        out[i].label = division_from_index(static_cast<int>(r < 8 ? r : r - 8));
        out[i].source_id = "r" + std::to_string(i);
    }
    return out;
}

std::vector<std::size_t> label_counts(const std::vector<AggregatedFeature>& data, const std::vector<std::size_t>& idx)
{
    std::vector<std::size_t> counts(kNumDivisions, 0);
    for (std::size_t i : idx)
        ++counts[index_of(*data[i].label)];
    return counts;
}

// Plain scalar Adam written from the update equations.
struct ScalarAdam {
    double m = 0, v = 0, lr = 0.001, b1 = 0.9, b2 = 0.999, eps = 1e-8;
    int t = 0;
    double step(double theta, double g)
    {
        ++t;
        m = b1 * m + (1 - b1) * g;
        v = b2 * v + (1 - b2) * g * g;
        const double mh = m / (1 - std::pow(b1, t));
        const double vh = v / (1 - std::pow(b2, t));
        return theta - lr * mh / (std::sqrt(vh) + eps);
    }
};

TrainingConfig quick_config(std::uint64_t seed)
{
    TrainingConfig c;
    c.seed = seed;
    c.epochs = 35;
    return c;
}

} // namespace

TEST(Split, SixteenThousandRecordArithmetic)
{
    const auto data = labelled(16730);
    const DatasetSplit s = split_dataset(data, TrainingConfig{});
    EXPECT_EQ(s.train.size(), 13384u);
    EXPECT_EQ(s.test.size(), 1673u);
    EXPECT_EQ(s.validation.size(), 1673u);
}

TEST(Split, StratifiedWithinOneSample)
{
    for (std::size_t n : {10u, 97u, 1000u, 16730u}) {
        const auto data = labelled(n);
        const DatasetSplit s = split_dataset(data, TrainingConfig{});
        const auto all = label_counts(data, [&] {
            std::vector<std::size_t> v(n);
            std::iota(v.begin(), v.end(), std::size_t{0});
            return v;
        }());
        for (const auto* part : {&s.train, &s.test, &s.validation}) {
            const auto counts = label_counts(data, *part);
            for (int c = 0; c < kNumDivisions; ++c) {
                const double share = static_cast<double>(all[c]) / static_cast<double>(n);
                EXPECT_LT(std::abs(static_cast<double>(counts[c]) - share * static_cast<double>(part->size())), 1.0)
                    << "n " << n << " class " << c;
            }
        }
    }
}

TEST(Split, StratificationHoldsForRandomClassSizes)
{
    Rng rng(404);
    for (int trial = 0; trial < 60; ++trial) {
        std::vector<AggregatedFeature> data;
        std::vector<std::size_t> sizes(kNumDivisions);
        for (int c = 0; c < kNumDivisions; ++c) {
            sizes[c] = 1 + rng.below(300);
            for (std::size_t k = 0; k < sizes[c]; ++k) {
                AggregatedFeature f;
                f.label = division_from_index(c);
                data.push_back(f);
            }
        }
        TrainingConfig config;
        config.seed = static_cast<std::uint64_t>(trial);
        if (trial % 3 == 1) {
            config.train_fraction = 0.7;
            config.test_fraction = 0.15;
            config.validation_fraction = 0.15;
        }
        const DatasetSplit s = split_dataset(data, config);
        const double n = static_cast<double>(data.size());
        EXPECT_EQ(s.train.size() + s.test.size() + s.validation.size(), data.size());
        EXPECT_EQ(s.test.size(), static_cast<std::size_t>(std::llround(n * config.test_fraction)));
        for (const auto* part : {&s.train, &s.test, &s.validation}) {
            const auto counts = label_counts(data, *part);
            for (int c = 0; c < kNumDivisions; ++c)
                EXPECT_LT(std::abs(static_cast<double>(counts[c]) -
                                   static_cast<double>(sizes[c]) / n * static_cast<double>(part->size())),
                          1.0);
        }
    }
}

TEST(Split, ExactPartitionAndSorted)
{
    const auto data = labelled(1234);
    const DatasetSplit s = split_dataset(data, quick_config(3));
    std::vector<std::size_t> all;
    for (const auto* part : {&s.train, &s.test, &s.validation}) {
        EXPECT_TRUE(std::is_sorted(part->begin(), part->end()));
        all.insert(all.end(), part->begin(), part->end());
    }
    std::sort(all.begin(), all.end());
    ASSERT_EQ(all.size(), data.size());
    for (std::size_t i = 0; i < all.size(); ++i)
        EXPECT_EQ(all[i], i);
}

TEST(Split, SeedDeterminesPartition)
{
    const auto data = labelled(500);
    const DatasetSplit a = split_dataset(data, quick_config(11));
    const DatasetSplit b = split_dataset(data, quick_config(11));
    const DatasetSplit c = split_dataset(data, quick_config(12));
    EXPECT_EQ(a.test, b.test);
    EXPECT_EQ(a.validation, b.validation);
    EXPECT_NE(a.test, c.test);
}

TEST(Split, MissingClassRejected)
{
    auto data = labelled(80);
    for (auto& r : data)
        if (*r.label == Division::Sylhet)
            r.label = Division::Dhaka;
    try {
        split_dataset(data, TrainingConfig{});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::EmptyClass);
    }
    TrainingConfig lenient;
    lenient.allow_missing_classes = true;
    EXPECT_NO_THROW(split_dataset(data, lenient));
}

TEST(Split, TooFewRecordsRejected)
{
    EXPECT_THROW(split_dataset(labelled(9), TrainingConfig{}), Error);
}

TEST(Split, SpeakerGroupingKeepsSpeakersTogether)
{
    const auto data = testutil::gaussian_clusters(50, 0.1, 1);
    TrainingConfig config;
    config.group_by_speaker = true;
    const DatasetSplit s = split_dataset(data, config);
    auto speakers = [&](const std::vector<std::size_t>& idx) {
        std::set<std::string> out;
        for (std::size_t i : idx)
            out.insert(speaker_key(data[i].source_id));
        return out;
    };
    const auto tr = speakers(s.train), te = speakers(s.test), va = speakers(s.validation);
    for (const auto& k : te) {
        EXPECT_FALSE(tr.count(k)) << k;
        EXPECT_FALSE(va.count(k)) << k;
    }
    for (const auto& k : va)
        EXPECT_FALSE(tr.count(k)) << k;
    EXPECT_EQ(s.train.size() + s.test.size() + s.validation.size(), data.size());
}

TEST(Split, SpeakerKey)
{
    EXPECT_EQ(speaker_key("Dhaka/spk01/utt003.wav#2"), "Dhaka/spk01");
    EXPECT_EQ(speaker_key("solo#0"), "solo");
}

TEST(CrossEntropy, KnownValues)
{
    VectorXd target = VectorXd::Zero(8);
    target(2) = 1.0;
    EXPECT_NEAR(cross_entropy(VectorXd::Constant(8, 0.125), target), std::log(8.0), 1e-12);
    EXPECT_NEAR(cross_entropy(VectorXd::Constant(8, 0.125), target), 2.0794, 1e-4);
    VectorXd perfect = VectorXd::Zero(8);
    perfect(2) = 1.0;
    EXPECT_EQ(cross_entropy(perfect, target), 0.0);
    VectorXd wrong = VectorXd::Zero(8);
    wrong(0) = 1.0;
    EXPECT_NEAR(cross_entropy(wrong, target), -std::log(1e-12), 1e-9);
}

TEST(CrossEntropy, BatchMeanMatchesLoop)
{
    Rng rng(5);
    MatrixXd logits(8, 17);
    for (Eigen::Index i = 0; i < logits.size(); ++i)
        logits(i) = rng.uniform(-3, 3);
    const MatrixXd p = softmax(logits);
    std::vector<int> labels;
    for (int i = 0; i < 17; ++i)
        labels.push_back(static_cast<int>(rng.below(8)));
    EXPECT_NEAR(mean_cross_entropy(p, one_hot(labels)), testutil::batch_loss(p, labels), 1e-12);
}

TEST(Adam, ZeroGradientIsIdentity)
{
    Network params = init_params(1, testutil::gradient_check_architecture());
    const Network before = params;
    AdamState state = make_adam_state(params, 0.001);
    adam_step(params, params.zeros_like(), state, AdamHyper{});
    EXPECT_TRUE(params == before);
    EXPECT_EQ(state.t, 1);
}

TEST(Adam, FirstStepMovesByLearningRate)
{
    for (double g : {1e-3, 0.5, -7.0, 1e4}) {
        std::vector<double> theta{2.0};
        const std::vector<double> grad{g};
        const std::array<Eigen::Index, 1> sizes{1};
        AdamState state = make_adam_state(sizes, 0.001);
        const ParamBlock block{theta, grad};
        adam_step(std::span(&block, 1), state, AdamHyper{});
        EXPECT_NEAR(std::abs(theta[0] - 2.0), 0.001, 1e-6) << g;
        EXPECT_LT((theta[0] - 2.0) * g, 0.0);
    }
}

TEST(Adam, QuadraticTrajectoryMatchesScalarReference)
{
    std::vector<double> theta{1.0};
    std::vector<double> grad{0.0};
    const std::array<Eigen::Index, 1> sizes{1};
    AdamState state = make_adam_state(sizes, 0.001);
    ScalarAdam ref;
    double expected = 1.0;
    for (int step = 0; step < 10; ++step) {
        grad[0] = 2.0 * theta[0];
        const ParamBlock block{theta, grad};
        adam_step(std::span(&block, 1), state, AdamHyper{});
        expected = ref.step(expected, 2.0 * expected);
        EXPECT_NEAR(theta[0], expected, 1e-12) << "step " << step + 1;
    }
}

TEST(Adam, NonFiniteGradientLeavesStateUntouched)
{
    std::vector<double> a{1.0, 2.0}, b{3.0};
    const std::vector<double> ga{0.1, 0.2}, gb{std::nan("")};
    const std::array<Eigen::Index, 2> sizes{2, 1};
    AdamState state = make_adam_state(sizes, 0.001);
    const std::array<ParamBlock, 2> blocks{ParamBlock{a, ga}, ParamBlock{b, gb}};
    try {
        adam_step(blocks, state, AdamHyper{});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::NonFiniteGradient);
    }
    EXPECT_EQ(a, (std::vector<double>{1.0, 2.0}));
    EXPECT_EQ(state.t, 0);
    EXPECT_EQ(state.m[0].abs().maxCoeff(), 0.0);
}

TEST(Adam, SecondMomentStaysNonNegative)
{
    Rng rng(2);
    Network params = init_params(3, testutil::gradient_check_architecture());
    AdamState state = make_adam_state(params, 0.01);
    for (int i = 0; i < 5; ++i) {
        Network g = params.zeros_like();
        for (std::size_t l = 0; l < g.num_layers(); ++l)
            for (Eigen::Index k = 0; k < g.layer(l).weights.size(); ++k)
                g.layer(l).weights(k) = rng.uniform(-1, 1);
        adam_step(params, g, state, AdamHyper{});
    }
    for (const auto& v : state.v)
        EXPECT_GE(v.minCoeff(), 0.0);
}

TEST(Plateau, DecreasingLossKeepsRate)
{
    TrainingConfig config;
    PlateauState state;
    std::vector<EpochMetrics> history;
    double lr = 0.001;
    for (int e = 1; e <= 10; ++e) {
        history.push_back({e, 0, 0, 1.0 / e, 0, lr});
        lr = reduce_lr_on_plateau(history, lr, state, config);
        EXPECT_EQ(lr, 0.001);
    }
}

TEST(Plateau, FlatLossHalvesRateAfterPatience)
{
    TrainingConfig config;
    PlateauState state;
    std::vector<EpochMetrics> history;
    double lr = 0.001;
    std::vector<double> rates;
    for (int e = 1; e <= 4; ++e) {
        history.push_back({e, 0, 0, 0.7, 0, lr});
        lr = reduce_lr_on_plateau(history, lr, state, config);
        rates.push_back(lr);
    }
    EXPECT_EQ(rates, (std::vector<double>{0.001, 0.001, 0.001, 0.0005}));
}

TEST(Plateau, ImprovementBelowMinDeltaDoesNotCount)
{
    TrainingConfig config;
    PlateauState state;
    std::vector<EpochMetrics> history;
    double lr = 0.001;
    // Each epoch improves slightly, but never by more than 1e-4 on the best.
    int e = 0;
    for (double loss : {1.0, 0.99996, 0.99993, 0.99991}) {
        history.push_back({++e, 0, 0, loss, 0, lr});
        lr = reduce_lr_on_plateau(history, lr, state, config);
    }
    EXPECT_EQ(lr, 0.0005);
}

TEST(Plateau, NeverBelowMinimum)
{
    TrainingConfig config;
    PlateauState state;
    std::vector<EpochMetrics> history;
    double lr = 0.001;
    for (int e = 1; e <= 200; ++e) {
        history.push_back({e, 0, 0, 0.5, 0, lr});
        lr = reduce_lr_on_plateau(history, lr, state, config);
        EXPECT_GE(lr, config.min_lr);
    }
    EXPECT_EQ(lr, config.min_lr);
}

TEST(Train, SeparableClustersReachHighValidationAccuracy)
{
    const auto data = testutil::gaussian_clusters(250, 0.3, 17);
    const TrainingResult r = train(data, quick_config(17));
    ASSERT_EQ(r.history.size(), 35u);
    EXPECT_GE(r.history.back().validation_accuracy, 0.95);
}

TEST(Train, MemorisesSingleRepeatedSample)
{
    AggregatedFeature one = testutil::gaussian_clusters(1, 0.3, 4)[5];
    std::vector<AggregatedFeature> data(256, one);
    DatasetSplit split;
    for (std::size_t i = 0; i < data.size(); ++i)
        (i < 240 ? split.train : split.validation).push_back(i);
    TrainingConfig config = quick_config(4);
    config.allow_missing_classes = true;
    const TrainingResult r = train_on_split(data, split, config);
    EXPECT_LT(r.history.back().train_loss, 1e-3);
}

TEST(Train, IdenticalRunsGiveBitIdenticalHistories)
{
    const auto data = testutil::gaussian_clusters(40, 0.5, 2);
    TrainingConfig config = quick_config(99);
    config.epochs = 6;
    const TrainingResult a = train(data, config);
    const TrainingResult b = train(data, config);
    EXPECT_EQ(metrics_to_csv(a.history), metrics_to_csv(b.history));
    EXPECT_EQ(encode_model(a.params), encode_model(b.params));
}

TEST(Train, FixedBatchLossFallsOverFirstFiveSteps)
{
    const auto data = testutil::gaussian_clusters(16, 0.3, 6);
    std::vector<std::size_t> idx(data.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    const MatrixXd x = batch_matrix(data, idx);
    const MatrixXd targets = one_hot(batch_labels(data, idx));
    Network params = init_params(6);
    AdamState state = make_adam_state(params, 0.001);
    double previous = mean_cross_entropy(forward(x, params).probabilities, targets);
    for (int step = 0; step < 5; ++step) {
        adam_step(params, backward(forward(x, params), params, targets), state, AdamHyper{});
        const double loss = mean_cross_entropy(forward(x, params).probabilities, targets);
        EXPECT_LT(loss, previous) << "step " << step + 1;
        previous = loss;
    }
}

TEST(Train, EpochAccuracyMatchesRecount)
{
    const auto data = testutil::gaussian_clusters(30, 1.5, 8);
    TrainingConfig config = quick_config(8);
    config.epochs = 3;
    std::vector<Network> snapshots;
    const TrainingResult r =
        train(data, config, [&](const EpochMetrics&, const Network& p, const AdamState&) { snapshots.push_back(p); });
    ASSERT_EQ(snapshots.size(), 3u);
    for (std::size_t e = 0; e < 3; ++e) {
        std::size_t correct = 0;
        for (std::size_t i : r.split.validation) {
            const MatrixXd probs = forward(MatrixXd(data[i].vector), snapshots[e]).probabilities;
            Eigen::Index best = 0;
            probs.col(0).maxCoeff(&best);
            correct += static_cast<int>(best) == index_of(*data[i].label);
        }
        EXPECT_EQ(r.history[e].validation_accuracy,
                  static_cast<double>(correct) / static_cast<double>(r.split.validation.size()));
        EXPECT_GE(r.history[e].train_loss, 0.0);
    }
}

TEST(Train, UsesPartialFinalBatch)
{
    // 130 training records at batch 128 means two Adam steps per epoch.
    const auto data = testutil::gaussian_clusters(20, 0.3, 3);
    DatasetSplit split;
    for (std::size_t i = 0; i < data.size(); ++i)
        (i < 130 ? split.train : split.validation).push_back(i);
    TrainingConfig config = quick_config(3);
    config.epochs = 2;
    std::vector<std::int64_t> steps;
    train_on_split(data, split, config,
                   [&](const EpochMetrics&, const Network&, const AdamState& s) { steps.push_back(s.t); });
    EXPECT_EQ(steps, (std::vector<std::int64_t>{2, 4}));
}

TEST(Metrics, CsvLayout)
{
    const std::vector<EpochMetrics> h{{1, 2.5, 0.25, 2.0, 0.5, 0.001}};
    const std::string csv = metrics_to_csv(h);
    EXPECT_EQ(csv, "epoch,train_loss,train_acc,val_loss,val_acc,lr\n1,2.5,0.25,2,0.5,0.001\n");
}

TEST(Checkpoint, AdamStateRoundTripAndFiles)
{
    Network params = init_params(1, testutil::gradient_check_architecture());
    AdamState state = make_adam_state(params, 0.00025);
    Network g = params.zeros_like();
    g.layer(0).weights.setConstant(0.3);
    adam_step(params, g, state, AdamHyper{});
    const AdamState back = decode_adam_state(encode_adam_state(state));
    EXPECT_EQ(back.t, 1);
    EXPECT_EQ(back.learning_rate, 0.00025);
    ASSERT_EQ(back.m.size(), state.m.size());
    for (std::size_t b = 0; b < state.m.size(); ++b) {
        EXPECT_TRUE((back.m[b] == state.m[b]).all());
        EXPECT_TRUE((back.v[b] == state.v[b]).all());
    }

    std::string corrupt = encode_adam_state(state);
    corrupt[20] ^= 0x01;
    EXPECT_THROW(decode_adam_state(corrupt), Error);

    const auto dir = testutil::scratch_dir("checkpoint");
    save_checkpoint(dir.string(), 7, params, state);
    EXPECT_TRUE(load_model((dir / "epoch_007.model").string()) == params);
    EXPECT_EQ(decode_adam_state(bin::read_file((dir / "epoch_007.adam").string())).t, 1);
}

TEST(Config, InvalidTrainingSettingsRejected)
{
    TrainingConfig c;
    c.train_fraction = 0.9;
    EXPECT_THROW(c.validate(), Error);
    c = {};
    c.batch_size = 0;
    EXPECT_THROW(c.validate(), Error);
    c = {};
    c.learning_rate = 0.0;
    EXPECT_THROW(c.validate(), Error);
}
