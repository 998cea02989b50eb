#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "divrec/features.hpp"
#include "divrec/labels.hpp"
#include "divrec/network.hpp"

namespace divrec {

using ClassProbabilities = Eigen::Matrix<double, kNumDivisions, 1>;

struct Prediction {
    Division label = Division::Barisal;
    ClassProbabilities probabilities = ClassProbabilities::Zero();
};

/// Throws ModelIncompatible unless the network maps 26 inputs to 8 outputs.
void require_compatible(const Network& params);

/// Inference-mode argmax; ties resolve to the lowest division index.
Prediction predict(const Network& params, const FeatureVector& feature);

/// Rows are the true division, columns the predicted one.
using ConfusionMatrix = Eigen::Matrix<std::int64_t, kNumDivisions, kNumDivisions>;

/// A 0/0 ratio is reported as 0.0 with the matching `undefined` flag set.
struct ClassMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    bool precision_undefined = false;
    bool recall_undefined = false;
    bool f1_undefined = false;
    std::int64_t support = 0;
};

struct MetricsReport {
    std::int64_t total = 0;
    std::int64_t correct = 0;
    double accuracy = 0.0;
    ConfusionMatrix confusion = ConfusionMatrix::Zero();
    std::array<ClassMetrics, kNumDivisions> per_class{};
};

MetricsReport report_from_predictions(std::span<const int> truth, std::span<const int> predicted);

/// Predicts every labelled record (or the selected indices) and tallies the
/// report. Throws EmptySet on an empty selection.
MetricsReport evaluate(const Network& params, const std::vector<AggregatedFeature>& data);
MetricsReport evaluate(const Network& params, const std::vector<AggregatedFeature>& data,
                       std::span<const std::size_t> indices);

std::string report_to_json(const MetricsReport& report);

/// Header of canonical division names, then eight rows of eight counts.
std::string confusion_to_csv(const ConfusionMatrix& confusion);

/// Most frequent division; ties go to the lowest index.
Division majority_vote(std::span<const Division> votes);

} // namespace divrec
