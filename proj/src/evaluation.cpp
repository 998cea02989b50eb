#include "divrec/evaluation.hpp"

#include <json.hpp>
#include <numeric>

namespace divrec {

void require_compatible(const Network& params)
{
    if (params.input_dim() != kFeatureDim || params.output_dim() != kNumDivisions ||
        params.specs().back().activation != Activation::Softmax)
        throw Error(ErrorCode::ModelIncompatible, "model maps " + std::to_string(params.input_dim()) + " -> " +
                                                      std::to_string(params.output_dim()) +
                                                      "; expected 26 features -> 8 softmax outputs");
}

Prediction predict(const Network& params, const FeatureVector& feature)
{
    if (params.input_dim() != kFeatureDim || params.output_dim() != kNumDivisions)
        throw Error(ErrorCode::ShapeMismatch, "network does not map 26 features to 8 divisions");
    const auto cache = forward<double>(Eigen::MatrixXd(feature), params);
    Prediction out;
    out.probabilities = cache.probabilities.col(0);
    out.label = static_cast<Division>(argmax(out.probabilities));
    return out;
}

MetricsReport report_from_predictions(std::span<const int> truth, std::span<const int> predicted)
{
    if (truth.size() != predicted.size())
        throw Error(ErrorCode::ShapeMismatch, "truth and prediction counts differ");
    if (truth.empty())
        throw Error(ErrorCode::EmptySet, "nothing to evaluate");
    MetricsReport report;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (truth[i] < 0 || truth[i] >= kNumDivisions || predicted[i] < 0 || predicted[i] >= kNumDivisions)
            throw Error(ErrorCode::ShapeMismatch, "label index out of range");
        ++report.confusion(truth[i], predicted[i]);
    }
    report.total = report.confusion.sum();
    report.correct = report.confusion.trace();
    report.accuracy = static_cast<double>(report.correct) / static_cast<double>(report.total);

    for (int c = 0; c < kNumDivisions; ++c) {
        ClassMetrics& m = report.per_class[c];
        const std::int64_t tp = report.confusion(c, c);
        const std::int64_t predicted_c = report.confusion.col(c).sum();
        m.support = report.confusion.row(c).sum();
        m.precision_undefined = predicted_c == 0;
        m.recall_undefined = m.support == 0;
        m.precision = m.precision_undefined ? 0.0 : static_cast<double>(tp) / static_cast<double>(predicted_c);
        m.recall = m.recall_undefined ? 0.0 : static_cast<double>(tp) / static_cast<double>(m.support);
        m.f1_undefined = m.precision + m.recall == 0.0;
        m.f1 = m.f1_undefined ? 0.0 : 2.0 * m.precision * m.recall / (m.precision + m.recall);
    }
    return report;
}

MetricsReport evaluate(const Network& params, const std::vector<AggregatedFeature>& data,
                       std::span<const std::size_t> indices)
{
    require_compatible(params);
    if (indices.empty())
        throw Error(ErrorCode::EmptySet, "evaluation set is empty");
    std::vector<int> truth, predicted;
    truth.reserve(indices.size());
    predicted.reserve(indices.size());
    for (std::size_t idx : indices) {
        const AggregatedFeature& rec = data.at(idx);
        if (!rec.label)
            throw Error(ErrorCode::InvalidArgument, "record '" + rec.source_id + "' has no label");
        truth.push_back(index_of(*rec.label));
        predicted.push_back(index_of(predict(params, rec.vector).label));
    }
    return report_from_predictions(truth, predicted);
}

MetricsReport evaluate(const Network& params, const std::vector<AggregatedFeature>& data)
{
    std::vector<std::size_t> all(data.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    return evaluate(params, data, all);
}

std::string report_to_json(const MetricsReport& report)
{
    nlohmann::ordered_json j;
    j["total"] = report.total;
    j["correct"] = report.correct;
    j["accuracy"] = report.accuracy;
    j["labels"] = kDivisionNames;
    auto& rows = j["confusion_matrix"] = nlohmann::ordered_json::array();
    for (int r = 0; r < kNumDivisions; ++r) {
        auto row = nlohmann::ordered_json::array();
        for (int c = 0; c < kNumDivisions; ++c)
            row.push_back(report.confusion(r, c));
        rows.push_back(row);
    }
    auto& classes = j["per_class"] = nlohmann::ordered_json::object();
    for (int c = 0; c < kNumDivisions; ++c) {
        const ClassMetrics& m = report.per_class[c];
        classes[std::string(kDivisionNames[c])] = {
            {"support", m.support},
            {"precision", m.precision},
            {"recall", m.recall},
            {"f1", m.f1},
            {"precision_undefined", m.precision_undefined},
            {"recall_undefined", m.recall_undefined},
            {"f1_undefined", m.f1_undefined},
        };
    }
    return j.dump(2) + "\n";
}

std::string confusion_to_csv(const ConfusionMatrix& confusion)
{
    std::string out;
    for (int c = 0; c < kNumDivisions; ++c) {
        if (c > 0)
            out += ',';
        out += kDivisionNames[c];
    }
    out += '\n';
    for (int r = 0; r < kNumDivisions; ++r) {
        for (int c = 0; c < kNumDivisions; ++c) {
            if (c > 0)
                out += ',';
            out += std::to_string(confusion(r, c));
        }
        out += '\n';
    }
    return out;
}

Division majority_vote(std::span<const Division> votes)
{
    if (votes.empty())
        throw Error(ErrorCode::EmptySet, "no votes");
    std::array<int, kNumDivisions> counts{};
    for (Division d : votes)
        ++counts[index_of(d)];
    int best = 0;
    for (int c = 1; c < kNumDivisions; ++c)
        if (counts[c] > counts[best])
            best = c;
    return static_cast<Division>(best);
}

} // namespace divrec
