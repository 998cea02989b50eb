#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "divrec/config.hpp"
#include "divrec/evaluation.hpp"
#include "divrec/fixture.hpp"

namespace divrec {

/// Process exit status contract of the command-line tool.
enum ExitStatus : int { kExitOk = 0, kExitUsage = 1, kExitData = 2, kExitNumeric = 3 };

int exit_status_for(ErrorCode code) noexcept;

struct ScanOptions {
    std::string root;
    std::string out = "manifest.csv";
};

struct PreprocessOptions {
    std::string manifest;
    std::string out_dir;
    PipelineConfig config;
    unsigned jobs = 0; // 0 = hardware concurrency
};

struct ExtractOptions {
    std::string manifest;
    std::string out = "features.divfeat";
    std::optional<std::string> csv_out;
    PipelineConfig config;
    unsigned jobs = 0;
};

struct TrainOptions {
    std::string cache;
    std::string out = "model.divmodl";
    std::string metrics_out; // empty: metrics.csv next to the model
    PipelineConfig config;
};

struct EvaluateOptions {
    std::string model;
    std::string cache;
    std::string split = "full"; // full | train | test | validation
    std::string out = "report"; // writes <out>.json and <out>_confusion.csv
    PipelineConfig config;
};

struct PredictOptions {
    std::string model;
    std::string wav;
    PipelineConfig config;
};

struct FixtureOptions {
    std::string out;
    FixtureSpec spec;
};

int cmd_scan(const ScanOptions& opts, std::ostream& out, std::ostream& err);
int cmd_preprocess(const PreprocessOptions& opts, std::ostream& out, std::ostream& err);
int cmd_extract(const ExtractOptions& opts, std::ostream& out, std::ostream& err);
int cmd_train(const TrainOptions& opts, std::ostream& out, std::ostream& err);
int cmd_evaluate(const EvaluateOptions& opts, std::ostream& out, std::ostream& err);
int cmd_predict(const PredictOptions& opts, std::ostream& out, std::ostream& err);
int cmd_make_fixture(const FixtureOptions& opts, std::ostream& out, std::ostream& err);

/// Segments, denoises, quantises to PCM16 and extracts one clip exactly as
/// the preprocess + extract commands would.
std::vector<AggregatedFeature> segment_features(const AudioClip& clip, const PipelineConfig& config);

struct ClipPrediction {
    std::vector<Prediction> segments;
    Division label = Division::Barisal; // majority vote, ties to lowest index
};

/// Throws TooShort when the clip yields no segment.
ClipPrediction predict_clip(const Network& params, const AudioClip& clip, const PipelineConfig& config);

} // namespace divrec
