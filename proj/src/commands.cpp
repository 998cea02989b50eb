#include "divrec/commands.hpp"

#include <atomic>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <mutex>
#include <numeric>
#include <thread>

#include "divrec/binary_io.hpp"
#include "divrec/csv.hpp"
#include "divrec/feature_cache.hpp"
#include "divrec/manifest.hpp"
#include "divrec/model_io.hpp"

namespace fs = std::filesystem;

namespace divrec {

int exit_status_for(ErrorCode code) noexcept
{
    switch (code) {
    case ErrorCode::InvalidArgument: return kExitUsage;
    case ErrorCode::NonFiniteGradient: return kExitNumeric;
    default: return kExitData;
    }
}

namespace {

template <typename Fn>
int guarded(std::ostream& err, Fn&& body)
{
    try {
        return body();
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return exit_status_for(e.code());
    } catch (const std::filesystem::filesystem_error& e) {
        err << "error: " << e.what() << '\n';
        return kExitData;
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << '\n';
        return kExitNumeric;
    }
}

/// Runs fn(i) for i in [0, n) on a bounded pool. Each index writes only its
/// own output slot, so results stay in input order.
template <typename Fn>
void parallel_for(std::size_t n, unsigned jobs, Fn&& fn)
{
    if (jobs == 0)
        jobs = std::max(1u, std::thread::hardware_concurrency());
    jobs = static_cast<unsigned>(std::min<std::size_t>(jobs, n));
    if (jobs <= 1) {
        for (std::size_t i = 0; i < n; ++i)
            fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> workers;
    for (unsigned w = 0; w < jobs; ++w)
        workers.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++)
                fn(i);
        });
}

AudioClip quantized(AudioClip clip)
{
    for (double& s : clip.samples)
        s = quantize_sample(s) / 32768.0;
    return clip;
}

std::string format_accuracy(double v)
{
    return csv::format_real(v);
}

} // namespace

int cmd_scan(const ScanOptions& opts, std::ostream& out, std::ostream& err)
{
    return guarded(err, [&] {
        const ScanResult result = scan_corpus(opts.root);
        for (const std::string& dir : result.skipped_directories)
            err << "warning: skipping " << dir << " (not a division name)\n";
        save_manifest(result.manifest, opts.out);
        out << "scanned " << result.manifest.rows.size() << " files into " << opts.out << '\n';
        return kExitOk;
    });
}

int cmd_preprocess(const PreprocessOptions& opts, std::ostream& out, std::ostream& err)
{
    return guarded(err, [&] {
        opts.config.validate();
        const DatasetManifest input = load_manifest(opts.manifest);
        fs::create_directories(opts.out_dir);

        struct FileResult {
            std::vector<ManifestRow> rows;
            double input_seconds = 0.0;
            double output_seconds = 0.0;
            std::string error;
        };
        std::vector<FileResult> results(input.rows.size());
        parallel_for(input.rows.size(), opts.jobs, [&](std::size_t i) {
            const ManifestRow& row = input.rows[i];
            FileResult& res = results[i];
            try {
                const AudioClip clip = load_clip(row.audio_path);
                res.input_seconds = clip.duration_seconds();
                const auto segments = segment(clip, opts.config.segmentation);
                const fs::path dir = fs::path(opts.out_dir) / std::string(name_of(row.division)) / row.speaker_id;
                fs::create_directories(dir);
                const std::string stem = fs::path(row.audio_path).stem().string();
                for (std::size_t s = 0; s < segments.size(); ++s) {
                    const AudioClip cleaned = reduce_noise(segments[s], opts.config.noise);
                    char suffix[16];
                    std::snprintf(suffix, sizeof suffix, "_seg%03zu.wav", s);
                    const std::string path = (dir / (stem + suffix)).generic_string();
                    write_wav(cleaned, path);
                    res.output_seconds += cleaned.duration_seconds();
                    res.rows.push_back({path, row.division, row.speaker_id, row.gender});
                }
            } catch (const std::exception& e) {
                res.error = e.what();
            }
        });

        DatasetManifest output;
        std::size_t failed = 0;
        double in_total = 0.0, out_total = 0.0;
        for (std::size_t i = 0; i < results.size(); ++i) {
            if (!results[i].error.empty()) {
                err << "warning: " << input.rows[i].audio_path << ": " << results[i].error << '\n';
                ++failed;
                continue;
            }
            in_total += results[i].input_seconds;
            out_total += results[i].output_seconds;
            output.rows.insert(output.rows.end(), results[i].rows.begin(), results[i].rows.end());
        }
        if (failed == input.rows.size())
            throw Error(ErrorCode::NoAudioFound, "every input file failed to preprocess");
        const std::string manifest_path = (fs::path(opts.out_dir) / "manifest.csv").generic_string();
        save_manifest(output, manifest_path);
        out << "preprocessed " << input.rows.size() - failed << '/' << input.rows.size() << " files into "
            << output.rows.size() << " segments (" << std::fixed << std::setprecision(1) << in_total << " s in, "
            << out_total << " s kept); manifest " << manifest_path << '\n';
        return kExitOk;
    });
}

int cmd_extract(const ExtractOptions& opts, std::ostream& out, std::ostream& err)
{
    return guarded(err, [&] {
        opts.config.validate();
        const DatasetManifest manifest = load_manifest(opts.manifest);
        const FeatureExtractor extractor(opts.config.features);
        std::vector<std::optional<AggregatedFeature>> slots(manifest.rows.size());
        std::vector<std::string> errors(manifest.rows.size());
        parallel_for(manifest.rows.size(), opts.jobs, [&](std::size_t i) {
            const ManifestRow& row = manifest.rows[i];
            try {
                AggregatedFeature rec;
                rec.vector = aggregate(extractor.extract(load_clip(row.audio_path)));
                rec.label = row.division;
                rec.source_id = row.audio_path;
                slots[i] = std::move(rec);
            } catch (const std::exception& e) {
                errors[i] = e.what();
            }
        });
        std::vector<AggregatedFeature> records;
        for (std::size_t i = 0; i < slots.size(); ++i) {
            if (slots[i])
                records.push_back(std::move(*slots[i]));
            else
                err << "warning: skipping " << manifest.rows[i].audio_path << ": " << errors[i] << '\n';
        }
        save_feature_cache(records, opts.out);
        if (opts.csv_out)
            bin::write_file(*opts.csv_out, feature_cache_to_csv(records));
        out << "extracted " << records.size() << " feature vectors into " << opts.out << '\n';
        return kExitOk;
    });
}

int cmd_train(const TrainOptions& opts, std::ostream& out, std::ostream& err)
{
    return guarded(err, [&] {
        const TrainingConfig& config = opts.config.training;
        config.validate();
        const auto records = load_feature_cache(opts.cache);
        const auto result = train(records, config, [&](const EpochMetrics& m, const Network&, const AdamState&) {
            out << "epoch " << m.epoch << " loss " << csv::format_real(m.train_loss) << " acc "
                << format_accuracy(m.train_accuracy) << " val_loss " << csv::format_real(m.validation_loss)
                << " val_acc " << format_accuracy(m.validation_accuracy) << " lr " << m.learning_rate << '\n';
        });
        save_model(result.params, opts.out);
        const std::string metrics_path =
            opts.metrics_out.empty() ? (fs::path(opts.out).parent_path() / "metrics.csv").generic_string()
                                     : opts.metrics_out;
        bin::write_file(metrics_path, metrics_to_csv(result.history));
        const EpochMetrics& last = result.history.back();
        out << "final train_accuracy " << format_accuracy(last.train_accuracy) << '\n';
        out << "final val_accuracy " << format_accuracy(last.validation_accuracy) << '\n';
        out << "model " << opts.out << ", metrics " << metrics_path << '\n';
        return kExitOk;
    });
}

int cmd_evaluate(const EvaluateOptions& opts, std::ostream& out, std::ostream& err)
{
    return guarded(err, [&] {
        const Network params = load_model(opts.model);
        require_compatible(params);
        const auto records = load_feature_cache(opts.cache);
        std::vector<std::size_t> selection;
        if (opts.split == "full") {
            selection.resize(records.size());
            std::iota(selection.begin(), selection.end(), std::size_t{0});
        } else {
            const DatasetSplit split = split_dataset(records, opts.config.training);
            if (opts.split == "train")
                selection = split.train;
            else if (opts.split == "test")
                selection = split.test;
            else if (opts.split == "validation")
                selection = split.validation;
            else
                throw Error(ErrorCode::InvalidArgument, "split must be full, train, test or validation");
        }
        const MetricsReport report = evaluate(params, records, selection);
        const std::string json = report_to_json(report);
        out << json;
        out << "accuracy " << format_accuracy(report.accuracy) << '\n';
        if (!opts.out.empty()) {
            if (const auto parent = fs::path(opts.out).parent_path(); !parent.empty())
                fs::create_directories(parent);
            bin::write_file(opts.out + ".json", json);
            bin::write_file(opts.out + "_confusion.csv", confusion_to_csv(report.confusion));
        }
        return kExitOk;
    });
}

std::vector<AggregatedFeature> segment_features(const AudioClip& clip, const PipelineConfig& config)
{
    const FeatureExtractor extractor(config.features);
    std::vector<AggregatedFeature> out;
    for (const AudioClip& seg : segment(clip, config.segmentation)) {
        AggregatedFeature rec;
        rec.vector = aggregate(extractor.extract(quantized(reduce_noise(seg, config.noise))));
        rec.source_id = seg.source_id;
        out.push_back(std::move(rec));
    }
    return out;
}

ClipPrediction predict_clip(const Network& params, const AudioClip& clip, const PipelineConfig& config)
{
    const auto features = segment_features(clip, config);
    if (features.empty())
        throw Error(ErrorCode::TooShort, "clip lasts " + std::to_string(clip.duration_seconds()) +
                                             " s; at least " + std::to_string(config.segmentation.min_tail_seconds) +
                                             " s are needed for one segment");
    ClipPrediction result;
    std::vector<Division> votes;
    for (const AggregatedFeature& f : features) {
        result.segments.push_back(predict(params, f.vector));
        votes.push_back(result.segments.back().label);
    }
    result.label = majority_vote(votes);
    return result;
}

int cmd_predict(const PredictOptions& opts, std::ostream& out, std::ostream& err)
{
    return guarded(err, [&] {
        opts.config.validate();
        const Network params = load_model(opts.model);
        require_compatible(params);
        const ClipPrediction result = predict_clip(params, load_clip(opts.wav), opts.config);
        out << std::setprecision(6) << std::fixed;
        for (std::size_t s = 0; s < result.segments.size(); ++s) {
            const Prediction& p = result.segments[s];
            out << "segment " << s << ' ' << name_of(p.label);
            for (Eigen::Index c = 0; c < p.probabilities.size(); ++c)
                out << ' ' << p.probabilities(c);
            out << '\n';
        }
        out << "division " << name_of(result.label) << '\n';
        return kExitOk;
    });
}

int cmd_make_fixture(const FixtureOptions& opts, std::ostream& out, std::ostream& err)
{
    return guarded(err, [&] {
        const auto paths = make_fixture(opts.out, opts.spec);
        out << "wrote " << paths.size() << " fixture files under " << opts.out << '\n';
        return kExitOk;
    });
}

} // namespace divrec
