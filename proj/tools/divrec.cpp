// Command-line front end: scan, preprocess, extract, train, evaluate,
// predict, make-fixture.

#include <CLI11.hpp>
#include <iostream>
#include <optional>

#include "divrec/commands.hpp"

namespace {

struct Shared {
    std::string config_path;
    std::optional<std::uint64_t> seed;
};

void add_shared(CLI::App* cmd, Shared& shared)
{
    cmd->add_option("--config", shared.config_path, "key=value file overriding pipeline settings");
    cmd->add_option("--seed", shared.seed, "random seed");
}

divrec::PipelineConfig resolve(const Shared& shared)
{
    divrec::PipelineConfig config;
    if (!shared.config_path.empty())
        divrec::apply_config_file(shared.config_path, config);
    if (shared.seed)
        config.training.seed = *shared.seed;
    return config;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Speaker division recognition from continuous speech"};
    app.require_subcommand(1);
    Shared shared;

    divrec::ScanOptions scan;
    auto* scan_cmd = app.add_subcommand("scan", "Build a manifest from root/<Division>/<speaker>/*.wav");
    scan_cmd->add_option("root", scan.root, "corpus root")->required();
    scan_cmd->add_option("--out", scan.out, "manifest CSV to write");

    divrec::PreprocessOptions pre;
    auto* pre_cmd = app.add_subcommand("preprocess", "Segment and denoise every manifest entry");
    pre_cmd->add_option("manifest", pre.manifest)->required();
    pre_cmd->add_option("--out", pre.out_dir, "output directory")->required();
    pre_cmd->add_option("--jobs", pre.jobs, "worker threads (0 = all cores)");
    add_shared(pre_cmd, shared);

    divrec::ExtractOptions ext;
    std::string ext_csv;
    auto* ext_cmd = app.add_subcommand("extract", "Compute 26-D segment features into a cache");
    ext_cmd->add_option("manifest", ext.manifest)->required();
    ext_cmd->add_option("--out", ext.out, "DIVFEAT1 cache to write");
    ext_cmd->add_option("--csv", ext_csv, "also write a CSV mirror");
    ext_cmd->add_option("--jobs", ext.jobs, "worker threads (0 = all cores)");
    add_shared(ext_cmd, shared);

    divrec::TrainOptions tr;
    bool allow_missing = false;
    auto* train_cmd = app.add_subcommand("train", "Train the dense classifier");
    train_cmd->add_option("cache", tr.cache)->required();
    train_cmd->add_option("--out", tr.out, "model file to write");
    train_cmd->add_option("--metrics", tr.metrics_out, "metrics CSV (default: metrics.csv beside the model)");
    train_cmd->add_flag("--allow-missing-classes", allow_missing, "permit caches lacking some divisions");
    add_shared(train_cmd, shared);

    divrec::EvaluateOptions ev;
    auto* eval_cmd = app.add_subcommand("evaluate", "Accuracy, confusion matrix and per-class metrics");
    eval_cmd->add_option("model", ev.model)->required();
    eval_cmd->add_option("cache", ev.cache)->required();
    eval_cmd->add_option("--split", ev.split, "full, train, test or validation")
        ->check(CLI::IsMember({"full", "train", "test", "validation"}));
    eval_cmd->add_option("--out", ev.out, "report prefix (<out>.json, <out>_confusion.csv)");
    add_shared(eval_cmd, shared);

    divrec::PredictOptions pr;
    auto* pred_cmd = app.add_subcommand("predict", "Predict the division of one recording");
    pred_cmd->add_option("model", pr.model)->required();
    pred_cmd->add_option("wav", pr.wav)->required();
    add_shared(pred_cmd, shared);

    divrec::FixtureOptions fx;
    auto* fix_cmd = app.add_subcommand("make-fixture", "Write a synthetic 8-division corpus");
    fix_cmd->add_option("--out", fx.out, "corpus root")->required();
    fix_cmd->add_option("--files-per-class", fx.spec.files_per_class);
    fix_cmd->add_option("--speakers-per-class", fx.spec.speakers_per_class);
    fix_cmd->add_option("--seconds", fx.spec.file_seconds, "duration of each file");
    fix_cmd->add_option("--sample-rate", fx.spec.sample_rate);
    fix_cmd->add_option("--noise", fx.spec.noise_amplitude, "white-noise amplitude");
    fix_cmd->add_option("--seed", fx.spec.seed);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? divrec::kExitOk : divrec::kExitUsage;
    }

    std::ostream& out = std::cout;
    std::ostream& err = std::cerr;
    try {
        if (*scan_cmd)
            return divrec::cmd_scan(scan, out, err);
        if (*fix_cmd)
            return divrec::cmd_make_fixture(fx, out, err);

        const divrec::PipelineConfig config = resolve(shared);
        if (*pre_cmd) {
            pre.config = config;
            return divrec::cmd_preprocess(pre, out, err);
        }
        if (*ext_cmd) {
            ext.config = config;
            if (!ext_csv.empty())
                ext.csv_out = ext_csv;
            return divrec::cmd_extract(ext, out, err);
        }
        if (*train_cmd) {
            tr.config = config;
            tr.config.training.allow_missing_classes |= allow_missing;
            return divrec::cmd_train(tr, out, err);
        }
        if (*eval_cmd) {
            ev.config = config;
            return divrec::cmd_evaluate(ev, out, err);
        }
        if (*pred_cmd) {
            pr.config = config;
            return divrec::cmd_predict(pr, out, err);
        }
    } catch (const divrec::Error& e) {
        err << "error: " << e.what() << '\n';
        return divrec::exit_status_for(e.code());
    }
    return divrec::kExitUsage;
}
