// Acceptance suite: one PASS/FAIL line per criterion. Usage:
//   divrec_acceptance <work-dir>
// The work directory receives the fixture corpus and all pipeline outputs.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <numbers>
#include <regex>
#include <sstream>
#include <string>

#include "divrec/binary_io.hpp"
#include "divrec/features.hpp"
#include "divrec/network.hpp"
#include "divrec/training.hpp"
#include "oracles.hpp"

using namespace divrec;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

int failures = 0;

void report(const std::string& name, const std::function<Outcome()>& check)
{
    const auto start = Clock::now();
    Outcome o;
    try {
        o = check();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    const double seconds = std::chrono::duration<double>(Clock::now() - start).count();
    if (!o.pass)
        ++failures;
    std::printf("%s %s: %s (%.2f s)\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str(), seconds);
    std::fflush(stdout);
}

std::string fmt(const char* f, double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

struct Command {
    int status = -1;
    std::string output;
};

Command run(const std::string& args)
{
    const std::string cmd = std::string(DIVREC_CLI_PATH) + " " + args + " 2>&1";
    Command c;
    FILE* pipe = ::popen(cmd.c_str(), "r");
    if (!pipe)
        return c;
    char buf[4096];
    while (std::size_t n = std::fread(buf, 1, sizeof buf, pipe))
        c.output.append(buf, n);
    const int raw = ::pclose(pipe);
    c.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    return c;
}

double number_after(const std::string& text, const std::string& key)
{
    std::smatch m;
    if (!std::regex_search(text, m, std::regex(key + " ([-+0-9.eE]+)")))
        throw std::runtime_error("no '" + key + "' in output");
    return std::stod(m[1].str());
}

struct PipelineRun {
    double seconds = 0.0;
    double train_val_accuracy = 0.0;
    double evaluated_val_accuracy = 0.0;
    std::string model;
    std::string metrics;
};

// make-fixture -> scan -> preprocess -> extract -> train -> evaluate via the
// command-line tool. 1000 files of 20 s give 2000 ten-second segments.
PipelineRun run_pipeline(const fs::path& dir)
{
    fs::remove_all(dir);
    fs::create_directories(dir);
    const std::string d = dir.string();
    const auto start = Clock::now();
    auto step = [](const std::string& args) {
        Command c = run(args);
        if (c.status != 0)
            throw std::runtime_error("'" + args + "' exited " + std::to_string(c.status) + ": " + c.output);
        return c.output;
    };
    step("make-fixture --out " + d + "/corpus --files-per-class 125 --seconds 20 --seed 1");
    step("scan " + d + "/corpus --out " + d + "/manifest.csv");
    step("preprocess " + d + "/manifest.csv --out " + d + "/segments");
    step("extract " + d + "/segments/manifest.csv --out " + d + "/features.divfeat");
    const std::string train_log = step("train " + d + "/features.divfeat --out " + d + "/model.divmodl --seed 7");
    const std::string eval_log = step("evaluate " + d + "/model.divmodl " + d +
                                      "/features.divfeat --split validation --seed 7 --out " + d + "/report");
    PipelineRun r;
    r.seconds = std::chrono::duration<double>(Clock::now() - start).count();
    r.train_val_accuracy = number_after(train_log, "final val_accuracy");
    r.evaluated_val_accuracy = number_after(eval_log, "accuracy");
    r.model = bin::read_file(d + "/model.divmodl");
    r.metrics = bin::read_file(d + "/metrics.csv");
    const auto cache = bin::read_file(d + "/features.divfeat");
    if (bin::Reader(std::string_view(cache).substr(8, 8), ErrorCode::MalformedFile).u64() != 2000)
        throw std::runtime_error("feature cache does not hold 2000 segments");
    // The audio is about 1.2 GB per run; keep only the small artifacts.
    fs::remove_all(dir / "corpus");
    fs::remove_all(dir / "segments");
    return r;
}

Eigen::VectorXd naive_power(const Eigen::VectorXd& frame, int n_fft)
{
    const Eigen::Index len = frame.size();
    Eigen::VectorXd out(n_fft / 2 + 1);
    for (int k = 0; k <= n_fft / 2; ++k) {
        std::complex<double> acc = 0;
        for (Eigen::Index n = 0; n < len; ++n) {
            const double w = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * n / (len - 1));
            acc += frame(n) * w * std::polar(1.0, -2.0 * std::numbers::pi * k * n / n_fft);
        }
        out(k) = std::norm(acc) / n_fft;
    }
    return out;
}

} // namespace

int main(int argc, char** argv)
{
    if (argc != 2) {
        std::cerr << "usage: divrec_acceptance <work-dir>\n";
        return 2;
    }
    const fs::path work = argv[1];

    report("architecture", [] {
        std::vector<Eigen::Index> rows;
        for (const LayerSpec& s : division_architecture())
            rows.push_back(param_count(s));
        const Eigen::Index total = param_count(init_params(1));
        const bool ok = total == 121064 && rows == std::vector<Eigen::Index>{3456, 33024, 65792, 16448, 2080, 264};
        std::string detail = "total " + std::to_string(total) + ", layers";
        for (auto r : rows)
            detail += " " + std::to_string(r);
        return Outcome{ok, detail};
    });

    report("framing", [] {
        const std::vector<double> samples(160000, 0.1);
        const Eigen::MatrixXd frames = frame_signal(samples, FramingConfig{});
        return Outcome{frames.rows() == 400 && frames.cols() == 400,
                       std::to_string(frames.rows()) + " frames of " + std::to_string(frames.cols()) + " samples"};
    });

    report("spectral oracle", [] {
        Rng rng(2024);
        double worst = 0;
        for (int f = 0; f < 100; ++f) {
            Eigen::VectorXd frame(400);
            for (Eigen::Index i = 0; i < 400; ++i)
                frame(i) = rng.uniform(-1, 1);
            const Eigen::VectorXd fast = power_spectrum(frame, FramingConfig{});
            const Eigen::VectorXd slow = naive_power(frame, 512);
            worst = std::max(worst, (fast - slow).cwiseAbs().maxCoeff() / slow.maxCoeff());
        }
        return Outcome{worst < 1e-9, "max relative error " + fmt("%.3e", worst) + " over 100 frames"};
    });

    report("equal-area filterbank", [] {
        const FilterBank bank = build_filterbank(FeatureConfig{});
        const Eigen::VectorXd sums = bank.weights.rowwise().sum();
        const double spread = sums.maxCoeff() / sums.minCoeff() - 1.0;
        return Outcome{bank.num_filters() == 40 && spread <= 1e-6, "40 filters, max/min - 1 = " + fmt("%.3e", spread)};
    });

    report("gradient check", [] {
        // Every bias of every layer and a seeded sample of 2000 weights per
        // layer (all of them where the layer is smaller), batch of 4 with
        // dropout masks replayed.
        Rng rng(4);
        const Network params = init_params(4);
        Eigen::MatrixXd x(kFeatureDim, 4);
        for (Eigen::Index i = 0; i < x.size(); ++i)
            x(i) = rng.uniform(-2, 2);
        const std::vector<int> labels{0, 3, 5, 7};
        std::vector<Eigen::MatrixXd> masks(params.num_layers());
        for (std::size_t l = 0; l < params.num_layers(); ++l)
            if (const auto rate = params.specs()[l].dropout_after)
                masks[l] = dropout_mask(params.specs()[l].out_dim, 4, *rate, rng);
        const Network grads = backward(forward_with_masks(x, params, masks), params, one_hot(labels));

        Network probe = params;
        const double h = 1e-5;
        double worst = 0;
        long checked = 0;
        auto visit = [&](double& slot, double analytic) {
            const double saved = slot;
            slot = saved + h;
            const double up = testutil::batch_loss(forward_with_masks(x, probe, masks).probabilities, labels);
            slot = saved - h;
            const double down = testutil::batch_loss(forward_with_masks(x, probe, masks).probabilities, labels);
            slot = saved;
            const double numeric = (up - down) / (2 * h);
            worst = std::max(worst, std::abs(analytic - numeric) /
                                        std::max(std::abs(analytic) + std::abs(numeric), 1e-8));
            ++checked;
        };
        for (std::size_t l = 0; l < probe.num_layers(); ++l) {
            auto& w = probe.layer(l).weights;
            const auto& g = grads.layer(l);
            if (w.size() <= 2000) {
                for (Eigen::Index i = 0; i < w.size(); ++i)
                    visit(w(i), g.weights(i));
            } else {
                for (int s = 0; s < 2000; ++s) {
                    const auto i = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(w.size())));
                    visit(w(i), g.weights(i));
                }
            }
            for (Eigen::Index i = 0; i < probe.layer(l).bias.size(); ++i)
                visit(probe.layer(l).bias(i), g.bias(i));
        }
        return Outcome{worst < 1e-4,
                       "max relative error " + fmt("%.3e", worst) + " over " + std::to_string(checked) + " parameters"};
    });

    report("optimizer oracle", [] {
        // f(theta) = theta^2 from theta = 1; reference written from the
        // update equations with explicit bias correction.
        std::vector<double> theta{1.0}, grad{0.0};
        const std::array<Eigen::Index, 1> sizes{1};
        AdamState state = make_adam_state(sizes, 0.001);
        double ref = 1.0, m = 0, v = 0, worst = 0;
        for (int t = 1; t <= 10; ++t) {
            grad[0] = 2 * theta[0];
            const ParamBlock block{theta, grad};
            adam_step(std::span(&block, 1), state, AdamHyper{});
            const double g = 2 * ref;
            m = 0.9 * m + 0.1 * g;
            v = 0.999 * v + 0.001 * g * g;
            ref -= 0.001 * (m / (1 - std::pow(0.9, t))) / (std::sqrt(v / (1 - std::pow(0.999, t))) + 1e-8);
            worst = std::max(worst, std::abs(theta[0] - ref));
        }
        return Outcome{worst <= 1e-12, "max deviation " + fmt("%.3e", worst) + " over 10 steps"};
    });

    report("analytic loss values", [] {
        Eigen::VectorXd target = Eigen::VectorXd::Zero(8);
        target(4) = 1.0;
        const double uniform = cross_entropy(Eigen::VectorXd::Constant(8, 0.125), target);
        const double perfect = cross_entropy(target, target);
        const bool ok = std::abs(uniform - std::log(8.0)) < 1e-9 && std::abs(uniform - 2.0794) < 1e-4 && perfect == 0.0;
        return Outcome{ok, "uniform " + fmt("%.12f", uniform) + ", perfect " + fmt("%g", perfect)};
    });

    PipelineRun first;
    report("end-to-end training", [&] {
        first = run_pipeline(work / "run1");
        const bool consistent = first.evaluated_val_accuracy == first.train_val_accuracy;
        const bool ok = first.evaluated_val_accuracy >= 0.95 && consistent && first.seconds < 180.0;
        return Outcome{ok, "2000 segments, validation accuracy " + fmt("%.4f", first.evaluated_val_accuracy) +
                               (consistent ? "" : " (train reported " + fmt("%.4f", first.train_val_accuracy) + ")") +
                               ", pipeline " + fmt("%.1f", first.seconds) + " s of 180 s"};
    });

    report("determinism", [&] {
        if (first.model.empty())
            return Outcome{false, "first run did not complete"};
        const PipelineRun second = run_pipeline(work / "run2");
        const bool same_model = first.model == second.model;
        const bool same_metrics = first.metrics == second.metrics;
        return Outcome{same_model && same_metrics, std::string("model ") + (same_model ? "identical" : "differs") +
                                                       ", metrics " + (same_metrics ? "identical" : "differs")};
    });

    report("split arithmetic", [] {
        std::vector<AggregatedFeature> data(16730);
        // Unequal classes: residues 8-10 of i mod 11 go to the first three.
        for (std::size_t i = 0; i < data.size(); ++i)
            data[i].label = division_from_index(static_cast<int>(i % 11 < 8 ? i % 11 : i % 11 - 8));
        const DatasetSplit s = split_dataset(data, TrainingConfig{});
        std::vector<double> all(8, 0), tr(8, 0), te(8, 0), va(8, 0);
        for (const auto& r : data)
            ++all[index_of(*r.label)];
        for (auto i : s.train)
            ++tr[index_of(*data[i].label)];
        for (auto i : s.test)
            ++te[index_of(*data[i].label)];
        for (auto i : s.validation)
            ++va[index_of(*data[i].label)];
        double worst = 0;
        for (int c = 0; c < 8; ++c) {
            const double share = all[c] / 16730.0;
            worst = std::max({worst, std::abs(tr[c] - share * s.train.size()), std::abs(te[c] - share * s.test.size()),
                              std::abs(va[c] - share * s.validation.size())});
        }
        const bool sizes = s.train.size() == 13384 && s.test.size() == 1673 && s.validation.size() == 1673;
        return Outcome{sizes && worst <= 1.0,
                       std::to_string(s.train.size()) + "/" + std::to_string(s.test.size()) + "/" +
                           std::to_string(s.validation.size()) + ", worst per-class deviation " + fmt("%.3f", worst)};
    });

    std::printf("%s: %d failing\n", failures == 0 ? "ALL PASS" : "FAILURES", failures);
    return failures == 0 ? 0 : 1;
}
