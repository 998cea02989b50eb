#include "divrec/config.hpp"

#include <charconv>
#include <functional>
#include <map>

#include "divrec/binary_io.hpp"
#include "divrec/csv.hpp"

namespace divrec {

namespace {

std::string_view trim(std::string_view s)
{
    const auto first = s.find_first_not_of(" \t");
    if (first == std::string_view::npos)
        return {};
    const auto last = s.find_last_not_of(" \t");
    return s.substr(first, last - first + 1);
}

template <typename T>
T parse_number(std::string_view key, std::string_view value)
{
    T out{};
    const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
    if (ec != std::errc{} || ptr != value.data() + value.size())
        throw Error(ErrorCode::InvalidArgument, "bad value '" + std::string(value) + "' for " + std::string(key));
    return out;
}

bool parse_bool(std::string_view key, std::string_view value)
{
    if (value == "true" || value == "1" || value == "yes")
        return true;
    if (value == "false" || value == "0" || value == "no")
        return false;
    throw Error(ErrorCode::InvalidArgument, "bad boolean '" + std::string(value) + "' for " + std::string(key));
}

using Setter = std::function<void(PipelineConfig&, std::string_view key, std::string_view value)>;

template <typename T, typename Field>
Setter number(Field field)
{
    return [field](PipelineConfig& c, std::string_view k, std::string_view v) { field(c) = parse_number<T>(k, v); };
}

const std::map<std::string, Setter, std::less<>>& setters()
{
    static const std::map<std::string, Setter, std::less<>> table = {
        {"chunk_seconds", number<double>([](PipelineConfig& c) -> double& { return c.segmentation.chunk_seconds; })},
        {"min_tail_seconds", number<double>([](PipelineConfig& c) -> double& { return c.segmentation.min_tail_seconds; })},
        {"nr_frame_len", number<std::size_t>([](PipelineConfig& c) -> std::size_t& { return c.noise.frame_len; })},
        {"nr_hop", number<std::size_t>([](PipelineConfig& c) -> std::size_t& { return c.noise.hop; })},
        {"noise_frames", number<std::size_t>([](PipelineConfig& c) -> std::size_t& { return c.noise.noise_frames; })},
        {"oversubtraction", number<double>([](PipelineConfig& c) -> double& { return c.noise.oversubtraction; })},
        {"spectral_floor", number<double>([](PipelineConfig& c) -> double& { return c.noise.spectral_floor; })},
        {"frame_len", number<std::size_t>([](PipelineConfig& c) -> std::size_t& { return c.features.framing.frame_len; })},
        {"hop", number<std::size_t>([](PipelineConfig& c) -> std::size_t& { return c.features.framing.hop; })},
        {"fft_size", number<std::size_t>([](PipelineConfig& c) -> std::size_t& { return c.features.framing.fft_size; })},
        {"num_filters", number<int>([](PipelineConfig& c) -> int& { return c.features.num_filters; })},
        {"f_min", number<double>([](PipelineConfig& c) -> double& { return c.features.f_min; })},
        {"f_max", number<double>([](PipelineConfig& c) -> double& { return c.features.f_max; })},
        {"preemphasis", number<double>([](PipelineConfig& c) -> double& { return c.features.preemphasis; })},
        {"delta_window", number<int>([](PipelineConfig& c) -> int& { return c.features.delta_window; })},
        {"log_floor", number<double>([](PipelineConfig& c) -> double& { return c.features.log_floor; })},
        {"learning_rate", number<double>([](PipelineConfig& c) -> double& { return c.training.learning_rate; })},
        {"batch_size", number<std::size_t>([](PipelineConfig& c) -> std::size_t& { return c.training.batch_size; })},
        {"epochs", number<int>([](PipelineConfig& c) -> int& { return c.training.epochs; })},
        {"train_fraction", number<double>([](PipelineConfig& c) -> double& { return c.training.train_fraction; })},
        {"test_fraction", number<double>([](PipelineConfig& c) -> double& { return c.training.test_fraction; })},
        {"validation_fraction",
         number<double>([](PipelineConfig& c) -> double& { return c.training.validation_fraction; })},
        {"seed", number<std::uint64_t>([](PipelineConfig& c) -> std::uint64_t& { return c.training.seed; })},
        {"beta1", number<double>([](PipelineConfig& c) -> double& { return c.training.beta1; })},
        {"beta2", number<double>([](PipelineConfig& c) -> double& { return c.training.beta2; })},
        {"epsilon", number<double>([](PipelineConfig& c) -> double& { return c.training.epsilon; })},
        {"plateau_factor", number<double>([](PipelineConfig& c) -> double& { return c.training.plateau_factor; })},
        {"plateau_patience", number<int>([](PipelineConfig& c) -> int& { return c.training.plateau_patience; })},
        {"plateau_min_delta", number<double>([](PipelineConfig& c) -> double& { return c.training.plateau_min_delta; })},
        {"min_lr", number<double>([](PipelineConfig& c) -> double& { return c.training.min_lr; })},
        {"checkpoint_every", number<int>([](PipelineConfig& c) -> int& { return c.training.checkpoint_every; })},
        {"group_by_speaker",
         [](PipelineConfig& c, std::string_view k, std::string_view v) { c.training.group_by_speaker = parse_bool(k, v); }},
        {"allow_missing_classes",
         [](PipelineConfig& c, std::string_view k, std::string_view v) {
             c.training.allow_missing_classes = parse_bool(k, v);
         }},
        {"checkpoint_dir",
         [](PipelineConfig& c, std::string_view, std::string_view v) { c.training.checkpoint_dir = std::string(v); }},
    };
    return table;
}

} // namespace

void PipelineConfig::validate() const
{
    segmentation.validate();
    noise.validate();
    features.validate();
    training.validate();
}

void apply_config_text(std::string_view text, PipelineConfig& config)
{
    int line_no = 0;
    for (std::string_view line : csv::lines(text)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos)
            line = line.substr(0, hash);
        line = trim(line);
        if (line.empty())
            continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos)
            throw Error(ErrorCode::InvalidArgument, "config line " + std::to_string(line_no) + " is not key=value");
        const std::string_view key = trim(line.substr(0, eq));
        const std::string_view value = trim(line.substr(eq + 1));
        const auto it = setters().find(key);
        if (it == setters().end())
            throw Error(ErrorCode::InvalidArgument, "unknown config key '" + std::string(key) + "'");
        it->second(config, key, value);
    }
    config.validate();
}

void apply_config_file(const std::string& path, PipelineConfig& config)
{
    apply_config_text(bin::read_file(path), config);
}

} // namespace divrec
