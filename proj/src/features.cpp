#include "divrec/features.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace divrec {

void FramingConfig::validate() const
{
    if (frame_len == 0 || hop == 0)
        throw Error(ErrorCode::InvalidArgument, "frame length and hop must be positive");
    if (frame_len > fft_size)
        throw Error(ErrorCode::InvalidArgument, "frame length exceeds FFT size");
    if (!is_power_of_two(fft_size))
        throw Error(ErrorCode::InvalidArgument, "FFT size must be a power of two");
}

FeatureConfig FeatureConfig::overlapping()
{
    FeatureConfig c;
    c.framing.hop = 160;
    return c;
}

void FeatureConfig::validate() const
{
    framing.validate();
    if (sample_rate <= 0 || num_filters < 1 || delta_window < 1)
        throw Error(ErrorCode::InvalidArgument, "sample rate, filter count and delta window must be positive");
    if (num_filters < kNumCepstra)
        throw Error(ErrorCode::InvalidArgument, "need at least 13 filters to keep 13 cepstra");
    if (!(f_min >= 0.0 && f_min < upper_frequency() && upper_frequency() <= sample_rate / 2.0))
        throw Error(ErrorCode::InvalidArgument, "filterbank band must satisfy 0 <= f_min < f_max <= sample_rate / 2");
    if (!(preemphasis >= 0.0 && preemphasis < 1.0))
        throw Error(ErrorCode::InvalidArgument, "pre-emphasis coefficient must lie in [0, 1)");
    if (!(log_floor > 0.0))
        throw Error(ErrorCode::InvalidArgument, "log floor must be positive");
}

double mel(double hz) noexcept { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double mel_inv(double mels) noexcept { return 700.0 * (std::pow(10.0, mels / 2595.0) - 1.0); }

FilterBank build_filterbank(int num_filters, std::size_t fft_size, int sample_rate, double f_min, double f_max)
{
    if (num_filters < 1)
        throw Error(ErrorCode::InvalidArgument, "filterbank needs at least one filter");
    if (!(f_min >= 0.0 && f_min < f_max && f_max <= sample_rate / 2.0))
        throw Error(ErrorCode::InvalidArgument, "filterbank band must satisfy 0 <= f_min < f_max <= sample_rate / 2");

    const auto bins = static_cast<Eigen::Index>(fft_size / 2 + 1);
    const int num_bounds = num_filters + 2;
    FilterBank bank;
    bank.boundary_hz.resize(num_bounds);
    bank.boundary_bins.resize(num_bounds);
    const double mel_lo = mel(f_min);
    const double mel_hi = mel(f_max);
    for (int i = 0; i < num_bounds; ++i) {
        const double m = mel_lo + (mel_hi - mel_lo) * i / (num_bounds - 1);
        const double hz = i == num_bounds - 1 ? f_max : mel_inv(m);
        bank.boundary_hz[i] = hz;
        const auto bin = static_cast<int>(std::floor(static_cast<double>(fft_size + 1) * hz / sample_rate));
        bank.boundary_bins[i] = std::min<int>(bin, static_cast<int>(bins - 1));
    }
    for (int i = 1; i < num_bounds; ++i)
        if (bank.boundary_bins[i] <= bank.boundary_bins[i - 1])
            throw Error(ErrorCode::DegenerateBoundaries,
                        "boundaries " + std::to_string(i - 1) + " and " + std::to_string(i) +
                            " share DFT bin " + std::to_string(bank.boundary_bins[i]) +
                            "; FFT size too small for " + std::to_string(num_filters) + " filters");

    bank.weights = Eigen::MatrixXd::Zero(num_filters, bins);
    for (int i = 0; i < num_filters; ++i) {
        const double lo = bank.boundary_bins[i];
        const double mid = bank.boundary_bins[i + 1];
        const double hi = bank.boundary_bins[i + 2];
        for (int k = bank.boundary_bins[i]; k <= bank.boundary_bins[i + 2]; ++k) {
            const double kk = k;
            bank.weights(i, k) = kk <= mid ? 2.0 * (kk - lo) / ((mid - lo) * (hi - lo))
                                           : 2.0 * (hi - kk) / ((hi - mid) * (hi - lo));
        }
    }
    return bank;
}

FilterBank build_filterbank(const FeatureConfig& config)
{
    return build_filterbank(config.num_filters, config.framing.fft_size, config.sample_rate, config.f_min,
                            config.upper_frequency());
}

Eigen::MatrixXd frame_signal(std::span<const double> samples, const FramingConfig& config)
{
    config.validate();
    if (samples.size() < config.frame_len)
        throw Error(ErrorCode::SignalTooShort, "signal of " + std::to_string(samples.size()) +
                                                   " samples is shorter than one frame");
    const std::size_t count = (samples.size() - config.frame_len) / config.hop + 1;
    Eigen::MatrixXd frames(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(config.frame_len));
    for (std::size_t f = 0; f < count; ++f)
        for (std::size_t i = 0; i < config.frame_len; ++i)
            frames(static_cast<Eigen::Index>(f), static_cast<Eigen::Index>(i)) = samples[f * config.hop + i];
    return frames;
}

Eigen::VectorXd hamming(std::size_t length)
{
    if (length < 2)
        throw Error(ErrorCode::InvalidArgument, "Hamming window needs at least two points");
    Eigen::VectorXd w(static_cast<Eigen::Index>(length));
    const double denom = static_cast<double>(length - 1);
    for (Eigen::Index n = 0; n < w.size(); ++n)
        w(n) = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * static_cast<double>(n) / denom);
    return w;
}

namespace {

Eigen::VectorXd windowed_power(const Eigen::Ref<const Eigen::VectorXd>& frame, const Eigen::VectorXd& window,
                               const FftPlan& plan)
{
    const std::size_t n = plan.size();
    std::vector<std::complex<double>> buf(n);
    for (Eigen::Index i = 0; i < frame.size(); ++i)
        buf[static_cast<std::size_t>(i)] = {frame(i) * window(i), 0.0};
    plan.forward(buf);
    Eigen::VectorXd p(static_cast<Eigen::Index>(n / 2 + 1));
    for (Eigen::Index k = 0; k < p.size(); ++k)
        p(k) = std::norm(buf[static_cast<std::size_t>(k)]) / static_cast<double>(n);
    return p;
}

} // namespace

Eigen::VectorXd power_spectrum(const Eigen::Ref<const Eigen::VectorXd>& frame, const FramingConfig& config)
{
    config.validate();
    if (static_cast<std::size_t>(frame.size()) != config.frame_len)
        throw Error(ErrorCode::ShapeMismatch, "frame length does not match framing config");
    return windowed_power(frame, hamming(config.frame_len), FftPlan(config.fft_size));
}

Eigen::VectorXd log_mel_energies(const Eigen::Ref<const Eigen::VectorXd>& power, const FilterBank& bank, double floor)
{
    if (power.size() != bank.weights.cols())
        throw Error(ErrorCode::ShapeMismatch, "power spectrum length does not match filterbank");
    return (bank.weights * power).array().max(floor).log().matrix();
}

Eigen::MatrixXd dct_ii_matrix(Eigen::Index keep, Eigen::Index length)
{
    if (keep < 1 || keep > length)
        throw Error(ErrorCode::ShapeMismatch, "DCT keep count must lie in [1, input length]");
    Eigen::MatrixXd basis(keep, length);
    for (Eigen::Index j = 0; j < keep; ++j) {
        const double scale = std::sqrt((j == 0 ? 1.0 : 2.0) / static_cast<double>(length));
        for (Eigen::Index i = 0; i < length; ++i)
            basis(j, i) = scale * std::cos(std::numbers::pi * static_cast<double>(j) * (2.0 * i + 1.0) /
                                           (2.0 * static_cast<double>(length)));
    }
    return basis;
}

Eigen::VectorXd dct_ii(const Eigen::Ref<const Eigen::VectorXd>& x, Eigen::Index keep)
{
    return dct_ii_matrix(keep, x.size()) * x;
}

FeatureExtractor::FeatureExtractor(FeatureConfig config)
    : config_(config), plan_((config.validate(), config.framing.fft_size)), window_(hamming(config.framing.frame_len)),
      bank_(build_filterbank(config)), dct_(dct_ii_matrix(kNumCepstra, config.num_filters))
{
}

Eigen::VectorXd FeatureExtractor::power_spectrum(const Eigen::Ref<const Eigen::VectorXd>& frame) const
{
    if (static_cast<std::size_t>(frame.size()) != config_.framing.frame_len)
        throw Error(ErrorCode::ShapeMismatch, "frame length does not match framing config");
    return windowed_power(frame, window_, plan_);
}

Eigen::Matrix<double, Eigen::Dynamic, kNumCepstra> FeatureExtractor::mfcc(const AudioClip& clip) const
{
    if (clip.channels != 1 || clip.sample_rate != config_.sample_rate)
        throw Error(ErrorCode::InvalidArgument, "feature extraction expects mono audio at " +
                                                    std::to_string(config_.sample_rate) + " Hz");
    std::vector<double> signal = clip.samples;
    if (config_.preemphasis > 0.0)
        for (std::size_t i = signal.size(); i-- > 1;)
            signal[i] -= config_.preemphasis * signal[i - 1];

    const Eigen::MatrixXd frames = frame_signal(signal, config_.framing);
    Eigen::Matrix<double, Eigen::Dynamic, kNumCepstra> cepstra(frames.rows(), kNumCepstra);
    for (Eigen::Index t = 0; t < frames.rows(); ++t) {
        const Eigen::VectorXd frame = frames.row(t).transpose();
        const Eigen::VectorXd energies = log_mel_energies(power_spectrum(frame), bank_, config_.log_floor);
        cepstra.row(t) = (dct_ * energies).transpose();
    }
    return cepstra;
}

FeatureMatrix FeatureExtractor::extract(const AudioClip& clip) const
{
    const auto cepstra = mfcc(clip);
    FeatureMatrix out(cepstra.rows(), kFeatureDim);
    out.leftCols<kNumCepstra>() = cepstra;
    out.rightCols<kNumCepstra>() = delta(cepstra, config_.delta_window);
    return out;
}

FeatureMatrix extract(const AudioClip& clip, const FeatureConfig& config)
{
    return FeatureExtractor(config).extract(clip);
}

} // namespace divrec
