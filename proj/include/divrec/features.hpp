#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "divrec/audio_io.hpp"
#include "divrec/error.hpp"
#include "divrec/fft.hpp"
#include "divrec/labels.hpp"

namespace divrec {

inline constexpr int kNumCepstra = 13;
inline constexpr int kFeatureDim = 2 * kNumCepstra;
inline constexpr int kNumMelFilters = 40;

/// Per-frame rows: columns 0-12 are MFCCs, 13-25 their deltas.
using FeatureMatrix = Eigen::Matrix<double, Eigen::Dynamic, kFeatureDim>;
using FeatureVector = Eigen::Matrix<double, kFeatureDim, 1>;

struct AggregatedFeature {
    FeatureVector vector = FeatureVector::Zero();
    std::optional<Division> label;
    std::string source_id;
};

struct FramingConfig {
    std::size_t frame_len = 400; // 25 ms at 16 kHz
    std::size_t hop = 400;       // non-overlapping: 10 s -> 400 frames
    std::size_t fft_size = 512;

    void validate() const;
};

struct FeatureConfig {
    FramingConfig framing;
    int sample_rate = kTargetSampleRate;
    int num_filters = kNumMelFilters;
    double f_min = 0.0;
    double f_max = 0.0; // 0 selects sample_rate / 2
    double preemphasis = 0.0; // 0 disables; 0.97 is the usual setting
    int delta_window = 2;
    double log_floor = 1e-10;

    /// Conventional 25 ms / 10 ms framing.
    static FeatureConfig overlapping();

    double upper_frequency() const noexcept { return f_max > 0.0 ? f_max : sample_rate / 2.0; }
    void validate() const;
};

/// Mel scale: 2595 * log10(1 + f / 700).
double mel(double hz) noexcept;
double mel_inv(double mels) noexcept;

/// Equal-area triangular filters. Row i is non-zero only on
/// [boundary_bins[i], boundary_bins[i + 2]].
struct FilterBank {
    Eigen::MatrixXd weights;        // num_filters x (fft_size / 2 + 1)
    std::vector<int> boundary_bins; // num_filters + 2 DFT bin indices
    std::vector<double> boundary_hz;

    Eigen::Index num_filters() const noexcept { return weights.rows(); }
};

/// Boundaries are spaced uniformly in mel between f_min and f_max and mapped
/// to bin floor((fft_size + 1) * f / sample_rate). Filter i rises as
/// 2(k - b[i-1]) / ((b[i] - b[i-1])(b[i+1] - b[i-1])) and falls symmetrically,
/// which gives every filter unit area.
FilterBank build_filterbank(int num_filters, std::size_t fft_size, int sample_rate, double f_min, double f_max);
FilterBank build_filterbank(const FeatureConfig& config);

/// Frames as rows, taken at offsets 0, hop, 2*hop, ...; a trailing partial
/// frame is dropped.
Eigen::MatrixXd frame_signal(std::span<const double> samples, const FramingConfig& config);

/// Symmetric Hamming window, 0.54 - 0.46 cos(2 pi n / (N - 1)).
Eigen::VectorXd hamming(std::size_t length);

/// |DFT(frame * hamming)|^2 / fft_size for bins 0..fft_size/2, the frame
/// zero-padded to fft_size.
Eigen::VectorXd power_spectrum(const Eigen::Ref<const Eigen::VectorXd>& frame, const FramingConfig& config);

/// Natural log of the filterbank energies, floored at `floor` before the log.
Eigen::VectorXd log_mel_energies(const Eigen::Ref<const Eigen::VectorXd>& power, const FilterBank& bank,
                                 double floor = 1e-10);

/// Rows are the first `keep` orthonormal DCT-II basis vectors of the given
/// length: sqrt(a_j / N) cos(pi j (2i + 1) / 2N), a_0 = 1, a_j = 2.
Eigen::MatrixXd dct_ii_matrix(Eigen::Index keep, Eigen::Index length);

/// First `keep` coefficients of the orthonormal DCT-II.
Eigen::VectorXd dct_ii(const Eigen::Ref<const Eigen::VectorXd>& x, Eigen::Index keep = kNumCepstra);

/// Regression deltas over +-window frames with edge frames clamped:
/// d_t = sum_n n (c_{t+n} - c_{t-n}) / (2 sum_n n^2).
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Derived::ColsAtCompileTime>
delta(const Eigen::MatrixBase<Derived>& c, int window = 2)
{
    using Scalar = typename Derived::Scalar;
    const Eigen::Index rows = c.rows();
    if (rows < 1)
        throw Error(ErrorCode::SignalTooShort, "delta needs at least one frame");
    Eigen::Matrix<Scalar, Eigen::Dynamic, Derived::ColsAtCompileTime> d(rows, c.cols());
    d.setZero();
    Scalar denom = 0;
    for (int n = 1; n <= window; ++n)
        denom += Scalar(n * n);
    denom *= 2;
    for (Eigen::Index t = 0; t < rows; ++t) {
        for (int n = 1; n <= window; ++n) {
            const Eigen::Index ahead = std::min<Eigen::Index>(t + n, rows - 1);
            const Eigen::Index behind = std::max<Eigen::Index>(t - n, 0);
            d.row(t) += Scalar(n) * (c.row(ahead) - c.row(behind));
        }
    }
    return d / denom;
}

/// Column-wise mean of a feature matrix.
template <typename Derived>
FeatureVector aggregate(const Eigen::MatrixBase<Derived>& features)
{
    if (features.rows() < 1)
        throw Error(ErrorCode::SignalTooShort, "cannot aggregate an empty feature matrix");
    if (features.cols() != kFeatureDim)
        throw Error(ErrorCode::ShapeMismatch, "feature matrix must have 26 columns");
    return features.colwise().mean().transpose();
}

/// Reusable MFCC + delta extractor; holds the FFT plan, window and
/// filterbank so that repeated calls skip setup. Immutable and shareable.
class FeatureExtractor {
public:
    explicit FeatureExtractor(FeatureConfig config = {});

    const FeatureConfig& config() const noexcept { return config_; }
    const FilterBank& filterbank() const noexcept { return bank_; }

    Eigen::VectorXd power_spectrum(const Eigen::Ref<const Eigen::VectorXd>& frame) const;

    /// Static cepstra only, T x 13.
    Eigen::Matrix<double, Eigen::Dynamic, kNumCepstra> mfcc(const AudioClip& clip) const;

    /// T x 26: MFCCs followed by their deltas.
    FeatureMatrix extract(const AudioClip& clip) const;

private:
    FeatureConfig config_;
    FftPlan plan_;
    Eigen::VectorXd window_;
    FilterBank bank_;
    Eigen::MatrixXd dct_;
};

FeatureMatrix extract(const AudioClip& clip, const FeatureConfig& config = {});

} // namespace divrec
