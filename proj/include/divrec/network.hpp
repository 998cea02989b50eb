#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "divrec/error.hpp"
#include "divrec/features.hpp"
#include "divrec/labels.hpp"
#include "divrec/random.hpp"

namespace divrec {

enum class Activation : std::uint8_t { None = 0, Relu = 1, Softmax = 2 };

enum class Mode { Training, Inference };

struct LayerSpec {
    Eigen::Index in_dim = 0;
    Eigen::Index out_dim = 0;
    Activation activation = Activation::Relu;
    std::optional<double> dropout_after;

    friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

/// The dense chain 26-128-256-256-64-32-8 with ReLU hidden layers, softmax
/// output and 20% dropout after the second 256-unit layer and the 64-unit
/// layer. 121,064 trainable parameters.
inline std::vector<LayerSpec> division_architecture()
{
    return {
        {kFeatureDim, 128, Activation::Relu, std::nullopt},
        {128, 256, Activation::Relu, std::nullopt},
        {256, 256, Activation::Relu, 0.2},
        {256, 64, Activation::Relu, 0.2},
        {64, 32, Activation::Relu, std::nullopt},
        {32, kNumDivisions, Activation::Softmax, std::nullopt},
    };
}

inline void validate_architecture(const std::vector<LayerSpec>& specs)
{
    if (specs.empty())
        throw Error(ErrorCode::ShapeMismatch, "network needs at least one layer");
    for (std::size_t i = 0; i < specs.size(); ++i) {
        const LayerSpec& s = specs[i];
        if (s.in_dim < 1 || s.out_dim < 1)
            throw Error(ErrorCode::ShapeMismatch, "layer dimensions must be positive");
        if (i > 0 && s.in_dim != specs[i - 1].out_dim)
            throw Error(ErrorCode::ShapeMismatch, "layer " + std::to_string(i) + " input does not match previous output");
        if (s.dropout_after && !(*s.dropout_after > 0.0 && *s.dropout_after < 1.0))
            throw Error(ErrorCode::InvalidArgument, "dropout rate must lie in (0, 1)");
    }
}

template <typename Scalar>
struct DenseLayer {
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

    Matrix weights; // out_dim x in_dim
    Vector bias;    // out_dim

    Eigen::Index param_count() const noexcept { return weights.size() + bias.size(); }
};

/// Weights and biases for a chain of dense layers. Gradients share this type.
template <typename Scalar>
class NetworkParams {
public:
    using Layer = DenseLayer<Scalar>;

    NetworkParams() : NetworkParams(division_architecture()) {}

    /// All-zero parameters for the given chain.
    explicit NetworkParams(std::vector<LayerSpec> specs) : specs_(std::move(specs))
    {
        validate_architecture(specs_);
        layers_.reserve(specs_.size());
        for (const LayerSpec& s : specs_)
            layers_.push_back({Layer::Matrix::Zero(s.out_dim, s.in_dim), Layer::Vector::Zero(s.out_dim)});
    }

    const std::vector<LayerSpec>& specs() const noexcept { return specs_; }
    std::size_t num_layers() const noexcept { return layers_.size(); }
    Layer& layer(std::size_t i) { return layers_.at(i); }
    const Layer& layer(std::size_t i) const { return layers_.at(i); }
    Eigen::Index input_dim() const noexcept { return specs_.front().in_dim; }
    Eigen::Index output_dim() const noexcept { return specs_.back().out_dim; }

    NetworkParams zeros_like() const { return NetworkParams(specs_); }

    bool all_finite() const
    {
        for (const Layer& l : layers_)
            if (!l.weights.allFinite() || !l.bias.allFinite())
                return false;
        return true;
    }

    friend bool operator==(const NetworkParams& a, const NetworkParams& b)
    {
        if (a.specs_ != b.specs_)
            return false;
        for (std::size_t i = 0; i < a.layers_.size(); ++i)
            if (a.layers_[i].weights != b.layers_[i].weights || a.layers_[i].bias != b.layers_[i].bias)
                return false;
        return true;
    }

private:
    std::vector<LayerSpec> specs_;
    std::vector<Layer> layers_;
};

template <typename Scalar>
using Gradients = NetworkParams<Scalar>;

inline Eigen::Index param_count(const LayerSpec& s) noexcept { return s.out_dim * s.in_dim + s.out_dim; }

inline Eigen::Index param_count(const std::vector<LayerSpec>& specs) noexcept
{
    Eigen::Index total = 0;
    for (const LayerSpec& s : specs)
        total += param_count(s);
    return total;
}

template <typename Scalar>
Eigen::Index param_count(const NetworkParams<Scalar>& params) noexcept
{
    Eigen::Index total = 0;
    for (std::size_t i = 0; i < params.num_layers(); ++i)
        total += params.layer(i).param_count();
    return total;
}

/// Glorot-uniform weights in (-L, L), L = sqrt(6 / (in + out)); zero biases.
/// Layers are filled in order, each weight matrix row by row.
template <typename Scalar = double>
NetworkParams<Scalar> init_params(std::uint64_t seed, std::vector<LayerSpec> specs = division_architecture())
{
    NetworkParams<Scalar> params(std::move(specs));
    Rng rng(seed);
    for (std::size_t l = 0; l < params.num_layers(); ++l) {
        auto& w = params.layer(l).weights;
        const double limit = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
        for (Eigen::Index r = 0; r < w.rows(); ++r)
            for (Eigen::Index c = 0; c < w.cols(); ++c)
                w(r, c) = Scalar(rng.uniform(-limit, limit));
    }
    return params;
}

template <typename Derived>
auto relu(const Eigen::MatrixBase<Derived>& y)
{
    return y.cwiseMax(typename Derived::Scalar(0));
}

/// Column-wise softmax with the column maximum subtracted first.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> softmax(const Eigen::MatrixBase<Derived>& z)
{
    using Matrix = Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    Matrix out = (z.rowwise() - z.colwise().maxCoeff()).array().exp().matrix();
    out.array().rowwise() /= out.colwise().sum().array();
    return out;
}

/// Inverted-dropout mask: each entry 0 with probability `rate`, otherwise
/// 1 / (1 - rate). Entries are drawn column by column.
template <typename Scalar = double>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> dropout_mask(Eigen::Index rows, Eigen::Index cols, double rate,
                                                                   Rng& rng)
{
    if (!(rate > 0.0 && rate < 1.0))
        throw Error(ErrorCode::InvalidArgument, "dropout rate must lie in (0, 1)");
    const Scalar keep_scale = Scalar(1.0 / (1.0 - rate));
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> mask(rows, cols);
    for (Eigen::Index c = 0; c < cols; ++c)
        for (Eigen::Index r = 0; r < rows; ++r)
            mask(r, c) = rng.uniform() < rate ? Scalar(0) : keep_scale;
    return mask;
}

/// Training mode zeroes units and rescales survivors; inference is identity.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic>
dropout(const Eigen::MatrixBase<Derived>& x, double rate, Mode mode, Rng& rng)
{
    if (mode == Mode::Inference)
        return x;
    return x.cwiseProduct(dropout_mask<typename Derived::Scalar>(x.rows(), x.cols(), rate, rng));
}

/// Everything backward() needs. Samples are columns.
template <typename Scalar>
struct ForwardCache {
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

    std::vector<Matrix> inputs;          // input to layer l (after any dropout)
    std::vector<Matrix> pre_activations; // W x + b of layer l
    std::vector<Matrix> masks;           // dropout mask after layer l, empty if none applied
    Matrix probabilities;                // softmax output, classes x batch
    Mode mode = Mode::Inference;

    bool empty() const noexcept { return inputs.empty(); }
};

namespace detail {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar, typename MaskFn>
ForwardCache<Scalar> forward_impl(const Matrix<Scalar>& x, const NetworkParams<Scalar>& params, Mode mode,
                                  MaskFn&& next_mask)
{
    if (x.rows() != params.input_dim())
        throw Error(ErrorCode::ShapeMismatch, "input has " + std::to_string(x.rows()) + " features, network expects " +
                                                  std::to_string(params.input_dim()));
    ForwardCache<Scalar> cache;
    cache.mode = mode;
    const std::size_t n = params.num_layers();
    cache.inputs.reserve(n);
    cache.pre_activations.reserve(n);
    cache.masks.resize(n);

    Matrix<Scalar> a = x;
    for (std::size_t l = 0; l < n; ++l) {
        const auto& layer = params.layer(l);
        const LayerSpec& spec = params.specs()[l];
        cache.inputs.push_back(a);
        Matrix<Scalar> z = layer.weights * a;
        z.colwise() += layer.bias;
        switch (spec.activation) {
        case Activation::Relu: a = relu(z); break;
        case Activation::Softmax: a = softmax(z); break;
        case Activation::None: a = z; break;
        }
        cache.pre_activations.push_back(std::move(z));
        if (spec.dropout_after && mode == Mode::Training) {
            cache.masks[l] = next_mask(l, a.rows(), a.cols(), *spec.dropout_after);
            a = a.cwiseProduct(cache.masks[l]);
        }
    }
    cache.probabilities = std::move(a);
    return cache;
}

} // namespace detail

/// Forward pass over a batch (features x samples). Training mode draws
/// dropout masks from `rng`; inference mode ignores it.
template <typename Scalar>
ForwardCache<Scalar> forward(const detail::Matrix<Scalar>& x, const NetworkParams<Scalar>& params, Mode mode, Rng* rng)
{
    if (mode == Mode::Training && rng == nullptr)
        throw Error(ErrorCode::InvalidArgument, "training-mode forward needs a random generator");
    return detail::forward_impl(x, params, mode, [&](std::size_t, Eigen::Index r, Eigen::Index c, double rate) {
        return dropout_mask<Scalar>(r, c, rate, *rng);
    });
}

/// Inference-mode forward.
template <typename Scalar>
ForwardCache<Scalar> forward(const detail::Matrix<Scalar>& x, const NetworkParams<Scalar>& params)
{
    return forward(x, params, Mode::Inference, nullptr);
}

/// Training-mode forward with fixed, previously recorded dropout masks.
template <typename Scalar>
ForwardCache<Scalar> forward_with_masks(const detail::Matrix<Scalar>& x, const NetworkParams<Scalar>& params,
                                        const std::vector<detail::Matrix<Scalar>>& masks)
{
    if (masks.size() != params.num_layers())
        throw Error(ErrorCode::ShapeMismatch, "mask list does not match layer count");
    return detail::forward_impl(x, params, Mode::Training,
                                [&](std::size_t l, Eigen::Index r, Eigen::Index c, double) {
                                    if (masks[l].rows() != r || masks[l].cols() != c)
                                        throw Error(ErrorCode::ShapeMismatch, "recorded mask has the wrong shape");
                                    return masks[l];
                                });
}

/// One-hot targets (classes x batch) for label indices.
template <typename Scalar = double>
detail::Matrix<Scalar> one_hot(const std::vector<int>& labels, Eigen::Index classes = kNumDivisions)
{
    detail::Matrix<Scalar> t = detail::Matrix<Scalar>::Zero(classes, static_cast<Eigen::Index>(labels.size()));
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || labels[i] >= classes)
            throw Error(ErrorCode::ShapeMismatch, "label index out of range");
        t(labels[i], static_cast<Eigen::Index>(i)) = Scalar(1);
    }
    return t;
}

/// Gradient of the batch-mean categorical cross-entropy with respect to every
/// weight and bias. Dropout masks recorded in the cache are constants. The
/// output layer must be softmax.
template <typename Scalar>
Gradients<Scalar> backward(const ForwardCache<Scalar>& cache, const NetworkParams<Scalar>& params,
                           const detail::Matrix<Scalar>& targets)
{
    const std::size_t n = params.num_layers();
    if (cache.empty() || cache.inputs.size() != n || cache.pre_activations.size() != n)
        throw Error(ErrorCode::CacheMissing, "backward needs the cache of a forward pass through this network");
    if (params.specs().back().activation != Activation::Softmax)
        throw Error(ErrorCode::ShapeMismatch, "cross-entropy backward requires a softmax output layer");
    if (targets.rows() != cache.probabilities.rows() || targets.cols() != cache.probabilities.cols())
        throw Error(ErrorCode::ShapeMismatch, "targets do not match network output");

    Gradients<Scalar> grads = params.zeros_like();
    const Scalar batch = Scalar(targets.cols());
    detail::Matrix<Scalar> delta = (cache.probabilities - targets) / batch;
    for (std::size_t l = n; l-- > 0;) {
        auto& g = grads.layer(l);
        g.weights.noalias() = delta * cache.inputs[l].transpose();
        g.bias = delta.rowwise().sum();
        if (l == 0)
            break;
        detail::Matrix<Scalar> upstream = params.layer(l).weights.transpose() * delta;
        if (cache.masks[l - 1].size() != 0)
            upstream = upstream.cwiseProduct(cache.masks[l - 1]);
        switch (params.specs()[l - 1].activation) {
        case Activation::Relu:
            upstream = (cache.pre_activations[l - 1].array() > Scalar(0)).select(upstream, Scalar(0));
            break;
        case Activation::None: break;
        case Activation::Softmax:
            throw Error(ErrorCode::ShapeMismatch, "softmax is only supported on the output layer");
        }
        delta = std::move(upstream);
    }
    return grads;
}

/// Index of the largest probability; ties go to the lowest index.
template <typename Derived>
int argmax(const Eigen::MatrixBase<Derived>& v)
{
    int best = 0;
    for (Eigen::Index i = 1; i < v.size(); ++i)
        if (v(i) > v(best))
            best = static_cast<int>(i);
    return best;
}

using Network = NetworkParams<double>;

} // namespace divrec
