#include "divrec/model_io.hpp"

#include <cmath>
#include <limits>
#include <zlib.h>

#include "divrec/binary_io.hpp"

namespace divrec {

std::uint32_t crc32_of(std::string_view bytes)
{
    uLong crc = crc32(0L, Z_NULL, 0);
    crc = crc32(crc, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size()));
    return static_cast<std::uint32_t>(crc);
}

std::string encode_model(const Network& params)
{
    bin::Writer w;
    w.bytes(kModelMagic);
    w.u8(kModelVersion);
    w.u32(static_cast<std::uint32_t>(params.num_layers()));
    for (const LayerSpec& s : params.specs()) {
        w.u32(static_cast<std::uint32_t>(s.in_dim));
        w.u32(static_cast<std::uint32_t>(s.out_dim));
        w.u8(static_cast<std::uint8_t>(s.activation));
        w.f64(s.dropout_after.value_or(std::numeric_limits<double>::quiet_NaN()));
    }
    for (std::size_t l = 0; l < params.num_layers(); ++l) {
        const auto& layer = params.layer(l);
        for (Eigen::Index r = 0; r < layer.weights.rows(); ++r)
            for (Eigen::Index c = 0; c < layer.weights.cols(); ++c)
                w.f64(layer.weights(r, c));
        for (Eigen::Index r = 0; r < layer.bias.size(); ++r)
            w.f64(layer.bias(r));
    }
    const std::string_view payload = std::string_view(w.data()).substr(kModelMagic.size());
    w.u32(crc32_of(payload));
    return std::move(w.data());
}

Network decode_model(std::string_view bytes)
{
    if (bytes.size() < kModelMagic.size() + 4 || bytes.substr(0, kModelMagic.size()) != kModelMagic)
        throw Error(ErrorCode::MalformedFile, "not a DIVMODL1 model file");
    const std::string_view payload = bytes.substr(kModelMagic.size(), bytes.size() - kModelMagic.size() - 4);
    bin::Reader tail(bytes.substr(bytes.size() - 4), ErrorCode::MalformedFile);
    if (tail.u32() != crc32_of(payload))
        throw Error(ErrorCode::MalformedFile, "model checksum mismatch");

    bin::Reader r(payload, ErrorCode::MalformedFile);
    if (const auto version = r.u8(); version != kModelVersion)
        throw Error(ErrorCode::MalformedFile, "unsupported model version " + std::to_string(version));
    const std::uint32_t count = r.u32();
    if (count == 0 || count > 1024)
        throw Error(ErrorCode::MalformedFile, "implausible layer count");
    std::vector<LayerSpec> specs(count);
    for (LayerSpec& s : specs) {
        s.in_dim = r.u32();
        s.out_dim = r.u32();
        const std::uint8_t tag = r.u8();
        if (tag > static_cast<std::uint8_t>(Activation::Softmax))
            throw Error(ErrorCode::MalformedFile, "unknown activation tag");
        s.activation = static_cast<Activation>(tag);
        if (const double rate = r.f64(); !std::isnan(rate))
            s.dropout_after = rate;
    }
    Network params(specs);
    for (std::size_t l = 0; l < params.num_layers(); ++l) {
        auto& layer = params.layer(l);
        for (Eigen::Index row = 0; row < layer.weights.rows(); ++row)
            for (Eigen::Index c = 0; c < layer.weights.cols(); ++c)
                layer.weights(row, c) = r.f64();
        for (Eigen::Index row = 0; row < layer.bias.size(); ++row)
            layer.bias(row) = r.f64();
    }
    if (r.remaining() != 0)
        throw Error(ErrorCode::MalformedFile, "trailing bytes after model parameters");
    return params;
}

void save_model(const Network& params, const std::string& path)
{
    bin::write_file(path, encode_model(params));
}

Network load_model(const std::string& path)
{
    return decode_model(bin::read_file(path));
}

} // namespace divrec
