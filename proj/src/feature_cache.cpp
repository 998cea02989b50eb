#include "divrec/feature_cache.hpp"

#include <cstdlib>

#include "divrec/binary_io.hpp"
#include "divrec/csv.hpp"

namespace divrec {

std::string encode_feature_cache(const std::vector<AggregatedFeature>& records)
{
    bin::Writer w;
    w.bytes(kFeatureCacheMagic);
    w.u64(records.size());
    for (const AggregatedFeature& rec : records) {
        w.u8(rec.label ? static_cast<std::uint8_t>(index_of(*rec.label)) : kUnlabeled);
        w.u32(static_cast<std::uint32_t>(rec.source_id.size()));
        w.bytes(rec.source_id);
        for (Eigen::Index i = 0; i < kFeatureDim; ++i)
            w.f64(rec.vector(i));
    }
    return std::move(w.data());
}

std::vector<AggregatedFeature> decode_feature_cache(std::string_view bytes)
{
    bin::Reader r(bytes, ErrorCode::MalformedFile);
    if (bytes.size() < kFeatureCacheMagic.size() || r.bytes(kFeatureCacheMagic.size()) != kFeatureCacheMagic)
        throw Error(ErrorCode::MalformedFile, "not a DIVFEAT1 feature cache");
    const std::uint64_t count = r.u64();
    // Smallest possible record: label, length, 26 reals.
    if (count > r.remaining() / (1 + 4 + 8 * kFeatureDim))
        throw Error(ErrorCode::MalformedFile, "record count exceeds file size");
    std::vector<AggregatedFeature> out(count);
    for (AggregatedFeature& rec : out) {
        const std::uint8_t label = r.u8();
        if (label != kUnlabeled) {
            rec.label = division_from_index(label);
            if (!rec.label)
                throw Error(ErrorCode::MalformedFile, "label byte " + std::to_string(label) + " out of range");
        }
        rec.source_id = std::string(r.bytes(r.u32()));
        for (Eigen::Index i = 0; i < kFeatureDim; ++i)
            rec.vector(i) = r.f64();
    }
    if (r.remaining() != 0)
        throw Error(ErrorCode::MalformedFile, "trailing bytes after last record");
    return out;
}

void save_feature_cache(const std::vector<AggregatedFeature>& records, const std::string& path)
{
    bin::write_file(path, encode_feature_cache(records));
}

std::vector<AggregatedFeature> load_feature_cache(const std::string& path)
{
    return decode_feature_cache(bin::read_file(path));
}

std::string feature_cache_to_csv(const std::vector<AggregatedFeature>& records)
{
    std::string out = "label,source_id";
    for (int i = 0; i < kFeatureDim; ++i)
        out += ",f" + std::to_string(i);
    out += '\n';
    for (const AggregatedFeature& rec : records) {
        out += rec.label ? std::string(name_of(*rec.label)) : std::string();
        out += ',';
        out += csv::escape(rec.source_id);
        for (Eigen::Index i = 0; i < kFeatureDim; ++i) {
            out += ',';
            out += csv::format_real(rec.vector(i));
        }
        out += '\n';
    }
    return out;
}

std::vector<AggregatedFeature> feature_cache_from_csv(std::string_view text)
{
    const auto rows = csv::lines(text);
    if (rows.empty() || csv::split_line(rows.front()).size() != 2 + kFeatureDim)
        throw Error(ErrorCode::MalformedFile, "feature CSV header must have 28 columns");
    std::vector<AggregatedFeature> out;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        if (rows[i].empty())
            continue;
        const auto fields = csv::split_line(rows[i]);
        if (fields.size() != 2 + kFeatureDim)
            throw Error(ErrorCode::MalformedFile, "feature CSV row " + std::to_string(i) + " has wrong column count");
        AggregatedFeature rec;
        if (!fields[0].empty()) {
            rec.label = division_from_name(fields[0]);
            if (!rec.label)
                throw Error(ErrorCode::MalformedFile, "unknown division '" + fields[0] + "'");
        }
        rec.source_id = fields[1];
        for (int k = 0; k < kFeatureDim; ++k) {
            char* end = nullptr;
            rec.vector(k) = std::strtod(fields[2 + k].c_str(), &end);
            if (end == fields[2 + k].c_str() || *end != '\0')
                throw Error(ErrorCode::MalformedFile, "bad real '" + fields[2 + k] + "'");
        }
        out.push_back(std::move(rec));
    }
    return out;
}

} // namespace divrec
