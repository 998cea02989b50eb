#include "divrec/manifest.hpp"

#include <algorithm>
#include <filesystem>
#include <set>

#include "divrec/binary_io.hpp"
#include "divrec/csv.hpp"
#include "divrec/error.hpp"

namespace fs = std::filesystem;

namespace divrec {

void DatasetManifest::validate() const
{
    std::set<std::string_view> seen;
    for (const ManifestRow& row : rows) {
        if (row.audio_path.empty())
            throw Error(ErrorCode::MalformedFile, "manifest row with empty audio path");
        if (!seen.insert(row.audio_path).second)
            throw Error(ErrorCode::MalformedFile, "duplicate manifest path " + row.audio_path);
        if (row.speaker_id.empty())
            throw Error(ErrorCode::MalformedFile, "empty speaker id for " + row.audio_path);
        if (row.gender && *row.gender != 'M' && *row.gender != 'F')
            throw Error(ErrorCode::MalformedFile, "gender must be M or F for " + row.audio_path);
    }
}

std::string manifest_to_csv(const DatasetManifest& manifest)
{
    std::string out = "audio_path,division,speaker_id,gender\n";
    for (const ManifestRow& row : manifest.rows) {
        out += csv::escape(row.audio_path);
        out += ',';
        out += name_of(row.division);
        out += ',';
        out += csv::escape(row.speaker_id);
        out += ',';
        if (row.gender)
            out += *row.gender;
        out += '\n';
    }
    return out;
}

DatasetManifest manifest_from_csv(std::string_view text)
{
    const auto lines = csv::lines(text);
    if (lines.empty() || csv::split_line(lines.front()) !=
                             std::vector<std::string>{"audio_path", "division", "speaker_id", "gender"})
        throw Error(ErrorCode::MalformedFile, "manifest header must be audio_path,division,speaker_id,gender");
    DatasetManifest manifest;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty())
            continue;
        const auto fields = csv::split_line(lines[i]);
        if (fields.size() != 4)
            throw Error(ErrorCode::MalformedFile, "manifest line " + std::to_string(i + 1) + " needs 4 fields");
        ManifestRow row;
        row.audio_path = fields[0];
        const auto division = division_from_name(fields[1]);
        if (!division)
            throw Error(ErrorCode::MalformedFile, "unknown division '" + fields[1] + "' on line " + std::to_string(i + 1));
        row.division = *division;
        row.speaker_id = fields[2];
        if (fields[3].size() == 1)
            row.gender = fields[3][0];
        else if (!fields[3].empty())
            throw Error(ErrorCode::MalformedFile, "gender must be M, F or empty on line " + std::to_string(i + 1));
        manifest.rows.push_back(std::move(row));
    }
    manifest.validate();
    return manifest;
}

DatasetManifest load_manifest(const std::string& path)
{
    return manifest_from_csv(bin::read_file(path));
}

void save_manifest(const DatasetManifest& manifest, const std::string& path)
{
    manifest.validate();
    bin::write_file(path, manifest_to_csv(manifest));
}

namespace {

bool is_wav(const fs::path& p)
{
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext == ".wav";
}

} // namespace

ScanResult scan_corpus(const std::string& root)
{
    std::error_code ec;
    if (!fs::is_directory(root, ec))
        throw Error(ErrorCode::NoAudioFound, root + " is not a directory");
    ScanResult result;
    for (const auto& division_dir : fs::directory_iterator(root)) {
        if (!division_dir.is_directory())
            continue;
        const std::string name = division_dir.path().filename().string();
        const auto division = division_from_name(name);
        if (!division) {
            result.skipped_directories.push_back(division_dir.path().string());
            continue;
        }
        for (const auto& speaker_dir : fs::directory_iterator(division_dir.path())) {
            if (!speaker_dir.is_directory())
                continue;
            for (const auto& file : fs::directory_iterator(speaker_dir.path())) {
                if (!file.is_regular_file() || !is_wav(file.path()))
                    continue;
                result.manifest.rows.push_back(
                    {file.path().generic_string(), *division, speaker_dir.path().filename().string(), std::nullopt});
            }
        }
    }
    if (result.manifest.rows.empty())
        throw Error(ErrorCode::NoAudioFound, "no <Division>/<speaker>/*.wav files under " + root);
    std::sort(result.manifest.rows.begin(), result.manifest.rows.end(),
              [](const ManifestRow& a, const ManifestRow& b) { return a.audio_path < b.audio_path; });
    std::sort(result.skipped_directories.begin(), result.skipped_directories.end());
    return result;
}

} // namespace divrec
