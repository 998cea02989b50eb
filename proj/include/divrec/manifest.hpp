#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "divrec/labels.hpp"

namespace divrec {

struct ManifestRow {
    std::string audio_path;
    Division division = Division::Barisal;
    std::string speaker_id;
    std::optional<char> gender; // 'M' or 'F'
};

/// CSV with header `audio_path,division,speaker_id,gender`. Paths are unique,
/// divisions use canonical names, speaker ids are non-empty.
struct DatasetManifest {
    std::vector<ManifestRow> rows;

    void validate() const;
};

std::string manifest_to_csv(const DatasetManifest& manifest);
DatasetManifest manifest_from_csv(std::string_view text);
DatasetManifest load_manifest(const std::string& path);
void save_manifest(const DatasetManifest& manifest, const std::string& path);

struct ScanResult {
    DatasetManifest manifest;
    std::vector<std::string> skipped_directories; // not a canonical division name
};

/// Walks root/<Division>/<speaker_id>/*.wav (extension case-insensitive) and
/// returns rows sorted by path. Throws NoAudioFound if nothing matched.
ScanResult scan_corpus(const std::string& root);

} // namespace divrec
