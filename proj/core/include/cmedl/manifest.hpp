#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cmedl/image.hpp"

namespace cmedl {

enum class Split { Train, Val, Test };

std::string_view to_string(Split s);
Split split_from_string(std::string_view s);

struct ManifestEntry {
    std::string case_id;
    Modality modality = Modality::CBCT;
    Split split = Split::Train;
    std::string image_path;                // relative to the manifest directory
    std::optional<std::string> mask_path;  // relative to the manifest directory
    std::optional<std::uint64_t> anatomy_seed;
};

struct Manifest {
    std::vector<ManifestEntry> entries;
    std::filesystem::path base_dir;  // directory holding manifest.json

    std::vector<const ManifestEntry*> select(Modality m, Split s) const;
    std::filesystem::path resolve(const std::string& rel) const { return base_dir / rel; }
};

/// Throws ConfigError if a case_id appears in more than one split.
void check_split_hygiene(const Manifest& m);

void save_manifest(const Manifest& m, const std::filesystem::path& file);
Manifest load_manifest(const std::filesystem::path& file);

}  // namespace cmedl
