#include "cmedl/manifest.hpp"

#include <map>
#include <set>

#include <json.hpp>

#include "cmedl/errors.hpp"
#include "cmedl/image_io.hpp"

namespace cmedl {

using nlohmann::json;

std::string_view to_string(Split s) {
    switch (s) {
        case Split::Train: return "train";
        case Split::Val: return "val";
        case Split::Test: return "test";
    }
    return "?";
}

Split split_from_string(std::string_view s) {
    if (s == "train") return Split::Train;
    if (s == "val") return Split::Val;
    if (s == "test") return Split::Test;
    throw FormatError("unknown split '" + std::string(s) + "'");
}

std::vector<const ManifestEntry*> Manifest::select(Modality m, Split s) const {
    std::vector<const ManifestEntry*> out;
    for (const auto& e : entries)
        if (e.modality == m && e.split == s) out.push_back(&e);
    return out;
}

void check_split_hygiene(const Manifest& m) {
    std::map<std::string, Split> seen;
    for (const auto& e : m.entries) {
        auto [it, inserted] = seen.emplace(e.case_id, e.split);
        if (!inserted && it->second != e.split)
            throw ConfigError("case '" + e.case_id + "' appears in both " + std::string(to_string(it->second)) +
                              " and " + std::string(to_string(e.split)));
    }
}

void save_manifest(const Manifest& m, const std::filesystem::path& file) {
    json entries = json::array();
    for (const auto& e : m.entries) {
        json j;
        j["case_id"] = e.case_id;
        j["modality_tag"] = to_string(e.modality);
        j["split"] = to_string(e.split);
        j["image_path"] = e.image_path;
        if (e.mask_path) j["mask_path"] = *e.mask_path;
        if (e.anatomy_seed) j["anatomy_seed"] = *e.anatomy_seed;
        entries.push_back(std::move(j));
    }
    json root;
    root["version"] = 1;
    root["entries"] = std::move(entries);
    const auto text = root.dump(2) + "\n";
    write_file_bytes(file, std::vector<char>(text.begin(), text.end()));
}

Manifest load_manifest(const std::filesystem::path& file) {
    const auto bytes = read_file_bytes(file);
    json root;
    try {
        root = json::parse(bytes.begin(), bytes.end());
    } catch (const json::exception& e) {
        throw FormatError(file.string() + ": " + e.what());
    }
    Manifest m;
    m.base_dir = file.parent_path();
    try {
        for (const auto& j : root.at("entries")) {
            ManifestEntry e;
            e.case_id = j.at("case_id").get<std::string>();
            e.modality = modality_from_string(j.at("modality_tag").get<std::string>());
            e.split = split_from_string(j.at("split").get<std::string>());
            e.image_path = j.at("image_path").get<std::string>();
            if (j.contains("mask_path")) e.mask_path = j["mask_path"].get<std::string>();
            if (j.contains("anatomy_seed")) e.anatomy_seed = j["anatomy_seed"].get<std::uint64_t>();
            m.entries.push_back(std::move(e));
        }
    } catch (const json::exception& e) {
        throw FormatError(file.string() + ": " + e.what());
    }
    check_split_hygiene(m);
    return m;
}

}  // namespace cmedl
