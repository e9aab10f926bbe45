#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "cmedl/manifest.hpp"

namespace cmedl::cli {

/// Hex SHA-1 of "blob <size>\0<bytes>", as git hashes file contents.
std::string git_blob_hash(std::string_view bytes);
std::string git_blob_hash_file(const std::filesystem::path& path);

/// SHA-1 over sorted "<blob hash> <name>\n" lines: one identifier for a set of files.
std::string tree_hash(std::vector<std::pair<std::string, std::string>> name_and_blob);

/// Tree hash of the manifest and every image and mask it references.
std::string corpus_hash(const Manifest& m, const std::filesystem::path& manifest_file);

/// Tree hash of all regular files below dir (paths relative to dir).
std::string directory_hash(const std::filesystem::path& dir);

}  // namespace cmedl::cli
