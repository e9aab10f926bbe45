#include "hashing.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <memory>

#include "cmedl/errors.hpp"
#include "cmedl/image_io.hpp"

namespace cmedl::cli {

namespace {

std::string sha1_hex(std::string_view a, std::string_view b = {}) {
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha1(), nullptr) != 1 ||
        EVP_DigestUpdate(ctx.get(), a.data(), a.size()) != 1 ||
        EVP_DigestUpdate(ctx.get(), b.data(), b.size()) != 1 || EVP_DigestFinal_ex(ctx.get(), md, &len) != 1)
        throw Error("sha1 failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned i = 0; i < len; ++i) {
        out += hex[md[i] >> 4];
        out += hex[md[i] & 15];
    }
    return out;
}

}  // namespace

std::string git_blob_hash(std::string_view bytes) {
    const std::string header = "blob " + std::to_string(bytes.size()) + std::string(1, '\0');
    return sha1_hex(header, bytes);
}

std::string git_blob_hash_file(const std::filesystem::path& path) {
    const auto bytes = read_file_bytes(path);
    return git_blob_hash(std::string_view(bytes.data(), bytes.size()));
}

std::string tree_hash(std::vector<std::pair<std::string, std::string>> name_and_blob) {
    std::sort(name_and_blob.begin(), name_and_blob.end());
    std::string listing;
    for (const auto& [name, blob] : name_and_blob) listing += blob + " " + name + "\n";
    return sha1_hex(listing);
}

std::string corpus_hash(const Manifest& m, const std::filesystem::path& manifest_file) {
    std::vector<std::pair<std::string, std::string>> items{{"manifest.json", git_blob_hash_file(manifest_file)}};
    for (const auto& e : m.entries) {
        items.emplace_back(e.image_path, git_blob_hash_file(m.resolve(e.image_path)));
        if (e.mask_path) items.emplace_back(*e.mask_path, git_blob_hash_file(m.resolve(*e.mask_path)));
    }
    return tree_hash(std::move(items));
}

std::string directory_hash(const std::filesystem::path& dir) {
    std::vector<std::pair<std::string, std::string>> items;
    for (const auto& e : std::filesystem::recursive_directory_iterator(dir))
        if (e.is_regular_file())
            items.emplace_back(std::filesystem::relative(e.path(), dir).generic_string(), git_blob_hash_file(e.path()));
    return tree_hash(std::move(items));
}

}  // namespace cmedl::cli
