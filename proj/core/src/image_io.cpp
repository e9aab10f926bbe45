#include "cmedl/image_io.hpp"

#include <fstream>
#include <iterator>

#include "cmedl/byte_io.hpp"
#include "cmedl/errors.hpp"

namespace cmedl {

namespace fs = std::filesystem;
using detail::ByteReader;
using detail::ByteWriter;

std::vector<char> read_file_bytes(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(path.string(), "cannot open for reading");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const fs::path& path, const std::vector<char>& bytes) {
    std::error_code ec;
    if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(path.string(), "cannot open for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError(path.string(), "write failed");
}

namespace {

struct Header {
    std::uint32_t rows = 0;
    std::uint32_t cols = 0;
    Spacing spacing;
    std::uint8_t tag = 0;
};

void write_header(ByteWriter& w, std::string_view magic, int rows, int cols, const Spacing& sp, Modality m) {
    w.magic(magic);
    w.u32(static_cast<std::uint32_t>(rows));
    w.u32(static_cast<std::uint32_t>(cols));
    w.f32(static_cast<float>(sp.row));
    w.f32(static_cast<float>(sp.col));
    w.u8(static_cast<std::uint8_t>(m));
}

Header read_header(ByteReader& r, std::string_view magic) {
    r.expect_magic(magic);
    Header h;
    h.rows = r.u32();
    h.cols = r.u32();
    h.spacing.row = r.f32();
    h.spacing.col = r.f32();
    h.tag = r.u8();
    if (h.tag > 3) throw FormatError(r.context() + ": unknown modality tag " + std::to_string(h.tag));
    return h;
}

void check_payload(const ByteReader& r, const Header& h, std::size_t elem) {
    const std::size_t expect = static_cast<std::size_t>(h.rows) * h.cols * elem;
    if (r.remaining() != expect)
        throw FormatError(r.context() + ": payload size " + std::to_string(r.remaining()) +
                          " does not match " + std::to_string(h.rows) + "x" + std::to_string(h.cols));
}

}  // namespace

void save_image(const fs::path& path, const Image& img) {
    ByteWriter w;
    write_header(w, "CMI1", img.rows(), img.cols(), img.spacing, img.modality);
    for (float v : img.pixels.values()) w.f32(v);
    write_file_bytes(path, w.buffer());
}

Image load_image(const fs::path& path) {
    const auto bytes = read_file_bytes(path);
    ByteReader r(bytes, path.string());
    const auto h = read_header(r, "CMI1");
    check_payload(r, h, 4);
    std::vector<float> px(static_cast<std::size_t>(h.rows) * h.cols);
    for (auto& v : px) v = r.f32();
    return Image(Grid<float>(static_cast<int>(h.rows), static_cast<int>(h.cols), std::move(px)), h.spacing,
                 static_cast<Modality>(h.tag));
}

void save_mask(const fs::path& path, const Mask& mask, Modality tag) {
    for (auto v : mask.pixels.values())
        if (v > 1) throw FormatError("refusing to save non-binary mask: " + path.string());
    ByteWriter w;
    write_header(w, "CMS1", mask.rows(), mask.cols(), mask.spacing, tag);
    for (auto v : mask.pixels.values()) w.u8(v);
    write_file_bytes(path, w.buffer());
}

Mask load_mask(const fs::path& path) {
    const auto bytes = read_file_bytes(path);
    ByteReader r(bytes, path.string());
    const auto h = read_header(r, "CMS1");
    check_payload(r, h, 1);
    std::vector<std::uint8_t> px(static_cast<std::size_t>(h.rows) * h.cols);
    for (auto& v : px) {
        v = r.u8();
        if (v > 1) throw FormatError(path.string() + ": mask value " + std::to_string(v) + " is not binary");
    }
    return Mask(Grid<std::uint8_t>(static_cast<int>(h.rows), static_cast<int>(h.cols), std::move(px)), h.spacing);
}

void save_feature_maps(const fs::path& path, const std::vector<FeatureMapData>& layers) {
    ByteWriter w;
    w.magic("CMF1");
    w.u32(static_cast<std::uint32_t>(layers.size()));
    for (const auto& l : layers) {
        const auto n = static_cast<std::size_t>(l.channels) * l.rows * l.cols;
        if (l.values.size() != n) throw ShapeError("feature map '" + l.name + "' payload does not match its shape");
        w.str16(l.name);
        w.u32(static_cast<std::uint32_t>(l.channels));
        w.u32(static_cast<std::uint32_t>(l.rows));
        w.u32(static_cast<std::uint32_t>(l.cols));
        w.f32(static_cast<float>(l.spacing.row));
        w.f32(static_cast<float>(l.spacing.col));
        for (float v : l.values) w.f32(v);
    }
    write_file_bytes(path, w.buffer());
}

std::vector<FeatureMapData> load_feature_maps(const fs::path& path) {
    const auto bytes = read_file_bytes(path);
    ByteReader r(bytes, path.string());
    r.expect_magic("CMF1");
    const auto n = r.u32();
    std::vector<FeatureMapData> out;
    for (std::uint32_t i = 0; i < n; ++i) {
        FeatureMapData l;
        l.name = r.str16();
        l.channels = static_cast<int>(r.u32());
        l.rows = static_cast<int>(r.u32());
        l.cols = static_cast<int>(r.u32());
        l.spacing.row = r.f32();
        l.spacing.col = r.f32();
        const auto count = static_cast<std::size_t>(l.channels) * l.rows * l.cols;
        r.need(count * 4);
        l.values.resize(count);
        for (auto& v : l.values) v = r.f32();
        out.push_back(std::move(l));
    }
    if (r.remaining() != 0) throw FormatError(path.string() + ": trailing bytes after feature maps");
    return out;
}

}  // namespace cmedl
