#include "cmedl/image.hpp"

#include <algorithm>
#include <cmath>

#include "cmedl/errors.hpp"

namespace cmedl {

std::string_view to_string(Modality m) {
    switch (m) {
        case Modality::CBCT: return "CBCT";
        case Modality::MRI: return "MRI";
        case Modality::PMRI: return "PMRI";
        case Modality::PCBCT: return "PCBCT";
    }
    return "?";
}

Modality modality_from_string(std::string_view s) {
    if (s == "CBCT") return Modality::CBCT;
    if (s == "MRI") return Modality::MRI;
    if (s == "PMRI") return Modality::PMRI;
    if (s == "PCBCT") return Modality::PCBCT;
    throw FormatError("unknown modality tag '" + std::string(s) + "'");
}

template <typename T>
Grid<T>::Grid(int rows, int cols, std::vector<T> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (rows < 0 || cols < 0 || data_.size() != static_cast<std::size_t>(rows) * cols)
        throw ShapeError("grid payload does not match " + std::to_string(rows) + "x" + std::to_string(cols));
}

template class Grid<float>;
template class Grid<double>;
template class Grid<std::uint8_t>;
template class Grid<int>;

static void check_geometry(int rows, int cols, const Spacing& sp) {
    if (rows < kMinImageSide || cols < kMinImageSide)
        throw ShapeError("image must be at least 16x16, got " + std::to_string(rows) + "x" + std::to_string(cols));
    if (!(sp.row > 0.0) || !(sp.col > 0.0)) throw ShapeError("pixel spacing must be positive");
}

Image::Image(Grid<float> px, Spacing sp, Modality m) : pixels(std::move(px)), spacing(sp), modality(m) {
    check_geometry(pixels.rows(), pixels.cols(), spacing);
}

Mask::Mask(Grid<std::uint8_t> px, Spacing sp) : pixels(std::move(px)), spacing(sp) {
    check_geometry(pixels.rows(), pixels.cols(), spacing);
    for (auto v : pixels.values())
        if (v > 1) throw FormatError("mask values must be 0 or 1");
}

std::size_t Mask::count() const noexcept {
    std::size_t n = 0;
    for (auto v : pixels.values()) n += v;
    return n;
}

void require_aligned(const Image& img, const Mask& mask) {
    if (img.rows() != mask.rows() || img.cols() != mask.cols())
        throw ShapeError("mask shape does not match image");
    if (!(img.spacing == mask.spacing)) throw ShapeError("mask spacing does not match image");
}

ImageStats image_stats(const Image& img) {
    ImageStats s;
    auto v = img.pixels.values();
    if (v.empty()) return s;
    double sum = 0.0;
    for (float x : v) sum += x;
    s.mean = sum / static_cast<double>(v.size());
    double ss = 0.0;
    for (float x : v) ss += (x - s.mean) * (x - s.mean);
    s.stddev = std::sqrt(ss / static_cast<double>(v.size()));
    auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    s.min = *lo;
    s.max = *hi;
    return s;
}

Image standardize(const Image& img) {
    Image out = img;
    const auto st = image_stats(img);
    auto dst = out.pixels.values();
    if (st.stddev == 0.0 || st.min == st.max) {
        std::fill(dst.begin(), dst.end(), 0.0f);
        return out;
    }
    auto src = img.pixels.values();
    for (std::size_t i = 0; i < src.size(); ++i)
        dst[i] = static_cast<float>((static_cast<double>(src[i]) - st.mean) / st.stddev);
    return out;
}

Image to_network_domain(const Image& standardized) {
    Image out = standardized;
    for (auto& v : out.pixels.values()) v = std::clamp(v / 3.0f, -1.0f, 1.0f);
    return out;
}

}  // namespace cmedl
