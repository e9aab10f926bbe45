#include "cmedl/preprocess.hpp"

#include <algorithm>
#include <cmath>

#include "cmedl/errors.hpp"
#include "cmedl/filters.hpp"

namespace cmedl {

Grid<std::uint8_t> detect_body(const Image& img) {
    const auto st = image_stats(img);
    if (st.min == st.max) throw Error("no body region");
    const double thr = otsu_threshold(img.pixels.values());
    Grid<std::uint8_t> fg(img.rows(), img.cols(), 0);
    for (std::size_t i = 0; i < fg.size(); ++i) fg.storage()[i] = img.pixels.storage()[i] >= thr;
    auto body = largest_component(fill_holes(fg));
    bool any = false;
    for (auto v : body.values()) any = any || v;
    if (!any) throw Error("no body region");
    return body;
}

namespace {

int place(double centre, int side, int extent) {
    if (extent >= side) {
        const int start = static_cast<int>(std::lround(centre - (side - 1) / 2.0));
        return std::clamp(start, 0, extent - side);
    }
    return -(side - extent) / 2;
}

template <typename T>
Grid<T> crop_grid(const Grid<T>& src, const CropWindow& w, T pad) {
    Grid<T> out(w.side, w.side, pad);
    for (int r = 0; r < w.side; ++r)
        for (int c = 0; c < w.side; ++c) {
            const int sr = r + w.row0, sc = c + w.col0;
            if (src.contains(sr, sc)) out(r, c) = src(sr, sc);
        }
    return out;
}

}  // namespace

CropResult crop_body(const Image& img, int patch_size) {
    if (patch_size < kMinImageSide) throw ConfigError("patch size must be >= 16");
    const auto body = detect_body(img);
    int r0 = img.rows(), r1 = -1, c0 = img.cols(), c1 = -1;
    for (int r = 0; r < img.rows(); ++r)
        for (int c = 0; c < img.cols(); ++c)
            if (body(r, c)) {
                r0 = std::min(r0, r);
                r1 = std::max(r1, r);
                c0 = std::min(c0, c);
                c1 = std::max(c1, c);
            }
    const int extent = std::max(r1 - r0 + 1, c1 - c0 + 1);
    int side = patch_size;
    if (extent > patch_size) side = (extent + 31) / 32 * 32;

    CropWindow w;
    w.side = side;
    w.src_rows = img.rows();
    w.src_cols = img.cols();
    w.row0 = place((r0 + r1) / 2.0, side, img.rows());
    w.col0 = place((c0 + c1) / 2.0, side, img.cols());
    return {apply_crop(img, w), w};
}

Image apply_crop(const Image& img, const CropWindow& w) {
    const float pad = image_stats(img).min;
    return Image(crop_grid(img.pixels, w, pad), img.spacing, img.modality);
}

Mask apply_crop(const Mask& mask, const CropWindow& w) {
    return Mask(crop_grid<std::uint8_t>(mask.pixels, w, 0), mask.spacing);
}

}  // namespace cmedl
