#include "cmedl/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "cmedl/filters.hpp"
#include "cmedl/rng.hpp"

namespace cmedl {

namespace {

Grid<double> smooth_field(Rng& rng, int rows, int cols, double stddev, double sigma) {
    std::normal_distribution<double> noise(0.0, stddev);
    Grid<double> f(rows, cols);
    for (auto& v : f.values()) v = noise(rng);
    return gaussian_blur(f, sigma);
}

}  // namespace

AugmentParams sample_augment(std::uint64_t seed, int rows, int cols, const AugmentRanges& ranges) {
    auto rng = make_rng(seed, "augment");
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    AugmentParams p;
    p.flip = u01(rng) < ranges.flip_probability;
    p.scale = ranges.scale_min + (ranges.scale_max - ranges.scale_min) * u01(rng);
    p.angle_deg = ranges.max_rotation_deg * (2.0 * u01(rng) - 1.0);
    if (ranges.elastic_stddev_px > 0.0) {
        p.disp_row = smooth_field(rng, rows, cols, ranges.elastic_stddev_px, ranges.elastic_smoothing_px);
        p.disp_col = smooth_field(rng, rows, cols, ranges.elastic_stddev_px, ranges.elastic_smoothing_px);
    }
    return p;
}

std::pair<Image, Mask> apply_augment(const Image& img, const Mask& mask, const AugmentParams& p) {
    require_aligned(img, mask);
    const int rows = img.rows(), cols = img.cols();
    const double cy = (rows - 1) / 2.0, cx = (cols - 1) / 2.0;
    const double th = p.angle_deg * std::numbers::pi / 180.0;
    const double cs = std::cos(th), sn = std::sin(th);
    const double inv_scale = p.scale > 0.0 ? 1.0 / p.scale : 1.0;
    const bool elastic = !p.disp_row.empty();

    Grid<float> out_px(rows, cols);
    Grid<std::uint8_t> out_mask(rows, cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) {
            const double oc = p.flip ? (cols - 1 - c) : c;
            const double dy = r - cy, dx = oc - cx;
            double sy = cy + inv_scale * (cs * dy + sn * dx);
            double sx = cx + inv_scale * (-sn * dy + cs * dx);
            if (elastic) {
                sy += p.disp_row(r, c);
                sx += p.disp_col(r, c);
            }
            sy = std::clamp(sy, 0.0, rows - 1.0);
            sx = std::clamp(sx, 0.0, cols - 1.0);

            const int y0 = static_cast<int>(std::floor(sy)), x0 = static_cast<int>(std::floor(sx));
            const int y1 = std::min(y0 + 1, rows - 1), x1 = std::min(x0 + 1, cols - 1);
            const double fy = sy - y0, fx = sx - x0;
            const auto& src = img.pixels;
            const double top = src(y0, x0) + fx * (src(y0, x1) - src(y0, x0));
            const double bot = src(y1, x0) + fx * (src(y1, x1) - src(y1, x0));
            out_px(r, c) = static_cast<float>(top + fy * (bot - top));

            const int ny = std::clamp(static_cast<int>(std::lround(sy)), 0, rows - 1);
            const int nx = std::clamp(static_cast<int>(std::lround(sx)), 0, cols - 1);
            out_mask(r, c) = mask.pixels(ny, nx);
        }
    return {Image(std::move(out_px), img.spacing, img.modality), Mask(std::move(out_mask), mask.spacing)};
}

std::pair<Image, Mask> augment(const Image& img, const Mask& mask, std::uint64_t seed, const AugmentRanges& ranges) {
    return apply_augment(img, mask, sample_augment(seed, img.rows(), img.cols(), ranges));
}

}  // namespace cmedl
