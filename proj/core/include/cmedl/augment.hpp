#pragma once

#include <cstdint>
#include <utility>

#include "cmedl/image.hpp"

namespace cmedl {

/// One sampled geometric transform. The displacement fields are in pixels and
/// sized like the image (empty means no elastic component).
struct AugmentParams {
    bool flip = false;
    double scale = 1.0;
    double angle_deg = 0.0;
    Grid<double> disp_row;
    Grid<double> disp_col;

    static AugmentParams identity() { return {}; }
};

struct AugmentRanges {
    double flip_probability = 0.5;
    double scale_min = 0.9;
    double scale_max = 1.1;
    double max_rotation_deg = 10.0;
    double elastic_stddev_px = 1.5;
    double elastic_smoothing_px = 8.0;
};

AugmentParams sample_augment(std::uint64_t seed, int rows, int cols, const AugmentRanges& ranges = {});

/// Applies one transform to both: bilinear resampling for the image, nearest
/// neighbour for the mask; coordinates outside the frame clamp to the edge.
std::pair<Image, Mask> apply_augment(const Image& img, const Mask& mask, const AugmentParams& p);

std::pair<Image, Mask> augment(const Image& img, const Mask& mask, std::uint64_t seed,
                               const AugmentRanges& ranges = {});

}  // namespace cmedl
