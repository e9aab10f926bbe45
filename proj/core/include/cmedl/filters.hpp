#pragma once

#include <cstdint>
#include <vector>

#include "cmedl/image.hpp"

namespace cmedl {

/// Separable Gaussian smoothing with mirrored borders. sigma <= 0 is a copy.
Grid<double> gaussian_blur(const Grid<double>& in, double sigma);

/// Otsu threshold over a 256-bin histogram of the values.
double otsu_threshold(std::span<const float> values);

/// Labels 4-connected foreground components (labels 1..n, background 0).
/// Returns the number of components.
int label_components(const Grid<std::uint8_t>& fg, Grid<int>& labels);

/// Keeps only the largest 4-connected component (ties: lowest label).
Grid<std::uint8_t> largest_component(const Grid<std::uint8_t>& fg);

/// Fills background regions not 4-connected to the image border.
Grid<std::uint8_t> fill_holes(const Grid<std::uint8_t>& fg);

}  // namespace cmedl
