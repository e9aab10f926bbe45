#pragma once

#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include "cmedl/image.hpp"
#include "cmedl/manifest.hpp"

namespace cmedl {

/// Parameters of the two-modality phantom model: an elliptical body on a dark
/// background with one tumor blob and a number of distractor blobs. Both
/// modalities share geometry; they differ in contrast, blur, shading and noise.
struct PhantomConfig {
    int image_size = 64;
    int n_cbct = 70;
    int n_mri = 50;
    std::uint64_t anatomy_seed = 0;
    double noise_cbct = 0.15;
    double noise_mri = 0.05;
    double contrast_cbct = 0.2;
    double contrast_mri = 0.8;
    double tumor_radius_min = 5.0;
    double tumor_radius_max = 9.0;
    int n_distractors = 3;

    // Distractor tissue contrast, as a multiple of the modality's tumor contrast.
    double distractor_ratio_cbct = 0.8;
    double distractor_ratio_mri = -0.5;
    // Smooth multiplicative shading amplitude (CBCT only).
    double cbct_shading = 0.1;
    double blur_cbct = 1.0;
    double blur_mri = 0.6;
    Spacing spacing{1.0, 1.0};

    double val_fraction = 0.15;
    double test_fraction = 0.15;
    double mri_val_fraction = 0.0;
    double mri_test_fraction = 0.0;

    /// Throws ConfigError when the configuration is inconsistent.
    void validate() const;
};

struct Ellipse {
    double cy = 0, cx = 0;  // centre (row, col)
    double ry = 0, rx = 0;  // semi-axes
    double angle = 0;       // radians
    bool contains(double y, double x) const;
};

/// Lobulated disc: r(theta) = radius * (1 + a3 sin(3 theta + p3) + a5 sin(5 theta + p5)).
struct Blob {
    double cy = 0, cx = 0, radius = 0;
    double a3 = 0, p3 = 0, a5 = 0, p5 = 0;
    double max_extent() const { return radius * (1.0 + std::abs(a3) + std::abs(a5)); }
    bool contains(double y, double x) const;
};

struct PhantomGeometry {
    int size = 0;
    Ellipse body;
    Blob tumor;
    std::vector<Ellipse> distractors;
};

/// Samples shared anatomy for a seed; throws GenerationError when the tumor or
/// a distractor cannot be placed within 100 rejection-sampling attempts.
PhantomGeometry sample_geometry(std::uint64_t seed, const PhantomConfig& cfg);

Grid<std::uint8_t> body_mask(const PhantomGeometry& g);
Grid<std::uint8_t> tumor_mask(const PhantomGeometry& g);
Grid<std::uint8_t> distractor_mask(const PhantomGeometry& g);

/// Renders a phantom with its ground-truth tumor mask. Deterministic in
/// (seed, cfg, modality); the mask depends on (seed, cfg) only.
std::pair<Image, Mask> generate_phantom(std::uint64_t seed, const PhantomConfig& cfg, Modality modality);

/// Writes images/, masks/ and manifest.json below out_dir. CBCT and MRI cases
/// draw anatomy from disjoint seed sets.
Manifest generate_corpus(const PhantomConfig& cfg, const std::filesystem::path& out_dir);

}  // namespace cmedl
