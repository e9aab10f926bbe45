#pragma once

#include <span>
#include <utility>
#include <vector>

#include "cmedl/image.hpp"
#include "cmedl/preprocess.hpp"

namespace cmedl::metrics {

/// Surface-DSC tolerance derived from inter-rater HD95 variation.
inline constexpr double kDefaultSurfaceToleranceMm = 4.38;

/// Stack of aligned 2D masks; slice_thickness is the z spacing in mm.
struct VolumeMask {
    std::vector<Mask> slices;
    double slice_thickness = 1.0;

    VolumeMask() = default;
    VolumeMask(std::vector<Mask> s, double thickness);
    explicit VolumeMask(Mask single, double thickness = 1.0);

    int depth() const noexcept { return static_cast<int>(slices.size()); }
    int rows() const { return slices.front().rows(); }
    int cols() const { return slices.front().cols(); }
    Spacing spacing() const { return slices.front().spacing; }
    std::size_t count() const;
    bool empty() const { return count() == 0; }
};

/// Re-embeds patch masks into their source frame; overlaps combine by OR.
Mask stitch_slice(std::span<const std::pair<Mask, CropWindow>> patches);
VolumeMask stitch_volume(const std::vector<std::vector<std::pair<Mask, CropWindow>>>& slices, double thickness);

/// 2|A∩B| / (|A|+|B|); 1 when both are empty.
double dsc(const VolumeMask& a, const VolumeMask& b);
double dsc(const Mask& a, const Mask& b);

/// Foreground voxels with at least one in-plane 4-neighbour in the background
/// (the frame border counts as background). Returned as (z, row, col).
struct Voxel {
    int z, r, c;
};
std::vector<Voxel> surface_voxels(const VolumeMask& m);

/// Squared Euclidean distance (mm^2) from every voxel to the nearest seed
/// voxel, exact, separable lower-envelope transform. Seeds empty => +inf.
std::vector<double> squared_distance_transform(int depth, int rows, int cols, std::span<const Voxel> seeds,
                                               double dz, double dr, double dc);

/// Distances (mm) from each surface voxel of `from` to the surface of `to`.
std::vector<double> directed_surface_distances(const VolumeMask& from, const VolumeMask& to);

/// Boundary overlap at tolerance tau: (|S_a ∩ B_b| + |S_b ∩ B_a|) / (|S_a| + |S_b|).
/// 1 when both masks are empty, 0 when exactly one is. Throws on tau < 0.
double surface_dsc(const VolumeMask& a, const VolumeMask& b, double tau_mm = kDefaultSurfaceToleranceMm);
double surface_dsc(const Mask& a, const Mask& b, double tau_mm = kDefaultSurfaceToleranceMm);

/// 95th percentile (type-7 interpolation) of the pooled directed surface
/// distances in both directions. Throws Error for an empty mask.
double hd95(const VolumeMask& a, const VolumeMask& b);
double hd95(const Mask& a, const Mask& b);

/// Type-7 percentile (linear interpolation between order statistics), q in [0,1].
double percentile_linear(std::vector<double> values, double q);

}  // namespace cmedl::metrics
