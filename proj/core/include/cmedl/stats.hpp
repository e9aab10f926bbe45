#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cmedl/image.hpp"

namespace cmedl::metrics {

struct WilcoxonResult {
    double w_plus = 0.0;  // sum of ranks of positive differences
    double p_value = 1.0;
    int n_used = 0;       // pairs left after dropping zero differences
    bool exact = true;
};

/// Paired two-sided signed-rank test. Zero differences are dropped; tied
/// magnitudes get midranks. Exact null for n_used <= 25, otherwise normal
/// approximation with tie correction (no continuity correction).
WilcoxonResult wilcoxon_paired(std::span<const double> xs, std::span<const double> ys);

inline constexpr int kWilcoxonExactLimit = 25;

/// Holm step-down adjusted p-values, returned in input order.
std::vector<double> holm_bonferroni(std::span<const double> pvals);

/// KL(P_a || P_b) between pooled intensity histograms over the joint range.
double kl_translation_fidelity(std::span<const Image> set_a, std::span<const Image> set_b, int n_bins = 256);
double kl_divergence(std::span<const double> p, std::span<const double> q);
inline constexpr double kKlSmoothing = 1e-8;

/// Mean silhouette (Euclidean) of row-major points [n x dim] with integer labels.
double silhouette_score(std::span<const float> points, std::size_t dim, std::span<const int> labels);

double mean(std::span<const double> v);
/// Sample standard deviation (n-1); 0 for fewer than two values.
double sample_sd(std::span<const double> v);

}  // namespace cmedl::metrics
