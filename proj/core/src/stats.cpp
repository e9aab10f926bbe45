#include "cmedl/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "cmedl/errors.hpp"

namespace cmedl::metrics {

namespace {

struct RankedDiffs {
    std::vector<double> ranks;  // midranks of |d|
    std::vector<bool> positive;
    std::vector<int> tie_sizes;
};

RankedDiffs rank_differences(std::span<const double> xs, std::span<const double> ys) {
    std::vector<double> d;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double v = xs[i] - ys[i];
        if (!std::isfinite(v)) throw Error("non-finite value in paired test");
        if (v != 0.0) d.push_back(v);
    }
    std::vector<std::size_t> idx(d.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return std::abs(d[a]) < std::abs(d[b]); });
    RankedDiffs out;
    out.ranks.resize(d.size());
    out.positive.resize(d.size());
    for (std::size_t i = 0; i < idx.size();) {
        std::size_t j = i;
        while (j + 1 < idx.size() && std::abs(d[idx[j + 1]]) == std::abs(d[idx[i]])) ++j;
        const double mid = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
        for (std::size_t k = i; k <= j; ++k) out.ranks[idx[k]] = mid;
        out.tie_sizes.push_back(static_cast<int>(j - i + 1));
        i = j + 1;
    }
    for (std::size_t i = 0; i < d.size(); ++i) out.positive[i] = d[i] > 0;
    return out;
}

}  // namespace

WilcoxonResult wilcoxon_paired(std::span<const double> xs, std::span<const double> ys) {
    if (xs.size() != ys.size()) throw Error("paired samples differ in length");
    if (xs.size() < 5) throw Error("paired test needs at least 5 pairs");
    const auto rd = rank_differences(xs, ys);
    WilcoxonResult res;
    res.n_used = static_cast<int>(rd.ranks.size());
    if (res.n_used == 0) return res;
    for (std::size_t i = 0; i < rd.ranks.size(); ++i)
        if (rd.positive[i]) res.w_plus += rd.ranks[i];
    const int n = res.n_used;

    if (n <= kWilcoxonExactLimit) {
        // Midranks are multiples of 1/2, so doubled ranks are integers.
        std::vector<int> r2(n);
        for (int i = 0; i < n; ++i) r2[i] = static_cast<int>(std::lround(2.0 * rd.ranks[i]));
        const int total = std::accumulate(r2.begin(), r2.end(), 0);
        std::vector<double> count(total + 1, 0.0);
        count[0] = 1.0;
        int reach = 0;
        for (int r : r2) {
            for (int s = reach; s >= 0; --s)
                if (count[s] != 0.0) count[s + r] += count[s];
            reach += r;
        }
        const int w2 = static_cast<int>(std::lround(2.0 * res.w_plus));
        const double all = std::ldexp(1.0, n);
        double lower = 0.0, upper = 0.0;
        for (int s = 0; s <= total; ++s) {
            if (s <= w2) lower += count[s];
            if (s >= w2) upper += count[s];
        }
        res.p_value = std::min(1.0, 2.0 * std::min(lower, upper) / all);
        res.exact = true;
        return res;
    }

    const double nn = n;
    const double mu = nn * (nn + 1.0) / 4.0;
    double var = nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0;
    for (int t : rd.tie_sizes) var -= (static_cast<double>(t) * t * t - t) / 48.0;
    res.exact = false;
    if (var <= 0.0) return res;
    const double z = (res.w_plus - mu) / std::sqrt(var);
    res.p_value = std::min(1.0, std::erfc(std::abs(z) / std::sqrt(2.0)));
    return res;
}

std::vector<double> holm_bonferroni(std::span<const double> pvals) {
    const std::size_t m = pvals.size();
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return pvals[a] < pvals[b]; });
    std::vector<double> adj(m);
    double running = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
        const double p = pvals[order[k]];
        if (!(p >= 0.0 && p <= 1.0)) throw Error("p-value outside [0, 1]");
        running = std::max(running, std::min(1.0, static_cast<double>(m - k) * p));
        adj[order[k]] = running;
    }
    return adj;
}

double kl_divergence(std::span<const double> p, std::span<const double> q) {
    if (p.size() != q.size() || p.empty()) throw Error("distributions differ in support");
    double kl = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i)
        if (p[i] > 0.0) kl += p[i] * std::log(p[i] / q[i]);
    return kl;
}

double kl_translation_fidelity(std::span<const Image> set_a, std::span<const Image> set_b, int n_bins) {
    if (set_a.empty() || set_b.empty()) throw Error("KL needs nonempty image sets");
    if (n_bins < 2) throw Error("KL needs at least two bins");
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (auto set : {set_a, set_b})
        for (const auto& img : set)
            for (float v : img.pixels.values()) {
                lo = std::min(lo, static_cast<double>(v));
                hi = std::max(hi, static_cast<double>(v));
            }
    if (!(hi > lo)) throw Error("degenerate intensity range for KL");
    const auto histogram = [&](std::span<const Image> set) {
        std::vector<double> h(n_bins, 0.0);
        double total = 0.0;
        for (const auto& img : set)
            for (float v : img.pixels.values()) {
                auto b = static_cast<int>((static_cast<double>(v) - lo) / (hi - lo) * n_bins);
                h[std::clamp(b, 0, n_bins - 1)] += 1.0;
                total += 1.0;
            }
        double norm = 0.0;
        for (auto& x : h) norm += (x = x / total + kKlSmoothing);
        for (auto& x : h) x /= norm;
        return h;
    };
    return kl_divergence(histogram(set_a), histogram(set_b));
}

double silhouette_score(std::span<const float> points, std::size_t dim, std::span<const int> labels) {
    const std::size_t n = labels.size();
    if (dim == 0 || points.size() != n * dim) throw ShapeError("point table does not match labels");
    std::map<int, std::size_t> sizes;
    for (int l : labels) ++sizes[l];
    if (sizes.size() < 2) throw Error("silhouette needs at least two clusters");
    std::vector<int> cluster(n);
    std::map<int, int> index;
    for (auto& [l, _] : sizes) index.emplace(l, static_cast<int>(index.size()));
    std::vector<std::size_t> csize(sizes.size());
    for (auto& [l, s] : sizes) csize[index[l]] = s;
    for (std::size_t i = 0; i < n; ++i) cluster[i] = index[labels[i]];

    std::vector<double> sums(sizes.size());
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        std::fill(sums.begin(), sums.end(), 0.0);
        const float* pi = &points[i * dim];
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            const float* pj = &points[j * dim];
            double d2 = 0.0;
            for (std::size_t k = 0; k < dim; ++k) {
                const double t = static_cast<double>(pi[k]) - pj[k];
                d2 += t * t;
            }
            sums[cluster[j]] += std::sqrt(d2);
        }
        const int ci = cluster[i];
        if (csize[ci] < 2) continue;  // singleton clusters score 0
        const double a = sums[ci] / static_cast<double>(csize[ci] - 1);
        double b = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < sums.size(); ++c)
            if (static_cast<int>(c) != ci) b = std::min(b, sums[c] / static_cast<double>(csize[c]));
        const double denom = std::max(a, b);
        total += denom > 0.0 ? (b - a) / denom : 0.0;
    }
    return total / static_cast<double>(n);
}

double mean(std::span<const double> v) {
    if (v.empty()) return 0.0;
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_sd(std::span<const double> v) {
    if (v.size() < 2) return 0.0;
    const double m = mean(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

}  // namespace cmedl::metrics
