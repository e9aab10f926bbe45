#include "cmedl/filters.hpp"

#include <algorithm>
#include <cmath>
#include <queue>

namespace cmedl {

namespace {

std::vector<double> gaussian_kernel(double sigma) {
    const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<double> k(2 * radius + 1);
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) sum += k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
    for (auto& v : k) v /= sum;
    return k;
}

int mirror(int i, int n) {
    if (n == 1) return 0;
    const int period = 2 * n - 2;
    i = ((i % period) + period) % period;
    return i < n ? i : period - i;
}

}  // namespace

Grid<double> gaussian_blur(const Grid<double>& in, double sigma) {
    if (sigma <= 0.0) return in;
    const auto k = gaussian_kernel(sigma);
    const int radius = static_cast<int>(k.size() / 2);
    const int rows = in.rows(), cols = in.cols();
    Grid<double> tmp(rows, cols), out(rows, cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) {
            double s = 0.0;
            for (int d = -radius; d <= radius; ++d) s += k[d + radius] * in(r, mirror(c + d, cols));
            tmp(r, c) = s;
        }
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) {
            double s = 0.0;
            for (int d = -radius; d <= radius; ++d) s += k[d + radius] * tmp(mirror(r + d, rows), c);
            out(r, c) = s;
        }
    return out;
}

double otsu_threshold(std::span<const float> values) {
    if (values.empty()) return 0.0;
    auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
    const double lo = *lo_it, hi = *hi_it;
    if (hi <= lo) return lo;
    constexpr int kBins = 256;
    std::vector<double> hist(kBins, 0.0);
    const double scale = kBins / (hi - lo);
    for (float v : values) hist[std::min(kBins - 1, static_cast<int>((v - lo) * scale))] += 1.0;
    const double total = static_cast<double>(values.size());
    double sum_all = 0.0;
    for (int i = 0; i < kBins; ++i) sum_all += i * hist[i];
    double w0 = 0.0, sum0 = 0.0, best = -1.0;
    int best_bin = 0;
    for (int t = 0; t < kBins - 1; ++t) {
        w0 += hist[t];
        sum0 += t * hist[t];
        const double w1 = total - w0;
        if (w0 == 0.0 || w1 == 0.0) continue;
        const double m0 = sum0 / w0, m1 = (sum_all - sum0) / w1;
        const double between = w0 * w1 * (m0 - m1) * (m0 - m1);
        if (between > best) {
            best = between;
            best_bin = t;
        }
    }
    // Pixels strictly above the upper edge of best_bin are foreground.
    return lo + (best_bin + 1) / scale;
}

int label_components(const Grid<std::uint8_t>& fg, Grid<int>& labels) {
    const int rows = fg.rows(), cols = fg.cols();
    labels = Grid<int>(rows, cols, 0);
    int next = 0;
    std::vector<std::pair<int, int>> stack;
    for (int r0 = 0; r0 < rows; ++r0)
        for (int c0 = 0; c0 < cols; ++c0) {
            if (!fg(r0, c0) || labels(r0, c0)) continue;
            ++next;
            labels(r0, c0) = next;
            stack.assign(1, {r0, c0});
            while (!stack.empty()) {
                auto [r, c] = stack.back();
                stack.pop_back();
                const int dr[] = {-1, 1, 0, 0}, dc[] = {0, 0, -1, 1};
                for (int k = 0; k < 4; ++k) {
                    const int rr = r + dr[k], cc = c + dc[k];
                    if (fg.contains(rr, cc) && fg(rr, cc) && !labels(rr, cc)) {
                        labels(rr, cc) = next;
                        stack.emplace_back(rr, cc);
                    }
                }
            }
        }
    return next;
}

Grid<std::uint8_t> largest_component(const Grid<std::uint8_t>& fg) {
    Grid<int> labels;
    const int n = label_components(fg, labels);
    Grid<std::uint8_t> out(fg.rows(), fg.cols(), 0);
    if (n == 0) return out;
    std::vector<std::size_t> sizes(n + 1, 0);
    for (int v : labels.values()) ++sizes[v];
    int best = 1;
    for (int l = 2; l <= n; ++l)
        if (sizes[l] > sizes[best]) best = l;
    for (std::size_t i = 0; i < out.size(); ++i) out.storage()[i] = labels.storage()[i] == best;
    return out;
}

Grid<std::uint8_t> fill_holes(const Grid<std::uint8_t>& fg) {
    const int rows = fg.rows(), cols = fg.cols();
    Grid<std::uint8_t> outside(rows, cols, 0);
    std::queue<std::pair<int, int>> q;
    auto seed = [&](int r, int c) {
        if (!fg(r, c) && !outside(r, c)) {
            outside(r, c) = 1;
            q.emplace(r, c);
        }
    };
    for (int r = 0; r < rows; ++r) {
        seed(r, 0);
        seed(r, cols - 1);
    }
    for (int c = 0; c < cols; ++c) {
        seed(0, c);
        seed(rows - 1, c);
    }
    while (!q.empty()) {
        auto [r, c] = q.front();
        q.pop();
        const int dr[] = {-1, 1, 0, 0}, dc[] = {0, 0, -1, 1};
        for (int k = 0; k < 4; ++k) {
            const int rr = r + dr[k], cc = c + dc[k];
            if (fg.contains(rr, cc)) seed(rr, cc);
        }
    }
    Grid<std::uint8_t> out(rows, cols, 0);
    for (std::size_t i = 0; i < out.size(); ++i) out.storage()[i] = outside.storage()[i] ? 0 : 1;
    return out;
}

}  // namespace cmedl
