#include "cmedl/surface_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cmedl/errors.hpp"

namespace cmedl::metrics {

VolumeMask::VolumeMask(std::vector<Mask> s, double thickness) : slices(std::move(s)), slice_thickness(thickness) {
    if (slices.empty()) throw ShapeError("volume needs at least one slice");
    if (!(thickness > 0)) throw ShapeError("slice thickness must be positive");
    for (const auto& m : slices)
        if (m.rows() != slices[0].rows() || m.cols() != slices[0].cols() || !(m.spacing == slices[0].spacing))
            throw ShapeError("volume slices differ in shape or spacing");
}

VolumeMask::VolumeMask(Mask single, double thickness) : VolumeMask(std::vector<Mask>{std::move(single)}, thickness) {}

std::size_t VolumeMask::count() const {
    std::size_t n = 0;
    for (const auto& s : slices) n += s.count();
    return n;
}

Mask stitch_slice(std::span<const std::pair<Mask, CropWindow>> patches) {
    if (patches.empty()) throw ShapeError("nothing to stitch");
    const auto& w0 = patches.front().second;
    const Spacing sp = patches.front().first.spacing;
    Grid<std::uint8_t> frame(w0.src_rows, w0.src_cols, 0);
    for (const auto& [m, w] : patches) {
        if (w.src_rows != w0.src_rows || w.src_cols != w0.src_cols || !(m.spacing == sp))
            throw ShapeError("patches disagree on the source frame");
        if (m.rows() != w.side || m.cols() != w.side) throw ShapeError("patch size does not match its window");
        for (int r = 0; r < w.side; ++r)
            for (int c = 0; c < w.side; ++c) {
                const int fr = r + w.row0, fc = c + w.col0;
                if (frame.contains(fr, fc) && m.pixels(r, c)) frame(fr, fc) = 1;
            }
    }
    return Mask(std::move(frame), sp);
}

VolumeMask stitch_volume(const std::vector<std::vector<std::pair<Mask, CropWindow>>>& slices, double thickness) {
    std::vector<Mask> out;
    out.reserve(slices.size());
    for (const auto& s : slices) out.push_back(stitch_slice(s));
    return VolumeMask(std::move(out), thickness);
}

namespace {

void require_same_frame(const VolumeMask& a, const VolumeMask& b) {
    if (a.depth() != b.depth() || a.rows() != b.rows() || a.cols() != b.cols())
        throw ShapeError("masks differ in shape");
    if (!(a.spacing() == b.spacing()) || a.slice_thickness != b.slice_thickness)
        throw ShapeError("masks differ in spacing");
}

}  // namespace

double dsc(const VolumeMask& a, const VolumeMask& b) {
    require_same_frame(a, b);
    std::size_t inter = 0, na = 0, nb = 0;
    for (int z = 0; z < a.depth(); ++z) {
        const auto va = a.slices[z].pixels.values(), vb = b.slices[z].pixels.values();
        for (std::size_t i = 0; i < va.size(); ++i) {
            inter += va[i] & vb[i];
            na += va[i];
            nb += vb[i];
        }
    }
    if (na + nb == 0) return 1.0;
    return 2.0 * static_cast<double>(inter) / static_cast<double>(na + nb);
}

double dsc(const Mask& a, const Mask& b) { return dsc(VolumeMask(a), VolumeMask(b)); }

std::vector<Voxel> surface_voxels(const VolumeMask& m) {
    std::vector<Voxel> out;
    for (int z = 0; z < m.depth(); ++z) {
        const auto& g = m.slices[z].pixels;
        for (int r = 0; r < g.rows(); ++r)
            for (int c = 0; c < g.cols(); ++c) {
                if (!g(r, c)) continue;
                const bool edge = !g.contains(r - 1, c) || !g(r - 1, c) || !g.contains(r + 1, c) || !g(r + 1, c) ||
                                  !g.contains(r, c - 1) || !g(r, c - 1) || !g.contains(r, c + 1) || !g(r, c + 1);
                if (edge) out.push_back({z, r, c});
            }
    }
    return out;
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// One-dimensional lower envelope of parabolas w*(q-p)^2 + f[p] (Felzenszwalb &
// Huttenlocher) over a strided line. Infinite samples are skipped.
void edt_line(double* data, int n, std::ptrdiff_t stride, double w, std::vector<double>& f, std::vector<int>& v,
              std::vector<double>& z) {
    f.resize(n);
    v.resize(n);
    z.resize(n + 1);
    for (int i = 0; i < n; ++i) f[i] = data[i * stride];
    int k = -1;
    for (int q = 0; q < n; ++q) {
        if (f[q] == kInf) continue;
        if (k < 0) {
            k = 0;
            v[0] = q;
            z[0] = -kInf;
            z[1] = kInf;
            continue;
        }
        double s;
        while (true) {
            const int p = v[k];
            s = ((f[q] + w * q * q) - (f[p] + w * static_cast<double>(p) * p)) / (2.0 * w * (q - p));
            if (s <= z[k] && k > 0)
                --k;
            else
                break;
        }
        if (s <= z[k]) {
            // k == 0 and the new parabola dominates everywhere.
            v[0] = q;
            z[0] = -kInf;
            z[1] = kInf;
            continue;
        }
        ++k;
        v[k] = q;
        z[k] = s;
        z[k + 1] = kInf;
    }
    if (k < 0) return;  // whole line infinite
    int j = 0;
    for (int q = 0; q < n; ++q) {
        while (z[j + 1] < q) ++j;
        const double d = q - v[j];
        data[q * stride] = w * d * d + f[v[j]];
    }
}

}  // namespace

std::vector<double> squared_distance_transform(int depth, int rows, int cols, std::span<const Voxel> seeds,
                                               double dz, double dr, double dc) {
    const std::size_t plane = static_cast<std::size_t>(rows) * cols;
    std::vector<double> g(plane * depth, kInf);
    if (seeds.empty()) return g;
    for (const auto& s : seeds) g[s.z * plane + static_cast<std::size_t>(s.r) * cols + s.c] = 0.0;
    std::vector<double> f, z;
    std::vector<int> v;
    for (int zz = 0; zz < depth; ++zz)
        for (int r = 0; r < rows; ++r) edt_line(&g[zz * plane + static_cast<std::size_t>(r) * cols], cols, 1, dc * dc, f, v, z);
    for (int zz = 0; zz < depth; ++zz)
        for (int c = 0; c < cols; ++c) edt_line(&g[zz * plane + c], rows, cols, dr * dr, f, v, z);
    if (depth > 1)
        for (std::size_t p = 0; p < plane; ++p)
            edt_line(&g[p], depth, static_cast<std::ptrdiff_t>(plane), dz * dz, f, v, z);
    return g;
}

std::vector<double> directed_surface_distances(const VolumeMask& from, const VolumeMask& to) {
    require_same_frame(from, to);
    const auto src = surface_voxels(from);
    const auto dst = surface_voxels(to);
    const auto sp = from.spacing();
    const auto dt = squared_distance_transform(from.depth(), from.rows(), from.cols(), dst, from.slice_thickness,
                                               sp.row, sp.col);
    const std::size_t plane = static_cast<std::size_t>(from.rows()) * from.cols();
    std::vector<double> out;
    out.reserve(src.size());
    for (const auto& s : src) out.push_back(std::sqrt(dt[s.z * plane + static_cast<std::size_t>(s.r) * from.cols() + s.c]));
    return out;
}

double surface_dsc(const VolumeMask& a, const VolumeMask& b, double tau_mm) {
    if (!(tau_mm >= 0.0)) throw Error("surface DSC tolerance must be non-negative");
    require_same_frame(a, b);
    const bool ea = a.empty(), eb = b.empty();
    if (ea && eb) return 1.0;
    if (ea || eb) return 0.0;
    const auto ab = directed_surface_distances(a, b);
    const auto ba = directed_surface_distances(b, a);
    const double tol = tau_mm * (1.0 + 1e-12);
    const auto within = [&](const std::vector<double>& d) {
        return static_cast<double>(std::count_if(d.begin(), d.end(), [&](double x) { return x <= tol; }));
    };
    return (within(ab) + within(ba)) / static_cast<double>(ab.size() + ba.size());
}

double surface_dsc(const Mask& a, const Mask& b, double tau_mm) {
    return surface_dsc(VolumeMask(a), VolumeMask(b), tau_mm);
}

double percentile_linear(std::vector<double> values, double q) {
    if (values.empty()) throw Error("percentile of an empty set");
    std::sort(values.begin(), values.end());
    const double h = (static_cast<double>(values.size()) - 1.0) * q;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

double hd95(const VolumeMask& a, const VolumeMask& b) {
    require_same_frame(a, b);
    if (a.empty() || b.empty()) throw Error("HD95 is undefined for empty mask");
    auto d = directed_surface_distances(a, b);
    const auto back = directed_surface_distances(b, a);
    d.insert(d.end(), back.begin(), back.end());
    return percentile_linear(std::move(d), 0.95);
}

double hd95(const Mask& a, const Mask& b) { return hd95(VolumeMask(a), VolumeMask(b)); }

}  // namespace cmedl::metrics
