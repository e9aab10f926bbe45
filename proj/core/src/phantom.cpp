#include "cmedl/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include "cmedl/errors.hpp"
#include "cmedl/filters.hpp"
#include "cmedl/image_io.hpp"
#include "cmedl/rng.hpp"

namespace cmedl {

namespace {
constexpr int kMaxAttempts = 100;
constexpr double kPi = std::numbers::pi;

double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
}  // namespace

void PhantomConfig::validate() const {
    if (image_size < kMinImageSide) throw ConfigError("image_size must be >= 16");
    if (n_cbct < 0 || n_mri < 0) throw ConfigError("case counts must be non-negative");
    if (!(contrast_mri > contrast_cbct))
        throw ConfigError("contrast_mri must exceed contrast_cbct (MRI carries the better soft-tissue contrast)");
    if (noise_cbct < 0 || noise_mri < 0) throw ConfigError("noise levels must be non-negative");
    if (!(tumor_radius_min > 0) || tumor_radius_max < tumor_radius_min)
        throw ConfigError("tumor_radius_range must satisfy 0 < min <= max");
    if (tumor_radius_max * 1.25 > 0.25 * image_size) throw ConfigError("tumor_radius_range does not fit the image");
    if (n_distractors < 0) throw ConfigError("n_distractors must be non-negative");
    for (double f : {val_fraction, test_fraction, mri_val_fraction, mri_test_fraction})
        if (f < 0.0 || f > 1.0) throw ConfigError("split fractions must lie in [0, 1]");
    if (val_fraction + test_fraction > 1.0 || mri_val_fraction + mri_test_fraction > 1.0)
        throw ConfigError("split fractions sum above 1");
    if (!(spacing.row > 0) || !(spacing.col > 0)) throw ConfigError("spacing must be positive");
}

bool Ellipse::contains(double y, double x) const {
    const double c = std::cos(angle), s = std::sin(angle);
    const double dy = y - cy, dx = x - cx;
    const double u = c * dy + s * dx;
    const double v = -s * dy + c * dx;
    return (u * u) / (ry * ry) + (v * v) / (rx * rx) <= 1.0;
}

bool Blob::contains(double y, double x) const {
    const double dy = y - cy, dx = x - cx;
    const double r = std::hypot(dy, dx);
    if (r == 0.0) return true;
    const double th = std::atan2(dy, dx);
    const double edge = radius * (1.0 + a3 * std::sin(3 * th + p3) + a5 * std::sin(5 * th + p5));
    return r <= edge;
}

namespace {

// True when a disc of radius r at (y, x) lies inside the ellipse.
bool disc_inside(const Ellipse& e, double y, double x, double r) {
    for (int k = 0; k < 32; ++k) {
        const double t = 2 * kPi * k / 32;
        if (!e.contains(y + r * std::sin(t), x + r * std::cos(t))) return false;
    }
    return e.contains(y, x);
}

template <typename Shape>
Grid<std::uint8_t> rasterize(int n, const Shape& s) {
    Grid<std::uint8_t> g(n, n, 0);
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c) g(r, c) = s.contains(r, c) ? 1 : 0;
    return g;
}

}  // namespace

PhantomGeometry sample_geometry(std::uint64_t seed, const PhantomConfig& cfg) {
    cfg.validate();
    auto rng = make_rng(seed, "anatomy");
    const double n = cfg.image_size;
    PhantomGeometry g;
    g.size = cfg.image_size;
    g.body.cy = n / 2.0 - 0.5 + uniform(rng, -n / 24, n / 24);
    g.body.cx = n / 2.0 - 0.5 + uniform(rng, -n / 24, n / 24);
    g.body.ry = uniform(rng, 0.34, 0.41) * n;
    g.body.rx = uniform(rng, 0.38, 0.44) * n;
    g.body.angle = uniform(rng, -0.15, 0.15);

    Blob& t = g.tumor;
    t.radius = uniform(rng, cfg.tumor_radius_min, cfg.tumor_radius_max);
    t.a3 = uniform(rng, 0.0, 0.15);
    t.p3 = uniform(rng, 0.0, 2 * kPi);
    t.a5 = uniform(rng, 0.0, 0.08);
    t.p5 = uniform(rng, 0.0, 2 * kPi);
    bool placed = false;
    for (int a = 0; a < kMaxAttempts && !placed; ++a) {
        t.cy = uniform(rng, g.body.cy - g.body.ry, g.body.cy + g.body.ry);
        t.cx = uniform(rng, g.body.cx - g.body.rx, g.body.cx + g.body.rx);
        placed = disc_inside(g.body, t.cy, t.cx, t.max_extent() + 2.0);
    }
    if (!placed) throw GenerationError("tumor could not be placed inside the body after 100 attempts");

    for (int d = 0; d < cfg.n_distractors; ++d) {
        Ellipse e;
        double major = 0.0;
        bool ok = false;
        // Size is redrawn per attempt and shrinks as attempts fail, so crowded
        // bodies still receive every distractor.
        for (int a = 0; a < kMaxAttempts && !ok; ++a) {
            const double shrink = 1.0 - 0.5 * a / kMaxAttempts;
            major = shrink * uniform(rng, 0.6 * cfg.tumor_radius_min, cfg.tumor_radius_max);
            e.ry = major;
            e.rx = major * uniform(rng, 0.3, 0.7);
            e.angle = uniform(rng, 0.0, kPi);
            e.cy = uniform(rng, g.body.cy - g.body.ry, g.body.cy + g.body.ry);
            e.cx = uniform(rng, g.body.cx - g.body.rx, g.body.cx + g.body.rx);
            if (!disc_inside(g.body, e.cy, e.cx, major + 1.0)) continue;
            ok = std::hypot(e.cy - t.cy, e.cx - t.cx) > t.max_extent() + major + 2.0;
            for (const auto& o : g.distractors)
                ok = ok && std::hypot(e.cy - o.cy, e.cx - o.cx) > o.ry + major + 1.0;
        }
        if (!ok) throw GenerationError("distractor could not be placed inside the body after 100 attempts");
        g.distractors.push_back(e);
    }
    return g;
}

Grid<std::uint8_t> body_mask(const PhantomGeometry& g) { return rasterize(g.size, g.body); }
Grid<std::uint8_t> tumor_mask(const PhantomGeometry& g) { return rasterize(g.size, g.tumor); }

Grid<std::uint8_t> distractor_mask(const PhantomGeometry& g) {
    Grid<std::uint8_t> out(g.size, g.size, 0);
    for (const auto& e : g.distractors) {
        const auto m = rasterize(g.size, e);
        for (std::size_t i = 0; i < out.size(); ++i) out.storage()[i] |= m.storage()[i];
    }
    return out;
}

std::pair<Image, Mask> generate_phantom(std::uint64_t seed, const PhantomConfig& cfg, Modality modality) {
    if (modality != Modality::CBCT && modality != Modality::MRI)
        throw ConfigError("phantoms are rendered as CBCT or MRI only");
    const auto geom = sample_geometry(seed, cfg);
    const bool cbct = modality == Modality::CBCT;
    const double contrast = cbct ? cfg.contrast_cbct : cfg.contrast_mri;
    const double distractor = contrast * (cbct ? cfg.distractor_ratio_cbct : cfg.distractor_ratio_mri);
    const int n = cfg.image_size;

    const auto body = body_mask(geom);
    const auto tumor = tumor_mask(geom);
    const auto others = distractor_mask(geom);

    auto rng = make_rng(seed, "render", {static_cast<std::uint64_t>(modality)});
    // Low-frequency shading field, fixed per case.
    const double fy = uniform(rng, 0.5, 1.5) / n, fx = uniform(rng, 0.5, 1.5) / n;
    const double phase = uniform(rng, 0.0, 2 * kPi);
    const double shading = cbct ? cfg.cbct_shading : 0.0;

    Grid<double> clean(n, n, 0.0);
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c) {
            if (!body(r, c)) continue;
            double v = 1.0;
            if (tumor(r, c))
                v += contrast;
            else if (others(r, c))
                v += distractor;
            v *= 1.0 + shading * std::cos(2 * kPi * (fy * r + fx * c) + phase);
            clean(r, c) = v;
        }
    auto blurred = gaussian_blur(clean, cbct ? cfg.blur_cbct : cfg.blur_mri);

    std::normal_distribution<double> noise(0.0, cbct ? cfg.noise_cbct : cfg.noise_mri);
    Grid<float> px(n, n);
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c) px(r, c) = static_cast<float>(blurred(r, c) + noise(rng));

    return {Image(std::move(px), cfg.spacing, modality), Mask(tumor, cfg.spacing)};
}

namespace {

std::vector<Split> assign_splits(int count, double val_frac, double test_frac, Rng rng) {
    const int n_test = static_cast<int>(std::llround(count * test_frac));
    const int n_val = static_cast<int>(std::llround(count * val_frac));
    std::vector<int> order(count);
    for (int i = 0; i < count; ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<Split> out(count, Split::Train);
    for (int k = 0; k < count; ++k) {
        if (k < n_test)
            out[order[k]] = Split::Test;
        else if (k < n_test + n_val)
            out[order[k]] = Split::Val;
    }
    return out;
}

std::string case_name(const char* prefix, int i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s_%04d", prefix, i);
    return buf;
}

}  // namespace

Manifest generate_corpus(const PhantomConfig& cfg, const std::filesystem::path& out_dir) {
    cfg.validate();
    Manifest m;
    m.base_dir = out_dir;
    std::error_code ec;
    std::filesystem::create_directories(out_dir / "images", ec);
    if (ec) throw IoError((out_dir / "images").string(), "cannot create directory");
    std::filesystem::create_directories(out_dir / "masks", ec);
    if (ec) throw IoError((out_dir / "masks").string(), "cannot create directory");

    auto case_seed = [&](const char* tag, int i) {
        return derive_seed(cfg.anatomy_seed, tag, {static_cast<std::uint64_t>(i)}) >> 1;
    };
    std::set<std::uint64_t> cbct_seeds;
    for (int i = 0; i < cfg.n_cbct; ++i) cbct_seeds.insert(case_seed("cbct-case", i));
    for (int j = 0; j < cfg.n_mri; ++j)
        if (cbct_seeds.count(case_seed("mri-case", j)))
            throw GenerationError("anatomy seed collision between CBCT and MRI cases");

    struct Cohort {
        Modality modality;
        const char* prefix;
        const char* tag;
        int count;
        double val, test;
    };
    const Cohort cohorts[] = {
        {Modality::CBCT, "cbct", "cbct-case", cfg.n_cbct, cfg.val_fraction, cfg.test_fraction},
        {Modality::MRI, "mri", "mri-case", cfg.n_mri, cfg.mri_val_fraction, cfg.mri_test_fraction},
    };
    for (const auto& co : cohorts) {
        const auto splits = assign_splits(co.count, co.val, co.test, make_rng(cfg.anatomy_seed, "split", {static_cast<std::uint64_t>(co.modality)}));
        for (int i = 0; i < co.count; ++i) {
            const auto seed = case_seed(co.tag, i);
            auto [img, mask] = generate_phantom(seed, cfg, co.modality);
            ManifestEntry e;
            e.case_id = case_name(co.prefix, i);
            e.modality = co.modality;
            e.split = splits[i];
            e.image_path = "images/" + e.case_id + ".cmi";
            e.mask_path = "masks/" + e.case_id + ".cms";
            e.anatomy_seed = seed;
            save_image(out_dir / e.image_path, img);
            save_mask(out_dir / *e.mask_path, mask, co.modality);
            m.entries.push_back(std::move(e));
        }
    }
    save_manifest(m, out_dir / "manifest.json");
    return m;
}

}  // namespace cmedl
