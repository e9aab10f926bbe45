#include <doctest.h>

#include <algorithm>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <queue>
#include <random>
#include <set>

#include "cmedl/augment.hpp"
#include "cmedl/errors.hpp"
#include "cmedl/filters.hpp"
#include "cmedl/image_io.hpp"
#include "cmedl/manifest.hpp"
#include "cmedl/phantom.hpp"
#include "cmedl/preprocess.hpp"

namespace fs = std::filesystem;
using namespace cmedl;

namespace {

fs::path scratch(const std::string& name) {
    auto p = fs::temp_directory_path() / ("cmedl_unit_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

double mean_where(const Image& img, const Grid<std::uint8_t>& sel) {
    double s = 0, n = 0;
    for (std::size_t i = 0; i < sel.size(); ++i)
        if (sel.values()[i]) s += img.pixels.values()[i], n += 1;
    return s / n;
}

}  // namespace

TEST_CASE("phantom generation is deterministic") {
    PhantomConfig cfg;
    auto [a, ma] = generate_phantom(7, cfg, Modality::CBCT);
    auto [b, mb] = generate_phantom(7, cfg, Modality::CBCT);
    CHECK(a == b);
    CHECK(ma == mb);
}

TEST_CASE("modalities share geometry but not intensities") {
    PhantomConfig cfg;
    auto [c, mc] = generate_phantom(7, cfg, Modality::CBCT);
    auto [m, mm] = generate_phantom(7, cfg, Modality::MRI);
    CHECK(mc == mm);
    CHECK_FALSE(c.pixels == m.pixels);
    CHECK(mc.count() > 0);
}

TEST_CASE("MRI tumor contrast exceeds CBCT contrast") {
    PhantomConfig cfg;
    cfg.contrast_cbct = 0.2;
    cfg.contrast_mri = 0.8;
    const auto geo = sample_geometry(7, cfg);
    auto body = body_mask(geo);
    const auto tumor = tumor_mask(geo);
    for (std::size_t i = 0; i < body.size(); ++i)
        if (tumor.values()[i]) body.values()[i] = 0;
    auto [c, _c] = generate_phantom(7, cfg, Modality::CBCT);
    auto [m, _m] = generate_phantom(7, cfg, Modality::MRI);
    const double gap_c = mean_where(c, tumor) - mean_where(c, body);
    const double gap_m = mean_where(m, tumor) - mean_where(m, body);
    CHECK(gap_m > gap_c);
}

TEST_CASE("phantom config validation") {
    PhantomConfig cfg;
    cfg.contrast_mri = 0.1;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    PhantomConfig big;
    big.tumor_radius_min = 40;
    big.tumor_radius_max = 50;
    CHECK_THROWS(big.validate());
}

TEST_CASE("impossible tumor placement raises a generation error") {
    PhantomConfig cfg;
    cfg.tumor_radius_min = 28;
    cfg.tumor_radius_max = 30;
    bool threw = false;
    try {
        cfg.validate();
        generate_phantom(1, cfg, Modality::CBCT);
    } catch (const GenerationError&) {
        threw = true;
    } catch (const ConfigError&) {
        threw = true;
    }
    CHECK(threw);
}

TEST_CASE("corpus: counts, disjoint anatomy, split hygiene, byte-identical regeneration") {
    PhantomConfig cfg;
    cfg.n_cbct = 10;
    cfg.n_mri = 5;
    cfg.anatomy_seed = 3;
    const auto d1 = scratch("corpus1"), d2 = scratch("corpus2");
    const auto m1 = generate_corpus(cfg, d1);
    const auto m2 = generate_corpus(cfg, d2);
    REQUIRE(m1.entries.size() == 15);
    std::set<std::uint64_t> cbct_seeds, mri_seeds;
    std::map<std::string, std::set<Split>> splits;
    for (const auto& e : m1.entries) {
        REQUIRE(e.anatomy_seed.has_value());
        (e.modality == Modality::CBCT ? cbct_seeds : mri_seeds).insert(*e.anatomy_seed);
        splits[e.case_id].insert(e.split);
    }
    CHECK(cbct_seeds.size() == 10);
    CHECK(mri_seeds.size() == 5);
    for (auto s : mri_seeds) CHECK(cbct_seeds.count(s) == 0);
    for (auto& [id, s] : splits) CHECK(s.size() == 1);

    for (const auto& entry : fs::recursive_directory_iterator(d1)) {
        if (!entry.is_regular_file()) continue;
        const auto rel = fs::relative(entry.path(), d1);
        CHECK_MESSAGE(read_file_bytes(entry.path()) == read_file_bytes(d2 / rel), rel.string());
    }
    const auto loaded = load_manifest(d1 / "manifest.json");
    CHECK(loaded.entries.size() == 15);
    CHECK(loaded.entries[3].case_id == m1.entries[3].case_id);
}

TEST_CASE("manifest with a case in two splits is rejected") {
    Manifest m;
    m.entries.push_back({"cbct_0000", Modality::CBCT, Split::Train, "a.cmi", std::nullopt, std::nullopt});
    m.entries.push_back({"cbct_0000", Modality::CBCT, Split::Test, "b.cmi", std::nullopt, std::nullopt});
    CHECK_THROWS_AS(check_split_hygiene(m), ConfigError);
}

TEST_CASE("image and mask formats round-trip bitwise") {
    const auto dir = scratch("io");
    std::mt19937_64 rng(11);
    std::normal_distribution<float> nd(0.f, 100.f);
    for (int t = 0; t < 1000; ++t) {
        const int h = 16 + static_cast<int>(rng() % 8), w = 16 + static_cast<int>(rng() % 8);
        Grid<float> g(h, w);
        for (auto& v : g.values()) v = nd(rng);
        if (t == 0) g(0, 0) = std::numeric_limits<float>::denorm_min();
        const Image img(std::move(g), {0.5 + t * 1e-3, 1.25}, static_cast<Modality>(t % 4));
        save_image(dir / "x.cmi", img);
        const auto back = load_image(dir / "x.cmi");
        REQUIRE(back.modality == img.modality);
        REQUIRE(std::memcmp(back.pixels.values().data(), img.pixels.values().data(), img.pixels.size() * 4) == 0);
        REQUIRE(static_cast<float>(back.spacing.row) == static_cast<float>(img.spacing.row));
    }
    Grid<std::uint8_t> mg(16, 16, 0);
    mg(3, 4) = 1;
    const Mask m(mg, {1, 1});
    save_mask(dir / "m.cms", m);
    CHECK(load_mask(dir / "m.cms").pixels == m.pixels);
}

TEST_CASE("format errors") {
    const auto dir = scratch("fmt");
    const Image img(Grid<float>(16, 16, 1.f), {1, 1}, Modality::MRI);
    save_image(dir / "x.cmi", img);
    auto bytes = read_file_bytes(dir / "x.cmi");
    bytes.resize(bytes.size() - 3);
    write_file_bytes(dir / "t.cmi", bytes);
    CHECK_THROWS_AS(load_image(dir / "t.cmi"), FormatError);
    bytes[0] = 'X';
    write_file_bytes(dir / "b.cmi", bytes);
    CHECK_THROWS_AS(load_image(dir / "b.cmi"), FormatError);
    CHECK_THROWS_AS(load_image(dir / "missing.cmi"), IoError);

    Mask bad;
    bad.pixels = Grid<std::uint8_t>(16, 16, 0);
    bad.pixels(0, 0) = 2;
    CHECK_THROWS(save_mask(dir / "bad.cms", bad));
    CHECK_THROWS_AS(Mask(bad.pixels, {1, 1}), FormatError);
    CHECK_THROWS_AS(Image(Grid<float>(8, 16), {1, 1}, Modality::CBCT), ShapeError);
}

TEST_CASE("standardization") {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<float> u(-3.f, 40.f);
    Grid<float> g(32, 32);
    for (auto& v : g.values()) v = u(rng);
    const auto s = standardize(Image(g, {1, 1}, Modality::CBCT));
    const auto st = image_stats(s);
    CHECK(std::abs(st.mean) < 1e-6);
    CHECK(std::abs(st.stddev - 1.0) < 1e-4);
    const auto c = standardize(Image(Grid<float>(16, 16, 5.f), {1, 1}, Modality::CBCT));
    for (float v : c.pixels.values()) CHECK(v == 0.f);
}

namespace {

// Brute-force labelling by BFS from every seed, independent of the library.
std::vector<std::vector<std::pair<int, int>>> bfs_components(const Grid<std::uint8_t>& fg) {
    std::vector<std::vector<std::pair<int, int>>> comps;
    Grid<std::uint8_t> seen(fg.rows(), fg.cols(), 0);
    for (int r = 0; r < fg.rows(); ++r)
        for (int c = 0; c < fg.cols(); ++c) {
            if (!fg(r, c) || seen(r, c)) continue;
            comps.emplace_back();
            std::queue<std::pair<int, int>> q;
            q.push({r, c});
            seen(r, c) = 1;
            while (!q.empty()) {
                auto [y, x] = q.front();
                q.pop();
                comps.back().push_back({y, x});
                const int dy[] = {-1, 1, 0, 0}, dx[] = {0, 0, -1, 1};
                for (int k = 0; k < 4; ++k) {
                    const int ny = y + dy[k], nx = x + dx[k];
                    if (fg.contains(ny, nx) && fg(ny, nx) && !seen(ny, nx)) {
                        seen(ny, nx) = 1;
                        q.push({ny, nx});
                    }
                }
            }
        }
    return comps;
}

}  // namespace

TEST_CASE("component labelling matches BFS") {
    std::mt19937_64 rng(5);
    for (int t = 0; t < 200; ++t) {
        Grid<std::uint8_t> g(20, 20, 0);
        for (auto& v : g.values()) v = (rng() % 100) < 45;
        Grid<int> labels;
        const int n = label_components(g, labels);
        const auto comps = bfs_components(g);
        REQUIRE(n == static_cast<int>(comps.size()));
        for (const auto& comp : comps) {
            const int l = labels(comp[0].first, comp[0].second);
            for (auto [y, x] : comp) REQUIRE(labels(y, x) == l);
        }
    }
}

TEST_CASE("crop centred on a disk") {
    Grid<float> g(96, 96, 0.f);
    const double cy = 50, cx = 41;
    for (int r = 0; r < 96; ++r)
        for (int c = 0; c < 96; ++c)
            if ((r - cy) * (r - cy) + (c - cx) * (c - cx) <= 400) g(r, c) = 1.f;
    const Image img(g, {1, 1}, Modality::CBCT);
    const auto comps = bfs_components(detect_body(img));
    REQUIRE(comps.size() == 1);
    int rmin = 1e9, rmax = -1, cmin = 1e9, cmax = -1;
    for (auto [y, x] : comps[0]) {
        rmin = std::min(rmin, y), rmax = std::max(rmax, y);
        cmin = std::min(cmin, x), cmax = std::max(cmax, x);
    }
    const auto res = crop_body(img, 64);
    CHECK(res.window.side == 64);
    CHECK(res.patch.rows() == 64);
    // The bounding box is centred within one pixel.
    const double box_cr = (rmin + rmax) / 2.0 - res.window.row0, box_cc = (cmin + cmax) / 2.0 - res.window.col0;
    CHECK(std::abs(box_cr - 31.5) <= 1.0);
    CHECK(std::abs(box_cc - 31.5) <= 1.0);

    const auto again = crop_body(res.patch, 64);
    CHECK(again.patch == res.patch);
    CHECK(again.window.row0 == 0);
    CHECK(again.window.col0 == 0);
}

TEST_CASE("crop with holes and clutter keeps the largest filled body") {
    Grid<float> g(64, 64, 0.f);
    for (int r = 10; r < 50; ++r)
        for (int c = 10; c < 50; ++c) g(r, c) = 1.f;
    for (int r = 25; r < 30; ++r)
        for (int c = 25; c < 30; ++c) g(r, c) = 0.f;
    g(60, 60) = 1.f;
    const auto body = detect_body(Image(g, {1, 1}, Modality::CBCT));
    CHECK(body(27, 27) == 1);
    CHECK(body(60, 60) == 0);
    CHECK(std::count(body.values().begin(), body.values().end(), 1) == 1600);
}

TEST_CASE("crop of a background-only image fails") {
    const Image img(Grid<float>(32, 32, 0.f), {1, 1}, Modality::CBCT);
    CHECK_THROWS_WITH_AS(crop_body(img, 32), "no body region", Error);
}

TEST_CASE("augmentation: deterministic, identity, binary masks, bounded area change") {
    PhantomConfig cfg;
    auto [img, mask] = generate_phantom(4, cfg, Modality::CBCT);
    auto [a1, m1] = augment(img, mask, 99);
    auto [a2, m2] = augment(img, mask, 99);
    CHECK(a1 == a2);
    CHECK(m1 == m2);
    auto [ii, im] = apply_augment(img, mask, AugmentParams::identity());
    CHECK(ii == img);
    CHECK(im == mask);

    const double area = static_cast<double>(mask.count());
    int worst = 0;
    for (std::uint64_t s = 0; s < 1000; ++s) {
        auto [ai, am] = augment(img, mask, s);
        for (auto v : am.pixels.values()) REQUIRE(v <= 1);
        const double change = std::abs(static_cast<double>(am.count()) - area) / area;
        REQUIRE(change <= 0.25);
        worst = std::max(worst, static_cast<int>(change * 100));
    }
    MESSAGE("worst area change % = " << worst);
}

TEST_CASE("augmentation applies one transform to image and mask") {
    // Rendering the mask as an image, transforming bilinearly and thresholding
    // at 0.5 agrees with nearest-neighbour resampling except on rounding ties,
    // so compare on an all-ones mask where both must stay all-ones.
    Grid<float> ones(32, 32, 1.f);
    const Image img(ones, {1, 1}, Modality::CBCT);
    const Mask full(Grid<std::uint8_t>(32, 32, 1), {1, 1});
    for (std::uint64_t s = 0; s < 1000; ++s) {
        auto p = sample_augment(s, 32, 32);
        auto [ti, tm] = apply_augment(img, full, p);
        for (std::size_t i = 0; i < tm.pixels.size(); ++i)
            REQUIRE((ti.pixels.values()[i] >= 0.5f) == (tm.pixels.values()[i] == 1));
    }
}
