#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numeric>
#include <random>

#include "../support/oracles.hpp"
#include "cmedl/errors.hpp"
#include "cmedl/separability.hpp"
#include "cmedl/stats.hpp"
#include "cmedl/surface_metrics.hpp"

using namespace cmedl;
using namespace cmedl::metrics;

namespace {

Mask mask_of(std::initializer_list<std::pair<int, int>> px, Spacing sp = {1, 1}) {
    Grid<std::uint8_t> g(16, 16, 0);
    for (auto [r, c] : px) g(r, c) = 1;
    return Mask(std::move(g), sp);
}

}  // namespace

TEST_CASE("dsc examples") {
    const auto a = mask_of({{0, 0}, {0, 1}}), b = mask_of({{0, 1}, {1, 1}});
    CHECK(dsc(a, b) == 0.5);
    CHECK(dsc(a, a) == 1.0);
    CHECK(dsc(a, mask_of({{5, 5}})) == 0.0);
    CHECK(dsc(mask_of({}), mask_of({})) == 1.0);
    CHECK(dsc(mask_of({}), a) == 0.0);
    CHECK_THROWS_AS(dsc(a, Mask(Grid<std::uint8_t>(16, 17, 0), {1, 1})), ShapeError);
}

TEST_CASE("hd95 examples") {
    CHECK(hd95(mask_of({{0, 0}}), mask_of({{3, 4}})) == 5.0);
    const auto a = mask_of({{2, 2}, {2, 3}, {3, 3}});
    CHECK(hd95(a, a) == 0.0);
    CHECK_THROWS_WITH(hd95(mask_of({}), a), "HD95 is undefined for empty mask");
}

TEST_CASE("surface dsc conventions") {
    const auto a = mask_of({{2, 2}, {2, 3}});
    CHECK(surface_dsc(a, a, 0.0) == 1.0);
    CHECK(surface_dsc(mask_of({}), mask_of({}), 1.0) == 1.0);
    CHECK(surface_dsc(mask_of({}), a, 1.0) == 0.0);
    CHECK_THROWS(surface_dsc(a, a, -0.1));
    CHECK(kDefaultSurfaceToleranceMm == 4.38);
}

TEST_CASE("surface extraction treats the frame border as background") {
    const Mask full(Grid<std::uint8_t>(16, 16, 1), {1, 1});
    const auto s = surface_voxels(VolumeMask(full));
    CHECK(s.size() == 60);
}

TEST_CASE("surface metrics match brute force on random pairs") {
    std::mt19937_64 rng(1234);
    for (int t = 0; t < 300; ++t) {
        const int h = 1 + static_cast<int>(rng() % 16), w = 1 + static_cast<int>(rng() % 16);
        const double p = 0.2 + 0.6 * static_cast<double>(rng() % 100) / 100.0;
        const Spacing sp{0.5 + static_cast<double>(rng() % 4) * 0.5, 0.5 + static_cast<double>(rng() % 3) * 0.75};
        const auto a = oracle::random_mask(rng, h, w, p, sp), b = oracle::random_mask(rng, h, w, p, sp);
        const std::vector<Mask> va{a}, vb{b};
        CHECK(dsc(a, b) == oracle::dsc(va, vb));
        for (double tau : {0.0, 1.0, 2.5}) CHECK(surface_dsc(a, b, tau) == oracle::surface_dsc(va, vb, tau));
        if (a.count() && b.count()) CHECK(std::abs(hd95(a, b) - oracle::hd95(va, vb)) <= 1e-9);
    }
}

TEST_CASE("volumetric distances honour slice thickness") {
    std::mt19937_64 rng(77);
    for (int t = 0; t < 50; ++t) {
        std::vector<Mask> va, vb;
        const int depth = 2 + static_cast<int>(rng() % 3);
        for (int z = 0; z < depth; ++z) {
            va.push_back(oracle::random_mask(rng, 10, 12, 0.3));
            vb.push_back(oracle::random_mask(rng, 10, 12, 0.3));
        }
        const VolumeMask a(va, 2.5), b(vb, 2.5);
        for (double tau : {1.0, 2.5, 3.0}) CHECK(surface_dsc(a, b, tau) == oracle::surface_dsc(va, vb, tau, 2.5));
        if (a.count() && b.count()) CHECK(std::abs(hd95(a, b) - oracle::hd95(va, vb, 2.5)) <= 1e-9);
    }
}

TEST_CASE("metric symmetry, monotonicity and scale consistency") {
    std::mt19937_64 rng(9);
    for (int t = 0; t < 200; ++t) {
        auto a = oracle::random_mask(rng, 12, 12, 0.4), b = oracle::random_mask(rng, 12, 12, 0.4);
        if (!a.count() || !b.count()) continue;
        CHECK(dsc(a, b) == dsc(b, a));
        CHECK(hd95(a, b) == hd95(b, a));
        double prev = 0;
        for (double tau = 0; tau <= 6; tau += 0.5) {
            const double s = surface_dsc(a, b, tau);
            CHECK(s == surface_dsc(b, a, tau));
            CHECK(s >= prev);
            prev = s;
        }
        Mask a2 = a, b2 = b;
        a2.spacing = b2.spacing = {2, 2};
        CHECK(hd95(a2, b2) == 2 * hd95(a, b));
        CHECK(surface_dsc(a2, b2, 3.0) == surface_dsc(a, b, 1.5));
    }
}

TEST_CASE("stitching") {
    const Mask full = mask_of({{1, 1}, {4, 5}});
    const CropWindow whole{0, 0, 16, 16, 16};
    std::vector<std::pair<Mask, CropWindow>> one{{full, whole}};
    CHECK(stitch_slice(one) == full);

    Grid<std::uint8_t> pa(16, 16, 0), pb(16, 16, 0);
    pa(0, 0) = 1;
    pb(0, 0) = 1;
    pb(2, 2) = 1;
    std::vector<std::pair<Mask, CropWindow>> two{{Mask(pa, {1, 1}), {0, 0, 16, 32, 32}},
                                                 {Mask(pb, {1, 1}), {16, 16, 16, 32, 32}}};
    const auto s = stitch_slice(two);
    CHECK(s.rows() == 32);
    CHECK(s.count() == 3);
    CHECK(s.pixels(16, 16) == 1);
    CHECK(s.pixels(18, 18) == 1);

    // Overlap: OR.
    Grid<std::uint8_t> z(16, 16, 0);
    std::vector<std::pair<Mask, CropWindow>> ov{{Mask(pa, {1, 1}), {4, 4, 16, 32, 32}},
                                                {Mask(z, {1, 1}), {0, 0, 16, 32, 32}}};
    CHECK(stitch_slice(ov).pixels(4, 4) == 1);

    std::vector<std::pair<Mask, CropWindow>> bad{{Mask(pa, {1, 1}), {0, 0, 16, 32, 32}},
                                                 {Mask(pb, {1, 1}), {0, 0, 16, 30, 32}}};
    CHECK_THROWS_AS(stitch_slice(bad), ShapeError);
}

TEST_CASE("kl divergence") {
    const std::vector<double> p{0.5, 0.5}, q{0.25, 0.75};
    CHECK(kl_divergence(p, q) == doctest::Approx(0.5 * std::log(2.0) + 0.5 * std::log(2.0 / 3.0)).epsilon(1e-12));
    CHECK(kl_divergence(p, q) == doctest::Approx(0.1438).epsilon(1e-3));

    std::mt19937_64 rng(3);
    std::normal_distribution<float> nd;
    std::vector<Image> a, b;
    for (int i = 0; i < 3; ++i) {
        Grid<float> g(16, 16), h(16, 16);
        for (auto& v : g.values()) v = nd(rng);
        for (auto& v : h.values()) v = 0.5f * nd(rng) + 1.f;
        a.emplace_back(g, Spacing{}, Modality::MRI);
        b.emplace_back(h, Spacing{}, Modality::PMRI);
    }
    CHECK(std::abs(kl_translation_fidelity(a, a)) <= 1e-12);
    CHECK(kl_translation_fidelity(a, b) > 0.0);
    CHECK(kl_translation_fidelity(b, a) > 0.0);
    const std::vector<Image> flat{Image(Grid<float>(16, 16, 2.f), {}, Modality::MRI)};
    CHECK_THROWS(kl_translation_fidelity(flat, flat));
    CHECK_THROWS(kl_translation_fidelity(std::vector<Image>{}, a));
}

TEST_CASE("wilcoxon examples") {
    const std::vector<double> x{1, 2, 3, 4, 5, 6}, zero(6, 0.0);
    CHECK(wilcoxon_paired(x, x).p_value == 1.0);
    const auto r = wilcoxon_paired(x, zero);
    CHECK(r.w_plus == 21.0);
    CHECK(r.p_value == doctest::Approx(2.0 / 64.0).epsilon(1e-15));
    CHECK(r.exact);
    CHECK_THROWS(wilcoxon_paired(std::vector<double>{1, 2, 3, 4}, std::vector<double>{0, 0, 0, 0}));
    CHECK_THROWS(wilcoxon_paired(x, std::vector<double>{1, 2}));
}

TEST_CASE("wilcoxon exact p matches full enumeration, ties and zeros included") {
    std::mt19937_64 rng(21);
    for (int t = 0; t < 400; ++t) {
        const int n = 5 + static_cast<int>(rng() % 6);
        std::vector<double> xs(n), ys(n);
        for (int i = 0; i < n; ++i) {
            xs[i] = static_cast<double>(rng() % 7);
            ys[i] = static_cast<double>(rng() % 7);
        }
        CHECK(wilcoxon_paired(xs, ys).p_value == doctest::Approx(oracle::wilcoxon_enumerated(xs, ys)).epsilon(1e-12));
    }
}

TEST_CASE("wilcoxon normal approximation for large n") {
    std::vector<double> xs(40), ys(40, 0.0);
    for (int i = 0; i < 40; ++i) xs[i] = (i % 3 == 0 ? -1.0 : 1.0) * (i + 1);
    const auto r = wilcoxon_paired(xs, ys);
    CHECK_FALSE(r.exact);
    // W+ and its null moments by hand.
    double w = 0;
    for (int i = 0; i < 40; ++i)
        if (xs[i] > 0) w += i + 1;
    const double z = (w - 410.0) / std::sqrt(40.0 * 41.0 * 81.0 / 24.0);
    CHECK(r.p_value == doctest::Approx(std::erfc(std::abs(z) / std::sqrt(2.0))).epsilon(1e-12));
}

TEST_CASE("holm step-down") {
    const std::vector<double> p{0.01, 0.04, 0.03};
    const auto adj = holm_bonferroni(p);
    CHECK(adj[0] == doctest::Approx(0.03));
    CHECK(adj[1] == doctest::Approx(0.06));
    CHECK(adj[2] == doctest::Approx(0.06));

    const auto b = holm_bonferroni(std::vector<double>{0.005, 0.5, 0.011, 0.02});
    CHECK(b[0] == doctest::Approx(0.02));
    CHECK(b[2] == doctest::Approx(0.033));
    CHECK(b[3] == doctest::Approx(0.04));
    CHECK(b[1] == doctest::Approx(0.5));
    CHECK(holm_bonferroni(std::vector<double>{0.6, 0.9})[0] == 1.0);
}

TEST_CASE("silhouette") {
    std::mt19937_64 rng(8);
    std::normal_distribution<float> nd(0.f, 0.01f);
    std::vector<float> pts;
    std::vector<int> lab;
    for (int i = 0; i < 40; ++i) {
        const float off = i % 2 ? 100.f : 0.f;
        pts.push_back(off + nd(rng));
        pts.push_back(nd(rng));
        lab.push_back(i % 2);
    }
    CHECK(silhouette_score(pts, 2, lab) > 0.99);

    // Hand-checked tiny case: 0,1 | 4,5 on a line.
    const std::vector<float> line{0, 1, 4, 5};
    const std::vector<int> l2{0, 0, 1, 1};
    const double s0 = 1 - 1 / 4.5, s1 = 1 - 1 / 3.5;
    CHECK(silhouette_score(line, 1, l2) == doctest::Approx((s0 + s1) / 2));

    std::normal_distribution<float> wide;
    int small = 0;
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<float> q;
        std::vector<int> l;
        for (int i = 0; i < 200; ++i) {
            q.push_back(wide(rng));
            q.push_back(wide(rng));
            l.push_back(static_cast<int>(rng() % 2));
        }
        small += std::abs(silhouette_score(q, 2, l)) < 0.1;
    }
    CHECK(small == 20);
}

TEST_CASE("feature separability and table round-trip") {
    std::mt19937_64 rng(4);
    std::normal_distribution<float> nd(0.f, 0.05f);
    std::vector<SeparabilityCase> cases;
    for (int k = 0; k < 3; ++k) {
        Grid<std::uint8_t> g(64, 64, 0);
        for (int r = 20; r < 36; ++r)
            for (int c = 22 + k; c < 38 + k; ++c) g(r, c) = 1;
        FeatureMapData f{"tap", 4, 64, 64, {1, 1}, std::vector<float>(4 * 64 * 64)};
        for (int ch = 0; ch < 4; ++ch)
            for (int r = 0; r < 64; ++r)
                for (int c = 0; c < 64; ++c)
                    f.values[(ch * 64 + r) * 64 + c] = (g(r, c) ? 1.f : -1.f) * (ch + 1) + nd(rng);
        cases.push_back({"cbct_" + std::to_string(k), f, Mask(g, {1, 1})});
    }
    const auto res = feature_separability(cases, {0, 50, 3});
    CHECK(res.score > 0.9);
    CHECK(res.table.roi_size == 40);
    CHECK(res.table.records.size() == 300);
    const auto path = std::filesystem::temp_directory_path() / "cmedl_unit_table.cmft";
    save_feature_table(path, res.table);
    const auto back = load_feature_table(path);
    CHECK(back.records == res.table.records);
    CHECK(back.tsne_perplexity == 60.0);
    CHECK(back.tsne_iterations == 1000);
    CHECK(back.case_ids == res.table.case_ids);

    cases.resize(1);
    CHECK_THROWS(feature_separability(cases, {0, 5, 3}));
}

TEST_CASE("mean and sample sd") {
    const std::vector<double> v{1, 2, 3, 4};
    CHECK(mean(v) == 2.5);
    CHECK(sample_sd(v) == doctest::Approx(std::sqrt(5.0 / 3.0)));
}
