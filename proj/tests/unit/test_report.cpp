#include <doctest.h>

#include <cmath>
#include <random>

#include "cmedl/report.hpp"
#include "cmedl/stats.hpp"

using namespace cmedl::metrics;

namespace {

std::vector<CaseRow> two_methods(int n, double shift, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.4, 0.9);
    std::vector<CaseRow> rows;
    for (int i = 0; i < n; ++i) {
        const double d = u(rng);
        rows.push_back({"c" + std::to_string(i), "a", d, d, 10 * d, 4.38, ""});
        rows.push_back({"c" + std::to_string(i), "b", d + shift * (1 + 0.1 * i), d, 10 * d + shift, 4.38, ""});
    }
    return rows;
}

}  // namespace

TEST_CASE("summary means and sds match recomputation from the rows") {
    const auto rows = two_methods(12, 0.03, 4);
    const auto s = summarize(rows);
    REQUIRE(s.methods.size() == 2);
    for (const auto& m : s.methods) {
        std::vector<double> d;
        for (const auto& r : rows)
            if (r.method == m.method) d.push_back(r.dsc);
        CHECK(m.dsc.mean == doctest::Approx(mean(d)).epsilon(1e-15));
        CHECK(m.dsc.sd == doctest::Approx(sample_sd(d)).epsilon(1e-15));
        CHECK(m.dsc.n == 12);
        CHECK(m.cases == 12);
    }
}

TEST_CASE("identical methods compare with p = 1") {
    auto rows = two_methods(8, 0.0, 9);
    const auto s = summarize(rows);
    for (const auto& c : s.comparisons) {
        CHECK(c.p_raw == 1.0);
        CHECK(c.p_holm == 1.0);
    }
}

TEST_CASE("a consistent shift is significant and holm is applied per metric") {
    std::vector<CaseRow> rows = two_methods(10, 0.05, 1);
    for (auto r : two_methods(10, 0.05, 1))
        if (r.method == "a") {
            r.method = "c";
            r.dsc += 0.2;
            rows.push_back(r);
        }
    const auto s = summarize(rows);
    std::vector<double> raw;
    for (const auto& c : s.comparisons)
        if (c.metric == "dsc") raw.push_back(c.p_raw);
    REQUIRE(raw.size() == 3);
    const auto adj = holm_bonferroni(raw);
    std::size_t k = 0;
    for (const auto& c : s.comparisons)
        if (c.metric == "dsc") CHECK(c.p_holm == adj[k++]);
    CHECK(raw[0] == doctest::Approx(2.0 / 1024));
}

TEST_CASE("failed cases are counted and left out of the statistics") {
    std::vector<CaseRow> rows{{"x", "m", 0.0, 0.0, NAN, 4.38, "HD95 is undefined for empty mask"},
                              {"y", "m", 0.5, 0.7, 3.0, 4.38, ""}};
    const auto s = summarize(rows);
    CHECK(s.methods[0].failures == 1);
    CHECK(s.methods[0].hd95_mm.n == 1);
    CHECK(s.methods[0].hd95_mm.mean == 3.0);
    CHECK(s.methods[0].dsc.n == 2);
    const auto csv = rows_to_csv(rows);
    CHECK(csv.find("x,m,0,0,nan,4.38,HD95 is undefined for empty mask\n") != std::string::npos);
    CHECK(summary_to_json(s).find("\"failures\": 1") != std::string::npos);
}

TEST_CASE("single method, single case yields one row and no comparisons") {
    const std::vector<CaseRow> rows{{"only", "m", 0.75, 0.9, 2.0, 4.38, ""}};
    const auto s = summarize(rows);
    CHECK(s.comparisons.empty());
    CHECK(s.methods[0].dsc.mean == 0.75);
    CHECK(s.methods[0].dsc.sd == 0.0);
}
