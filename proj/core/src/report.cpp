#include "cmedl/report.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>

#include "cmedl/errors.hpp"
#include "cmedl/image_io.hpp"
#include "cmedl/stats.hpp"

namespace cmedl::metrics {

using nlohmann::json;

namespace {

constexpr const char* kMetrics[] = {"dsc", "sdsc", "hd95_mm"};

double metric_of(const CaseRow& r, std::string_view m) {
    if (m == "dsc") return r.dsc;
    if (m == "sdsc") return r.sdsc;
    return r.hd95_mm;
}

MetricSummary summarize_values(const std::vector<double>& all) {
    std::vector<double> v;
    for (double x : all)
        if (std::isfinite(x)) v.push_back(x);
    MetricSummary s;
    s.n = v.size();
    if (!v.empty()) {
        s.mean = mean(v);
        s.sd = sample_sd(v);
    }
    return s;
}

std::string num(double v) {
    if (!std::isfinite(v)) return "nan";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

json num_json(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json metric_json(const MetricSummary& m) { return {{"mean", num_json(m.mean)}, {"sd", num_json(m.sd)}, {"n", m.n}}; }

}  // namespace

ReportSummary summarize(const std::vector<CaseRow>& rows) {
    ReportSummary out;
    std::vector<std::string> methods;
    std::map<std::string, std::map<std::string, const CaseRow*>> by_method;
    for (const auto& r : rows) {
        if (!by_method.count(r.method)) methods.push_back(r.method);
        by_method[r.method][r.case_id] = &r;
    }
    for (const auto& m : methods) {
        MethodSummary s;
        s.method = m;
        std::vector<double> d, sd, h;
        for (const auto& r : rows)
            if (r.method == m) {
                ++s.cases;
                if (!r.error.empty()) ++s.failures;
                d.push_back(r.dsc);
                sd.push_back(r.sdsc);
                h.push_back(r.hd95_mm);
            }
        s.dsc = summarize_values(d);
        s.sdsc = summarize_values(sd);
        s.hd95_mm = summarize_values(h);
        out.methods.push_back(std::move(s));
    }
    for (const char* metric : kMetrics) {
        std::vector<double> ps;
        std::vector<std::size_t> tested;
        for (std::size_t i = 0; i < methods.size(); ++i)
            for (std::size_t j = i + 1; j < methods.size(); ++j) {
                PairComparison pc{metric, methods[i], methods[j]};
                std::vector<double> xs, ys;
                for (const auto& [case_id, ra] : by_method[methods[i]]) {
                    auto it = by_method[methods[j]].find(case_id);
                    if (it == by_method[methods[j]].end()) continue;
                    const double x = metric_of(*ra, metric), y = metric_of(*it->second, metric);
                    if (std::isfinite(x) && std::isfinite(y)) {
                        xs.push_back(x);
                        ys.push_back(y);
                    }
                }
                pc.n = xs.size();
                if (pc.n >= 5) {
                    pc.p_raw = wilcoxon_paired(xs, ys).p_value;
                    ps.push_back(pc.p_raw);
                    tested.push_back(out.comparisons.size());
                }
                out.comparisons.push_back(pc);
            }
        const auto adj = holm_bonferroni(ps);
        for (std::size_t k = 0; k < tested.size(); ++k) out.comparisons[tested[k]].p_holm = adj[k];
    }
    return out;
}

std::string rows_to_csv(const std::vector<CaseRow>& rows) {
    std::string s = "case_id,method,dsc,sdsc,hd95_mm,tau_mm,error\n";
    for (const auto& r : rows) {
        std::string err = r.error;
        std::replace(err.begin(), err.end(), ',', ';');
        std::replace(err.begin(), err.end(), '\n', ' ');
        s += r.case_id + "," + r.method + "," + num(r.dsc) + "," + num(r.sdsc) + "," + num(r.hd95_mm) + "," +
             num(r.tau_mm) + "," + err + "\n";
    }
    return s;
}

std::string summary_to_json(const ReportSummary& s) {
    json methods = json::object();
    for (const auto& m : s.methods)
        methods[m.method] = {{"cases", m.cases},
                             {"failures", m.failures},
                             {"dsc", metric_json(m.dsc)},
                             {"sdsc", metric_json(m.sdsc)},
                             {"hd95_mm", metric_json(m.hd95_mm)}};
    json p = json::object();
    for (const char* metric : kMetrics) {
        json raw = json::object(), holm = json::object(), n = json::object();
        for (const auto& m : s.methods) {
            raw[m.method][m.method] = 1.0;
            holm[m.method][m.method] = 1.0;
        }
        for (const auto& c : s.comparisons) {
            if (c.metric != metric) continue;
            raw[c.a][c.b] = raw[c.b][c.a] = num_json(c.p_raw);
            holm[c.a][c.b] = holm[c.b][c.a] = num_json(c.p_holm);
            n[c.a][c.b] = n[c.b][c.a] = c.n;
        }
        p[metric] = {{"raw", raw}, {"holm", holm}, {"pairs", n}};
    }
    json out = {{"methods", methods},
                {"p_values", p},
                {"test", "paired Wilcoxon signed-rank, two-sided; Holm-Bonferroni within each metric"}};
    return out.dump(2) + "\n";
}

void write_report(const std::vector<CaseRow>& rows, const std::filesystem::path& csv_path,
                  const std::filesystem::path& json_path) {
    const auto csv = rows_to_csv(rows);
    write_file_bytes(csv_path, std::vector<char>(csv.begin(), csv.end()));
    const auto js = summary_to_json(summarize(rows));
    write_file_bytes(json_path, std::vector<char>(js.begin(), js.end()));
}

}  // namespace cmedl::metrics
