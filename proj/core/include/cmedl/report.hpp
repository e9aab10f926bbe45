#pragma once

#include <filesystem>
#include <limits>
#include <string>
#include <vector>

namespace cmedl::metrics {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

/// One case under one method. A failed metric is NaN with the reason in error.
struct CaseRow {
    std::string case_id;
    std::string method;
    double dsc = kNaN;
    double sdsc = kNaN;
    double hd95_mm = kNaN;
    double tau_mm = kNaN;
    std::string error;
};

struct MetricSummary {
    double mean = kNaN;
    double sd = kNaN;
    std::size_t n = 0;  // finite values
};

struct MethodSummary {
    std::string method;
    std::size_t cases = 0;
    std::size_t failures = 0;  // rows with an error
    MetricSummary dsc, sdsc, hd95_mm;
};

/// Paired Wilcoxon on cases present with finite values under both methods.
/// p_holm adjusts within one metric across all method pairs; pairs with fewer
/// than 5 usable cases are reported with NaN p-values and left out of Holm.
struct PairComparison {
    std::string metric;
    std::string a, b;
    std::size_t n = 0;
    double p_raw = kNaN;
    double p_holm = kNaN;
};

struct ReportSummary {
    std::vector<MethodSummary> methods;  // order of first appearance
    std::vector<PairComparison> comparisons;
};

ReportSummary summarize(const std::vector<CaseRow>& rows);

/// case_id,method,dsc,sdsc,hd95_mm,tau_mm,error
std::string rows_to_csv(const std::vector<CaseRow>& rows);
std::string summary_to_json(const ReportSummary& s);

void write_report(const std::vector<CaseRow>& rows, const std::filesystem::path& csv_path,
                  const std::filesystem::path& json_path);

}  // namespace cmedl::metrics
