#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cmedl/manifest.hpp"
#include "cmedl/report.hpp"
#include "cmedl/separability.hpp"
#include "cmedl/nn/trainer.hpp"

namespace cmedl::nn {

/// A full-frame case with its ground truth.
struct EvalCase {
    std::string case_id;
    Image image;
    Mask mask;
};

std::vector<EvalCase> load_eval_cases(const Manifest& m, Split split, Modality modality = Modality::CBCT);

struct MethodSpec {
    std::string name;
    std::filesystem::path checkpoint;
    Route route = Route::Student;
};

/// Per-case dsc, surface dsc at tau and HD95 of one bundle. Failures (e.g. an
/// empty prediction for HD95) are recorded in the row, not thrown.
std::vector<metrics::CaseRow> evaluate_bundle(ModelBundle& b, const std::string& method, Route route,
                                              const std::vector<EvalCase>& cases, double tau_mm);

/// Loads every checkpoint first (CheckpointError if one fails), then
/// evaluates them in order.
std::vector<metrics::CaseRow> evaluate(const std::vector<EvalCase>& cases, const std::vector<MethodSpec>& methods,
                                       double tau_mm);

struct SensitivityResult {
    std::vector<std::string> case_ids;
    std::vector<std::vector<double>> dsc;  // [case][run]
    std::vector<double> per_case_sd;
    double msd = 0.0;
};

/// Each run zeroes every weight of the route segmenter's last two layers with
/// probability `rate` (no rescaling), segments all cases and scores DSC.
/// The weights are restored afterwards. Throws ConfigError when runs < 2.
SensitivityResult sensitivity_dropout(ModelBundle& b, Route route, const std::vector<EvalCase>& cases, double rate,
                                      int runs, std::uint64_t seed);

struct FidelityResult {
    double kl_pmri = 0.0;  // KL(pseudo-MRI || MRI)
    double kl_cbct = 0.0;  // KL(CBCT || MRI)
};

/// All three sets are compared in the network intensity domain.
FidelityResult translation_fidelity(ModelBundle& b, const std::vector<Image>& cbct, const std::vector<Image>& mri,
                                    int n_bins = 256);

std::vector<Image> network_domain(const std::vector<Image>& images);

/// Silhouette of the last tap layer of the chosen segmenter.
metrics::SeparabilityResult feature_separability(ModelBundle& b, TapSource which, const std::vector<EvalCase>& cases,
                                                 const metrics::SeparabilityOptions& opt);

}  // namespace cmedl::nn
