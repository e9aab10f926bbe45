#include "cmedl/nn/evaluation.hpp"

#include <cmath>

#include "cmedl/errors.hpp"
#include "cmedl/image_io.hpp"
#include "cmedl/rng.hpp"
#include "cmedl/stats.hpp"
#include "cmedl/surface_metrics.hpp"

namespace cmedl::nn {

std::vector<EvalCase> load_eval_cases(const Manifest& m, Split split, Modality modality) {
    const auto entries = m.select(modality, split);
    if (entries.empty())
        throw ConfigError("empty split: " + std::string(to_string(modality)) + "/" + std::string(to_string(split)));
    std::vector<EvalCase> out;
    for (const auto* e : entries) {
        if (!e->mask_path) throw ConfigError("case " + e->case_id + " has no mask");
        EvalCase c{e->case_id, load_image(m.resolve(e->image_path)), load_mask(m.resolve(*e->mask_path))};
        require_aligned(c.image, c.mask);
        out.push_back(std::move(c));
    }
    return out;
}

std::vector<metrics::CaseRow> evaluate_bundle(ModelBundle& b, const std::string& method, Route route,
                                              const std::vector<EvalCase>& cases, double tau_mm) {
    std::vector<metrics::CaseRow> rows;
    for (const auto& c : cases) {
        metrics::CaseRow r;
        r.case_id = c.case_id;
        r.method = method;
        r.tau_mm = tau_mm;
        try {
            const auto pred = segment(b, c.image, route).mask;
            r.dsc = metrics::dsc(pred, c.mask);
            r.sdsc = metrics::surface_dsc(pred, c.mask, tau_mm);
            r.hd95_mm = metrics::hd95(pred, c.mask);
        } catch (const CheckpointError&) {
            throw;
        } catch (const Error& e) {
            r.error = e.what();
        }
        rows.push_back(std::move(r));
    }
    return rows;
}

std::vector<metrics::CaseRow> evaluate(const std::vector<EvalCase>& cases, const std::vector<MethodSpec>& methods,
                                       double tau_mm) {
    if (methods.empty()) throw ConfigError("no methods to evaluate");
    if (tau_mm < 0.0) throw ConfigError("tau must be non-negative");
    std::vector<ModelBundle> bundles;
    for (const auto& m : methods) {
        bundles.push_back(load_checkpoint(m.checkpoint));
        auto& b = bundles.back();
        b.net(m.route == Route::Student ? "s_student" : "s_teacher");
        if (m.route == Route::TeacherOnPmri) b.net("g_c2m");
    }
    std::vector<metrics::CaseRow> rows;
    for (std::size_t i = 0; i < methods.size(); ++i) {
        auto part = evaluate_bundle(bundles[i], methods[i].name, methods[i].route, cases, tau_mm);
        rows.insert(rows.end(), part.begin(), part.end());
    }
    return rows;
}

SensitivityResult sensitivity_dropout(ModelBundle& b, Route route, const std::vector<EvalCase>& cases, double rate,
                                      int runs, std::uint64_t seed) {
    if (runs < 2) throw ConfigError("runs < 2: per-case SD needs at least two dropout runs");
    if (!(rate >= 0.0 && rate <= 1.0)) throw ConfigError("dropout rate must lie in [0, 1]");
    if (cases.empty()) throw ConfigError("no cases for sensitivity analysis");
    auto& seg = b.net(route == Route::Student ? "s_student" : "s_teacher");
    auto weights = seg.last_two_layer_weights();
    if (weights.size() != 2) throw CheckpointError("segmenter does not expose its last two layers");
    std::vector<torch::Tensor> saved;
    for (auto& w : weights) saved.push_back(w.detach().clone());

    SensitivityResult res;
    res.dsc.assign(cases.size(), std::vector<double>(static_cast<std::size_t>(runs)));
    for (const auto& c : cases) res.case_ids.push_back(c.case_id);
    try {
        for (int r = 0; r < runs; ++r) {
            {
                torch::NoGradGuard ng;
                for (std::size_t k = 0; k < weights.size(); ++k) {
                    auto rng = make_rng(seed, "dropout", {static_cast<std::uint64_t>(r), k});
                    std::bernoulli_distribution drop(rate);
                    auto keep = torch::empty(saved[k].sizes(), torch::kFloat32);
                    float* p = keep.data_ptr<float>();
                    for (std::int64_t i = 0; i < keep.numel(); ++i) p[i] = drop(rng) ? 0.0f : 1.0f;
                    weights[k].copy_(saved[k] * keep.to(saved[k].dtype()));
                }
            }
            for (std::size_t i = 0; i < cases.size(); ++i)
                res.dsc[i][static_cast<std::size_t>(r)] = metrics::dsc(segment(b, cases[i].image, route).mask, cases[i].mask);
        }
    } catch (...) {
        torch::NoGradGuard ng;
        for (std::size_t k = 0; k < weights.size(); ++k) weights[k].copy_(saved[k]);
        throw;
    }
    {
        torch::NoGradGuard ng;
        for (std::size_t k = 0; k < weights.size(); ++k) weights[k].copy_(saved[k]);
    }
    for (const auto& d : res.dsc) res.per_case_sd.push_back(metrics::sample_sd(d));
    res.msd = metrics::mean(res.per_case_sd);
    return res;
}

std::vector<Image> network_domain(const std::vector<Image>& images) {
    std::vector<Image> out;
    out.reserve(images.size());
    for (const auto& img : images) out.push_back(to_network_domain(standardize(img)));
    return out;
}

FidelityResult translation_fidelity(ModelBundle& b, const std::vector<Image>& cbct, const std::vector<Image>& mri,
                                    int n_bins) {
    if (cbct.empty() || mri.empty()) throw ConfigError("translation fidelity needs nonempty image sets");
    std::vector<Image> pseudo;
    for (const auto& img : cbct) pseudo.push_back(translate(b, img));
    const auto ref = network_domain(mri);
    return {metrics::kl_translation_fidelity(pseudo, ref, n_bins),
            metrics::kl_translation_fidelity(network_domain(cbct), ref, n_bins)};
}

metrics::SeparabilityResult feature_separability(ModelBundle& b, TapSource which, const std::vector<EvalCase>& cases,
                                                 const metrics::SeparabilityOptions& opt) {
    const int patch = bundle_config(b).patch_size;
    std::vector<metrics::SeparabilityCase> sc;
    for (const auto& c : cases) {
        const auto s = prepare_sample(c.case_id, c.image, &c.mask, patch);
        auto taps = export_taps(b, c.image, which);
        sc.push_back({c.case_id, std::move(taps.back()), s.mask});
    }
    return metrics::feature_separability(sc, opt);
}

}  // namespace cmedl::nn
