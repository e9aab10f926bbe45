#include "run_config.hpp"

#include <fstream>
#include <sstream>

#include "cmedl/errors.hpp"

namespace cmedl::cli {

using nlohmann::json;

json default_config_json() {
    const PhantomConfig d;
    json train = json::parse(nn::config_to_json(nn::TrainConfig{}));
    json weights = train["weights"];
    train.erase("weights");
    train.erase("seed");
    const MetricParams m;
    return {{"version", kConfigVersion},
            {"seed", 0},
            {"manifest", ""},
            {"data",
             {{"image_size", d.image_size},
              {"n_cbct", d.n_cbct},
              {"n_mri", d.n_mri},
              {"anatomy_seed", d.anatomy_seed},
              {"noise_cbct", d.noise_cbct},
              {"noise_mri", d.noise_mri},
              {"contrast_cbct", d.contrast_cbct},
              {"contrast_mri", d.contrast_mri},
              {"tumor_radius_min", d.tumor_radius_min},
              {"tumor_radius_max", d.tumor_radius_max},
              {"n_distractors", d.n_distractors},
              {"distractor_ratio_cbct", d.distractor_ratio_cbct},
              {"distractor_ratio_mri", d.distractor_ratio_mri},
              {"cbct_shading", d.cbct_shading},
              {"blur_cbct", d.blur_cbct},
              {"blur_mri", d.blur_mri},
              {"spacing_mm", {d.spacing.row, d.spacing.col}},
              {"val_fraction", d.val_fraction},
              {"test_fraction", d.test_fraction},
              {"mri_val_fraction", d.mri_val_fraction},
              {"mri_test_fraction", d.mri_test_fraction}}},
            {"train", train},
            {"weights", weights},
            {"metrics",
             {{"tau_mm", m.tau_mm},
              {"kl_bins", m.kl_bins},
              {"dropout_rate", m.dropout_rate},
              {"dropout_runs", m.dropout_runs},
              {"separability_pixels", m.separability_pixels},
              {"roi_size", m.roi_size}}}};
}

namespace {

bool compatible(const json& base, const json& v) {
    if (base.is_number_integer()) return v.is_number_integer();
    if (base.is_number()) return v.is_number();
    if (base.is_boolean()) return v.is_boolean();
    if (base.is_string()) return v.is_string();
    if (base.is_array()) return v.is_array() && v.size() == base.size();
    return false;
}

void overlay(json& base, const json& over, const std::string& prefix) {
    if (!over.is_object()) throw ConfigError("config section '" + prefix + "' must be an object");
    for (const auto& [k, v] : over.items()) {
        const std::string key = prefix.empty() ? k : prefix + "." + k;
        if (!base.contains(k)) throw ConfigError("unknown config key '" + key + "'");
        auto& b = base[k];
        if (b.is_object()) {
            overlay(b, v, key);
        } else {
            if (!compatible(b, v)) throw ConfigError("config key '" + key + "' has the wrong type");
            b = v;
        }
    }
}

}  // namespace

json merge_config(const json& doc) {
    if (!doc.is_object()) throw ConfigError("config must be a JSON object");
    if (!doc.contains("version")) throw ConfigError("config has no 'version' field");
    if (doc["version"] != kConfigVersion)
        throw ConfigError("unsupported config version " + doc["version"].dump() + " (expected " +
                          std::to_string(kConfigVersion) + ")");
    json merged = default_config_json();
    overlay(merged, doc, "");
    return merged;
}

void apply_override(json& merged, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "' is not key=value");
    const std::string path = assignment.substr(0, eq), text = assignment.substr(eq + 1);
    json value;
    try {
        value = json::parse(text);
    } catch (const json::exception&) {
        value = text;
    }
    std::vector<std::string> keys;
    std::stringstream ss(path);
    for (std::string k; std::getline(ss, k, '.');) keys.push_back(k);
    json patch = value;
    for (auto it = keys.rbegin(); it != keys.rend(); ++it) patch = json{{*it, patch}};
    patch["version"] = kConfigVersion;
    overlay(merged, patch, "");
}

RunConfig to_run_config(const json& merged) {
    RunConfig rc;
    try {
        rc.seed = merged.at("seed").get<std::uint64_t>();
        rc.manifest = merged.at("manifest").get<std::string>();
        const auto& d = merged.at("data");
        auto& p = rc.data;
        p.image_size = d.at("image_size");
        p.n_cbct = d.at("n_cbct");
        p.n_mri = d.at("n_mri");
        p.anatomy_seed = d.at("anatomy_seed");
        p.noise_cbct = d.at("noise_cbct");
        p.noise_mri = d.at("noise_mri");
        p.contrast_cbct = d.at("contrast_cbct");
        p.contrast_mri = d.at("contrast_mri");
        p.tumor_radius_min = d.at("tumor_radius_min");
        p.tumor_radius_max = d.at("tumor_radius_max");
        p.n_distractors = d.at("n_distractors");
        p.distractor_ratio_cbct = d.at("distractor_ratio_cbct");
        p.distractor_ratio_mri = d.at("distractor_ratio_mri");
        p.cbct_shading = d.at("cbct_shading");
        p.blur_cbct = d.at("blur_cbct");
        p.blur_mri = d.at("blur_mri");
        p.spacing = {d.at("spacing_mm")[0].get<double>(), d.at("spacing_mm")[1].get<double>()};
        p.val_fraction = d.at("val_fraction");
        p.test_fraction = d.at("test_fraction");
        p.mri_val_fraction = d.at("mri_val_fraction");
        p.mri_test_fraction = d.at("mri_test_fraction");

        json train = merged.at("train");
        train["weights"] = merged.at("weights");
        train["seed"] = rc.seed;
        rc.train = nn::config_from_json(train.dump());

        const auto& m = merged.at("metrics");
        rc.metrics.tau_mm = m.at("tau_mm");
        rc.metrics.kl_bins = m.at("kl_bins");
        rc.metrics.dropout_rate = m.at("dropout_rate");
        rc.metrics.dropout_runs = m.at("dropout_runs");
        rc.metrics.separability_pixels = m.at("separability_pixels");
        rc.metrics.roi_size = m.at("roi_size");
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    rc.data.validate();
    rc.train.weights.validate();
    if (rc.metrics.tau_mm < 0) throw ConfigError("metrics.tau_mm must be non-negative");
    if (rc.metrics.kl_bins < 2) throw ConfigError("metrics.kl_bins must be >= 2");
    if (!(rc.metrics.dropout_rate >= 0 && rc.metrics.dropout_rate <= 1))
        throw ConfigError("metrics.dropout_rate must lie in [0, 1]");
    if (rc.metrics.separability_pixels < 10) throw ConfigError("metrics.separability_pixels must be >= 10");
    if (rc.metrics.roi_size < 0) throw ConfigError("metrics.roi_size must be >= 0");
    return rc;
}

json read_config_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file: " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    try {
        return json::parse(ss.str());
    } catch (const json::exception& e) {
        throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
    }
}

}  // namespace cmedl::cli
