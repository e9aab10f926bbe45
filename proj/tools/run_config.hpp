#pragma once

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>

#include "cmedl/phantom.hpp"
#include "cmedl/nn/trainer.hpp"

namespace cmedl::cli {

inline constexpr int kConfigVersion = 1;

struct MetricParams {
    double tau_mm = 4.38;
    int kl_bins = 256;
    double dropout_rate = 0.5;
    int dropout_runs = 10;
    int separability_pixels = 64;  // per class and case
    int roi_size = 0;              // 0: 160/256 of the patch side
};

/// Everything a run reads: phantom generation, training, loss weights,
/// metric parameters, the shared seed and the manifest path.
struct RunConfig {
    std::uint64_t seed = 0;
    std::string manifest;
    PhantomConfig data;
    nn::TrainConfig train;
    MetricParams metrics;
};

/// The complete schema with every default filled in.
nlohmann::json default_config_json();

/// Overlays `doc` on the defaults. Unknown keys, type mismatches and a missing
/// or unsupported version are ConfigErrors.
nlohmann::json merge_config(const nlohmann::json& doc);

/// Applies "a.b=value" (value parsed as JSON, else taken as a string).
void apply_override(nlohmann::json& merged, const std::string& assignment);

/// Converts and validates a merged document.
RunConfig to_run_config(const nlohmann::json& merged);

/// Reads a config file; ConfigError naming the path when it is missing or invalid.
nlohmann::json read_config_file(const std::filesystem::path& path);

}  // namespace cmedl::cli
