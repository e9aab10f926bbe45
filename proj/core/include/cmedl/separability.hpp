#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cmedl/image.hpp"
#include "cmedl/image_io.hpp"

namespace cmedl::metrics {

struct FeatureRecord {
    std::uint32_t case_index = 0;
    std::uint32_t pixel_index = 0;  // row * cols + col on the feature grid
    std::uint8_t label = 0;         // 1 tumor, 0 background
    std::vector<float> features;
    friend bool operator==(const FeatureRecord&, const FeatureRecord&) = default;
};

// "CMFT" u32 header_len, JSON header, then records:
//   u32 case_index, u32 pixel_index, u8 label, C f32
struct FeatureTable {
    std::string layer;
    int channels = 0;
    int roi_size = 0;
    std::uint64_t seed = 0;
    std::vector<std::string> case_ids;
    double tsne_perplexity = 60.0;
    int tsne_iterations = 1000;
    std::vector<FeatureRecord> records;
};

void save_feature_table(const std::filesystem::path& path, const FeatureTable& table);
FeatureTable load_feature_table(const std::filesystem::path& path);

struct SeparabilityOptions {
    int roi_size = 0;           // 0: scale 160/256 of the mask side
    int pixels_per_class = 64;  // per case
    std::uint64_t seed = 0;
};

struct SeparabilityCase {
    std::string case_id;
    FeatureMapData features;
    Mask mask;
};

struct SeparabilityResult {
    double score = 0.0;
    FeatureTable table;
};

/// ROI side for a mask of side `n`: 160 px at 256, proportionally smaller.
int default_roi_size(int n);

/// Balanced tumor/background sampling inside a tumor-centred ROI on each case,
/// pooled; silhouette over the sampled feature vectors.
/// Throws Error when fewer than 10 pixels are available per class.
SeparabilityResult feature_separability(const std::vector<SeparabilityCase>& cases, const SeparabilityOptions& opt);

}  // namespace cmedl::metrics
