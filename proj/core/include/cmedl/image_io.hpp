#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "cmedl/image.hpp"

namespace cmedl {

// Binary layouts (all integers and floats little-endian):
//   image:  "CMI1" u32 H, u32 W, f32 row_spacing, f32 col_spacing, u8 modality, H*W f32 row-major
//   mask:   "CMS1" same header,                                               H*W u8
//   taps:   "CMF1" u32 layer_count, then per layer:
//           u16 name_len, name bytes, u32 C, u32 H, u32 W, f32 row_spacing, f32 col_spacing,
//           C*H*W f32 (channel-major, each channel row-major)

void save_image(const std::filesystem::path& path, const Image& img);
Image load_image(const std::filesystem::path& path);

void save_mask(const std::filesystem::path& path, const Mask& mask, Modality tag = Modality::CBCT);
Mask load_mask(const std::filesystem::path& path);

/// One named multi-channel feature map (C x H x W).
struct FeatureMapData {
    std::string name;
    int channels = 0;
    int rows = 0;
    int cols = 0;
    Spacing spacing;
    std::vector<float> values;

    float at(int c, int r, int col) const {
        return values[(static_cast<std::size_t>(c) * rows + r) * cols + col];
    }
    friend bool operator==(const FeatureMapData&, const FeatureMapData&) = default;
};

void save_feature_maps(const std::filesystem::path& path, const std::vector<FeatureMapData>& layers);
std::vector<FeatureMapData> load_feature_maps(const std::filesystem::path& path);

/// Reads a whole file; throws IoError.
std::vector<char> read_file_bytes(const std::filesystem::path& path);
/// Writes a whole file, creating parent directories; throws IoError.
void write_file_bytes(const std::filesystem::path& path, const std::vector<char>& bytes);

}  // namespace cmedl
