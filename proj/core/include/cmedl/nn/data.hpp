#pragma once

#include <torch/torch.h>

#include <span>
#include <string>
#include <vector>

#include "cmedl/image.hpp"
#include "cmedl/manifest.hpp"
#include "cmedl/preprocess.hpp"

namespace cmedl::nn {

/// A case cropped to the network patch, with the window back into its frame.
struct Sample {
    std::string case_id;
    Image patch;
    Mask mask;  // aligned to patch; empty when the manifest has no mask
    CropWindow window;
};

/// Loads and crops every case of (modality, split). Throws ConfigError on an
/// empty selection and when a mask is required but missing.
std::vector<Sample> load_samples(const Manifest& m, Modality modality, Split split, int patch_size,
                                 bool require_masks = true);

Sample prepare_sample(const std::string& case_id, const Image& img, const Mask* mask, int patch_size);

/// Standardizes each image and maps it to the (-1, 1) network domain; N x 1 x H x W.
torch::Tensor image_batch(std::span<const Image* const> images);
torch::Tensor image_tensor(const Image& img);
/// N x H x W float 0/1.
torch::Tensor mask_batch(std::span<const Mask* const> masks);

/// H x W (or 1 x 1 x H x W) tensor to an image with the given spacing and tag.
Image tensor_to_image(const torch::Tensor& t, Spacing spacing, Modality modality);
Grid<float> tensor_to_grid(const torch::Tensor& t);

}  // namespace cmedl::nn
