#include "cmedl/nn/data.hpp"

#include "cmedl/errors.hpp"
#include "cmedl/image_io.hpp"

namespace cmedl::nn {

Sample prepare_sample(const std::string& case_id, const Image& img, const Mask* mask, int patch_size) {
    auto crop = crop_body(img, patch_size);
    Sample s{case_id, std::move(crop.patch), {}, crop.window};
    if (mask) {
        require_aligned(img, *mask);
        s.mask = apply_crop(*mask, s.window);
    }
    return s;
}

std::vector<Sample> load_samples(const Manifest& m, Modality modality, Split split, int patch_size,
                                 bool require_masks) {
    const auto entries = m.select(modality, split);
    if (entries.empty())
        throw ConfigError("empty split: " + std::string(to_string(modality)) + "/" + std::string(to_string(split)));
    std::vector<Sample> out;
    out.reserve(entries.size());
    for (const auto* e : entries) {
        const Image img = load_image(m.resolve(e->image_path));
        if (e->mask_path) {
            const Mask mask = load_mask(m.resolve(*e->mask_path));
            out.push_back(prepare_sample(e->case_id, img, &mask, patch_size));
        } else {
            if (require_masks) throw ConfigError("case " + e->case_id + " has no mask");
            out.push_back(prepare_sample(e->case_id, img, nullptr, patch_size));
        }
    }
    return out;
}

torch::Tensor image_tensor(const Image& img) {
    const Image d = to_network_domain(standardize(img));
    auto t = torch::empty({1, 1, img.rows(), img.cols()}, torch::kFloat32);
    std::copy(d.pixels.storage().begin(), d.pixels.storage().end(), t.data_ptr<float>());
    return t;
}

torch::Tensor image_batch(std::span<const Image* const> images) {
    if (images.empty()) throw ShapeError("empty image batch");
    std::vector<torch::Tensor> parts;
    parts.reserve(images.size());
    for (const auto* img : images) {
        if (img->rows() != images[0]->rows() || img->cols() != images[0]->cols())
            throw ShapeError("images in a batch differ in size");
        parts.push_back(image_tensor(*img));
    }
    return torch::cat(parts, 0);
}

torch::Tensor mask_batch(std::span<const Mask* const> masks) {
    if (masks.empty()) throw ShapeError("empty mask batch");
    const int h = masks[0]->rows(), w = masks[0]->cols();
    auto t = torch::empty({static_cast<long>(masks.size()), h, w}, torch::kFloat32);
    float* p = t.data_ptr<float>();
    for (const auto* m : masks) {
        if (m->rows() != h || m->cols() != w) throw ShapeError("masks in a batch differ in size");
        for (auto v : m->pixels.values()) *p++ = v ? 1.0f : 0.0f;
    }
    return t;
}

Grid<float> tensor_to_grid(const torch::Tensor& t) {
    auto c = t.detach().to(torch::kFloat32).contiguous();
    if (c.dim() == 4 && c.size(0) == 1 && c.size(1) == 1) c = c[0][0];
    if (c.dim() != 2) throw ShapeError("expected a single-channel 2D tensor");
    const int h = static_cast<int>(c.size(0)), w = static_cast<int>(c.size(1));
    const float* p = c.data_ptr<float>();
    return Grid<float>(h, w, std::vector<float>(p, p + static_cast<std::size_t>(h) * w));
}

Image tensor_to_image(const torch::Tensor& t, Spacing spacing, Modality modality) {
    return Image(tensor_to_grid(t), spacing, modality);
}

}  // namespace cmedl::nn
