#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "cmedl/nn/netspec.hpp"

namespace cmedl::nn {

/// Named intermediate activations, N x C x H x W, in declaration order.
using FeatureStack = std::vector<std::pair<std::string, torch::Tensor>>;

struct NetOutput {
    torch::Tensor output;  // image (generator), patch logits (discriminator), class probabilities (segmenter)
    torch::Tensor logits;  // segmenter pre-softmax scores; undefined otherwise
    FeatureStack taps;
};

class Network : public torch::nn::Module {
public:
    explicit Network(NetSpec spec) : spec_(std::move(spec)) {}
    const NetSpec& spec() const noexcept { return spec_; }

    virtual NetOutput forward_with_taps(const torch::Tensor& x) = 0;
    torch::Tensor forward(const torch::Tensor& x) { return forward_with_taps(x).output; }

    /// Weight tensors of the last two weighted layers (segmenters only).
    virtual std::vector<torch::Tensor> last_two_layer_weights() { return {}; }

protected:
    void check_input(const torch::Tensor& x) const;

private:
    NetSpec spec_;
};

using NetworkPtr = std::shared_ptr<Network>;

/// Builds any network kind. Initialization draws from torch's global
/// generator, reseeded with `seed` first, so equal seeds give equal weights.
NetworkPtr build_network(const NetSpec& spec, std::uint64_t seed);

NetworkPtr build_generator(const NetSpec& spec, std::uint64_t seed);
NetworkPtr build_discriminator(const NetSpec& spec, std::uint64_t seed);
NetworkPtr build_unet(const NetSpec& spec, std::uint64_t seed);
NetworkPtr build_densefcn(const NetSpec& spec, std::uint64_t seed);
NetworkPtr build_cx_extractor(const NetSpec& spec, std::uint64_t seed);

/// Replaces extractor weights with externally supplied ones (e.g. pretrained);
/// names follow named_parameters(). Shapes must match.
void load_extractor_weights(Network& cx, const std::vector<std::pair<std::string, torch::Tensor>>& weights);

std::int64_t parameter_count(const torch::nn::Module& m);

/// Analytic receptive field (pixels) of one discriminator output unit.
int receptive_field(const NetSpec& discriminator);

/// Stand-alone dense block (BN-ReLU-conv3x3 layers); output keeps its input
/// concatenated with the new features.
torch::nn::AnyModule make_dense_block(int in_channels, int layers, int growth);

/// Convenience: forward a batch and return its taps (segmenter/extractor).
inline FeatureStack taps_of(Network& net, const torch::Tensor& x) { return net.forward_with_taps(x).taps; }

}  // namespace cmedl::nn
