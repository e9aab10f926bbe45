#include "cmedl/nn/networks.hpp"

#include "cmedl/errors.hpp"

namespace cmedl::nn {

namespace F = torch::nn::functional;
using torch::nn::BatchNorm2d;
using torch::nn::Conv2d;
using torch::nn::Conv2dOptions;
using torch::nn::ConvTranspose2d;
using torch::nn::ConvTranspose2dOptions;
using torch::nn::InstanceNorm2d;
using torch::nn::ReflectionPad2d;
using torch::nn::Sequential;

void Network::check_input(const torch::Tensor& x) const {
    if (x.dim() != 4) throw ShapeError("network input must be N x C x H x W");
    if (x.size(1) != spec_.in_channels)
        throw ShapeError("network expects " + std::to_string(spec_.in_channels) + " input channels, got " +
                         std::to_string(x.size(1)));
    const int m = input_multiple(spec_);
    if (x.size(2) % m != 0 || x.size(3) % m != 0)
        throw ShapeError(std::string(to_string(spec_.kind)) + " input side must be divisible by " +
                         std::to_string(m));
}

namespace {

Conv2d conv(int in, int out, int k, int stride = 1, int pad = 0, bool bias = true) {
    return Conv2d(Conv2dOptions(in, out, k).stride(stride).padding(pad).bias(bias));
}

void normal_init(torch::nn::Module& m, double gain) {
    torch::NoGradGuard ng;
    for (auto& mod : m.modules(/*include_self=*/false)) {
        if (auto* c = mod->as<torch::nn::Conv2dImpl>()) {
            c->weight.normal_(0.0, gain);
            if (c->bias.defined()) c->bias.zero_();
        } else if (auto* t = mod->as<torch::nn::ConvTranspose2dImpl>()) {
            t->weight.normal_(0.0, gain);
            if (t->bias.defined()) t->bias.zero_();
        } else if (auto* b = mod->as<torch::nn::BatchNorm2dImpl>()) {
            b->weight.normal_(1.0, gain);
            b->bias.zero_();
        }
    }
}

// ---------------------------------------------------------------- generator

struct ResBlockImpl : torch::nn::Module {
    Sequential body;
    explicit ResBlockImpl(int ch) {
        body = register_module("body", Sequential(ReflectionPad2d(1), conv(ch, ch, 3), InstanceNorm2d(ch),
                                                  torch::nn::ReLU(), ReflectionPad2d(1), conv(ch, ch, 3),
                                                  InstanceNorm2d(ch)));
    }
    torch::Tensor forward(const torch::Tensor& x) { return x + body->forward(x); }
};
TORCH_MODULE(ResBlock);

class Generator final : public Network {
public:
    explicit Generator(const NetSpec& s) : Network(s) {
        const int w = s.base_width;
        Sequential seq(ReflectionPad2d(3), conv(s.in_channels, w, 7), InstanceNorm2d(w), torch::nn::ReLU(),
                       conv(w, 2 * w, 3, 2, 1), InstanceNorm2d(2 * w), torch::nn::ReLU(),
                       conv(2 * w, 4 * w, 3, 2, 1), InstanceNorm2d(4 * w), torch::nn::ReLU());
        for (int i = 0; i < s.residual_blocks; ++i) seq->push_back(ResBlock(4 * w));
        seq->push_back(ConvTranspose2d(ConvTranspose2dOptions(4 * w, 2 * w, 3).stride(2).padding(1).output_padding(1)));
        seq->push_back(InstanceNorm2d(2 * w));
        seq->push_back(torch::nn::ReLU());
        seq->push_back(ConvTranspose2d(ConvTranspose2dOptions(2 * w, w, 3).stride(2).padding(1).output_padding(1)));
        seq->push_back(InstanceNorm2d(w));
        seq->push_back(torch::nn::ReLU());
        seq->push_back(ReflectionPad2d(3));
        seq->push_back(conv(w, s.out_channels, 7));
        seq->push_back(torch::nn::Tanh());
        net_ = register_module("net", seq);
        normal_init(*this, 0.02);
    }

    NetOutput forward_with_taps(const torch::Tensor& x) override {
        check_input(x);
        return {net_->forward(x), {}, {}};
    }

private:
    Sequential net_{nullptr};
};

// ------------------------------------------------------------ discriminator

class PatchDiscriminator final : public Network {
public:
    explicit PatchDiscriminator(const NetSpec& s) : Network(s) {
        const int w = s.base_width;
        const bool bn = s.norm == Norm::Batch;
        const auto lrelu = [] { return torch::nn::LeakyReLU(torch::nn::LeakyReLUOptions().negative_slope(0.2)); };
        Sequential seq(conv(s.in_channels, w, 4, 2, 1), lrelu());
        int prev = w;
        for (int i = 1; i < s.n_layers; ++i) {
            const int out = w * std::min(1 << i, 8);
            seq->push_back(conv(prev, out, 4, 2, 1, !bn));
            if (bn) seq->push_back(BatchNorm2d(out));
            seq->push_back(lrelu());
            prev = out;
        }
        const int out = w * std::min(1 << s.n_layers, 8);
        seq->push_back(conv(prev, out, 4, 1, 1, !bn));
        if (bn) seq->push_back(BatchNorm2d(out));
        seq->push_back(lrelu());
        seq->push_back(conv(out, s.out_channels, 4, 1, 1));
        net_ = register_module("net", seq);
        normal_init(*this, 0.02);
    }

    NetOutput forward_with_taps(const torch::Tensor& x) override {
        check_input(x);
        const int rf = receptive_field(spec());
        if (x.size(2) < rf || x.size(3) < rf)
            throw ShapeError("discriminator input smaller than its receptive field (" + std::to_string(rf) + " px)");
        return {net_->forward(x), {}, {}};
    }

private:
    Sequential net_{nullptr};
};

// --------------------------------------------------------------------- unet

Sequential double_conv(int in, int out) {
    return Sequential(conv(in, out, 3, 1, 1), BatchNorm2d(out), torch::nn::ReLU(), conv(out, out, 3, 1, 1),
                      BatchNorm2d(out), torch::nn::ReLU());
}

class UNet final : public Network {
public:
    explicit UNet(const NetSpec& s) : Network(s) {
        const int L = s.pool_levels;
        std::vector<int> w(L);
        for (int i = 0; i < L; ++i) w[i] = s.base_width << i;
        int prev = s.in_channels;
        for (int i = 0; i < L; ++i) {
            enc_.push_back(register_module("enc" + std::to_string(i), double_conv(prev, w[i])));
            prev = w[i];
        }
        bottleneck_ = register_module("bottleneck", double_conv(prev, w[L - 1]));
        prev = w[L - 1];
        dec_.resize(L);
        for (int i = L - 1; i >= 0; --i) {
            const int out = i > 0 ? w[i - 1] : w[0];
            dec_[i] = register_module("dec" + std::to_string(i), double_conv(prev + w[i], out));
            prev = out;
        }
        head_ = register_module("head", conv(prev, s.out_channels, 1));
    }

    NetOutput forward_with_taps(const torch::Tensor& x) override {
        check_input(x);
        const int L = spec().pool_levels;
        std::vector<torch::Tensor> skips;
        auto h = x;
        for (int i = 0; i < L; ++i) {
            h = enc_[i]->forward(h);
            skips.push_back(h);
            h = F::max_pool2d(h, F::MaxPool2dFuncOptions(2));
        }
        h = bottleneck_->forward(h);
        NetOutput out;
        for (int i = L - 1; i >= 0; --i) {
            h = F::interpolate(h, F::InterpolateFuncOptions()
                                      .scale_factor(std::vector<double>{2.0, 2.0})
                                      .mode(torch::kBilinear)
                                      .align_corners(true));
            h = dec_[i]->forward(torch::cat({skips[i], h}, 1));
            if (i == 1) out.taps.emplace_back(spec().tap_names[0], h);
            if (i == 0) out.taps.emplace_back(spec().tap_names[1], h);
        }
        out.logits = head_->forward(h);
        out.output = torch::softmax(out.logits, 1);
        return out;
    }

    std::vector<torch::Tensor> last_two_layer_weights() override {
        auto* last_conv = dec_[0]->ptr(3)->as<torch::nn::Conv2dImpl>();
        return {last_conv->weight, head_->weight};
    }

private:
    std::vector<Sequential> enc_;
    std::vector<Sequential> dec_;
    Sequential bottleneck_{nullptr};
    Conv2d head_{nullptr};
};

// ----------------------------------------------------------------- densefcn

struct DenseBlockImpl : torch::nn::Module {
    std::vector<Sequential> layers;
    bool keep_input;
    DenseBlockImpl(int in, int n_layers, int growth, bool keep_input_) : keep_input(keep_input_) {
        for (int l = 0; l < n_layers; ++l)
            layers.push_back(register_module(
                "layer" + std::to_string(l),
                Sequential(BatchNorm2d(in + l * growth), torch::nn::ReLU(), conv(in + l * growth, growth, 3, 1, 1))));
    }
    // Returns input ++ new features when keep_input, else only the new features.
    torch::Tensor forward(torch::Tensor x) {
        std::vector<torch::Tensor> fresh;
        for (auto& l : layers) {
            auto y = l->forward(x);
            fresh.push_back(y);
            x = torch::cat({x, y}, 1);
        }
        return keep_input ? x : torch::cat(fresh, 1);
    }
};
TORCH_MODULE(DenseBlock);

class DenseFCN final : public Network {
public:
    explicit DenseFCN(const NetSpec& s) : Network(s) {
        const int k = s.growth_rate, n = s.db_layers, T = s.td_count;
        stem_ = register_module("stem", conv(s.in_channels, s.base_width, 3, 1, 1));
        int c = s.base_width;
        std::vector<int> skip_ch;
        for (int i = 0; i < T; ++i) {
            down_.push_back(register_module("db_down" + std::to_string(i), DenseBlock(c, n, k, true)));
            c += n * k;
            skip_ch.push_back(c);
            td_.push_back(register_module("td" + std::to_string(i),
                                          Sequential(BatchNorm2d(c), torch::nn::ReLU(), conv(c, c, 1),
                                                     torch::nn::MaxPool2d(torch::nn::MaxPool2dOptions(2)))));
        }
        bottleneck_ = register_module("db_bottleneck", DenseBlock(c, n, k, false));
        int up_in = n * k;
        for (int i = 0; i < T; ++i) {
            tu_.push_back(register_module(
                "tu" + std::to_string(i),
                ConvTranspose2d(ConvTranspose2dOptions(up_in, n * k, 3).stride(2).padding(1).output_padding(1))));
            const int cin = n * k + skip_ch[T - 1 - i];
            const bool last = i == T - 1;
            up_.push_back(register_module("db_up" + std::to_string(i), DenseBlock(cin, n, k, last)));
            up_in = last ? cin + n * k : n * k;
        }
        head_ = register_module("head", conv(up_in, s.out_channels, 1));
    }

    NetOutput forward_with_taps(const torch::Tensor& x) override {
        check_input(x);
        const int T = spec().td_count;
        std::vector<torch::Tensor> skips;
        auto h = stem_->forward(x);
        for (int i = 0; i < T; ++i) {
            h = down_[i]->forward(h);
            skips.push_back(h);
            h = td_[i]->forward(h);
        }
        h = bottleneck_->forward(h);
        NetOutput out;
        for (int i = 0; i < T; ++i) {
            auto u = tu_[i]->forward(h);
            if (i == T - 2) out.taps.emplace_back(spec().tap_names[0], u);
            if (i == T - 1) out.taps.emplace_back(spec().tap_names[1], u);
            h = up_[i]->forward(torch::cat({u, skips[T - 1 - i]}, 1));
        }
        out.logits = head_->forward(h);
        out.output = torch::softmax(out.logits, 1);
        return out;
    }

    std::vector<torch::Tensor> last_two_layer_weights() override {
        auto& last = up_.back()->layers.back();
        return {last->ptr(2)->as<torch::nn::Conv2dImpl>()->weight, head_->weight};
    }

private:
    Conv2d stem_{nullptr};
    std::vector<DenseBlock> down_;
    std::vector<Sequential> td_;
    DenseBlock bottleneck_{nullptr};
    std::vector<ConvTranspose2d> tu_;
    std::vector<DenseBlock> up_;
    Conv2d head_{nullptr};
};

// ------------------------------------------------------------- cx extractor

class CxExtractor final : public Network {
public:
    explicit CxExtractor(const NetSpec& s) : Network(s) {
        const int c = s.base_width;
        c1_ = register_module("conv1", conv(s.in_channels, c / 4, 3, 1, 1));
        c2_ = register_module("conv2", conv(c / 4, c / 2, 3, 1, 1));
        c3_ = register_module("conv3", conv(c / 2, c, 3, 1, 1));
        c4_ = register_module("conv4", conv(c, c, 3, 1, 1));
        c5_ = register_module("conv5", conv(c, 2 * c, 3, 1, 1));
        torch::NoGradGuard ng;
        for (auto* m : {&c1_, &c2_, &c3_, &c4_, &c5_}) {
            torch::nn::init::orthogonal_((*m)->weight);
            (*m)->bias.zero_();
        }
        for (auto& p : parameters()) p.set_requires_grad(false);
    }

    NetOutput forward_with_taps(const torch::Tensor& x) override {
        check_input(x);
        const auto pool = [](const torch::Tensor& t) { return F::max_pool2d(t, F::MaxPool2dFuncOptions(2)); };
        auto h = pool(torch::relu(c1_->forward(x)));
        h = pool(torch::relu(c2_->forward(h)));
        auto a = torch::relu(c3_->forward(h));
        auto b = torch::relu(c4_->forward(a));
        auto c = torch::relu(c5_->forward(pool(b)));
        NetOutput out;
        out.output = c;
        out.taps = {{spec().tap_names[0], a}, {spec().tap_names[1], b}, {spec().tap_names[2], c}};
        return out;
    }

private:
    Conv2d c1_{nullptr}, c2_{nullptr}, c3_{nullptr}, c4_{nullptr}, c5_{nullptr};
};

template <typename Net>
NetworkPtr make(const NetSpec& spec, NetKind expected, std::uint64_t seed) {
    if (spec.kind != expected) throw ConfigError("network spec kind mismatch");
    spec.validate();
    torch::manual_seed(seed);
    return std::make_shared<Net>(spec);
}

}  // namespace

NetworkPtr build_generator(const NetSpec& s, std::uint64_t seed) { return make<Generator>(s, NetKind::Generator, seed); }
NetworkPtr build_discriminator(const NetSpec& s, std::uint64_t seed) {
    return make<PatchDiscriminator>(s, NetKind::PatchDiscriminator, seed);
}
NetworkPtr build_unet(const NetSpec& s, std::uint64_t seed) { return make<UNet>(s, NetKind::UNet, seed); }
NetworkPtr build_densefcn(const NetSpec& s, std::uint64_t seed) { return make<DenseFCN>(s, NetKind::DenseFCN, seed); }
NetworkPtr build_cx_extractor(const NetSpec& s, std::uint64_t seed) {
    return make<CxExtractor>(s, NetKind::CxExtractor, seed);
}

NetworkPtr build_network(const NetSpec& s, std::uint64_t seed) {
    switch (s.kind) {
        case NetKind::Generator: return build_generator(s, seed);
        case NetKind::PatchDiscriminator: return build_discriminator(s, seed);
        case NetKind::UNet: return build_unet(s, seed);
        case NetKind::DenseFCN: return build_densefcn(s, seed);
        case NetKind::CxExtractor: return build_cx_extractor(s, seed);
    }
    throw ConfigError("unknown network kind");
}

void load_extractor_weights(Network& cx, const std::vector<std::pair<std::string, torch::Tensor>>& weights) {
    if (cx.spec().kind != NetKind::CxExtractor) throw ConfigError("not a cx extractor");
    auto params = cx.named_parameters();
    torch::NoGradGuard ng;
    for (const auto& [name, t] : weights) {
        auto* p = params.find(name);
        if (!p) throw CheckpointError("unknown extractor parameter " + name);
        if (!p->sizes().equals(t.sizes())) throw CheckpointError("shape mismatch for extractor parameter " + name);
        p->copy_(t);
    }
}

torch::nn::AnyModule make_dense_block(int in_channels, int layers, int growth) {
    return torch::nn::AnyModule(DenseBlock(in_channels, layers, growth, true));
}

std::int64_t parameter_count(const torch::nn::Module& m) {
    std::int64_t n = 0;
    for (const auto& p : m.parameters()) n += p.numel();
    return n;
}

int receptive_field(const NetSpec& d) {
    if (d.kind != NetKind::PatchDiscriminator) throw ConfigError("receptive field is defined for discriminators");
    // Kernels 4 everywhere: n_layers stride-2 layers then two stride-1 layers.
    std::vector<int> strides(d.n_layers, 2);
    strides.push_back(1);
    strides.push_back(1);
    int rf = 1;
    for (auto it = strides.rbegin(); it != strides.rend(); ++it) rf = (rf - 1) * *it + 4;
    return rf;
}

}  // namespace cmedl::nn
