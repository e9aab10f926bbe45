#include "cmedl/nn/netspec.hpp"

#include "cmedl/errors.hpp"

namespace cmedl::nn {

std::string_view to_string(NetKind k) {
    switch (k) {
        case NetKind::Generator: return "generator";
        case NetKind::PatchDiscriminator: return "patch_discriminator";
        case NetKind::UNet: return "unet";
        case NetKind::DenseFCN: return "densefcn";
        case NetKind::CxExtractor: return "cx_extractor";
    }
    return "?";
}

NetKind net_kind_from_string(std::string_view s) {
    for (auto k : {NetKind::Generator, NetKind::PatchDiscriminator, NetKind::UNet, NetKind::DenseFCN,
                   NetKind::CxExtractor})
        if (to_string(k) == s) return k;
    throw ConfigError("unknown network kind: " + std::string(s));
}

std::string_view to_string(Norm n) {
    switch (n) {
        case Norm::Instance: return "instance";
        case Norm::Batch: return "batch";
        case Norm::None: return "none";
    }
    return "?";
}

Norm norm_from_string(std::string_view s) {
    for (auto n : {Norm::Instance, Norm::Batch, Norm::None})
        if (to_string(n) == s) return n;
    throw ConfigError("unknown norm: " + std::string(s));
}

std::string_view to_string(Scale s) { return s == Scale::Desk ? "desk" : "paper"; }

Scale scale_from_string(std::string_view s) {
    if (s == "desk") return Scale::Desk;
    if (s == "paper") return Scale::Paper;
    throw ConfigError("unknown scale: " + std::string(s) + " (expected desk or paper)");
}

void NetSpec::validate() const {
    if (in_channels < 1 || out_channels < 1 || base_width < 1) throw ConfigError("network widths must be positive");
    switch (kind) {
        case NetKind::Generator:
            if (residual_blocks < 0) throw ConfigError("residual_blocks must be non-negative");
            break;
        case NetKind::PatchDiscriminator:
            if (n_layers < 1) throw ConfigError("discriminator n_layers must be >= 1");
            break;
        case NetKind::UNet:
            if (pool_levels < 1 || pool_levels > 6) throw ConfigError("pool_levels must lie in [1, 6]");
            if (tap_names.size() != 2) throw ConfigError("segmenters declare exactly two taps");
            break;
        case NetKind::DenseFCN:
            if (db_layers < 1 || growth_rate < 1 || td_count < 1 || td_count > 6)
                throw ConfigError("invalid dense block configuration");
            if (tap_names.size() != 2) throw ConfigError("segmenters declare exactly two taps");
            break;
        case NetKind::CxExtractor:
            if (base_width % 4 != 0) throw ConfigError("cx extractor width must be divisible by 4");
            if (tap_names.size() != 3) throw ConfigError("cx extractor declares three taps");
            break;
    }
}

int input_multiple(const NetSpec& s) {
    switch (s.kind) {
        case NetKind::Generator: return 4;
        case NetKind::PatchDiscriminator: return 1;
        case NetKind::UNet: return 1 << s.pool_levels;
        case NetKind::DenseFCN: return 1 << s.td_count;
        case NetKind::CxExtractor: return 8;
    }
    return 1;
}

NetSpec generator_spec(Scale s) {
    NetSpec n;
    n.kind = NetKind::Generator;
    n.in_channels = 1;
    n.out_channels = 1;
    n.base_width = s == Scale::Desk ? 32 : 64;
    n.residual_blocks = s == Scale::Desk ? 4 : 9;
    n.norm = Norm::Instance;
    return n;
}

NetSpec discriminator_spec(Scale s) {
    NetSpec n;
    n.kind = NetKind::PatchDiscriminator;
    n.in_channels = 1;
    n.out_channels = 1;
    n.base_width = s == Scale::Desk ? 32 : 64;
    // Receptive field 16 px at 64 px input mirrors 70 px at 256 px.
    n.n_layers = s == Scale::Desk ? 1 : 3;
    n.norm = Norm::Batch;
    return n;
}

NetSpec unet_spec(Scale s, int in_channels) {
    NetSpec n;
    n.kind = NetKind::UNet;
    n.in_channels = in_channels;
    n.out_channels = 2;
    n.base_width = s == Scale::Desk ? 16 : 64;
    n.pool_levels = 4;
    n.norm = Norm::Batch;
    n.tap_names = {"dec1", "dec0"};
    return n;
}

NetSpec densefcn_spec(Scale, int in_channels) {
    NetSpec n;
    n.kind = NetKind::DenseFCN;
    n.in_channels = in_channels;
    n.out_channels = 2;
    n.base_width = 48;
    n.db_layers = 4;
    n.growth_rate = 12;
    n.td_count = 5;
    n.norm = Norm::Batch;
    n.tap_names = {"tu_last2", "tu_last1"};
    return n;
}

NetSpec cx_extractor_spec(Scale s) {
    NetSpec n;
    n.kind = NetKind::CxExtractor;
    n.in_channels = 1;
    n.out_channels = 1;
    n.base_width = s == Scale::Desk ? 64 : 256;
    n.norm = Norm::None;
    n.tap_names = {"cx_a", "cx_b", "cx_c"};
    return n;
}

std::string describe_difference(const NetSpec& e, const NetSpec& f) {
    const auto num = [](const char* name, int a, int b) {
        return std::string(name) + " expected " + std::to_string(a) + ", found " + std::to_string(b);
    };
    if (e.kind != f.kind)
        return "kind expected " + std::string(to_string(e.kind)) + ", found " + std::string(to_string(f.kind));
    if (e.in_channels != f.in_channels) return num("in_channels", e.in_channels, f.in_channels);
    if (e.out_channels != f.out_channels) return num("out_channels", e.out_channels, f.out_channels);
    if (e.base_width != f.base_width) return num("base_width", e.base_width, f.base_width);
    if (e.residual_blocks != f.residual_blocks) return num("residual_blocks", e.residual_blocks, f.residual_blocks);
    if (e.n_layers != f.n_layers) return num("n_layers", e.n_layers, f.n_layers);
    if (e.pool_levels != f.pool_levels) return num("pool_levels", e.pool_levels, f.pool_levels);
    if (e.db_layers != f.db_layers) return num("db_layers", e.db_layers, f.db_layers);
    if (e.growth_rate != f.growth_rate) return num("growth_rate", e.growth_rate, f.growth_rate);
    if (e.td_count != f.td_count) return num("td_count", e.td_count, f.td_count);
    if (e.norm != f.norm) return "norm differs";
    if (e.tap_names != f.tap_names) return "tap names differ";
    return {};
}

}  // namespace cmedl::nn
