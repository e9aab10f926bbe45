#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace cmedl::nn {

enum class NetKind { Generator, PatchDiscriminator, UNet, DenseFCN, CxExtractor };
enum class Norm { Instance, Batch, None };
enum class Scale { Desk, Paper };

std::string_view to_string(NetKind k);
NetKind net_kind_from_string(std::string_view s);
std::string_view to_string(Norm n);
Norm norm_from_string(std::string_view s);
std::string_view to_string(Scale s);
Scale scale_from_string(std::string_view s);

struct NetSpec {
    NetKind kind = NetKind::UNet;
    int in_channels = 1;
    int out_channels = 2;
    int base_width = 16;
    int residual_blocks = 9;  // generator
    int n_layers = 3;         // discriminator strided layers
    int pool_levels = 4;      // unet
    int db_layers = 4;        // densefcn
    int growth_rate = 12;     // densefcn
    int td_count = 5;         // densefcn
    Norm norm = Norm::Batch;
    std::vector<std::string> tap_names;

    /// Throws ConfigError on inconsistent values.
    void validate() const;
    friend bool operator==(const NetSpec&, const NetSpec&) = default;
};

/// Smallest input side accepted (divisibility and receptive field).
int input_multiple(const NetSpec& s);

NetSpec generator_spec(Scale s = Scale::Desk);
NetSpec discriminator_spec(Scale s = Scale::Desk);
NetSpec unet_spec(Scale s = Scale::Desk, int in_channels = 1);
NetSpec densefcn_spec(Scale s = Scale::Desk, int in_channels = 1);
NetSpec cx_extractor_spec(Scale s = Scale::Desk);

/// Human-readable description of the first differing field, empty if equal.
std::string describe_difference(const NetSpec& expected, const NetSpec& found);

}  // namespace cmedl::nn
