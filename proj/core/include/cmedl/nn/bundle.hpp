#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "cmedl/nn/adam.hpp"
#include "cmedl/nn/losses.hpp"
#include "cmedl/nn/networks.hpp"

namespace cmedl::nn {

inline constexpr int kCheckpointFormatVersion = 1;

/// Networks by role (g_c2m, g_m2c, d_m, d_c, s_teacher, s_student, cx, ...),
/// their optimizers, and the training position.
struct ModelBundle {
    std::map<std::string, NetworkPtr> nets;
    std::map<std::string, Adam> optimizers;
    std::map<std::string, std::vector<std::string>> optimizer_nets;
    LossWeights weights;
    std::string mode;
    int epoch = 0;
    std::int64_t step = 0;
    std::uint64_t seed = 0;
    std::string state_json = "{}";  // trainer bookkeeping, opaque here
    NamedTensors extra;             // e.g. replay pool images

    bool has(const std::string& role) const { return nets.count(role) != 0; }
    /// Throws CheckpointError when the role is absent.
    Network& net(const std::string& role) const;
    NetworkPtr ptr(const std::string& role) const;

    void add_optimizer(const std::string& name, const std::vector<std::string>& roles, AdamOptions opt);
    Adam& optimizer(const std::string& name);
};

/// Parameters and buffers of every network, prefixed by role.
NamedTensors bundle_state(const ModelBundle& b);

/// Writes dir/weights.bin and dir/checkpoint.json.
void save_checkpoint(const ModelBundle& b, const std::filesystem::path& dir);

/// Rebuilds networks from the recorded specs and restores weights, buffers,
/// optimizer state, counters and extras.
ModelBundle load_checkpoint(const std::filesystem::path& dir);
/// As above, but every role in `expected` must be present with an equal spec;
/// otherwise CheckpointError naming the first difference.
ModelBundle load_checkpoint(const std::filesystem::path& dir, const std::map<std::string, NetSpec>& expected);

std::uint64_t parameter_hash(const torch::nn::Module& m);

/// Restores the buffers (e.g. batch-norm running statistics) of the given
/// modules when it goes out of scope.
class BufferFreeze {
public:
    explicit BufferFreeze(std::vector<torch::nn::Module*> modules);
    ~BufferFreeze();
    BufferFreeze(const BufferFreeze&) = delete;
    BufferFreeze& operator=(const BufferFreeze&) = delete;

private:
    std::vector<std::pair<torch::Tensor, torch::Tensor>> saved_;  // (live, copy)
};

}  // namespace cmedl::nn
