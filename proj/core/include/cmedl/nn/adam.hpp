#pragma once

#include <cstdint>

#include "cmedl/nn/tensor_blob.hpp"

namespace cmedl::nn {

struct AdamOptions {
    double lr = 1e-4;
    double beta1 = 0.5;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Adam with bias correction over a fixed, named parameter list. Parameters
/// whose gradient is undefined in a step are left untouched.
class Adam {
public:
    Adam() = default;
    Adam(NamedTensors params, AdamOptions opt);

    void zero_grad();
    void step();

    const AdamOptions& options() const noexcept { return opt_; }
    std::int64_t steps() const noexcept { return t_; }
    const NamedTensors& params() const noexcept { return params_; }

    /// Moments as "<prefix>.m.<param>", "<prefix>.v.<param>" plus "<prefix>.t".
    NamedTensors state(const std::string& prefix) const;
    void load_state(const NamedTensors& all, const std::string& prefix);

private:
    NamedTensors params_;
    std::vector<torch::Tensor> m_, v_;
    std::int64_t t_ = 0;
    AdamOptions opt_;
};

}  // namespace cmedl::nn
