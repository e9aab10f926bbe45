#include "cmedl/nn/adam.hpp"

#include <cmath>
#include <map>

#include "cmedl/errors.hpp"

namespace cmedl::nn {

Adam::Adam(NamedTensors params, AdamOptions opt) : params_(std::move(params)), opt_(opt) {
    for (const auto& [_, p] : params_) {
        m_.push_back(torch::zeros_like(p));
        v_.push_back(torch::zeros_like(p));
    }
}

void Adam::zero_grad() {
    for (auto& [_, p] : params_)
        if (p.grad().defined()) p.mutable_grad() = torch::Tensor();
}

void Adam::step() {
    torch::NoGradGuard ng;
    ++t_;
    const double bc1 = 1.0 - std::pow(opt_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(opt_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
        auto& p = params_[i].second;
        const auto& g = p.grad();
        if (!g.defined()) continue;
        m_[i].mul_(opt_.beta1).add_(g, 1.0 - opt_.beta1);
        v_[i].mul_(opt_.beta2).addcmul_(g, g, 1.0 - opt_.beta2);
        const auto denom = (v_[i].sqrt() / std::sqrt(bc2)).add_(opt_.eps);
        p.addcdiv_(m_[i], denom, -opt_.lr / bc1);
    }
}

NamedTensors Adam::state(const std::string& prefix) const {
    NamedTensors out;
    for (std::size_t i = 0; i < params_.size(); ++i) {
        out.emplace_back(prefix + ".m." + params_[i].first, m_[i]);
        out.emplace_back(prefix + ".v." + params_[i].first, v_[i]);
    }
    out.emplace_back(prefix + ".t", torch::tensor({t_}, torch::kLong));
    return out;
}

void Adam::load_state(const NamedTensors& all, const std::string& prefix) {
    std::map<std::string, const torch::Tensor*> by_name;
    for (const auto& [n, t] : all) by_name[n] = &t;
    const auto get = [&](const std::string& n) -> const torch::Tensor& {
        auto it = by_name.find(n);
        if (it == by_name.end()) throw CheckpointError("optimizer state missing " + n);
        return *it->second;
    };
    torch::NoGradGuard ng;
    for (std::size_t i = 0; i < params_.size(); ++i) {
        const auto& m = get(prefix + ".m." + params_[i].first);
        const auto& v = get(prefix + ".v." + params_[i].first);
        if (!m.sizes().equals(m_[i].sizes()) || !v.sizes().equals(v_[i].sizes()))
            throw CheckpointError("optimizer state shape mismatch for " + params_[i].first);
        m_[i].copy_(m);
        v_[i].copy_(v);
    }
    t_ = get(prefix + ".t").item<std::int64_t>();
}

}  // namespace cmedl::nn
