#pragma once

#include <json.hpp>

#include "cmedl/errors.hpp"
#include "cmedl/nn/losses.hpp"
#include "cmedl/nn/netspec.hpp"

namespace cmedl::nn {

inline nlohmann::json to_json(const NetSpec& s) {
    return {{"kind", to_string(s.kind)},
            {"in_channels", s.in_channels},
            {"out_channels", s.out_channels},
            {"base_width", s.base_width},
            {"residual_blocks", s.residual_blocks},
            {"n_layers", s.n_layers},
            {"pool_levels", s.pool_levels},
            {"db_layers", s.db_layers},
            {"growth_rate", s.growth_rate},
            {"td_count", s.td_count},
            {"norm", to_string(s.norm)},
            {"tap_names", s.tap_names}};
}

inline NetSpec netspec_from_json(const nlohmann::json& j) {
    NetSpec s;
    s.kind = net_kind_from_string(j.at("kind").get<std::string>());
    s.in_channels = j.at("in_channels").get<int>();
    s.out_channels = j.at("out_channels").get<int>();
    s.base_width = j.at("base_width").get<int>();
    s.residual_blocks = j.at("residual_blocks").get<int>();
    s.n_layers = j.at("n_layers").get<int>();
    s.pool_levels = j.at("pool_levels").get<int>();
    s.db_layers = j.at("db_layers").get<int>();
    s.growth_rate = j.at("growth_rate").get<int>();
    s.td_count = j.at("td_count").get<int>();
    s.norm = norm_from_string(j.at("norm").get<std::string>());
    s.tap_names = j.at("tap_names").get<std::vector<std::string>>();
    return s;
}

inline nlohmann::json to_json(const LossWeights& w) {
    return {{"lambda_adv", w.lambda_adv},
            {"lambda_cyc", w.lambda_cyc},
            {"lambda_cx", w.lambda_cx},
            {"lambda_hint", w.lambda_hint},
            {"lambda_seg", w.lambda_seg}};
}

inline LossWeights loss_weights_from_json(const nlohmann::json& j) {
    LossWeights w;
    w.lambda_adv = j.at("lambda_adv").get<double>();
    w.lambda_cyc = j.at("lambda_cyc").get<double>();
    w.lambda_cx = j.at("lambda_cx").get<double>();
    w.lambda_hint = j.at("lambda_hint").get<double>();
    w.lambda_seg = j.at("lambda_seg").get<double>();
    return w;
}

}  // namespace cmedl::nn
