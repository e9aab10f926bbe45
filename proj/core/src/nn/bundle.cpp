#include "cmedl/nn/bundle.hpp"

#include <json.hpp>

#include "cmedl/errors.hpp"
#include "cmedl/image_io.hpp"
#include "json_codec.hpp"

namespace cmedl::nn {

using nlohmann::json;

Network& ModelBundle::net(const std::string& role) const { return *ptr(role); }

NetworkPtr ModelBundle::ptr(const std::string& role) const {
    auto it = nets.find(role);
    if (it == nets.end() || !it->second) throw CheckpointError("bundle has no network '" + role + "'");
    return it->second;
}

void ModelBundle::add_optimizer(const std::string& name, const std::vector<std::string>& roles, AdamOptions opt) {
    NamedTensors params;
    for (const auto& r : roles)
        for (auto& p : module_parameters(net(r), r))
            if (p.second.requires_grad()) params.push_back(p);
    optimizers.insert_or_assign(name, Adam(std::move(params), opt));
    optimizer_nets[name] = roles;
}

Adam& ModelBundle::optimizer(const std::string& name) {
    auto it = optimizers.find(name);
    if (it == optimizers.end()) throw CheckpointError("bundle has no optimizer '" + name + "'");
    return it->second;
}

NamedTensors bundle_state(const ModelBundle& b) {
    NamedTensors all;
    for (const auto& [role, n] : b.nets) {
        auto s = module_state(*n, role);
        all.insert(all.end(), s.begin(), s.end());
    }
    return all;
}

void save_checkpoint(const ModelBundle& b, const std::filesystem::path& dir) {
    auto tensors = bundle_state(b);
    for (const auto& [name, opt] : b.optimizers) {
        auto s = opt.state("opt." + name);
        tensors.insert(tensors.end(), s.begin(), s.end());
    }
    for (const auto& [name, t] : b.extra) tensors.emplace_back("extra." + name, t);
    const auto blob = encode_tensors(tensors);

    json side;
    side["format_version"] = kCheckpointFormatVersion;
    side["mode"] = b.mode;
    side["epoch"] = b.epoch;
    side["step"] = b.step;
    side["seed"] = b.seed;
    side["loss_weights"] = to_json(b.weights);
    json nets = json::object();
    for (const auto& [role, n] : b.nets) nets[role] = to_json(n->spec());
    side["nets"] = nets;
    json opts = json::object();
    for (const auto& [name, opt] : b.optimizers)
        opts[name] = {{"nets", b.optimizer_nets.at(name)},
                      {"lr", opt.options().lr},
                      {"beta1", opt.options().beta1},
                      {"beta2", opt.options().beta2},
                      {"eps", opt.options().eps}};
    side["optimizers"] = opts;
    json extra = json::array();
    for (const auto& [name, _] : b.extra) extra.push_back(name);
    side["extra"] = extra;
    side["state"] = json::parse(b.state_json);
    side["weights_file"] = "weights.bin";
    side["weights_hash"] = hex64(hash_tensors(tensors));

    write_file_bytes(dir / "weights.bin", blob);
    const auto text = side.dump(2) + "\n";
    write_file_bytes(dir / "checkpoint.json", std::vector<char>(text.begin(), text.end()));
}

ModelBundle load_checkpoint(const std::filesystem::path& dir) { return load_checkpoint(dir, {}); }

ModelBundle load_checkpoint(const std::filesystem::path& dir, const std::map<std::string, NetSpec>& expected) {
    const auto side_bytes = read_file_bytes(dir / "checkpoint.json");
    json side;
    try {
        side = json::parse(side_bytes.begin(), side_bytes.end());
    } catch (const json::exception& e) {
        throw CheckpointError((dir / "checkpoint.json").string() + ": " + e.what());
    }
    ModelBundle b;
    std::map<std::string, torch::Tensor> by_name;
    try {
        if (side.at("format_version").get<int>() != kCheckpointFormatVersion)
            throw CheckpointError("unsupported checkpoint format version");
        b.mode = side.at("mode").get<std::string>();
        b.epoch = side.at("epoch").get<int>();
        b.step = side.at("step").get<std::int64_t>();
        b.seed = side.at("seed").get<std::uint64_t>();
        b.weights = loss_weights_from_json(side.at("loss_weights"));
        b.state_json = side.at("state").dump();
        for (const auto& [role, js] : side.at("nets").items()) {
            const auto spec = netspec_from_json(js);
            if (auto it = expected.find(role); it != expected.end() && !(it->second == spec))
                throw CheckpointError("checkpoint spec mismatch for " + role + ": " +
                                      describe_difference(it->second, spec));
            b.nets[role] = build_network(spec, 0);
        }
        for (const auto& [role, _] : expected)
            if (!b.has(role)) throw CheckpointError("checkpoint lacks network '" + role + "'");

        for (auto& [n, t] : load_tensors(dir / side.value("weights_file", std::string("weights.bin"))))
            by_name[n] = t;
        const auto take = [&](const std::string& n) -> torch::Tensor& {
            auto it = by_name.find(n);
            if (it == by_name.end()) throw CheckpointError("checkpoint lacks tensor " + n);
            return it->second;
        };
        torch::NoGradGuard ng;
        for (auto& [role, live] : bundle_state(b)) {
            const auto& t = take(role);
            if (!t.sizes().equals(live.sizes()) || t.scalar_type() != live.scalar_type())
                throw CheckpointError("tensor shape mismatch for " + role);
            live.copy_(t);
        }
        for (const auto& [name, js] : side.at("optimizers").items()) {
            AdamOptions o{js.at("lr").get<double>(), js.at("beta1").get<double>(), js.at("beta2").get<double>(),
                          js.at("eps").get<double>()};
            b.add_optimizer(name, js.at("nets").get<std::vector<std::string>>(), o);
            NamedTensors st;
            for (const auto& [n, t] : by_name)
                if (n.rfind("opt." + name + ".", 0) == 0) st.emplace_back(n, t);
            b.optimizers.at(name).load_state(st, "opt." + name);
        }
        for (const auto& name : side.at("extra")) b.extra.emplace_back(name.get<std::string>(), take("extra." + name.get<std::string>()));
    } catch (const json::exception& e) {
        throw CheckpointError((dir / "checkpoint.json").string() + ": " + e.what());
    } catch (const ConfigError& e) {
        throw CheckpointError((dir / "checkpoint.json").string() + ": " + e.what());
    }
    if (b.has("cx"))
        for (auto& p : b.net("cx").parameters()) p.set_requires_grad(false);
    return b;
}

std::uint64_t parameter_hash(const torch::nn::Module& m) { return hash_tensors(module_state(m, "")); }

BufferFreeze::BufferFreeze(std::vector<torch::nn::Module*> modules) {
    for (auto* m : modules) {
        if (!m) continue;
        for (auto& buf : m->buffers()) saved_.emplace_back(buf, buf.clone());
    }
}

BufferFreeze::~BufferFreeze() {
    torch::NoGradGuard ng;
    for (auto& [live, copy] : saved_) live.copy_(copy);
}

}  // namespace cmedl::nn
