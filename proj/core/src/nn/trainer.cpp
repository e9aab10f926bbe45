#include "cmedl/nn/trainer.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "cmedl/augment.hpp"
#include "cmedl/errors.hpp"
#include "cmedl/rng.hpp"
#include "cmedl/surface_metrics.hpp"
#include "json_codec.hpp"

namespace cmedl::nn {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(TrainMode m) {
    switch (m) {
        case TrainMode::Cmedl: return "cmedl";
        case TrainMode::CbctOnly: return "cbct_only";
        case TrainMode::PmriSeg: return "pmri_seg";
        case TrainMode::CbctPlusPmri: return "cbct_plus_pmri";
        case TrainMode::Translation: return "translation";
    }
    return "?";
}

TrainMode train_mode_from_string(std::string_view s) {
    for (auto m : {TrainMode::Cmedl, TrainMode::CbctOnly, TrainMode::PmriSeg, TrainMode::CbctPlusPmri,
                   TrainMode::Translation})
        if (to_string(m) == s) return m;
    throw ConfigError("invalid mode '" + std::string(s) +
                      "' (valid: cmedl, cbct_only, pmri_seg, cbct_plus_pmri, translation)");
}

std::string_view to_string(SegmenterKind k) { return k == SegmenterKind::UNet ? "unet" : "densefcn"; }

SegmenterKind segmenter_from_string(std::string_view s) {
    if (s == "unet") return SegmenterKind::UNet;
    if (s == "densefcn") return SegmenterKind::DenseFCN;
    throw ConfigError("invalid segmenter '" + std::string(s) + "' (valid: unet, densefcn)");
}

std::string_view to_string(Route r) { return r == Route::Student ? "student" : "teacher_on_pmri"; }

Route route_from_string(std::string_view s) {
    if (s == "student") return Route::Student;
    if (s == "teacher_on_pmri") return Route::TeacherOnPmri;
    throw ConfigError("invalid route '" + std::string(s) + "' (valid: student, teacher_on_pmri)");
}

std::string_view to_string(TapSource s) {
    switch (s) {
        case TapSource::Student: return "student";
        case TapSource::Teacher: return "teacher";
        case TapSource::CbctOnly: return "cbct_only";
    }
    return "?";
}

TapSource tap_source_from_string(std::string_view s) {
    for (auto t : {TapSource::Student, TapSource::Teacher, TapSource::CbctOnly})
        if (to_string(t) == s) return t;
    throw ConfigError("invalid tap source '" + std::string(s) + "' (valid: student, teacher, cbct_only)");
}

namespace {

bool uses_translation_input(TrainMode m) { return m == TrainMode::PmriSeg || m == TrainMode::CbctPlusPmri; }
bool uses_mri(TrainMode m) { return m == TrainMode::Cmedl || m == TrainMode::Translation; }

void check_positive(double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(std::string(name) + " must be positive");
}

}  // namespace

void TrainConfig::validate() const {
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    check_positive(lr_translation, "lr_translation");
    check_positive(lr_segmentation, "lr_segmentation");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
        throw ConfigError("adam betas must lie in [0, 1)");
    if (max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
    if (early_stop_patience < 1) throw ConfigError("early_stop_patience must be >= 1");
    if (replay_pool_size < 0) throw ConfigError("replay_pool_size must be >= 0");
    if (patch_size < kMinImageSide) throw ConfigError("patch_size must be >= 16");
    for (int v : {generator_width, generator_blocks, discriminator_width, discriminator_layers, segmenter_width,
                  extractor_width})
        if (v < 0) throw ConfigError("network overrides must be >= 0");
    weights.validate();
    if (uses_translation_input(mode) && translation_checkpoint.empty())
        throw ConfigError("mode " + std::string(to_string(mode)) + " requires a translation checkpoint");
    for (const auto& [role, spec] : bundle_specs(*this)) {
        spec.validate();
        if (patch_size % input_multiple(spec) != 0 && spec.kind != NetKind::PatchDiscriminator)
            throw ConfigError("patch_size " + std::to_string(patch_size) + " is not a multiple of " +
                              std::to_string(input_multiple(spec)) + " required by " + role);
    }
}

std::string config_to_json(const TrainConfig& c) {
    json j = {{"mode", to_string(c.mode)},
              {"segmenter", to_string(c.segmenter)},
              {"scale", to_string(c.scale)},
              {"batch_size", c.batch_size},
              {"lr_translation", c.lr_translation},
              {"lr_segmentation", c.lr_segmentation},
              {"beta1", c.beta1},
              {"beta2", c.beta2},
              {"max_epochs", c.max_epochs},
              {"early_stop_patience", c.early_stop_patience},
              {"weights", to_json(c.weights)},
              {"seed", c.seed},
              {"augment", c.augment},
              {"replay_pool", c.replay_pool},
              {"replay_pool_size", c.replay_pool_size},
              {"symmetric_hint", c.symmetric_hint},
              {"seg_loss", to_string(c.seg_form)},
              {"patch_size", c.patch_size},
              {"generator_width", c.generator_width},
              {"generator_blocks", c.generator_blocks},
              {"discriminator_width", c.discriminator_width},
              {"discriminator_layers", c.discriminator_layers},
              {"segmenter_width", c.segmenter_width},
              {"extractor_width", c.extractor_width},
              {"translation_checkpoint", c.translation_checkpoint.string()}};
    return j.dump();
}

TrainConfig config_from_json(const std::string& text) {
    TrainConfig c;
    try {
        const json j = json::parse(text);
        c.mode = train_mode_from_string(j.at("mode").get<std::string>());
        c.segmenter = segmenter_from_string(j.at("segmenter").get<std::string>());
        c.scale = scale_from_string(j.at("scale").get<std::string>());
        c.batch_size = j.at("batch_size");
        c.lr_translation = j.at("lr_translation");
        c.lr_segmentation = j.at("lr_segmentation");
        c.beta1 = j.at("beta1");
        c.beta2 = j.at("beta2");
        c.max_epochs = j.at("max_epochs");
        c.early_stop_patience = j.at("early_stop_patience");
        c.weights = loss_weights_from_json(j.at("weights"));
        c.seed = j.at("seed");
        c.augment = j.at("augment");
        c.replay_pool = j.at("replay_pool");
        c.replay_pool_size = j.at("replay_pool_size");
        c.symmetric_hint = j.at("symmetric_hint");
        c.seg_form = seg_loss_form_from_string(j.at("seg_loss").get<std::string>());
        c.patch_size = j.at("patch_size");
        c.generator_width = j.at("generator_width");
        c.generator_blocks = j.at("generator_blocks");
        c.discriminator_width = j.at("discriminator_width");
        c.discriminator_layers = j.at("discriminator_layers");
        c.segmenter_width = j.at("segmenter_width");
        c.extractor_width = j.at("extractor_width");
        c.translation_checkpoint = j.at("translation_checkpoint").get<std::string>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("training config: ") + e.what());
    }
    return c;
}

std::map<std::string, NetSpec> bundle_specs(const TrainConfig& cfg) {
    NetSpec gen = generator_spec(cfg.scale);
    if (cfg.generator_width) gen.base_width = cfg.generator_width;
    if (cfg.generator_blocks) gen.residual_blocks = cfg.generator_blocks;
    NetSpec disc = discriminator_spec(cfg.scale);
    if (cfg.discriminator_width) disc.base_width = cfg.discriminator_width;
    if (cfg.discriminator_layers) disc.n_layers = cfg.discriminator_layers;
    const int seg_in = cfg.mode == TrainMode::CbctPlusPmri ? 2 : 1;
    NetSpec seg = cfg.segmenter == SegmenterKind::UNet ? unet_spec(cfg.scale, seg_in) : densefcn_spec(cfg.scale, seg_in);
    if (cfg.segmenter_width) seg.base_width = cfg.segmenter_width;
    NetSpec cx = cx_extractor_spec(cfg.scale);
    if (cfg.extractor_width) cx.base_width = cfg.extractor_width;

    std::map<std::string, NetSpec> out;
    if (cfg.mode == TrainMode::Cmedl || cfg.mode == TrainMode::Translation) {
        out["g_c2m"] = gen;
        out["g_m2c"] = gen;
        out["d_m"] = disc;
        out["d_c"] = disc;
        out["cx"] = cx;
    }
    if (cfg.mode == TrainMode::Cmedl) out["s_teacher"] = seg;
    if (cfg.mode != TrainMode::Translation) out["s_student"] = seg;
    return out;
}

namespace {

std::uint64_t init_seed(std::uint64_t seed, const std::string& role) {
    return derive_seed(seed, "init", {hash_tag(role)});
}

json default_state(const TrainConfig& cfg) {
    return {{"config", json::parse(config_to_json(cfg))},
            {"best_val_dice", nullptr},
            {"best_epoch", 0},
            {"epochs_since_improvement", 0}};
}

}  // namespace

ModelBundle make_bundle(const TrainConfig& cfg) {
    cfg.validate();
    ModelBundle b;
    b.mode = std::string(to_string(cfg.mode));
    b.weights = cfg.weights;
    b.seed = cfg.seed;
    for (const auto& [role, spec] : bundle_specs(cfg)) b.nets[role] = build_network(spec, init_seed(cfg.seed, role));
    if (uses_translation_input(cfg.mode)) {
        auto t = load_checkpoint(cfg.translation_checkpoint);
        b.nets["g_c2m"] = t.ptr("g_c2m");
        for (auto& p : b.net("g_c2m").parameters()) p.set_requires_grad(false);
    }
    const AdamOptions gen_opt{cfg.lr_translation, cfg.beta1, cfg.beta2};
    const AdamOptions seg_opt{cfg.lr_segmentation, cfg.beta1, cfg.beta2};
    if (b.has("d_m")) {
        b.add_optimizer("gen", {"g_c2m", "g_m2c"}, gen_opt);
        b.add_optimizer("disc", {"d_m", "d_c"}, gen_opt);
    }
    if (cfg.mode == TrainMode::Cmedl)
        b.add_optimizer("seg", {"s_teacher", "s_student"}, seg_opt);
    else if (b.has("s_student"))
        b.add_optimizer("seg", {"s_student"}, seg_opt);
    b.state_json = default_state(cfg).dump();
    return b;
}

TrainConfig bundle_config(const ModelBundle& b) {
    try {
        return config_from_json(json::parse(b.state_json).at("config").dump());
    } catch (const json::exception& e) {
        throw CheckpointError(std::string("checkpoint has no training config: ") + e.what());
    } catch (const ConfigError& e) {
        throw CheckpointError(e.what());
    }
}

namespace {

// Disables parameter gradients of the given networks for one phase.
class GradFreeze {
public:
    explicit GradFreeze(const std::vector<Network*>& nets) {
        for (auto* n : nets)
            for (auto& p : n->parameters())
                if (p.requires_grad()) {
                    p.set_requires_grad(false);
                    frozen_.push_back(p);
                }
    }
    ~GradFreeze() {
        for (auto& p : frozen_) p.set_requires_grad(true);
    }
    GradFreeze(const GradFreeze&) = delete;
    GradFreeze& operator=(const GradFreeze&) = delete;

private:
    std::vector<torch::Tensor> frozen_;
};

// Switches networks to eval mode and restores their previous modes.
class EvalScope {
public:
    explicit EvalScope(const std::vector<Network*>& nets) {
        for (auto* n : nets) {
            saved_.emplace_back(n, n->is_training());
            n->eval();
        }
    }
    ~EvalScope() {
        for (auto& [n, training] : saved_) n->train(training);
    }
    EvalScope(const EvalScope&) = delete;
    EvalScope& operator=(const EvalScope&) = delete;

private:
    std::vector<std::pair<Network*, bool>> saved_;
};

torch::Tensor tumor(const torch::Tensor& probs) { return probs.select(1, 1); }

FeatureStack detached(const FeatureStack& s) {
    FeatureStack out;
    for (const auto& [n, t] : s) out.emplace_back(n, t.detach());
    return out;
}

torch::Tensor* find_extra(ModelBundle& b, const std::string& name) {
    for (auto& [n, t] : b.extra)
        if (n == name) return &t;
    return nullptr;
}

// Fake-image history: each new fake either enters a free slot, or with
// probability 1/2 swaps with a random stored one that is returned instead.
torch::Tensor query_pool(ModelBundle& b, const std::string& name, const torch::Tensor& fakes, const TrainConfig& cfg) {
    if (!cfg.replay_pool || cfg.replay_pool_size == 0) return fakes;
    auto rng = make_rng(b.seed, name, {static_cast<std::uint64_t>(b.step)});
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    std::uniform_int_distribution<int> pick(0, cfg.replay_pool_size - 1);
    std::vector<torch::Tensor> stored;
    if (auto* t = find_extra(b, name))
        for (int i = 0; i < t->size(0); ++i) stored.push_back((*t)[i].clone());
    std::vector<torch::Tensor> out;
    for (int i = 0; i < fakes.size(0); ++i) {
        auto img = fakes[i].detach().clone();
        if (static_cast<int>(stored.size()) < cfg.replay_pool_size) {
            stored.push_back(img);
            out.push_back(img);
        } else if (coin(rng) < 0.5) {
            const int j = pick(rng);
            out.push_back(stored[j]);
            stored[j] = img;
        } else {
            out.push_back(img);
        }
    }
    auto pool = torch::stack(stored);
    if (auto* t = find_extra(b, name))
        *t = pool;
    else
        b.extra.emplace_back(name, pool);
    return torch::stack(out);
}

struct GenPhase {
    LossTerms terms;
    torch::Tensor fake_m, fake_c;
};

GenPhase generator_phase(ModelBundle& b, const Batch& c, const Batch& m, const TrainConfig& cfg, bool with_seg) {
    const auto& w = cfg.weights;
    auto& g_c2m = b.net("g_c2m");
    auto& g_m2c = b.net("g_m2c");
    auto& d_m = b.net("d_m");
    auto& d_c = b.net("d_c");
    std::vector<Network*> others{&d_m, &d_c};
    if (with_seg) {
        others.push_back(&b.net("s_teacher"));
        others.push_back(&b.net("s_student"));
    }
    GradFreeze gf(others);
    BufferFreeze bf(std::vector<torch::nn::Module*>(others.begin(), others.end()));

    auto& opt = b.optimizer("gen");
    opt.zero_grad();
    GenPhase r;
    r.fake_m = g_c2m.forward(c.x);
    const auto rec_c = g_m2c.forward(r.fake_m);
    r.fake_c = g_m2c.forward(m.x);
    const auto rec_m = g_c2m.forward(r.fake_c);
    auto& t = r.terms;
    t.adv_m = adversarial_loss({}, d_m.forward(r.fake_m), AdvSide::Generator);
    t.adv_c = adversarial_loss({}, d_c.forward(r.fake_c), AdvSide::Generator);
    t.cyc = cycle_loss(rec_c, c.x, rec_m, m.x);
    if (w.lambda_cx > 0) t.cx = contextual_loss(r.fake_m, m.x, b.net("cx"));
    if (with_seg && (w.lambda_seg > 0 || w.lambda_hint > 0)) {
        const auto teacher = b.net("s_teacher").forward_with_taps(r.fake_m);
        if (w.lambda_seg > 0) t.seg_teacher_pseudo = segmentation_loss(tumor(teacher.output), c.y, cfg.seg_form);
        if (w.lambda_hint > 0) {
            FeatureStack student;
            {
                torch::NoGradGuard ng;
                student = b.net("s_student").forward_with_taps(c.x).taps;
            }
            t.hint = hint_loss(student, teacher.taps);
        }
    }
    total_loss(t, w).backward();
    opt.step();
    opt.zero_grad();
    r.fake_m = r.fake_m.detach();
    r.fake_c = r.fake_c.detach();
    return r;
}

void discriminator_phase(ModelBundle& b, const Batch& c, const Batch& m, const GenPhase& g, const TrainConfig& cfg) {
    auto& d_m = b.net("d_m");
    auto& d_c = b.net("d_c");
    auto& opt = b.optimizer("disc");
    opt.zero_grad();
    const auto fm = query_pool(b, "pool_m", g.fake_m, cfg);
    const auto fc = query_pool(b, "pool_c", g.fake_c, cfg);
    const auto loss_m = adversarial_loss(d_m.forward(m.x), d_m.forward(fm), AdvSide::Discriminator);
    const auto loss_c = adversarial_loss(d_c.forward(c.x), d_c.forward(fc), AdvSide::Discriminator);
    if (!std::isfinite(loss_m.item<double>())) throw NonFiniteLossError("disc_m");
    if (!std::isfinite(loss_c.item<double>())) throw NonFiniteLossError("disc_c");
    (loss_m + loss_c).backward();
    opt.step();
    opt.zero_grad();
}

}  // namespace

LossReport train_step_cmedl(ModelBundle& b, const Batch& c, const Batch& m, const TrainConfig& cfg,
                            const PhaseHook& hook) {
    const auto& w = cfg.weights;
    const auto g = generator_phase(b, c, m, cfg, true);
    if (hook) hook("generator");
    discriminator_phase(b, c, m, g, cfg);
    if (hook) hook("discriminator");

    auto& teacher = b.net("s_teacher");
    auto& student = b.net("s_student");
    auto& opt = b.optimizer("seg");
    opt.zero_grad();
    torch::Tensor pseudo;
    {
        torch::NoGradGuard ng;
        pseudo = b.net("g_c2m").forward(c.x);
    }
    LossTerms t = g.terms;
    t.seg_teacher_real = t.seg_teacher_pseudo = t.seg_student = t.hint = torch::Tensor();
    const auto s_out = student.forward_with_taps(c.x);
    t.seg_student = segmentation_loss(tumor(s_out.output), c.y, cfg.seg_form);
    if (w.lambda_seg > 0 || w.lambda_hint > 0) {
        const auto t_pseudo = teacher.forward_with_taps(pseudo);
        if (w.lambda_seg > 0) {
            t.seg_teacher_real = segmentation_loss(tumor(teacher.forward(m.x)), m.y, cfg.seg_form);
            t.seg_teacher_pseudo = segmentation_loss(tumor(t_pseudo.output), c.y, cfg.seg_form);
        }
        if (w.lambda_hint > 0)
            t.hint = hint_loss(s_out.taps, cfg.symmetric_hint ? t_pseudo.taps : detached(t_pseudo.taps));
    }
    LossTerms s_terms;
    s_terms.seg_teacher_real = t.seg_teacher_real;
    s_terms.seg_teacher_pseudo = t.seg_teacher_pseudo;
    s_terms.seg_student = t.seg_student;
    s_terms.hint = t.hint;
    total_loss(s_terms, w).backward();
    opt.step();
    opt.zero_grad();
    ++b.step;
    if (hook) hook("segmenter");
    return make_report(t, w);
}

namespace {

torch::Tensor baseline_input(ModelBundle& b, const torch::Tensor& x) {
    if (b.mode != "pmri_seg" && b.mode != "cbct_plus_pmri") return x;
    torch::Tensor pseudo;
    {
        torch::NoGradGuard ng;
        pseudo = b.net("g_c2m").forward(x);
    }
    return b.mode == "pmri_seg" ? pseudo : torch::cat({x, pseudo}, 1);
}

}  // namespace

LossReport train_step_baseline(ModelBundle& b, const Batch& c, const TrainConfig& cfg) {
    auto& opt = b.optimizer("seg");
    opt.zero_grad();
    LossTerms t;
    t.seg_student = segmentation_loss(tumor(b.net("s_student").forward(baseline_input(b, c.x))), c.y, cfg.seg_form);
    total_loss(t, cfg.weights).backward();
    opt.step();
    opt.zero_grad();
    ++b.step;
    return make_report(t, cfg.weights);
}

LossReport train_step_translation(ModelBundle& b, const Batch& c, const Batch& m, const TrainConfig& cfg) {
    const auto g = generator_phase(b, c, m, cfg, false);
    discriminator_phase(b, c, m, g, cfg);
    ++b.step;
    return make_report(g.terms, cfg.weights);
}

namespace {

Network& route_segmenter(ModelBundle& b, Route route) {
    return b.net(route == Route::Student ? "s_student" : "s_teacher");
}

torch::Tensor segment_tensor(ModelBundle& b, const torch::Tensor& x, Route route) {
    auto& seg = route_segmenter(b, route);
    std::vector<Network*> used{&seg};
    const bool needs_gen = route == Route::TeacherOnPmri || b.mode == "pmri_seg" || b.mode == "cbct_plus_pmri";
    if (needs_gen) used.push_back(&b.net("g_c2m"));
    EvalScope es(used);
    torch::NoGradGuard ng;
    torch::Tensor in = route == Route::TeacherOnPmri ? b.net("g_c2m").forward(x) : baseline_input(b, x);
    return tumor(seg.forward(in));
}

constexpr int kEvalBatch = 16;

}  // namespace

torch::Tensor segment_patch(ModelBundle& b, const Image& patch, Route route) {
    return segment_tensor(b, image_tensor(patch), route);
}

double validation_dice(ModelBundle& b, const std::vector<Sample>& samples) {
    if (samples.empty()) throw ConfigError("empty validation split");
    double sum = 0.0;
    for (std::size_t start = 0; start < samples.size(); start += kEvalBatch) {
        const std::size_t end = std::min(samples.size(), start + kEvalBatch);
        std::vector<const Image*> imgs;
        for (std::size_t i = start; i < end; ++i) imgs.push_back(&samples[i].patch);
        const auto probs = segment_tensor(b, image_batch(imgs), Route::Student).contiguous();
        for (std::size_t i = start; i < end; ++i) {
            const auto grid = tensor_to_grid(probs[static_cast<long>(i - start)]);
            Grid<std::uint8_t> px(grid.rows(), grid.cols());
            for (std::size_t k = 0; k < px.size(); ++k) px.storage()[k] = grid.storage()[k] >= 0.5f;
            sum += metrics::dsc(Mask(std::move(px), samples[i].mask.spacing), samples[i].mask);
        }
    }
    return sum / static_cast<double>(samples.size());
}

Image translate(ModelBundle& b, const Image& img) {
    auto& g = b.net("g_c2m");
    EvalScope es({&g});
    torch::NoGradGuard ng;
    return tensor_to_image(g.forward(image_tensor(img)), img.spacing, Modality::PMRI);
}

Segmentation segment(ModelBundle& b, const Image& img, Route route) {
    const auto cfg = bundle_config(b);
    route_segmenter(b, route);
    const auto crop = crop_body(img, cfg.patch_size);
    const auto prob_patch = tensor_to_grid(segment_patch(b, crop.patch, route)[0]);
    const auto& w = crop.window;
    Segmentation out;
    out.prob = Grid<float>(img.rows(), img.cols(), 0.0f);
    Grid<std::uint8_t> patch_mask(prob_patch.rows(), prob_patch.cols());
    for (int r = 0; r < prob_patch.rows(); ++r)
        for (int c = 0; c < prob_patch.cols(); ++c) {
            patch_mask(r, c) = prob_patch(r, c) >= 0.5f;
            if (out.prob.contains(r + w.row0, c + w.col0)) out.prob(r + w.row0, c + w.col0) = prob_patch(r, c);
        }
    const std::pair<Mask, CropWindow> piece{Mask(std::move(patch_mask), img.spacing), w};
    out.mask = metrics::stitch_slice(std::span(&piece, 1));
    return out;
}

std::vector<FeatureMapData> export_taps(ModelBundle& b, const Image& img, TapSource which) {
    if (which == TapSource::CbctOnly && b.mode != "cbct_only")
        throw CheckpointError("tap source cbct_only needs a cbct_only checkpoint, found mode " + b.mode);
    if (which == TapSource::Teacher && !b.has("s_teacher"))
        throw CheckpointError("checkpoint (mode " + b.mode + ") has no teacher");
    const auto cfg = bundle_config(b);
    const auto crop = crop_body(img, cfg.patch_size);
    auto& seg = b.net(which == TapSource::Teacher ? "s_teacher" : "s_student");
    std::vector<Network*> used{&seg};
    if (b.has("g_c2m")) used.push_back(&b.net("g_c2m"));
    EvalScope es(used);
    torch::NoGradGuard ng;
    const auto x = image_tensor(crop.patch);
    const auto in = which == TapSource::Teacher ? b.net("g_c2m").forward(x) : baseline_input(b, x);
    std::vector<FeatureMapData> out;
    for (const auto& [name, t] : seg.forward_with_taps(in).taps) {
        const auto f = t[0].contiguous().to(torch::kFloat32);
        FeatureMapData d;
        d.name = name;
        d.channels = static_cast<int>(f.size(0));
        d.rows = static_cast<int>(f.size(1));
        d.cols = static_cast<int>(f.size(2));
        d.spacing = {crop.patch.spacing.row * crop.patch.rows() / d.rows,
                     crop.patch.spacing.col * crop.patch.cols() / d.cols};
        d.values.assign(f.data_ptr<float>(), f.data_ptr<float>() + f.numel());
        out.push_back(std::move(d));
    }
    return out;
}

void export_taps(ModelBundle& b, const Image& img, TapSource which, const fs::path& file) {
    save_feature_maps(file, export_taps(b, img, which));
}

std::string loss_csv_header() {
    return "step,epoch,split,adv_m,adv_c,cyc,cx,seg_teacher_real,seg_teacher_pseudo,seg_student,hint,total,val_dice";
}

std::string loss_csv_row(std::int64_t step, int epoch, const std::string& split, const LossReport* r,
                         std::optional<double> val_dice) {
    const auto num = [](double v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.9g", v);
        return std::string(buf);
    };
    std::string s = std::to_string(step) + "," + std::to_string(epoch) + "," + split;
    if (r) {
        for (double v : {r->adv_m, r->adv_c, r->cyc, r->cx, r->seg_teacher_real, r->seg_teacher_pseudo,
                         r->seg_student, r->hint, r->total})
            s += "," + num(v);
    } else {
        s += ",,,,,,,,,";
        if (val_dice) s += num(1.0 - *val_dice);
    }
    s += ",";
    if (val_dice) s += num(*val_dice);
    return s;
}

namespace {

std::vector<std::size_t> permutation(std::size_t n, std::uint64_t seed) {
    std::vector<std::size_t> p(n);
    std::iota(p.begin(), p.end(), 0);
    Rng rng(seed);
    for (std::size_t i = n; i > 1; --i) {
        std::uniform_int_distribution<std::size_t> d(0, i - 1);
        std::swap(p[i - 1], p[d(rng)]);
    }
    return p;
}

Batch make_batch(const std::vector<Sample>& samples, const std::vector<std::size_t>& idx, const TrainConfig& cfg,
                 int epoch, std::string_view tag) {
    std::vector<Image> imgs;
    std::vector<Mask> masks;
    imgs.reserve(idx.size());
    masks.reserve(idx.size());
    for (auto i : idx) {
        const auto& s = samples[i];
        if (cfg.augment) {
            auto [img, mask] = augment(s.patch, s.mask, derive_seed(cfg.seed, tag, {static_cast<std::uint64_t>(epoch), i}));
            imgs.push_back(std::move(img));
            masks.push_back(std::move(mask));
        } else {
            imgs.push_back(s.patch);
            masks.push_back(s.mask);
        }
    }
    std::vector<const Image*> ip;
    std::vector<const Mask*> mp;
    for (std::size_t k = 0; k < imgs.size(); ++k) {
        ip.push_back(&imgs[k]);
        mp.push_back(&masks[k]);
    }
    return {image_batch(ip), mask_batch(mp)};
}

void check_patch_shapes(const std::vector<Sample>& samples, int patch_size) {
    for (const auto& s : samples)
        if (s.patch.rows() != patch_size || s.patch.cols() != patch_size)
            throw ShapeError("case " + s.case_id + ": body does not fit the " + std::to_string(patch_size) +
                             " px patch");
}

std::vector<std::string> read_lines(const fs::path& p) {
    std::vector<std::string> lines;
    std::ifstream in(p);
    for (std::string l; std::getline(in, l);) lines.push_back(l);
    return lines;
}

void write_lines(const fs::path& p, const std::vector<std::string>& lines) {
    std::ofstream out(p, std::ios::trunc);
    for (const auto& l : lines) out << l << '\n';
    if (!out) throw IoError(p.string(), "cannot write loss curve");
}

int row_epoch(const std::string& row) {
    const auto a = row.find(',');
    return std::stoi(row.substr(a + 1, row.find(',', a + 1) - a - 1));
}

}  // namespace

TrainResult train(const Manifest& manifest, const TrainConfig& cfg, const fs::path& out_dir, bool resume) {
    cfg.validate();
    const bool translation = cfg.mode == TrainMode::Translation;
    const auto train_c = load_samples(manifest, Modality::CBCT, Split::Train, cfg.patch_size);
    check_patch_shapes(train_c, cfg.patch_size);
    std::vector<Sample> val_c, train_m;
    if (!translation) val_c = load_samples(manifest, Modality::CBCT, Split::Val, cfg.patch_size);
    if (uses_mri(cfg.mode)) {
        train_m = load_samples(manifest, Modality::MRI, Split::Train, cfg.patch_size);
        check_patch_shapes(train_m, cfg.patch_size);
    }

    TrainResult res;
    res.best_checkpoint = out_dir / "best";
    res.last_checkpoint = out_dir / "last";
    res.loss_csv = out_dir / "loss_curve.csv";
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw IoError(out_dir.string(), "cannot create output directory");

    ModelBundle b;
    std::vector<std::string> csv{loss_csv_header()};
    if (resume && fs::exists(res.last_checkpoint / "checkpoint.json")) {
        b = load_checkpoint(res.last_checkpoint, bundle_specs(cfg));
        if (b.mode != to_string(cfg.mode)) throw CheckpointError("resume checkpoint has mode " + b.mode);
        for (const auto& row : read_lines(res.loss_csv))
            if (row != csv[0] && row_epoch(row) <= b.epoch) csv.push_back(row);
    } else {
        b = make_bundle(cfg);
    }
    json state = json::parse(b.state_json);
    double best = state["best_val_dice"].is_null() ? -std::numeric_limits<double>::infinity()
                                                   : state["best_val_dice"].get<double>();
    int best_epoch = state["best_epoch"];

    const std::size_t bs = static_cast<std::size_t>(cfg.batch_size);
    for (int epoch = b.epoch + 1; epoch <= cfg.max_epochs; ++epoch) {
        const auto ep = static_cast<std::uint64_t>(epoch);
        const auto order_c = permutation(train_c.size(), derive_seed(cfg.seed, "order-c", {ep}));
        const auto order_m = train_m.empty() ? std::vector<std::size_t>{}
                                             : permutation(train_m.size(), derive_seed(cfg.seed, "order-m", {ep}));
        const std::size_t steps = (train_c.size() + bs - 1) / bs;
        for (std::size_t k = 0; k < steps; ++k) {
            std::vector<std::size_t> ic(order_c.begin() + k * bs,
                                        order_c.begin() + std::min(order_c.size(), (k + 1) * bs));
            const auto bc = make_batch(train_c, ic, cfg, epoch, "augment-c");
            LossReport r;
            if (uses_mri(cfg.mode)) {
                std::vector<std::size_t> im;
                for (std::size_t j = 0; j < ic.size(); ++j) im.push_back(order_m[(k * bs + j) % order_m.size()]);
                const auto bm = make_batch(train_m, im, cfg, epoch, "augment-m");
                r = translation ? train_step_translation(b, bc, bm, cfg) : train_step_cmedl(b, bc, bm, cfg);
            } else {
                r = train_step_baseline(b, bc, cfg);
            }
            csv.push_back(loss_csv_row(b.step, epoch, "train", &r, std::nullopt));
        }
        b.epoch = epoch;
        ++res.epochs_run;
        double val = std::numeric_limits<double>::quiet_NaN();
        if (!translation) {
            val = validation_dice(b, val_c);
            csv.push_back(loss_csv_row(b.step, epoch, "val", nullptr, val));
        }
        const bool improved = translation || val > best;
        if (improved) {
            best = translation ? 0.0 : val;
            best_epoch = epoch;
        }
        state["best_val_dice"] = translation ? json(nullptr) : json(best);
        state["best_epoch"] = best_epoch;
        state["epochs_since_improvement"] = epoch - best_epoch;
        b.state_json = state.dump();
        if (improved) save_checkpoint(b, res.best_checkpoint);
        save_checkpoint(b, res.last_checkpoint);
        write_lines(res.loss_csv, csv);
        if (epoch - best_epoch >= cfg.early_stop_patience) {
            res.early_stopped = true;
            break;
        }
    }
    write_lines(res.loss_csv, csv);
    res.best_epoch = best_epoch;
    res.best_val_dice = translation ? std::numeric_limits<double>::quiet_NaN() : best;
    return res;
}

TrainResult train_baseline(const Manifest& manifest, const TrainConfig& cfg, const fs::path& out_dir, bool resume) {
    if (cfg.mode == TrainMode::Cmedl) throw ConfigError("train_baseline does not run mode cmedl");
    return train(manifest, cfg, out_dir, resume);
}

}  // namespace cmedl::nn
