#include "cmedl/nn/losses.hpp"

#include <cmath>

#include "cmedl/errors.hpp"

namespace cmedl::nn {

void LossWeights::validate() const {
    for (double v : {lambda_adv, lambda_cyc, lambda_cx, lambda_hint, lambda_seg})
        if (!std::isfinite(v) || v < 0.0) throw ConfigError("loss weights must be finite and non-negative");
}

double weighted_total(const LossReport& r, const LossWeights& w) {
    return w.lambda_adv * (r.adv_m + r.adv_c) + w.lambda_cyc * r.cyc + w.lambda_cx * r.cx +
           w.lambda_hint * r.hint + w.lambda_seg * (r.seg_teacher_real + r.seg_teacher_pseudo + r.seg_student);
}

torch::Tensor adversarial_loss(const torch::Tensor& logits_real, const torch::Tensor& logits_fake, AdvSide side) {
    if (torch::isnan(logits_fake).any().item<bool>()) throw Error("NaN discriminator logits");
    const auto p_fake = torch::sigmoid(logits_fake).clamp(kProbEps, 1.0 - kProbEps);
    if (side == AdvSide::Generator) return -torch::log(p_fake).mean();
    if (torch::isnan(logits_real).any().item<bool>()) throw Error("NaN discriminator logits");
    const auto p_real = torch::sigmoid(logits_real).clamp(kProbEps, 1.0 - kProbEps);
    return -(torch::log(p_real).mean() + torch::log(1.0 - p_fake).mean());
}

torch::Tensor cycle_loss(const torch::Tensor& rec_c, const torch::Tensor& x_c, const torch::Tensor& rec_m,
                         const torch::Tensor& x_m) {
    if (!rec_c.sizes().equals(x_c.sizes()) || !rec_m.sizes().equals(x_m.sizes()))
        throw ShapeError("cycle reconstruction shape mismatch");
    return (rec_c - x_c).abs().mean() + (rec_m - x_m).abs().mean();
}

torch::Tensor cycle_loss(const torch::Tensor& x_c, const torch::Tensor& x_m, Network& g_c2m, Network& g_m2c) {
    return cycle_loss(g_m2c.forward(g_c2m.forward(x_c)), x_c, g_c2m.forward(g_m2c.forward(x_m)), x_m);
}

namespace {

torch::Tensor as_collection(const torch::Tensor& t) {
    if (t.dim() == 4) return t.flatten(2).transpose(1, 2);  // N x P x C
    if (t.dim() == 3) return t;
    throw ShapeError("contextual similarity expects N x C x H x W or N x P x C features");
}

torch::Tensor unit_rows(const torch::Tensor& t) { return t / torch::sqrt(t.pow(2).sum(-1, true) + 1e-12); }

}  // namespace

torch::Tensor contextual_similarity(const torch::Tensor& generated, const torch::Tensor& target) {
    const auto g = as_collection(generated), m = as_collection(target);
    if (g.size(0) != m.size(0) || g.size(2) != m.size(2)) throw ShapeError("contextual feature shape mismatch");
    const auto mu = m.mean(1, true);
    const auto gn = unit_rows(g - mu), mn = unit_rows(m - mu);
    const auto d = (1.0 - torch::bmm(gn, mn.transpose(1, 2))).clamp_min(0.0);  // N x Pg x Pm
    const auto d_rel = d / (std::get<0>(d.min(2, true)) + kCxEps);
    const auto cx = torch::softmax((1.0 - d_rel) / kCxBandwidth, 2);
    return std::get<0>(cx.max(2)).mean(1);
}

torch::Tensor contextual_loss(const FeatureStack& generated, const FeatureStack& target) {
    if (generated.size() != target.size() || generated.empty()) throw ShapeError("contextual tap count mismatch");
    torch::Tensor acc;
    for (std::size_t i = 0; i < generated.size(); ++i) {
        const auto s = contextual_similarity(generated[i].second, target[i].second);
        acc = acc.defined() ? acc + s : s;
    }
    acc = acc / static_cast<double>(generated.size());
    return -torch::log(acc.clamp_min(kProbEps)).mean();
}

torch::Tensor contextual_loss(const torch::Tensor& x_generated, const torch::Tensor& x_target, Network& extractor) {
    return contextual_loss(extractor.forward_with_taps(x_generated).taps,
                           extractor.forward_with_taps(x_target).taps);
}

std::string_view to_string(SegLossForm f) { return f == SegLossForm::SoftDice ? "soft_dice" : "nll"; }

SegLossForm seg_loss_form_from_string(std::string_view s) {
    if (s == "soft_dice") return SegLossForm::SoftDice;
    if (s == "nll") return SegLossForm::NegLogLikelihood;
    throw ConfigError("unknown segmentation loss form: " + std::string(s) + " (expected soft_dice or nll)");
}

torch::Tensor segmentation_loss(const torch::Tensor& p, const torch::Tensor& y, SegLossForm form) {
    if (!p.sizes().equals(y.sizes())) throw ShapeError("prediction and target shapes differ");
    if (p.dim() != 3) throw ShapeError("segmentation loss expects N x H x W");
    if (form == SegLossForm::NegLogLikelihood) {
        const auto pc = p.clamp(kProbEps, 1.0 - kProbEps);
        return -(y * torch::log(pc) + (1.0 - y) * torch::log(1.0 - pc)).mean();
    }
    const auto inter = (p * y).sum({1, 2});
    const auto denom = p.sum({1, 2}) + y.sum({1, 2});
    return (1.0 - (2.0 * inter + 1.0) / (denom + 1.0)).mean();
}

SegTriple seg_loss_triple(Network& teacher, Network& student, Network& g_c2m, const torch::Tensor& x_m,
                          const torch::Tensor& y_m, const torch::Tensor& x_c, const torch::Tensor& y_c,
                          SegLossForm form) {
    const auto tumor = [](const torch::Tensor& probs) { return probs.select(1, 1); };
    SegTriple out;
    out.teacher_real = segmentation_loss(tumor(teacher.forward(x_m)), y_m, form);
    out.teacher_pseudo = segmentation_loss(tumor(teacher.forward(g_c2m.forward(x_c))), y_c, form);
    out.student = segmentation_loss(tumor(student.forward(x_c)), y_c, form);
    return out;
}

torch::Tensor hint_loss(const FeatureStack& student, const FeatureStack& teacher) {
    if (student.size() != teacher.size() || student.empty()) throw ShapeError("hint tap count mismatch");
    torch::Tensor acc;
    for (std::size_t i = 0; i < student.size(); ++i) {
        if (student[i].first != teacher[i].first) throw ShapeError("hint tap names differ");
        if (!student[i].second.sizes().equals(teacher[i].second.sizes()))
            throw ShapeError("hint tap shapes differ for " + student[i].first);
        const auto l = (student[i].second - teacher[i].second).pow(2).mean();
        acc = acc.defined() ? acc + l : l;
    }
    return acc;
}

namespace {

struct NamedTerm {
    const char* name;
    const torch::Tensor* t;
    double weight;
};

std::vector<NamedTerm> named_terms(const LossTerms& t, const LossWeights& w) {
    return {{"adv_m", &t.adv_m, w.lambda_adv},
            {"adv_c", &t.adv_c, w.lambda_adv},
            {"cyc", &t.cyc, w.lambda_cyc},
            {"cx", &t.cx, w.lambda_cx},
            {"seg_teacher_real", &t.seg_teacher_real, w.lambda_seg},
            {"seg_teacher_pseudo", &t.seg_teacher_pseudo, w.lambda_seg},
            {"seg_student", &t.seg_student, w.lambda_seg},
            {"hint", &t.hint, w.lambda_hint}};
}

}  // namespace

torch::Tensor total_loss(const LossTerms& t, const LossWeights& w) {
    torch::Tensor acc;
    for (const auto& nt : named_terms(t, w)) {
        if (!nt.t->defined()) continue;
        if (!std::isfinite(nt.t->item<double>())) throw NonFiniteLossError(nt.name);
        if (nt.weight == 0.0) continue;
        const auto term = *nt.t * nt.weight;
        acc = acc.defined() ? acc + term : term;
    }
    if (!acc.defined()) {
        for (const auto& nt : named_terms(t, w))
            if (nt.t->defined()) return nt.t->mul(0.0);
        return torch::zeros({});
    }
    return acc;
}

LossReport make_report(const LossTerms& t, const LossWeights& w) {
    const auto v = [](const torch::Tensor& x) { return x.defined() ? x.item<double>() : 0.0; };
    LossReport r{v(t.adv_m), v(t.adv_c), v(t.cyc), v(t.cx), v(t.seg_teacher_real), v(t.seg_teacher_pseudo),
                 v(t.seg_student), v(t.hint), 0.0};
    r.total = weighted_total(r, w);
    for (double x : {r.adv_m, r.adv_c, r.cyc, r.cx, r.seg_teacher_real, r.seg_teacher_pseudo, r.seg_student, r.hint})
        if (!std::isfinite(x)) throw NonFiniteLossError("report");
    return r;
}

}  // namespace cmedl::nn
