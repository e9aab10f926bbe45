#pragma once

#include <torch/torch.h>

#include <string>

#include "cmedl/nn/networks.hpp"

namespace cmedl::nn {

struct LossWeights {
    double lambda_adv = 1.0;
    double lambda_cyc = 10.0;
    double lambda_cx = 1.0;
    double lambda_hint = 1.0;
    double lambda_seg = 5.0;

    /// Throws ConfigError on negative or non-finite weights.
    void validate() const;
    friend bool operator==(const LossWeights&, const LossWeights&) = default;
};

/// Scalar values of every term of one step; total is the weighted sum.
struct LossReport {
    double adv_m = 0, adv_c = 0, cyc = 0, cx = 0;
    double seg_teacher_real = 0, seg_teacher_pseudo = 0, seg_student = 0, hint = 0;
    double total = 0;
};

/// Weighted sum over the report's terms (ignores report.total).
double weighted_total(const LossReport& r, const LossWeights& w);

inline constexpr double kProbEps = 1e-7;
inline constexpr double kCxEps = 1e-5;
inline constexpr double kCxBandwidth = 0.5;

enum class AdvSide { Generator, Discriminator };

/// Patch-averaged adversarial loss on logit grids. Discriminator side:
/// -[mean log D(real) + mean log(1 - D(fake))]; generator side: -mean log D(fake)
/// (real is ignored and may be undefined). Throws Error on NaN logits.
torch::Tensor adversarial_loss(const torch::Tensor& logits_real, const torch::Tensor& logits_fake, AdvSide side);

/// Mean L1 of both reconstructions.
torch::Tensor cycle_loss(const torch::Tensor& rec_c, const torch::Tensor& x_c, const torch::Tensor& rec_m,
                         const torch::Tensor& x_m);
torch::Tensor cycle_loss(const torch::Tensor& x_c, const torch::Tensor& x_m, Network& g_c2m, Network& g_m2c);

/// Per-sample contextual similarity between two layers (N x C x H x W, or
/// N x P x C already flattened). Spatial positions are treated as a set.
torch::Tensor contextual_similarity(const torch::Tensor& generated, const torch::Tensor& target);

/// -log of the per-sample mean similarity over the taps, averaged over the batch.
torch::Tensor contextual_loss(const FeatureStack& generated, const FeatureStack& target);
torch::Tensor contextual_loss(const torch::Tensor& x_generated, const torch::Tensor& x_target, Network& extractor);

enum class SegLossForm { SoftDice, NegLogLikelihood };
std::string_view to_string(SegLossForm f);
SegLossForm seg_loss_form_from_string(std::string_view s);

/// tumor_prob and target are N x H x W (target 0/1 as floating point).
/// Soft Dice 1 - (2 sum py + 1)/(sum p + sum y + 1) per sample, then batch mean.
torch::Tensor segmentation_loss(const torch::Tensor& tumor_prob, const torch::Tensor& target,
                                SegLossForm form = SegLossForm::SoftDice);

struct SegTriple {
    torch::Tensor teacher_real, teacher_pseudo, student;
};

/// Teacher on real MRI, teacher on G_C->M(x_c) with the CBCT label, student on CBCT.
SegTriple seg_loss_triple(Network& teacher, Network& student, Network& g_c2m, const torch::Tensor& x_m,
                          const torch::Tensor& y_m, const torch::Tensor& x_c, const torch::Tensor& y_c,
                          SegLossForm form = SegLossForm::SoftDice);

/// Sum over tap layers of the per-element mean squared difference.
/// Throws ShapeError when names or shapes disagree.
torch::Tensor hint_loss(const FeatureStack& student, const FeatureStack& teacher);

/// Term tensors of the weighted objective; undefined terms count as zero.
struct LossTerms {
    torch::Tensor adv_m, adv_c, cyc, cx, seg_teacher_real, seg_teacher_pseudo, seg_student, hint;
};

/// Weighted objective. Throws NonFiniteLossError naming the first
/// non-finite term.
torch::Tensor total_loss(const LossTerms& t, const LossWeights& w);
LossReport make_report(const LossTerms& t, const LossWeights& w);

}  // namespace cmedl::nn
