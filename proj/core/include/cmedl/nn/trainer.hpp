#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cmedl/image.hpp"
#include "cmedl/image_io.hpp"
#include "cmedl/manifest.hpp"
#include "cmedl/nn/bundle.hpp"
#include "cmedl/nn/data.hpp"

namespace cmedl::nn {

/// translation trains the two generators and discriminators alone; its
/// checkpoint feeds pmri_seg and cbct_plus_pmri.
enum class TrainMode { Cmedl, CbctOnly, PmriSeg, CbctPlusPmri, Translation };
std::string_view to_string(TrainMode m);
/// Throws ConfigError listing the valid modes.
TrainMode train_mode_from_string(std::string_view s);

enum class SegmenterKind { UNet, DenseFCN };
std::string_view to_string(SegmenterKind k);
SegmenterKind segmenter_from_string(std::string_view s);

struct TrainConfig {
    TrainMode mode = TrainMode::Cmedl;
    SegmenterKind segmenter = SegmenterKind::UNet;
    Scale scale = Scale::Desk;
    int batch_size = 2;
    double lr_translation = 1e-4;
    double lr_segmentation = 2e-4;
    double beta1 = 0.5;
    double beta2 = 0.999;
    int max_epochs = 100;
    int early_stop_patience = 10;
    LossWeights weights;
    std::uint64_t seed = 0;
    bool augment = true;
    bool replay_pool = true;
    int replay_pool_size = 50;
    bool symmetric_hint = false;
    SegLossForm seg_form = SegLossForm::SoftDice;
    int patch_size = 64;
    // 0 keeps the preset of the chosen scale.
    int generator_width = 0;
    int generator_blocks = 0;
    int discriminator_width = 0;
    int discriminator_layers = 0;
    int segmenter_width = 0;
    int extractor_width = 0;
    // Required by pmri_seg and cbct_plus_pmri.
    std::filesystem::path translation_checkpoint;

    /// Throws ConfigError.
    void validate() const;
};

std::string config_to_json(const TrainConfig& cfg);
TrainConfig config_from_json(const std::string& text);

/// Network specs of every trainable role for the configuration.
std::map<std::string, NetSpec> bundle_specs(const TrainConfig& cfg);

/// Freshly initialized bundle. Every role draws its own init seed from
/// (cfg.seed, role), so shared roles start identical across modes.
ModelBundle make_bundle(const TrainConfig& cfg);

struct Batch {
    torch::Tensor x;  // N x C x H x W, network domain
    torch::Tensor y;  // N x H x W, 0/1
};

/// Called after each phase of a step with "generator", "discriminator" or "segmenter".
using PhaseHook = std::function<void(std::string_view phase)>;

/// One G -> D -> S step of joint training; increments bundle.step.
/// Throws NonFiniteLossError naming the offending term.
LossReport train_step_cmedl(ModelBundle& b, const Batch& cbct, const Batch& mri, const TrainConfig& cfg,
                            const PhaseHook& hook = {});
/// Single-segmenter step of cbct_only / pmri_seg / cbct_plus_pmri.
LossReport train_step_baseline(ModelBundle& b, const Batch& cbct, const TrainConfig& cfg);
/// G -> D step without segmenters.
LossReport train_step_translation(ModelBundle& b, const Batch& cbct, const Batch& mri, const TrainConfig& cfg);

struct TrainResult {
    std::filesystem::path best_checkpoint;
    std::filesystem::path last_checkpoint;
    std::filesystem::path loss_csv;
    int best_epoch = 0;
    double best_val_dice = 0.0;
    int epochs_run = 0;
    bool early_stopped = false;
};

/// Trains in cfg.mode, writing out_dir/{best,last}/ and out_dir/loss_curve.csv.
/// With resume, continues from out_dir/last when it exists.
TrainResult train(const Manifest& manifest, const TrainConfig& cfg, const std::filesystem::path& out_dir,
                  bool resume = false);
/// As train, for every mode except cmedl.
TrainResult train_baseline(const Manifest& manifest, const TrainConfig& cfg, const std::filesystem::path& out_dir,
                           bool resume = false);

/// Mean DSC of the bundle's evaluated segmenter over the samples.
double validation_dice(ModelBundle& b, const std::vector<Sample>& samples);

TrainConfig bundle_config(const ModelBundle& b);

/// Pseudo-MRI of the same shape and spacing, tagged PMRI, values in (-1, 1).
Image translate(ModelBundle& b, const Image& img);

/// student: the trained CBCT segmenter (for pmri_seg and cbct_plus_pmri
/// bundles this includes their generator input path); teacher_on_pmri: G_C->M
/// then the teacher.
enum class Route { Student, TeacherOnPmri };
std::string_view to_string(Route r);
Route route_from_string(std::string_view s);

struct Segmentation {
    Mask mask;         // prob >= 0.5, in the input frame
    Grid<float> prob;  // tumor probability, in the input frame
};
/// Throws CheckpointError when the bundle lacks a sub-network of the route.
Segmentation segment(ModelBundle& b, const Image& img, Route route);

/// Tumor probability on a prepared patch (1 x H x W).
torch::Tensor segment_patch(ModelBundle& b, const Image& patch, Route route);

enum class TapSource { Student, Teacher, CbctOnly };
std::string_view to_string(TapSource s);
TapSource tap_source_from_string(std::string_view s);

/// Tap grids of the chosen segmenter on the prepared patch of img.
std::vector<FeatureMapData> export_taps(ModelBundle& b, const Image& img, TapSource which);
void export_taps(ModelBundle& b, const Image& img, TapSource which, const std::filesystem::path& file);

std::string loss_csv_header();
std::string loss_csv_row(std::int64_t step, int epoch, const std::string& split, const LossReport* r,
                         std::optional<double> val_dice);

}  // namespace cmedl::nn
