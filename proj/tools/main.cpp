#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "cmedl/errors.hpp"
#include "cmedl/image_io.hpp"
#include "cmedl/phantom.hpp"
#include "cmedl/report.hpp"
#include "cmedl/separability.hpp"
#include "cmedl/nn/evaluation.hpp"
#include "cmedl/nn/trainer.hpp"
#include "hashing.hpp"
#include "run_config.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace cmedl;

namespace {

enum Exit { kOk = 0, kFailure = 1, kConfig = 2, kIo = 3, kNonFinite = 4, kCheckpoint = 5 };

struct Common {
    std::string workdir = ".";
    std::string config;
    std::vector<std::string> sets;
    bool gnuplot = false;
    std::vector<std::string> argv;
};

fs::path resolve(const Common& c, const std::string& p) {
    if (p.empty()) return {};
    const fs::path path(p);
    return path.is_absolute() ? path : fs::path(c.workdir) / path;
}

std::string fmt(double v) {
    if (!std::isfinite(v)) return "nan";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

void emit(const std::string& key, const std::string& value) { std::cout << key << "=" << value << "\n"; }
void emit(const std::string& key, double value) { emit(key, fmt(value)); }

void hint(const std::string& line) { std::cerr << "gnuplot> " << line << "\n"; }

json load_merged(const Common& c, const std::vector<std::string>& flag_overrides) {
    json doc = c.config.empty() ? json{{"version", cli::kConfigVersion}} : cli::read_config_file(resolve(c, c.config));
    json merged = cli::merge_config(doc);
    for (const auto& s : c.sets) cli::apply_override(merged, s);
    for (const auto& s : flag_overrides) cli::apply_override(merged, s);
    return merged;
}

std::string quoted(const std::string& s) { return json(s).dump(); }

fs::path manifest_path(const Common& c, const json& merged, const std::string& flag) {
    const std::string p = flag.empty() ? merged["manifest"].get<std::string>() : flag;
    if (p.empty()) throw ConfigError("no manifest given (--manifest or config key 'manifest')");
    return resolve(c, p);
}

json input_hashes(const Common& c, const fs::path* manifest, const std::vector<fs::path>& checkpoints) {
    json in = json::object();
    if (!c.config.empty()) in["config"] = cli::git_blob_hash_file(resolve(c, c.config));
    if (manifest) in["corpus"] = cli::corpus_hash(load_manifest(*manifest), *manifest);
    for (const auto& ck : checkpoints) in["checkpoint:" + ck.generic_string()] = cli::directory_hash(ck);
    return in;
}

void write_run_json(const fs::path& dir, const std::string& command, const Common& c, const json& merged,
                    const json& inputs) {
    const json run = {{"command", command},
                      {"argv", c.argv},
                      {"workdir", fs::absolute(c.workdir).string()},
                      {"config", merged},
                      {"inputs", inputs}};
    const auto text = run.dump(2) + "\n";
    write_file_bytes(dir / "run.json", std::vector<char>(text.begin(), text.end()));
}

std::vector<nn::EvalCase> cases_for(const fs::path& manifest, const std::string& split) {
    return nn::load_eval_cases(load_manifest(manifest), split_from_string(split));
}

// --- subcommands -----------------------------------------------------------

struct DataOpts {
    std::string out;
};

int cmd_generate(const Common& c, const DataOpts& o) {
    const json merged = load_merged(c, {});
    const auto rc = cli::to_run_config(merged);
    const fs::path out = resolve(c, o.out);
    const auto m = generate_corpus(rc.data, out);
    const auto manifest = out / "manifest.json";
    write_run_json(out, "generate-data", c, merged, input_hashes(c, nullptr, {}));
    emit("manifest", manifest.string());
    emit("cases", std::to_string(m.entries.size()));
    emit("corpus_hash", cli::corpus_hash(m, manifest));
    return kOk;
}

struct TrainOpts {
    std::string out, manifest, mode;
    std::optional<std::uint64_t> seed;
    std::optional<int> max_epochs;
    bool resume = false;
};

int cmd_train(const Common& c, const TrainOpts& o) {
    std::vector<std::string> ov;
    if (!o.mode.empty()) {
        nn::train_mode_from_string(o.mode);
        ov.push_back("train.mode=" + quoted(o.mode));
    }
    if (o.seed) ov.push_back("seed=" + std::to_string(*o.seed));
    if (o.max_epochs) ov.push_back("train.max_epochs=" + std::to_string(*o.max_epochs));
    json merged = load_merged(c, ov);
    auto rc = cli::to_run_config(merged);
    const auto manifest = manifest_path(c, merged, o.manifest);
    if (!rc.train.translation_checkpoint.empty())
        rc.train.translation_checkpoint = resolve(c, rc.train.translation_checkpoint.string());
    rc.train.validate();
    const fs::path out = resolve(c, o.out);
    fs::create_directories(out);
    std::vector<fs::path> cks;
    if (!rc.train.translation_checkpoint.empty()) cks.push_back(rc.train.translation_checkpoint);
    write_run_json(out, "train", c, merged, input_hashes(c, &manifest, cks));

    const auto m = load_manifest(manifest);
    const auto r = rc.train.mode == nn::TrainMode::Cmedl ? nn::train(m, rc.train, out, o.resume)
                                                         : nn::train_baseline(m, rc.train, out, o.resume);
    std::cout << "best_epoch=" << r.best_epoch << " val_dice=" << fmt(r.best_val_dice) << "\n";
    emit("epochs", std::to_string(r.epochs_run));
    emit("early_stopped", r.early_stopped ? "true" : "false");
    emit("checkpoint", r.best_checkpoint.string());
    emit("last_checkpoint", r.last_checkpoint.string());
    emit("loss_csv", r.loss_csv.string());
    if (c.gnuplot) {
        const auto csv = r.loss_csv.string();
        hint("set datafile separator ','; set key autotitle columnhead; set xlabel 'step'");
        hint("plot '" + csv + "' using 1:(strcol(3) eq 'train' ? $12 : 1/0) with lines title 'train total', '" + csv +
             "' using 1:(strcol(3) eq 'val' ? $12 : 1/0) with linespoints title 'val 1-DSC'");
    }
    return kOk;
}

struct InferOpts {
    std::string out, manifest, split = "test", checkpoint, image, route = "student", which = "student";
};

int cmd_translate(const Common& c, const InferOpts& o) {
    const json merged = load_merged(c, {});
    const fs::path out = resolve(c, o.out), ck = resolve(c, o.checkpoint);
    auto b = nn::load_checkpoint(ck);
    if (!o.image.empty()) {
        save_image(out, nn::translate(b, load_image(resolve(c, o.image))));
        write_run_json(out.parent_path().empty() ? fs::path(".") : out.parent_path(), "translate", c, merged,
                       input_hashes(c, nullptr, {ck}));
        emit("out", out.string());
        return kOk;
    }
    const auto manifest = manifest_path(c, merged, o.manifest);
    const auto m = load_manifest(manifest);
    std::size_t n = 0;
    for (const auto* e : m.select(Modality::CBCT, split_from_string(o.split))) {
        save_image(out / (e->case_id + ".cmi"), nn::translate(b, load_image(m.resolve(e->image_path))));
        ++n;
    }
    write_run_json(out, "translate", c, merged, input_hashes(c, &manifest, {ck}));
    emit("translated", std::to_string(n));
    emit("out", out.string());
    return kOk;
}

int cmd_segment(const Common& c, const InferOpts& o) {
    const json merged = load_merged(c, {});
    const fs::path out = resolve(c, o.out), ck = resolve(c, o.checkpoint);
    const auto route = nn::route_from_string(o.route);
    auto b = nn::load_checkpoint(ck);
    const auto write_one = [&](const std::string& id, const Image& img) {
        const auto s = nn::segment(b, img, route);
        save_mask(out / "masks" / (id + ".cms"), s.mask, img.modality);
        save_image(out / "prob" / (id + ".cmi"), Image(s.prob, img.spacing, img.modality));
    };
    std::size_t n = 0;
    const fs::path* mp = nullptr;
    fs::path manifest;
    if (!o.image.empty()) {
        write_one(fs::path(o.image).stem().string(), load_image(resolve(c, o.image)));
        n = 1;
    } else {
        manifest = manifest_path(c, merged, o.manifest);
        mp = &manifest;
        const auto m = load_manifest(manifest);
        for (const auto* e : m.select(Modality::CBCT, split_from_string(o.split))) {
            write_one(e->case_id, load_image(m.resolve(e->image_path)));
            ++n;
        }
    }
    write_run_json(out, "segment", c, merged, input_hashes(c, mp, {ck}));
    emit("segmented", std::to_string(n));
    emit("out", out.string());
    return kOk;
}

struct EvalOpts {
    std::string out, manifest, split = "test";
    std::vector<std::string> methods;
    std::optional<double> tau;
};

nn::MethodSpec parse_method(const Common& c, const std::string& s) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == s.size())
        throw ConfigError("--method expects name=checkpoint[@route], got '" + s + "'");
    nn::MethodSpec m;
    m.name = s.substr(0, eq);
    std::string path = s.substr(eq + 1);
    if (const auto at = path.rfind('@'); at != std::string::npos) {
        m.route = nn::route_from_string(path.substr(at + 1));
        path = path.substr(0, at);
    }
    m.checkpoint = resolve(c, path);
    return m;
}

int cmd_evaluate(const Common& c, const EvalOpts& o) {
    std::vector<std::string> ov;
    if (o.tau) ov.push_back("metrics.tau_mm=" + fmt(*o.tau));
    const json merged = load_merged(c, ov);
    const auto rc = cli::to_run_config(merged);
    std::vector<nn::MethodSpec> methods;
    std::vector<fs::path> cks;
    for (const auto& s : o.methods) {
        methods.push_back(parse_method(c, s));
        cks.push_back(methods.back().checkpoint);
    }
    const auto manifest = manifest_path(c, merged, o.manifest);
    const fs::path out = resolve(c, o.out);
    const auto rows = nn::evaluate(cases_for(manifest, o.split), methods, rc.metrics.tau_mm);
    metrics::write_report(rows, out / "metrics.csv", out / "summary.json");
    write_run_json(out, "evaluate", c, merged, input_hashes(c, &manifest, cks));
    emit("rows", std::to_string(rows.size()));
    emit("csv", (out / "metrics.csv").string());
    emit("summary", (out / "summary.json").string());
    for (const auto& m : metrics::summarize(rows).methods) {
        emit("dsc_mean." + m.method, m.dsc.mean);
        emit("hd95_mean." + m.method, m.hd95_mm.mean);
    }
    if (c.gnuplot) {
        const auto csv = (out / "metrics.csv").string();
        hint("set datafile separator ','; set style data boxplot; set ylabel 'DSC'");
        hint("plot for [m in \"" + [&] {
            std::string names;
            for (const auto& m : methods) names += (names.empty() ? "" : " ") + m.name;
            return names;
        }() + "\"] '" + csv + "' using (1):(strcol(2) eq m ? $3 : 1/0) title m");
    }
    return kOk;
}

struct SensOpts {
    std::string out, manifest, split = "test", checkpoint, route = "student";
    std::optional<double> rate;
    std::optional<int> runs;
    std::optional<std::uint64_t> seed;
};

int cmd_sensitivity(const Common& c, const SensOpts& o) {
    std::vector<std::string> ov;
    if (o.rate) ov.push_back("metrics.dropout_rate=" + fmt(*o.rate));
    if (o.runs) ov.push_back("metrics.dropout_runs=" + std::to_string(*o.runs));
    if (o.seed) ov.push_back("seed=" + std::to_string(*o.seed));
    const json merged = load_merged(c, ov);
    const auto rc = cli::to_run_config(merged);
    if (rc.metrics.dropout_runs < 2) throw ConfigError("runs < 2: per-case SD needs at least two dropout runs");
    const auto manifest = manifest_path(c, merged, o.manifest);
    const fs::path out = resolve(c, o.out), ck = resolve(c, o.checkpoint);
    auto b = nn::load_checkpoint(ck);
    const auto r = nn::sensitivity_dropout(b, nn::route_from_string(o.route), cases_for(manifest, o.split),
                                           rc.metrics.dropout_rate, rc.metrics.dropout_runs, rc.seed);
    std::string csv = "case_id";
    for (int k = 0; k < rc.metrics.dropout_runs; ++k) csv += ",dsc_run" + std::to_string(k);
    csv += ",sd\n";
    for (std::size_t i = 0; i < r.case_ids.size(); ++i) {
        csv += r.case_ids[i];
        for (double d : r.dsc[i]) csv += "," + fmt(d);
        csv += "," + fmt(r.per_case_sd[i]) + "\n";
    }
    write_file_bytes(out / "sensitivity.csv", std::vector<char>(csv.begin(), csv.end()));
    write_run_json(out, "sensitivity", c, merged, input_hashes(c, &manifest, {ck}));
    emit("msd", r.msd);
    emit("cases", std::to_string(r.case_ids.size()));
    emit("csv", (out / "sensitivity.csv").string());
    return kOk;
}

int cmd_export(const Common& c, const InferOpts& o) {
    const json merged = load_merged(c, {});
    const auto rc = cli::to_run_config(merged);
    const auto manifest = manifest_path(c, merged, o.manifest);
    const fs::path out = resolve(c, o.out), ck = resolve(c, o.checkpoint);
    const auto which = nn::tap_source_from_string(o.which);
    auto b = nn::load_checkpoint(ck);
    const auto cases = cases_for(manifest, o.split);
    for (const auto& cs : cases) nn::export_taps(b, cs.image, which, out / "taps" / (cs.case_id + ".cmf"));
    metrics::SeparabilityOptions so;
    so.roi_size = rc.metrics.roi_size;
    so.pixels_per_class = rc.metrics.separability_pixels;
    so.seed = rc.seed;
    const auto sep = nn::feature_separability(b, which, cases, so);
    metrics::save_feature_table(out / "features.cmft", sep.table);
    write_run_json(out, "export-features", c, merged, input_hashes(c, &manifest, {ck}));
    emit("silhouette", sep.score);
    emit("layer", sep.table.layer);
    emit("samples", std::to_string(sep.table.records.size()));
    emit("table", (out / "features.cmft").string());
    emit("taps", (out / "taps").string());
    return kOk;
}

struct FidelityOpts {
    std::string out, manifest, split = "test", checkpoint;
    std::optional<int> bins;
};

int cmd_fidelity(const Common& c, const FidelityOpts& o) {
    std::vector<std::string> ov;
    if (o.bins) ov.push_back("metrics.kl_bins=" + std::to_string(*o.bins));
    const json merged = load_merged(c, ov);
    const auto rc = cli::to_run_config(merged);
    const auto manifest = manifest_path(c, merged, o.manifest);
    const fs::path out = resolve(c, o.out), ck = resolve(c, o.checkpoint);
    const auto m = load_manifest(manifest);
    const auto split = split_from_string(o.split);
    std::vector<Image> cbct, mri;
    for (const auto* e : m.select(Modality::CBCT, split)) cbct.push_back(load_image(m.resolve(e->image_path)));
    auto mri_entries = m.select(Modality::MRI, split);
    if (mri_entries.empty()) mri_entries = m.select(Modality::MRI, Split::Train);
    for (const auto* e : mri_entries) mri.push_back(load_image(m.resolve(e->image_path)));
    auto b = nn::load_checkpoint(ck);
    const auto r = nn::translation_fidelity(b, cbct, mri, rc.metrics.kl_bins);
    fs::create_directories(out);
    write_run_json(out, "fidelity", c, merged, input_hashes(c, &manifest, {ck}));
    emit("kl_pmri", r.kl_pmri);
    emit("kl_cbct", r.kl_cbct);
    return kOk;
}

int guarded(const std::function<int()>& f) {
    try {
        return f();
    } catch (const NonFiniteLossError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kNonFinite;
    } catch (const CheckpointError& e) {
        std::cerr << "checkpoint error: " << e.what() << "\n";
        return kCheckpoint;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfig;
    } catch (const IoError& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return kIo;
    } catch (const FormatError& e) {
        std::cerr << "format error: " << e.what() << "\n";
        return kIo;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return kIo;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kFailure;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Cross-modality distillation for CBCT tumor segmentation on synthetic phantoms", "cmedl"};
    app.require_subcommand(1);
    Common common;
    common.argv.assign(argv, argv + argc);
    app.add_option("--workdir", common.workdir, "Base directory for relative paths")->capture_default_str();
    app.add_option("--config", common.config, "JSON run configuration (with a version field)");
    app.add_option("--set", common.sets, "Override a config key, e.g. --set train.batch_size=4");
    app.add_flag("--gnuplot-hints", common.gnuplot, "Print suggested gnuplot commands to stderr");
    app.fallthrough();

    std::function<int()> action;

    DataOpts data;
    auto* gen = app.add_subcommand("generate-data", "Write a phantom corpus and its manifest");
    gen->add_option("--out", data.out, "Output directory")->required();
    gen->callback([&] { action = [&] { return cmd_generate(common, data); }; });

    TrainOpts tr;
    auto* train = app.add_subcommand("train", "Train CMEDL or a baseline");
    train->add_option("--out", tr.out, "Output directory for checkpoints and the loss curve")->required();
    train->add_option("--manifest", tr.manifest, "Corpus manifest (overrides config)");
    train->add_option("--mode", tr.mode, "cmedl, cbct_only, pmri_seg, cbct_plus_pmri or translation");
    train->add_option("--seed", tr.seed, "Run seed (overrides config)");
    train->add_option("--max-epochs", tr.max_epochs, "Epoch limit (overrides config)");
    train->add_flag("--resume", tr.resume, "Continue from <out>/last if present");
    train->callback([&] { action = [&] { return cmd_train(common, tr); }; });

    InferOpts tl;
    auto* translate = app.add_subcommand("translate", "CBCT to pseudo-MRI with a trained generator");
    translate->add_option("--checkpoint", tl.checkpoint, "Checkpoint directory")->required();
    translate->add_option("--out", tl.out, "Output directory (or file with --image)")->required();
    translate->add_option("--manifest", tl.manifest, "Corpus manifest");
    translate->add_option("--split", tl.split, "Split to translate")->capture_default_str();
    translate->add_option("--image", tl.image, "Translate a single CMI1 image instead");
    translate->callback([&] { action = [&] { return cmd_translate(common, tl); }; });

    InferOpts sg;
    auto* segment = app.add_subcommand("segment", "Tumor masks and probability maps");
    segment->add_option("--checkpoint", sg.checkpoint, "Checkpoint directory")->required();
    segment->add_option("--out", sg.out, "Output directory")->required();
    segment->add_option("--route", sg.route, "student or teacher_on_pmri")->capture_default_str();
    segment->add_option("--manifest", sg.manifest, "Corpus manifest");
    segment->add_option("--split", sg.split, "Split to segment")->capture_default_str();
    segment->add_option("--image", sg.image, "Segment a single CMI1 image instead");
    segment->callback([&] { action = [&] { return cmd_segment(common, sg); }; });

    EvalOpts ev;
    auto* evaluate = app.add_subcommand("evaluate", "Per-case metrics, summary and paired tests");
    evaluate->add_option("--method", ev.methods, "name=checkpoint[@route], repeatable")->required();
    evaluate->add_option("--out", ev.out, "Output directory")->required();
    evaluate->add_option("--manifest", ev.manifest, "Corpus manifest");
    evaluate->add_option("--split", ev.split, "Split to evaluate")->capture_default_str();
    evaluate->add_option("--tau", ev.tau, "Surface DSC tolerance in mm (default 4.38)");
    evaluate->callback([&] { action = [&] { return cmd_evaluate(common, ev); }; });

    SensOpts se;
    auto* sens = app.add_subcommand("sensitivity", "Test-time weight dropout on the last two layers");
    sens->add_option("--checkpoint", se.checkpoint, "Checkpoint directory")->required();
    sens->add_option("--out", se.out, "Output directory")->required();
    sens->add_option("--route", se.route, "student or teacher_on_pmri")->capture_default_str();
    sens->add_option("--manifest", se.manifest, "Corpus manifest");
    sens->add_option("--split", se.split, "Split to use")->capture_default_str();
    sens->add_option("--rate", se.rate, "Dropout rate (default 0.5)");
    sens->add_option("--runs", se.runs, "Dropout runs per case (default 10)");
    sens->add_option("--seed", se.seed, "Dropout seed (overrides config)");
    sens->callback([&] { action = [&] { return cmd_sensitivity(common, se); }; });

    InferOpts ex;
    auto* exp = app.add_subcommand("export-features", "Tap exports, sampled feature table and silhouette");
    exp->add_option("--checkpoint", ex.checkpoint, "Checkpoint directory")->required();
    exp->add_option("--out", ex.out, "Output directory")->required();
    exp->add_option("--which", ex.which, "student, teacher or cbct_only")->capture_default_str();
    exp->add_option("--manifest", ex.manifest, "Corpus manifest");
    exp->add_option("--split", ex.split, "Split to use")->capture_default_str();
    exp->callback([&] { action = [&] { return cmd_export(common, ex); }; });

    FidelityOpts fi;
    auto* fid = app.add_subcommand("fidelity", "KL divergence of translated vs raw CBCT against MRI");
    fid->add_option("--checkpoint", fi.checkpoint, "Checkpoint with g_c2m")->required();
    fid->add_option("--out", fi.out, "Output directory for run.json")->required();
    fid->add_option("--manifest", fi.manifest, "Corpus manifest");
    fid->add_option("--split", fi.split, "CBCT split; MRI from the same split, else train")->capture_default_str();
    fid->add_option("--bins", fi.bins, "Histogram bins (default 256)");
    fid->callback([&] { action = [&] { return cmd_fidelity(common, fi); }; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfig;
    }
    return guarded(action);
}
