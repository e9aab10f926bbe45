#include "cmedl/separability.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>

#include "cmedl/byte_io.hpp"
#include "cmedl/errors.hpp"
#include "cmedl/rng.hpp"
#include "cmedl/stats.hpp"

namespace cmedl::metrics {

using nlohmann::json;

void save_feature_table(const std::filesystem::path& path, const FeatureTable& t) {
    json h = {{"format", "cmedl-feature-table"},
              {"version", 1},
              {"layer", t.layer},
              {"channels", t.channels},
              {"roi_size", t.roi_size},
              {"seed", t.seed},
              {"case_ids", t.case_ids},
              {"record_count", t.records.size()},
              {"tsne", {{"perplexity", t.tsne_perplexity}, {"iterations", t.tsne_iterations}}}};
    const std::string hs = h.dump();
    detail::ByteWriter w;
    w.magic("CMFT");
    w.u32(static_cast<std::uint32_t>(hs.size()));
    w.raw(hs.data(), hs.size());
    for (const auto& r : t.records) {
        if (static_cast<int>(r.features.size()) != t.channels) throw ShapeError("feature record width mismatch");
        w.u32(r.case_index);
        w.u32(r.pixel_index);
        w.u8(r.label);
        for (float v : r.features) w.f32(v);
    }
    write_file_bytes(path, w.buffer());
}

FeatureTable load_feature_table(const std::filesystem::path& path) {
    const auto bytes = read_file_bytes(path);
    detail::ByteReader r(bytes, path.string());
    r.expect_magic("CMFT");
    const auto n = r.u32();
    std::string hs(n, '\0');
    r.raw(hs.data(), n);
    json h;
    try {
        h = json::parse(hs);
    } catch (const json::exception& e) {
        throw FormatError(path.string() + ": bad header: " + e.what());
    }
    FeatureTable t;
    try {
        t.layer = h.at("layer").get<std::string>();
        t.channels = h.at("channels").get<int>();
        t.roi_size = h.at("roi_size").get<int>();
        t.seed = h.at("seed").get<std::uint64_t>();
        t.case_ids = h.at("case_ids").get<std::vector<std::string>>();
        t.tsne_perplexity = h.at("tsne").at("perplexity").get<double>();
        t.tsne_iterations = h.at("tsne").at("iterations").get<int>();
        const auto count = h.at("record_count").get<std::size_t>();
        t.records.resize(count);
        for (auto& rec : t.records) {
            rec.case_index = r.u32();
            rec.pixel_index = r.u32();
            rec.label = r.u8();
            rec.features.resize(t.channels);
            for (auto& v : rec.features) v = r.f32();
        }
    } catch (const json::exception& e) {
        throw FormatError(path.string() + ": bad header: " + e.what());
    }
    if (r.remaining() != 0) throw FormatError(path.string() + ": trailing bytes");
    return t;
}

int default_roi_size(int n) { return std::max(2, static_cast<int>(std::lround(n * 160.0 / 256.0))); }

SeparabilityResult feature_separability(const std::vector<SeparabilityCase>& cases, const SeparabilityOptions& opt) {
    if (cases.empty()) throw Error("no cases for separability");
    if (opt.pixels_per_class <= 0) throw Error("pixels_per_class must be positive");
    SeparabilityResult res;
    auto& t = res.table;
    t.layer = cases.front().features.name;
    t.channels = cases.front().features.channels;
    t.seed = opt.seed;

    for (std::size_t ci = 0; ci < cases.size(); ++ci) {
        const auto& cs = cases[ci];
        const auto& f = cs.features;
        if (f.channels != t.channels) throw ShapeError("feature channel count differs between cases");
        const int mr = cs.mask.rows(), mc = cs.mask.cols();
        if (mr % f.rows != 0 || mc % f.cols != 0 || mr / f.rows != mc / f.cols)
            throw ShapeError("feature grid does not divide the mask grid");
        const int stride = mr / f.rows;
        const int roi = (opt.roi_size > 0 ? opt.roi_size : default_roi_size(mr)) / stride;
        t.roi_size = roi * stride;
        t.case_ids.push_back(cs.case_id);

        // Tumor centroid on the feature grid.
        double sr = 0, sc = 0, n = 0;
        for (int r = 0; r < mr; ++r)
            for (int c = 0; c < mc; ++c)
                if (cs.mask.pixels(r, c)) sr += r, sc += c, n += 1;
        if (n == 0) continue;
        const int cr = static_cast<int>(std::lround(sr / n)) / stride;
        const int cc = static_cast<int>(std::lround(sc / n)) / stride;
        const int r0 = std::clamp(cr - roi / 2, 0, std::max(0, f.rows - roi));
        const int c0 = std::clamp(cc - roi / 2, 0, std::max(0, f.cols - roi));

        std::vector<int> tumor, background;
        for (int r = r0; r < std::min(f.rows, r0 + roi); ++r)
            for (int c = c0; c < std::min(f.cols, c0 + roi); ++c) {
                const bool lab = cs.mask.pixels(r * stride + stride / 2, c * stride + stride / 2) != 0;
                (lab ? tumor : background).push_back(r * f.cols + c);
            }
        const auto k = std::min<std::size_t>({static_cast<std::size_t>(opt.pixels_per_class), tumor.size(), background.size()});
        auto rng = make_rng(opt.seed, "separability", {ci});
        std::shuffle(tumor.begin(), tumor.end(), rng);
        std::shuffle(background.begin(), background.end(), rng);
        const auto emit = [&](int pix, std::uint8_t label) {
            FeatureRecord rec{static_cast<std::uint32_t>(ci), static_cast<std::uint32_t>(pix), label, {}};
            rec.features.resize(f.channels);
            for (int ch = 0; ch < f.channels; ++ch) rec.features[ch] = f.at(ch, pix / f.cols, pix % f.cols);
            t.records.push_back(std::move(rec));
        };
        for (std::size_t i = 0; i < k; ++i) {
            emit(tumor[i], 1);
            emit(background[i], 0);
        }
    }

    const auto per_class = t.records.size() / 2;
    if (per_class < 10) throw Error("fewer than 10 pixels per class for separability");
    std::vector<float> pts;
    std::vector<int> labels;
    pts.reserve(t.records.size() * t.channels);
    for (const auto& rec : t.records) {
        pts.insert(pts.end(), rec.features.begin(), rec.features.end());
        labels.push_back(rec.label);
    }
    res.score = silhouette_score(pts, static_cast<std::size_t>(t.channels), labels);
    return res;
}

}  // namespace cmedl::metrics
