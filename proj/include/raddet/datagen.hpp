// Synthetic range-azimuth scene generator and the on-disk dataset container.
//
// Scenes are an i.i.d. exponential clutter floor (optionally two-region for a
// range-oriented clutter edge) plus separable squared-sinc target mainlobes.
// The ground-truth mask marks cells whose per-target contribution reaches a
// fraction of that target's peak amplitude.

#ifndef RADDET_DATAGEN_HPP
#define RADDET_DATAGEN_HPP

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "raddet/common.hpp"
#include "raddet/serialize.hpp"

namespace raddet {

enum class ClutterKind { Homogeneous, Heterogeneous, Mixed };

inline std::string clutter_name(ClutterKind k) {
    switch (k) {
        case ClutterKind::Homogeneous: return "homogeneous";
        case ClutterKind::Heterogeneous: return "heterogeneous";
        case ClutterKind::Mixed: return "mixed";
    }
    return "?";
}

struct SceneConfig {
    int rows = 64;
    int cols = 32;
    double range_min_m = 0.6;
    double range_max_m = 6.0;
    double az_min_deg = -43.5;
    double az_max_deg = 43.5;
    int targets_min = 1;
    int targets_max = 3;
    double snr_db_min = 10.0;
    double snr_db_max = 20.0;
    ClutterKind clutter = ClutterKind::Homogeneous;
    double clutter_mean = 1.0;
    double het_ratio = 4.0;  // high-region mean / low-region mean
    double mainlobe_range_bins = 3.0;  // first-null half width, range axis
    double mainlobe_az_deg = 15.0;     // beamwidth, converted to bins on the grid
    double mask_level = 0.25;          // mask threshold as fraction of target peak
    int margin_range = 4;
    int margin_az = 4;
    uint64_t seed = 0;

    double mainlobe_az_bins() const {
        return mainlobe_az_deg * cols / (az_max_deg - az_min_deg);
    }
    void validate() const {
        require(rows >= 1 && cols >= 1, "SceneConfig: grid must be non-empty");
        require(range_min_m < range_max_m, "SceneConfig: bad range bounds");
        require(az_min_deg < az_max_deg, "SceneConfig: bad azimuth bounds");
        require(targets_min >= 0 && targets_min <= targets_max, "SceneConfig: bad target count");
        require(snr_db_min <= snr_db_max, "SceneConfig: bad snr range");
        require(clutter_mean > 0.0 && het_ratio > 0.0, "SceneConfig: bad clutter levels");
        require(mainlobe_range_bins > 0.0 && mainlobe_az_deg > 0.0, "SceneConfig: bad mainlobe");
        require(mask_level > 0.0 && mask_level < 1.0, "SceneConfig: mask_level outside (0,1)");
        if (targets_max > 0) {
            require(rows > 2 * margin_range && cols > 2 * margin_az,
                    "SceneConfig: margins leave no room for targets");
        }
    }
};

struct TargetMeta {
    double row_center = 0.0;
    double col_center = 0.0;
    double snr_db = 0.0;
    double amplitude = 0.0;
};

struct SampleMeta {
    std::string clutter;  // "homogeneous" or "heterogeneous"
    int het_edge_row = -1;
    double mean_low = 0.0;
    double mean_high = 0.0;
    std::vector<TargetMeta> targets;
};

struct LabeledSample {
    RangeAzimuthFrame frame;
    DetectionMask mask;
    SampleMeta meta;
};

namespace detail {

inline double sinc(double x) {
    if (std::abs(x) < 1e-12) return 1.0;
    double px = std::numbers::pi * x;
    return std::sin(px) / px;
}

}  // namespace detail

// Deterministic in (cfg.seed, index); samples are independent streams so
// generation order does not matter.
inline LabeledSample gen_sample(const SceneConfig& cfg, uint64_t index) {
    cfg.validate();
    std::mt19937_64 rng = rng_for(cfg.seed, index);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::exponential_distribution<double> exp1(1.0);

    LabeledSample s;
    s.frame.rows = cfg.rows;
    s.frame.cols = cfg.cols;
    s.frame.range_min_m = cfg.range_min_m;
    s.frame.range_max_m = cfg.range_max_m;
    s.frame.az_min_deg = cfg.az_min_deg;
    s.frame.az_max_deg = cfg.az_max_deg;
    s.mask = DetectionMask::zeros(cfg.rows, cfg.cols);

    bool het = cfg.clutter == ClutterKind::Heterogeneous;
    if (cfg.clutter == ClutterKind::Mixed) het = unit(rng) < 0.5;

    s.meta.clutter = het ? "heterogeneous" : "homogeneous";
    s.meta.mean_low = cfg.clutter_mean;
    s.meta.mean_high = het ? cfg.clutter_mean * cfg.het_ratio : cfg.clutter_mean;
    bool high_near = false;
    if (het) {
        std::uniform_int_distribution<int> edge_dist(cfg.rows / 4, 3 * cfg.rows / 4);
        s.meta.het_edge_row = edge_dist(rng);
        high_near = unit(rng) < 0.5;
    }
    auto row_mean = [&](int r) {
        if (!het) return cfg.clutter_mean;
        bool near = r < s.meta.het_edge_row;
        return (near == high_near) ? s.meta.mean_high : s.meta.mean_low;
    };

    std::vector<double> field(static_cast<size_t>(cfg.rows) * cfg.cols);
    for (int r = 0; r < cfg.rows; ++r)
        for (int c = 0; c < cfg.cols; ++c)
            field[static_cast<size_t>(r) * cfg.cols + c] =
                std::max(exp1(rng), 1e-20) * row_mean(r);

    std::uniform_int_distribution<int> nt_dist(cfg.targets_min, cfg.targets_max);
    int n_targets = nt_dist(rng);
    const double w_r = cfg.mainlobe_range_bins;
    const double w_a = cfg.mainlobe_az_bins();
    for (int t = 0; t < n_targets; ++t) {
        std::uniform_int_distribution<int> rc_dist(cfg.margin_range, cfg.rows - 1 - cfg.margin_range);
        std::uniform_int_distribution<int> cc_dist(cfg.margin_az, cfg.cols - 1 - cfg.margin_az);
        std::uniform_real_distribution<double> jitter(-0.25, 0.25);
        std::uniform_real_distribution<double> snr_dist(cfg.snr_db_min, cfg.snr_db_max);
        int rc = rc_dist(rng), cc = cc_dist(rng);
        double r0 = rc + jitter(rng);
        double c0 = cc + jitter(rng);
        double snr_db = snr_dist(rng);
        double amp = std::pow(10.0, snr_db / 10.0) * row_mean(rc);
        s.meta.targets.push_back({r0, c0, snr_db, amp});
        for (int r = 0; r < cfg.rows; ++r) {
            double pr = detail::sinc((r - r0) / w_r);
            pr *= pr;
            for (int c = 0; c < cfg.cols; ++c) {
                double pa = detail::sinc((c - c0) / w_a);
                double contrib = amp * pr * pa * pa;
                field[static_cast<size_t>(r) * cfg.cols + c] += contrib;
                if (contrib >= cfg.mask_level * amp) s.mask.at(r, c) = 1;
            }
        }
    }

    s.frame.values.resize(field.size());
    for (size_t i = 0; i < field.size(); ++i) s.frame.values[i] = static_cast<float>(field[i]);
    return s;
}

// ---------------------------------------------------------------------------
// Dataset container
//
//   <dir>/manifest          human-readable header + one line per sample
//   <dir>/frames/sNNNNN.f32 little-endian float32, row-major
//   <dir>/masks/sNNNNN.u8   one byte per cell, row-major

enum SplitId { kTrain = 0, kVal = 1, kTest = 2 };

inline const char* split_name(int s) {
    return s == kTrain ? "train" : (s == kVal ? "val" : "test");
}

struct Dataset {
    SceneConfig scene;                 // grid geometry fields are authoritative
    std::vector<LabeledSample> samples;
    std::vector<int> split;            // SplitId per sample

    std::vector<int> indices_of(int split_id) const {
        std::vector<int> out;
        for (size_t i = 0; i < split.size(); ++i)
            if (split[i] == split_id) out.push_back(static_cast<int>(i));
        return out;
    }
};

namespace detail {

inline std::string sample_stem(int i) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "s%05d", i);
    return buf;
}

}  // namespace detail

// Split sizes: floor for train and val, remainder to test.
inline std::array<int, 3> split_counts(int count, const std::array<double, 3>& ratios) {
    require(count >= 1, "gen_dataset: count must be >= 1");
    double sum = ratios[0] + ratios[1] + ratios[2];
    require(std::abs(sum - 1.0) < 1e-9, "gen_dataset: split ratios must sum to 1");
    require(ratios[0] >= 0 && ratios[1] >= 0 && ratios[2] >= 0, "gen_dataset: negative ratio");
    int n_train = static_cast<int>(std::floor(count * ratios[0]));
    int n_val = static_cast<int>(std::floor(count * ratios[1]));
    return {n_train, n_val, count - n_train - n_val};
}

inline void write_manifest(const std::string& dir, const SceneConfig& cfg, int count,
                           const std::array<int, 3>& counts, const std::vector<SampleMeta>& metas,
                           const std::vector<int>& split) {
    std::ostringstream out;
    out << "raddet-dataset v1\n";
    out << "rows=" << cfg.rows << "\n";
    out << "cols=" << cfg.cols << "\n";
    out << "range_min_m=" << format_double(cfg.range_min_m) << "\n";
    out << "range_max_m=" << format_double(cfg.range_max_m) << "\n";
    out << "az_min_deg=" << format_double(cfg.az_min_deg) << "\n";
    out << "az_max_deg=" << format_double(cfg.az_max_deg) << "\n";
    out << "count=" << count << "\n";
    out << "train_count=" << counts[0] << "\n";
    out << "val_count=" << counts[1] << "\n";
    out << "test_count=" << counts[2] << "\n";
    out << "seed=" << cfg.seed << "\n";
    for (int i = 0; i < count; ++i) {
        const SampleMeta& m = metas[i];
        out << "sample " << detail::sample_stem(i) << " split=" << split_name(split[i])
            << " frame=frames/" << detail::sample_stem(i) << ".f32"
            << " mask=masks/" << detail::sample_stem(i) << ".u8"
            << " clutter=" << m.clutter << " het_edge=" << m.het_edge_row
            << " mean_low=" << format_double(m.mean_low)
            << " mean_high=" << format_double(m.mean_high) << " ntargets=" << m.targets.size();
        for (size_t t = 0; t < m.targets.size(); ++t) {
            const TargetMeta& tm = m.targets[t];
            out << " t" << t << "=" << format_double(tm.row_center) << ","
                << format_double(tm.col_center) << "," << format_double(tm.snr_db) << ","
                << format_double(tm.amplitude);
        }
        out << "\n";
    }
    write_file_bytes(dir + "/manifest", out.str());
}

inline void gen_dataset(const SceneConfig& cfg, int count, const std::array<double, 3>& ratios,
                        const std::string& dir) {
    cfg.validate();
    std::array<int, 3> counts = split_counts(count, ratios);
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir + "/frames", ec);
    fs::create_directories(dir + "/masks", ec);
    if (!fs::exists(dir + "/frames") || !fs::exists(dir + "/masks"))
        throw IoError("gen_dataset: cannot create dataset directory " + dir);

    std::vector<int> split(count);
    for (int i = 0; i < count; ++i)
        split[i] = i < counts[0] ? kTrain : (i < counts[0] + counts[1] ? kVal : kTest);

    std::vector<SampleMeta> metas(count);
    std::vector<std::string> errors(count);
    parallel_for(count, [&](long i) {
        LabeledSample s = gen_sample(cfg, static_cast<uint64_t>(i));
        metas[i] = s.meta;
        std::string fbytes;
        fbytes.reserve(s.frame.values.size() * 4);
        for (float v : s.frame.values) detail::append_f32_le(fbytes, v);
        write_file_bytes(dir + "/frames/" + detail::sample_stem(static_cast<int>(i)) + ".f32",
                         fbytes);
        std::string mbytes(reinterpret_cast<const char*>(s.mask.cells.data()),
                           s.mask.cells.size());
        write_file_bytes(dir + "/masks/" + detail::sample_stem(static_cast<int>(i)) + ".u8",
                         mbytes);
    });
    write_manifest(dir, cfg, count, counts, metas, split);
}

inline Dataset load_dataset(const std::string& dir) {
    std::istringstream in(read_file_bytes(dir + "/manifest"));
    std::string line;
    if (!std::getline(in, line) || line != "raddet-dataset v1")
        throw IoError("not a raddet dataset: " + dir);

    Dataset ds;
    int count = 0;
    auto kv = [&](const std::string& l) {
        size_t eq = l.find('=');
        return std::pair<std::string, std::string>(l.substr(0, eq), l.substr(eq + 1));
    };
    while (std::getline(in, line)) {
        if (line.rfind("sample ", 0) == 0) break;
        auto [key, value] = kv(line);
        if (key == "rows") ds.scene.rows = std::stoi(value);
        else if (key == "cols") ds.scene.cols = std::stoi(value);
        else if (key == "range_min_m") ds.scene.range_min_m = std::stod(value);
        else if (key == "range_max_m") ds.scene.range_max_m = std::stod(value);
        else if (key == "az_min_deg") ds.scene.az_min_deg = std::stod(value);
        else if (key == "az_max_deg") ds.scene.az_max_deg = std::stod(value);
        else if (key == "count") count = std::stoi(value);
        else if (key == "seed") ds.scene.seed = std::stoull(value);
    }

    const size_t cells = static_cast<size_t>(ds.scene.rows) * ds.scene.cols;
    while (!line.empty() && line.rfind("sample ", 0) == 0) {
        std::istringstream ls(line);
        std::string tok;
        ls >> tok;  // "sample"
        ls >> tok;  // stem
        LabeledSample s;
        s.frame.rows = ds.scene.rows;
        s.frame.cols = ds.scene.cols;
        s.frame.range_min_m = ds.scene.range_min_m;
        s.frame.range_max_m = ds.scene.range_max_m;
        s.frame.az_min_deg = ds.scene.az_min_deg;
        s.frame.az_max_deg = ds.scene.az_max_deg;
        int split_id = kTrain;
        std::string frame_path, mask_path;
        int ntargets = 0;
        std::vector<std::string> target_fields;
        while (ls >> tok) {
            auto [key, value] = kv(tok);
            if (key == "split")
                split_id = value == "train" ? kTrain : (value == "val" ? kVal : kTest);
            else if (key == "frame") frame_path = value;
            else if (key == "mask") mask_path = value;
            else if (key == "clutter") s.meta.clutter = value;
            else if (key == "het_edge") s.meta.het_edge_row = std::stoi(value);
            else if (key == "mean_low") s.meta.mean_low = std::stod(value);
            else if (key == "mean_high") s.meta.mean_high = std::stod(value);
            else if (key == "ntargets") ntargets = std::stoi(value);
            else if (key.size() >= 2 && key[0] == 't') target_fields.push_back(value);
        }
        for (const std::string& tf : target_fields) {
            TargetMeta tm;
            std::istringstream ts(tf);
            std::string num;
            std::getline(ts, num, ',');
            tm.row_center = std::stod(num);
            std::getline(ts, num, ',');
            tm.col_center = std::stod(num);
            std::getline(ts, num, ',');
            tm.snr_db = std::stod(num);
            std::getline(ts, num, ',');
            tm.amplitude = std::stod(num);
            s.meta.targets.push_back(tm);
        }
        require(static_cast<int>(s.meta.targets.size()) == ntargets,
                "load_dataset: target metadata mismatch");

        std::string fb = read_file_bytes(dir + "/" + frame_path);
        require(fb.size() == cells * 4, "load_dataset: frame size mismatch");
        s.frame.values.resize(cells);
        for (size_t i = 0; i < cells; ++i)
            s.frame.values[i] = detail::read_f32_le(fb.data() + 4 * i);
        std::string mb = read_file_bytes(dir + "/" + mask_path);
        require(mb.size() == cells, "load_dataset: mask size mismatch");
        s.mask = DetectionMask::zeros(ds.scene.rows, ds.scene.cols);
        for (size_t i = 0; i < cells; ++i)
            s.mask.cells[i] = static_cast<uint8_t>(mb[i]);

        ds.samples.push_back(std::move(s));
        ds.split.push_back(split_id);
        if (!std::getline(in, line)) break;
    }
    require(static_cast<int>(ds.samples.size()) == count, "load_dataset: sample count mismatch");
    return ds;
}

}  // namespace raddet

#endif  // RADDET_DATAGEN_HPP
