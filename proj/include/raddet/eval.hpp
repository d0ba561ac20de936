// Detection metrics and ROC machinery for both detector families, plus the
// comparison-report emission (CSV tables, per-method ROC CSVs, PGM panels).
//
// pd = detected target cells / target cells; pf = detections on background /
// background cells. Counts pool across frames and are restricted to a valid
// region so CFAR border cells are excluded for every method alike.

#ifndef RADDET_EVAL_HPP
#define RADDET_EVAL_HPP

#include <algorithm>
#include <array>
#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include "raddet/cfar.hpp"
#include "raddet/common.hpp"
#include "raddet/datagen.hpp"
#include "raddet/model.hpp"
#include "raddet/serialize.hpp"

namespace raddet {

struct MetricResult {
    double pd = 0.0;
    double pf = 0.0;
    long n_target_cells = 0;
    long n_background_cells = 0;
    long n_hits = 0;
    long n_false_alarms = 0;
};

struct MetricCounts {
    long hits = 0, fas = 0, targets = 0, background = 0;

    void add(const DetectionMask& pred, const DetectionMask& truth, const ValidRegion& valid) {
        require(pred.rows == truth.rows && pred.cols == truth.cols, "pd_pf: shape mismatch");
        for (int r = valid.r_lo; r <= valid.r_hi; ++r) {
            for (int c = valid.c_lo; c <= valid.c_hi; ++c) {
                bool p = pred.at(r, c) != 0, t = truth.at(r, c) != 0;
                if (t) {
                    ++targets;
                    if (p) ++hits;
                } else {
                    ++background;
                    if (p) ++fas;
                }
            }
        }
    }

    MetricResult finalize() const {
        MetricResult m;
        m.n_hits = hits;
        m.n_false_alarms = fas;
        m.n_target_cells = targets;
        m.n_background_cells = background;
        m.pd = targets > 0 ? static_cast<double>(hits) / targets : 0.0;
        m.pf = background > 0 ? static_cast<double>(fas) / background : 0.0;
        return m;
    }
};

inline MetricResult pd_pf(const DetectionMask& pred, const DetectionMask& truth,
                          const ValidRegion& valid) {
    MetricCounts counts;
    counts.add(pred, truth, valid);
    return counts.finalize();
}

// ---------------------------------------------------------------------------
// ROC

struct RocPoint {
    double threshold = 0.0;
    double pf = 0.0;
    double pd = 0.0;
};

struct RocCurve {
    std::vector<RocPoint> points;  // pf non-decreasing
    double auc = 0.0;
};

namespace detail {

// Trapezoidal AUC over [0,1] with endpoint extension (0,0) and (1,1).
inline double roc_auc(const std::vector<RocPoint>& points) {
    double auc = 0.0;
    double prev_pf = 0.0, prev_pd = 0.0;
    for (const RocPoint& p : points) {
        auc += (p.pf - prev_pf) * 0.5 * (p.pd + prev_pd);
        prev_pf = p.pf;
        prev_pd = p.pd;
    }
    auc += (1.0 - prev_pf) * 0.5 * (prev_pd + 1.0);
    return auc;
}

// Pooled per-cell scores with binary labels; higher score = more target-like.
struct ScoredCells {
    std::vector<double> scores;
    std::vector<uint8_t> labels;
};

// Sweeps thresholds over the sorted unique scores (subsampled to at most
// max_thresholds), counting detections as score >= tau (strict = false) or
// score > tau (strict = true).
inline RocCurve roc_from_scores(ScoredCells cells, int max_thresholds, bool strict) {
    require(!cells.scores.empty(), "roc: no cells");
    std::vector<size_t> order(cells.scores.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        return cells.scores[a] < cells.scores[b];
    });
    std::vector<double> sorted_scores(order.size());
    std::vector<long> suffix_targets(order.size() + 1, 0), suffix_bg(order.size() + 1, 0);
    for (size_t i = 0; i < order.size(); ++i) sorted_scores[i] = cells.scores[order[i]];
    for (size_t i = order.size(); i-- > 0;) {
        bool t = cells.labels[order[i]] != 0;
        suffix_targets[i] = suffix_targets[i + 1] + (t ? 1 : 0);
        suffix_bg[i] = suffix_bg[i + 1] + (t ? 0 : 1);
    }
    long total_targets = suffix_targets[0], total_bg = suffix_bg[0];

    std::vector<double> unique_scores;
    unique_scores.reserve(sorted_scores.size());
    for (size_t i = 0; i < sorted_scores.size(); ++i)
        if (i == 0 || sorted_scores[i] != sorted_scores[i - 1])
            unique_scores.push_back(sorted_scores[i]);
    std::vector<double> thresholds;
    if (static_cast<int>(unique_scores.size()) <= max_thresholds) {
        thresholds = unique_scores;
    } else {
        thresholds.reserve(max_thresholds);
        for (int i = 0; i < max_thresholds; ++i) {
            size_t idx = static_cast<size_t>(
                (static_cast<double>(i) * (unique_scores.size() - 1)) / (max_thresholds - 1));
            thresholds.push_back(unique_scores[idx]);
        }
        thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
    }

    RocCurve curve;
    for (auto it = thresholds.rbegin(); it != thresholds.rend(); ++it) {  // pf ascending
        double tau = *it;
        size_t idx = strict
                         ? std::upper_bound(sorted_scores.begin(), sorted_scores.end(), tau) -
                               sorted_scores.begin()
                         : std::lower_bound(sorted_scores.begin(), sorted_scores.end(), tau) -
                               sorted_scores.begin();
        RocPoint p;
        p.threshold = tau;
        p.pd = total_targets > 0 ? static_cast<double>(suffix_targets[idx]) / total_targets : 0.0;
        p.pf = total_bg > 0 ? static_cast<double>(suffix_bg[idx]) / total_bg : 0.0;
        curve.points.push_back(p);
    }
    curve.auc = roc_auc(curve.points);
    return curve;
}

inline void collect_model_cells(const DetectorModel& model, const LabeledSample& s,
                                const ValidRegion& valid, ScoredCells& cells) {
    std::vector<double> probs = forward(model, s.frame);
    for (int r = valid.r_lo; r <= valid.r_hi; ++r) {
        for (int c = valid.c_lo; c <= valid.c_hi; ++c) {
            cells.scores.push_back(probs[static_cast<size_t>(c) * s.frame.rows + r]);
            cells.labels.push_back(s.mask.at(r, c));
        }
    }
}

// Ratio u/F per valid cell; the CFAR decision u > T*F becomes ratio > T.
inline void collect_cfar_cells(const CfarVariant& variant, const CfarWindow& window,
                               const LabeledSample& s, ScoredCells& cells, ValidRegion* valid_out) {
    CfarStatistic st = cfar_statistic_2d(s.frame, window, variant);
    if (valid_out) *valid_out = st.valid;
    for (int r = st.valid.r_lo; r <= st.valid.r_hi; ++r) {
        for (int c = st.valid.c_lo; c <= st.valid.c_hi; ++c) {
            size_t i = static_cast<size_t>(r) * s.frame.cols + c;
            double u = s.frame.values[i];
            double f = st.noise[i];
            double ratio = f > 0.0 ? u / f : (u > 0.0 ? kInf : 0.0);
            cells.scores.push_back(ratio);
            cells.labels.push_back(s.mask.at(r, c));
        }
    }
}

}  // namespace detail

inline RocCurve roc_model(const DetectorModel& model,
                          const std::vector<const LabeledSample*>& samples,
                          const ValidRegion& valid, int max_thresholds = 512) {
    require(!samples.empty(), "roc_model: empty split");
    detail::ScoredCells cells;
    for (const LabeledSample* s : samples) detail::collect_model_cells(model, *s, valid, cells);
    return detail::roc_from_scores(std::move(cells), max_thresholds, /*strict=*/false);
}

// One aggregate (pf, pd) point per threshold factor in t_grid.
inline RocCurve roc_cfar(const CfarVariant& variant, const CfarWindow& window,
                         const std::vector<const LabeledSample*>& samples,
                         const std::vector<double>& t_grid) {
    require(!samples.empty(), "roc_cfar: empty split");
    require(!t_grid.empty(), "roc_cfar: empty threshold grid");
    require(std::is_sorted(t_grid.begin(), t_grid.end()), "roc_cfar: t_grid must be sorted");
    for (double t : t_grid) require(t >= 0.0, "roc_cfar: thresholds must be >= 0");

    detail::ScoredCells cells;
    for (const LabeledSample* s : samples)
        detail::collect_cfar_cells(variant, window, *s, cells, nullptr);

    std::vector<double> sorted_scores = cells.scores;
    std::vector<size_t> order(sorted_scores.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](size_t a, size_t b) { return cells.scores[a] < cells.scores[b]; });
    std::vector<long> suffix_targets(order.size() + 1, 0), suffix_bg(order.size() + 1, 0);
    for (size_t i = 0; i < order.size(); ++i) sorted_scores[i] = cells.scores[order[i]];
    for (size_t i = order.size(); i-- > 0;) {
        bool t = cells.labels[order[i]] != 0;
        suffix_targets[i] = suffix_targets[i + 1] + (t ? 1 : 0);
        suffix_bg[i] = suffix_bg[i + 1] + (t ? 0 : 1);
    }
    long total_targets = suffix_targets[0], total_bg = suffix_bg[0];

    RocCurve curve;
    for (auto it = t_grid.rbegin(); it != t_grid.rend(); ++it) {
        size_t idx = std::upper_bound(sorted_scores.begin(), sorted_scores.end(), *it) -
                     sorted_scores.begin();
        RocPoint p;
        p.threshold = *it;
        p.pd = total_targets > 0 ? static_cast<double>(suffix_targets[idx]) / total_targets : 0.0;
        p.pf = total_bg > 0 ? static_cast<double>(suffix_bg[idx]) / total_bg : 0.0;
        curve.points.push_back(p);
    }
    curve.auc = detail::roc_auc(curve.points);
    return curve;
}

// CFAR ROC with the threshold grid taken from the pooled score quantiles,
// matching the model sweep's granularity.
inline RocCurve roc_cfar_auto(const CfarVariant& variant, const CfarWindow& window,
                              const std::vector<const LabeledSample*>& samples,
                              int max_thresholds = 512) {
    require(!samples.empty(), "roc_cfar: empty split");
    detail::ScoredCells cells;
    for (const LabeledSample* s : samples)
        detail::collect_cfar_cells(variant, window, *s, cells, nullptr);
    return detail::roc_from_scores(std::move(cells), max_thresholds, /*strict=*/true);
}

// ---------------------------------------------------------------------------
// Aggregate metrics over a split

inline MetricResult eval_model(const DetectorModel& model,
                               const std::vector<const LabeledSample*>& samples, double tau,
                               const ValidRegion& valid) {
    require(!samples.empty(), "eval_model: empty split");
    MetricCounts counts;
    for (const LabeledSample* s : samples) {
        std::vector<double> probs = forward(model, s->frame);
        DetectionMask pred = predict_mask(probs, tau, s->frame.rows, s->frame.cols);
        counts.add(pred, s->mask, valid);
    }
    return counts.finalize();
}

inline MetricResult eval_cfar(const CfarConfig& cfg,
                              const std::vector<const LabeledSample*>& samples,
                              ValidRegion* valid_out = nullptr) {
    require(!samples.empty(), "eval_cfar: empty split");
    MetricCounts counts;
    for (const LabeledSample* s : samples) {
        CfarOutput out = cfar_detect_2d(s->frame, cfg);
        counts.add(out.mask, s->mask, out.valid);
        if (valid_out) *valid_out = out.valid;
    }
    return counts.finalize();
}

// ---------------------------------------------------------------------------
// Report emission

struct NamedResult {
    std::string name;
    MetricResult metrics;
    RocCurve roc;
};

struct PanelData {
    const RangeAzimuthFrame* frame;
    const DetectionMask* pred;
    const DetectionMask* truth;
};

namespace detail {

inline std::vector<uint8_t> minmax_bytes(const std::vector<double>& v) {
    double lo = kInf, hi = -kInf;
    for (double x : v) {
        lo = std::min(lo, x);
        hi = std::max(hi, x);
    }
    std::vector<uint8_t> out(v.size(), 0);
    if (hi > lo) {
        for (size_t i = 0; i < v.size(); ++i)
            out[i] = static_cast<uint8_t>(std::lround(255.0 * (v[i] - lo) / (hi - lo)));
    }
    return out;
}

}  // namespace detail

inline std::string metrics_csv(std::vector<NamedResult> results) {
    std::sort(results.begin(), results.end(), [](const NamedResult& a, const NamedResult& b) {
        if (a.metrics.pd != b.metrics.pd) return a.metrics.pd > b.metrics.pd;
        return a.name < b.name;
    });
    std::ostringstream out;
    out << "method,pd,pf,hits,fas,targets,background\n";
    for (const NamedResult& r : results) {
        out << r.name << "," << format_double(r.metrics.pd) << "," << format_double(r.metrics.pf)
            << "," << r.metrics.n_hits << "," << r.metrics.n_false_alarms << ","
            << r.metrics.n_target_cells << "," << r.metrics.n_background_cells << "\n";
    }
    return out.str();
}

inline std::string roc_csv(const std::string& name, const RocCurve& curve) {
    std::ostringstream out;
    out << "method,threshold,pf,pd\n";
    for (const RocPoint& p : curve.points)
        out << name << "," << format_double(p.threshold) << "," << format_double(p.pf) << ","
            << format_double(p.pd) << "\n";
    return out.str();
}

// Writes metrics.csv, per-method roc_<name>.csv, auc.csv and one PGM panel
// grid (frame | prediction | truth) per sampled frame.
inline void compare_report(const std::vector<NamedResult>& results,
                           const std::vector<PanelData>& panels, const std::string& out_dir) {
    require(!results.empty(), "compare_report: no results");
    std::filesystem::create_directories(out_dir);
    write_file_bytes(out_dir + "/metrics.csv", metrics_csv(results));
    {
        std::ostringstream auc;
        auc << "method,auc\n";
        for (const NamedResult& r : results)
            auc << r.name << "," << format_double(r.roc.auc) << "\n";
        write_file_bytes(out_dir + "/auc.csv", auc.str());
    }
    for (const NamedResult& r : results) {
        if (!r.roc.points.empty())
            write_file_bytes(out_dir + "/roc_" + r.name + ".csv", roc_csv(r.name, r.roc));
    }
    for (size_t i = 0; i < panels.size(); ++i) {
        const PanelData& p = panels[i];
        int rows = p.frame->rows, cols = p.frame->cols;
        std::vector<double> fv(p.frame->values.begin(), p.frame->values.end());
        std::vector<uint8_t> fb = detail::minmax_bytes(fv);
        auto mask_bytes = [&](const DetectionMask& m) {
            std::vector<double> v(m.cells.begin(), m.cells.end());
            return detail::minmax_bytes(v);
        };
        std::vector<uint8_t> pb = mask_bytes(*p.pred), tb = mask_bytes(*p.truth);
        int out_cols = 3 * cols + 2;
        std::vector<uint8_t> img(static_cast<size_t>(rows) * out_cols, 255);
        for (int r = 0; r < rows; ++r) {
            for (int c = 0; c < cols; ++c) {
                img[static_cast<size_t>(r) * out_cols + c] = fb[static_cast<size_t>(r) * cols + c];
                img[static_cast<size_t>(r) * out_cols + cols + 1 + c] =
                    pb[static_cast<size_t>(r) * cols + c];
                img[static_cast<size_t>(r) * out_cols + 2 * cols + 2 + c] =
                    tb[static_cast<size_t>(r) * cols + c];
            }
        }
        char name[32];
        std::snprintf(name, sizeof(name), "panel_%03zu.pgm", i);
        write_pgm(out_dir + "/" + name, rows, out_cols, img);
    }
}

}  // namespace raddet

#endif  // RADDET_EVAL_HPP
