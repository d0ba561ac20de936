// Classical CFAR detectors (CA / OS / GO / SO) in 1D and 2D sliding-window
// form, plus threshold-factor calibration against a target false alarm rate.
//
// Decision rule: score Y = T * F(training cells) - u(CUT); a cell is declared
// a detection iff Y < 0, i.e. the CUT exceeds the scaled noise statistic.
// Cells whose window does not fit carry score +inf and are never detections.

#ifndef RADDET_CFAR_HPP
#define RADDET_CFAR_HPP

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "raddet/common.hpp"

namespace raddet {

enum class CfarKind { CA, OS, GO, SO };

struct CfarVariant {
    CfarKind kind = CfarKind::CA;
    int os_k = 0;  // 1-based order index for OS; 0 = default ceil(3*n_train/4)

    static CfarVariant ca() { return {CfarKind::CA, 0}; }
    static CfarVariant os(int k = 0) { return {CfarKind::OS, k}; }
    static CfarVariant go() { return {CfarKind::GO, 0}; }
    static CfarVariant so() { return {CfarKind::SO, 0}; }

    int order_index(int n_train) const {
        if (os_k > 0) return os_k;
        return (3 * n_train + 3) / 4;  // ceil(3*n/4)
    }

    std::string name() const {
        switch (kind) {
            case CfarKind::CA: return "ca";
            case CfarKind::OS: return "os";
            case CfarKind::GO: return "go";
            case CfarKind::SO: return "so";
        }
        return "?";
    }
};

// Window geometry, per side of the cell under test. In 2D the azimuth axis
// may use its own extents; negative values fall back to the range extents.
// An azimuth extent of 0 (train and guard) degenerates the 2D window to a
// single range line, matching the 1D detector.
struct CfarWindow {
    int train = 8;
    int guard = 2;
    int train_az = -1;
    int guard_az = -1;

    static CfarWindow defaults_1d() { return {8, 2, -1, -1}; }
    static CfarWindow defaults_2d() { return {4, 2, -1, -1}; }

    int az_train() const { return train_az < 0 ? train : train_az; }
    int az_guard() const { return guard_az < 0 ? guard : guard_az; }
    int span_range() const { return train + guard; }
    int span_az() const { return az_train() + az_guard(); }

    void validate_1d() const {
        require(train >= 1, "CfarWindow: train cells per side must be >= 1");
        require(guard >= 0, "CfarWindow: guard cells per side must be >= 0");
    }
    void validate_2d() const {
        validate_1d();
        require(az_train() >= 0 && az_guard() >= 0, "CfarWindow: azimuth extents must be >= 0");
        require(az_train() + train >= 1, "CfarWindow: empty training ring");
    }

    // Number of training cells in the 2D ring.
    int ring_count() const {
        int wr = 2 * span_range() + 1, wa = 2 * span_az() + 1;
        int gr = 2 * guard + 1, ga = 2 * az_guard() + 1;
        return wr * wa - gr * ga;
    }
};

struct CfarConfig {
    CfarVariant variant;
    CfarWindow window;
    double threshold_factor = 1.0;

    void validate() const {
        require(threshold_factor >= 0.0, "CfarConfig: threshold_factor must be >= 0");
    }
};

struct CfarOutput {
    int rows = 0;
    int cols = 0;
    std::vector<double> scores;  // Y = T*F - u; +inf outside the valid region
    DetectionMask mask;
    ValidRegion valid;
};

// Noise statistic F per cell, independent of the threshold factor. Useful
// for threshold sweeps (ROC) where F is computed once per frame.
struct CfarStatistic {
    int rows = 0;
    int cols = 0;
    std::vector<double> noise;  // F; +inf outside the valid region
    ValidRegion valid;
};

namespace detail {

inline double mean_of(const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

inline double kth_smallest(std::vector<double> v, int k) {  // k is 1-based
    std::nth_element(v.begin(), v.begin() + (k - 1), v.end());
    return v[k - 1];
}

// all: every training cell; near/far: the leading and lagging halves used by
// GO/SO (in 2D these are the near-range and far-range half-rings; cells on
// the CUT's own range line belong to neither half).
inline double statistic_from_cells(const std::vector<double>& all,
                                   const std::vector<double>& near_half,
                                   const std::vector<double>& far_half,
                                   const CfarVariant& variant) {
    require(!all.empty(), "select_statistic: empty training neighborhood");
    switch (variant.kind) {
        case CfarKind::CA:
            return mean_of(all);
        case CfarKind::OS: {
            int k = variant.order_index(static_cast<int>(all.size()));
            require(k >= 1 && k <= static_cast<int>(all.size()),
                    "select_statistic: OS order index out of range");
            return kth_smallest(all, k);
        }
        case CfarKind::GO:
        case CfarKind::SO: {
            require(!near_half.empty() && !far_half.empty(),
                    "select_statistic: GO/SO need non-empty leading and lagging halves");
            double a = mean_of(near_half), b = mean_of(far_half);
            return variant.kind == CfarKind::GO ? std::max(a, b) : std::min(a, b);
        }
    }
    throw InvalidInput("select_statistic: unknown variant");
}

}  // namespace detail

// Selecting operator F over a training neighborhood split into its leading
// (earlier / near-range) and lagging (later / far-range) halves.
inline double select_statistic(const std::vector<double>& leading,
                               const std::vector<double>& lagging,
                               const CfarVariant& variant) {
    std::vector<double> all;
    all.reserve(leading.size() + lagging.size());
    all.insert(all.end(), leading.begin(), leading.end());
    all.insert(all.end(), lagging.begin(), lagging.end());
    return detail::statistic_from_cells(all, leading, lagging, variant);
}

inline CfarStatistic cfar_statistic_1d(const std::vector<double>& u, const CfarWindow& window,
                                       const CfarVariant& variant) {
    window.validate_1d();
    const int t = window.train, g = window.guard;
    const int span = t + g;
    const int n = static_cast<int>(u.size());
    require(n >= 2 * span + 1, "cfar_detect_1d: sequence shorter than the window span");

    CfarStatistic st;
    st.rows = 1;
    st.cols = n;
    st.noise.assign(u.size(), kInf);
    st.valid = {0, 0, span, n - 1 - span};

    std::vector<double> leading(t), lagging(t);
    for (int i = span; i <= n - 1 - span; ++i) {
        for (int j = 0; j < t; ++j) {
            leading[j] = u[i - span + j];
            lagging[j] = u[i + g + 1 + j];
        }
        st.noise[i] = select_statistic(leading, lagging, variant);
    }
    return st;
}

inline CfarStatistic cfar_statistic_2d(const RangeAzimuthFrame& frame, const CfarWindow& window,
                                       const CfarVariant& variant) {
    window.validate_2d();
    const int sr = window.span_range(), sa = window.span_az();
    const int gr = window.guard, ga = window.az_guard();
    require(frame.rows > 2 * sr && frame.cols > 2 * sa,
            "cfar_detect_2d: frame smaller than the window footprint");

    CfarStatistic st;
    st.rows = frame.rows;
    st.cols = frame.cols;
    st.noise.assign(frame.values.size(), kInf);
    st.valid = {sr, frame.rows - 1 - sr, sa, frame.cols - 1 - sa};

    std::vector<double> ring, near_half, far_half;
    ring.reserve(window.ring_count());
    for (int r = st.valid.r_lo; r <= st.valid.r_hi; ++r) {
        for (int c = st.valid.c_lo; c <= st.valid.c_hi; ++c) {
            ring.clear();
            near_half.clear();
            far_half.clear();
            for (int dr = -sr; dr <= sr; ++dr) {
                for (int da = -sa; da <= sa; ++da) {
                    if (std::abs(dr) <= gr && std::abs(da) <= ga) continue;  // guard box + CUT
                    double v = frame.at(r + dr, c + da);
                    ring.push_back(v);
                    if (dr < 0)
                        near_half.push_back(v);
                    else if (dr > 0)
                        far_half.push_back(v);
                }
            }
            st.noise[static_cast<size_t>(r) * frame.cols + c] =
                detail::statistic_from_cells(ring, near_half, far_half, variant);
        }
    }
    return st;
}

namespace detail {

inline CfarOutput apply_threshold(const CfarStatistic& st, const std::vector<double>& u,
                                  double threshold_factor) {
    CfarOutput out;
    out.rows = st.rows;
    out.cols = st.cols;
    out.valid = st.valid;
    out.scores.assign(u.size(), kInf);
    out.mask = DetectionMask::zeros(st.rows, st.cols);
    for (int r = st.valid.r_lo; r <= st.valid.r_hi; ++r) {
        for (int c = st.valid.c_lo; c <= st.valid.c_hi; ++c) {
            size_t i = static_cast<size_t>(r) * st.cols + c;
            double y = threshold_factor * st.noise[i] - u[i];
            out.scores[i] = y;
            out.mask.cells[i] = y < 0.0 ? 1 : 0;
        }
    }
    return out;
}

}  // namespace detail

inline CfarOutput cfar_detect_1d(const std::vector<double>& u, const CfarConfig& cfg) {
    cfg.validate();
    CfarStatistic st = cfar_statistic_1d(u, cfg.window, cfg.variant);
    return detail::apply_threshold(st, u, cfg.threshold_factor);
}

inline CfarOutput cfar_detect_2d(const RangeAzimuthFrame& frame, const CfarConfig& cfg) {
    cfg.validate();
    CfarStatistic st = cfar_statistic_2d(frame, cfg.window, cfg.variant);
    std::vector<double> u(frame.values.begin(), frame.values.end());
    return detail::apply_threshold(st, u, cfg.threshold_factor);
}

// ---------------------------------------------------------------------------
// Threshold-factor calibration

struct CalibrationOptions {
    long trials = 1'250'000;  // Monte-Carlo CUT draws (>= 1e6)
    uint64_t seed = 0x5eedULL;
    int max_iters = 200;
    double rel_tol = 0.05;
};

// Threshold factor T attaining `target_pfa` on i.i.d. exponential noise.
// CA has the classical closed form; OS/GO/SO are inverted numerically by
// bisection on an empirical Pfa estimator over `opt.trials` simulated CUTs.
inline double threshold_factor(const CfarVariant& variant, int n_train, double target_pfa,
                               const CalibrationOptions& opt = {}) {
    require(n_train >= 1, "threshold_factor: n_train must be >= 1");
    require(target_pfa > 0.0 && target_pfa <= 1.0, "threshold_factor: target_pfa outside (0,1]");
    if (target_pfa == 1.0) return 0.0;

    if (variant.kind == CfarKind::CA) {
        double n = static_cast<double>(n_train);
        return n * (std::pow(target_pfa, -1.0 / n) - 1.0);
    }

    if (variant.kind == CfarKind::GO || variant.kind == CfarKind::SO)
        require(n_train % 2 == 0, "threshold_factor: GO/SO need an even n_train");
    if (variant.kind == CfarKind::OS) {
        int k = variant.order_index(n_train);
        require(k >= 1 && k <= n_train, "threshold_factor: OS order index out of range");
    }

    // Per trial the detection condition is CUT > T*F, so the per-trial ratio
    // CUT/F makes the empirical Pfa a monotone step function of T.
    std::mt19937_64 rng = rng_for(opt.seed, 0);
    std::exponential_distribution<double> exp1(1.0);
    std::vector<double> cells(n_train), near_half, far_half;
    std::vector<double> ratios(opt.trials);
    const int half = n_train / 2;
    for (long i = 0; i < opt.trials; ++i) {
        for (int j = 0; j < n_train; ++j) cells[j] = exp1(rng);
        double cut = exp1(rng);
        near_half.assign(cells.begin(), cells.begin() + half);
        far_half.assign(cells.begin() + half, cells.end());
        double f = detail::statistic_from_cells(cells, near_half, far_half, variant);
        ratios[i] = cut / f;
    }
    std::sort(ratios.begin(), ratios.end());

    auto pfa_at = [&](double t) {
        auto it = std::upper_bound(ratios.begin(), ratios.end(), t);
        return static_cast<double>(ratios.end() - it) / static_cast<double>(ratios.size());
    };

    double lo = 0.0;                    // pfa(lo) = 1
    double hi = ratios.back() + 1.0;    // pfa(hi) = 0
    for (int it = 0; it < opt.max_iters; ++it) {
        double mid = 0.5 * (lo + hi);
        double est = pfa_at(mid);
        if (std::abs(est - target_pfa) / target_pfa < opt.rel_tol) return mid;
        if (est > target_pfa)
            lo = mid;
        else
            hi = mid;
    }
    throw CalibrationError("threshold_factor: bisection did not converge for pfa=" +
                           std::to_string(target_pfa));
}

}  // namespace raddet

#endif  // RADDET_CFAR_HPP
