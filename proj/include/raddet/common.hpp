// Shared types and small utilities: error hierarchy, range-azimuth grids,
// deterministic RNG streams, and a thread helper.

#ifndef RADDET_COMMON_HPP
#define RADDET_COMMON_HPP

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace raddet {

// ---------------------------------------------------------------------------
// Errors

struct InvalidInput : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Raised when (I - dt/2 A) cannot be factored; carries the offending step.
struct SingularityError : NumericError {
    double dt;
    SingularityError(const std::string& msg, double dt_)
        : NumericError(msg + " (dt=" + std::to_string(dt_) + ")"), dt(dt_) {}
};

struct CalibrationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw InvalidInput(msg);
}

// ---------------------------------------------------------------------------
// Grids

// 2D magnitude spectrum over range (rows) x azimuth (cols).
// Values are stored as float32 so that generated scenes round-trip the
// on-disk dataset format bit-exactly.
struct RangeAzimuthFrame {
    int rows = 0;
    int cols = 0;
    std::vector<float> values;  // row-major, size rows*cols
    double range_min_m = 0.6;
    double range_max_m = 6.0;
    double az_min_deg = -43.5;
    double az_max_deg = 43.5;

    int size() const { return rows * cols; }
    float& at(int r, int c) { return values[static_cast<size_t>(r) * cols + c]; }
    float at(int r, int c) const { return values[static_cast<size_t>(r) * cols + c]; }

    // Flatten row-major with the range axis fastest: the flattened sequence
    // walks down a full range line before moving to the next azimuth bin.
    std::vector<double> flatten_range_fastest() const {
        std::vector<double> out(static_cast<size_t>(rows) * cols);
        size_t i = 0;
        for (int c = 0; c < cols; ++c)
            for (int r = 0; r < rows; ++r) out[i++] = at(r, c);
        return out;
    }
};

struct DetectionMask {
    int rows = 0;
    int cols = 0;
    std::vector<uint8_t> cells;  // row-major, 0/1

    static DetectionMask zeros(int rows, int cols) {
        return DetectionMask{rows, cols, std::vector<uint8_t>(static_cast<size_t>(rows) * cols, 0)};
    }
    int size() const { return rows * cols; }
    uint8_t& at(int r, int c) { return cells[static_cast<size_t>(r) * cols + c]; }
    uint8_t at(int r, int c) const { return cells[static_cast<size_t>(r) * cols + c]; }
    long count() const {
        long n = 0;
        for (uint8_t b : cells) n += b;
        return n;
    }
};

// Inclusive index bounds of the region where a full detector window fits.
struct ValidRegion {
    int r_lo = 0, r_hi = -1, c_lo = 0, c_hi = -1;

    static ValidRegion full(int rows, int cols) { return {0, rows - 1, 0, cols - 1}; }
    bool contains(int r, int c) const { return r >= r_lo && r <= r_hi && c >= c_lo && c <= c_hi; }
    bool empty() const { return r_hi < r_lo || c_hi < c_lo; }
    long cell_count() const {
        return empty() ? 0 : static_cast<long>(r_hi - r_lo + 1) * (c_hi - c_lo + 1);
    }
};

// ---------------------------------------------------------------------------
// RNG

inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Independent stream for (seed, index); order-independent across indices.
inline std::mt19937_64 rng_for(uint64_t seed, uint64_t index) {
    return std::mt19937_64(splitmix64(splitmix64(seed) ^ splitmix64(index + 0x51ed2701)));
}

// ---------------------------------------------------------------------------
// Threads

inline unsigned thread_count() {
    if (const char* env = std::getenv("RADDET_THREADS")) {
        long n = std::strtol(env, nullptr, 10);
        if (n >= 1) return static_cast<unsigned>(n);
    }
    unsigned hw = std::thread::hardware_concurrency();
    return hw ? hw : 1;
}

// Runs fn(i) for i in [0, n). Work is split into contiguous chunks; outputs
// must be disjoint per index so results do not depend on the thread count.
template <typename Fn>
void parallel_for(long n, Fn&& fn) {
    unsigned workers = thread_count();
    if (n <= 0) return;
    if (workers <= 1 || n == 1) {
        for (long i = 0; i < n; ++i) fn(i);
        return;
    }
    unsigned t = static_cast<unsigned>(std::min<long>(workers, n));
    std::vector<std::thread> pool;
    pool.reserve(t);
    long chunk = (n + t - 1) / t;
    for (unsigned w = 0; w < t; ++w) {
        long lo = w * chunk;
        long hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([lo, hi, &fn] {
            for (long i = lo; i < hi; ++i) fn(i);
        });
    }
    for (auto& th : pool) th.join();
}

inline bool all_finite(const std::vector<double>& v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace raddet

#endif  // RADDET_COMMON_HPP
