// The unfolded detector: stacked blocks of H independent SSM channels with a
// frozen HiPPO-LegT state pair, per-channel trainable (C, D, log dt), channel
// mixing, channel-axis layer norm and GELU, followed by an H-average, an
// input residual and a sigmoid head.

#ifndef RADDET_MODEL_HPP
#define RADDET_MODEL_HPP

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "raddet/autodiff.hpp"
#include "raddet/common.hpp"
#include "raddet/ssm.hpp"

namespace raddet {

struct DetectorConfig {
    int L = 2048;  // flattened sequence length (rows * cols)
    int N = 64;    // state dimension
    int H = 8;     // channel count
    int num_blocks = 2;
    double dt_min = 1e-3;
    double dt_max = 1e-1;
    uint64_t seed = 0;

    void validate() const {
        require(L >= 1 && N >= 1 && H >= 1, "DetectorConfig: L, N, H must be >= 1");
        require(num_blocks >= 0, "DetectorConfig: num_blocks must be >= 0");
        require(dt_min > 0.0 && dt_min < dt_max, "DetectorConfig: need 0 < dt_min < dt_max");
    }
};

// Trainable tensors of one block. The HiPPO pair (A, B) is shared across
// blocks, frozen, and lives on the model.
struct DetectorBlock {
    ad::Tensor C;        // H x N per-channel output vectors
    ad::Tensor D;        // H    per-channel passthrough
    ad::Tensor log_dt;   // H    step sizes, trained in log-space
    ad::Tensor mix_w;    // H x H channel mixing
    ad::Tensor mix_b;    // H
    ad::Tensor ln_gain;  // H
    ad::Tensor ln_bias;  // H
};

struct DetectorModel {
    DetectorConfig cfg;
    Eigen::MatrixXd A;  // frozen, no gradient
    Eigen::VectorXd B;  // frozen, no gradient
    std::vector<DetectorBlock> blocks;

    // Registry in fixed order; checkpoints and optimizer state follow it.
    std::vector<std::pair<std::string, ad::Tensor*>> params() {
        std::vector<std::pair<std::string, ad::Tensor*>> out;
        for (size_t b = 0; b < blocks.size(); ++b) {
            std::string p = "block" + std::to_string(b) + ".";
            out.emplace_back(p + "C", &blocks[b].C);
            out.emplace_back(p + "D", &blocks[b].D);
            out.emplace_back(p + "log_dt", &blocks[b].log_dt);
            out.emplace_back(p + "mix_w", &blocks[b].mix_w);
            out.emplace_back(p + "mix_b", &blocks[b].mix_b);
            out.emplace_back(p + "ln_gain", &blocks[b].ln_gain);
            out.emplace_back(p + "ln_bias", &blocks[b].ln_bias);
        }
        return out;
    }
    std::vector<std::pair<std::string, const ad::Tensor*>> params() const {
        std::vector<std::pair<std::string, const ad::Tensor*>> out;
        for (auto& [name, t] : const_cast<DetectorModel*>(this)->params()) out.emplace_back(name, t);
        return out;
    }
};

inline size_t count_params(const DetectorModel& m) {
    size_t n = 0;
    for (auto& [name, t] : m.params()) n += t->size();
    return n;
}

inline DetectorModel init_model(const DetectorConfig& cfg) {
    cfg.validate();
    DetectorModel m;
    m.cfg = cfg;
    auto [A, B] = hippo_legt(cfg.N, static_cast<double>(cfg.L));
    m.A = std::move(A);
    m.B = std::move(B);

    std::mt19937_64 rng = rng_for(cfg.seed, 0x6d6f64);
    std::normal_distribution<double> norm_c(0.0, 1.0 / std::sqrt(static_cast<double>(cfg.N)));
    std::normal_distribution<double> norm_w(0.0, 1.0 / std::sqrt(static_cast<double>(cfg.H)));
    std::uniform_real_distribution<double> rho(std::log(cfg.dt_min), std::log(cfg.dt_max));

    m.blocks.resize(cfg.num_blocks);
    for (auto& blk : m.blocks) {
        blk.C = ad::Tensor::zeros({cfg.H, cfg.N}, true);
        for (auto& x : blk.C.v) x = norm_c(rng);
        blk.D = ad::Tensor::zeros({cfg.H}, true);
        blk.log_dt = ad::Tensor::zeros({cfg.H}, true);
        for (auto& x : blk.log_dt.v) x = rho(rng);
        blk.mix_w = ad::Tensor::zeros({cfg.H, cfg.H}, true);
        for (auto& x : blk.mix_w.v) x = norm_w(rng);
        blk.mix_b = ad::Tensor::zeros({cfg.H}, true);
        blk.ln_gain = ad::Tensor::zeros({cfg.H}, true);
        for (auto& x : blk.ln_gain.v) x = 1.0;
        blk.ln_bias = ad::Tensor::zeros({cfg.H}, true);
    }
    return m;
}

// ---------------------------------------------------------------------------
// Input handling

constexpr double kStandardizeEps = 1e-12;

// Flatten (range fastest) and standardize to zero mean / unit variance.
inline std::vector<double> standardize_frame(const RangeAzimuthFrame& f) {
    std::vector<double> u = f.flatten_range_fastest();
    require(!u.empty(), "standardize_frame: empty frame");
    double mu = 0.0;
    for (double x : u) mu += x;
    mu /= static_cast<double>(u.size());
    double var = 0.0;
    for (double x : u) var += (x - mu) * (x - mu);
    var /= static_cast<double>(u.size());
    double inv = 1.0 / std::sqrt(var + kStandardizeEps);
    for (double& x : u) x = (x - mu) * inv;
    return u;
}

inline void check_frame(const DetectorModel& m, const RangeAzimuthFrame& f) {
    require(f.rows * f.cols == m.cfg.L, "forward: frame does not flatten to length L");
    for (float v : f.values) require(v >= 0.0f, "forward: frame values must be >= 0");
}

// ---------------------------------------------------------------------------
// Taped forward (training path; gradients flow through the recurrence)

namespace detail {

inline std::vector<double> rowmajor(const Eigen::MatrixXd& m) {
    std::vector<double> out(static_cast<size_t>(m.size()));
    ad::MatMap(out.data(), m.rows(), m.cols()) = m;
    return out;
}

}  // namespace detail

// Builds the probability head on `tape` from parameter leaves (registry
// order, 7 per block). `u_std` is the standardized flattened frame.
inline ad::Var detector_probs(const DetectorModel& m, ad::Tape& tape,
                              const std::vector<ad::Var>& param_leaves,
                              const std::vector<double>& u_std) {
    const auto& cfg = m.cfg;
    require(static_cast<int>(u_std.size()) == cfg.L, "detector_probs: bad input length");
    require(param_leaves.size() == static_cast<size_t>(7 * cfg.num_blocks),
            "detector_probs: parameter leaf count mismatch");

    ad::Var u_var = tape.constant({cfg.L}, u_std);
    if (cfg.num_blocks == 0) return tape.sigmoid(u_var);

    ad::Var a_const = tape.constant({cfg.N, cfg.N}, detail::rowmajor(m.A));
    ad::Var b_const = tape.constant({cfg.N}, std::vector<double>(m.B.data(), m.B.data() + cfg.N));
    ad::Var i_const =
        tape.constant({cfg.N, cfg.N}, detail::rowmajor(Eigen::MatrixXd::Identity(cfg.N, cfg.N)));

    ad::Var x = u_var;           // block 1 input, broadcast to all channels
    bool broadcast_input = true;  // first block clones the same sequence per channel
    for (int b = 0; b < cfg.num_blocks; ++b) {
        ad::Var c_leaf = param_leaves[7 * b + 0];
        ad::Var d_leaf = param_leaves[7 * b + 1];
        ad::Var rho_leaf = param_leaves[7 * b + 2];
        ad::Var w_leaf = param_leaves[7 * b + 3];
        ad::Var wb_leaf = param_leaves[7 * b + 4];
        ad::Var g_leaf = param_leaves[7 * b + 5];
        ad::Var gb_leaf = param_leaves[7 * b + 6];

        ad::Var dt = tape.exp_(rho_leaf);
        std::vector<ad::Var> channel_out;
        channel_out.reserve(cfg.H);
        for (int h = 0; h < cfg.H; ++h) {
            ad::Var dth = tape.index(dt, h);
            double dtv = tape.val(dth)[0];
            ad::Var m_minus = tape.add(i_const, tape.scale(a_const, tape.scale_const(dth, -0.5)));
            ad::Var m_plus = tape.add(i_const, tape.scale(a_const, tape.scale_const(dth, 0.5)));
            ad::Var a_bar = tape.linear_solve(m_minus, m_plus, dtv);
            ad::Var b_bar = tape.linear_solve(m_minus, tape.scale(b_const, dth), dtv);
            ad::Var u_h = broadcast_input ? x : tape.row(x, h);
            channel_out.push_back(
                tape.ssm_recurrence(a_bar, b_bar, tape.row(c_leaf, h), tape.index(d_leaf, h), u_h));
        }
        ad::Var y = tape.stack_rows(channel_out);
        ad::Var z = tape.bias_rows(tape.matmul(w_leaf, y), wb_leaf);
        x = tape.gelu(tape.layer_norm(z, g_leaf, gb_leaf, 1e-5));
        broadcast_input = false;
    }
    ad::Var mixed = tape.mean_axis(x, 0);
    return tape.sigmoid(tape.add(mixed, u_var));
}

struct TapeForward {
    std::vector<ad::Var> leaves;  // registry order
    ad::Var probs;
};

inline TapeForward forward_on_tape(DetectorModel& m, ad::Tape& tape,
                                   const std::vector<double>& u_std) {
    TapeForward out;
    for (auto& [name, t] : m.params()) out.leaves.push_back(tape.leaf(*t));
    out.probs = detector_probs(m, tape, out.leaves, u_std);
    return out;
}

// ---------------------------------------------------------------------------
// Plain forward (inference path)

enum class ForwardPath { Convolution, Recurrence };

namespace detail {

inline void layer_norm_cols(ad::RowMat& z, const ad::Tensor& gain, const ad::Tensor& bias,
                            double eps) {
    const int h = static_cast<int>(z.rows());
    for (int j = 0; j < z.cols(); ++j) {
        double mu = z.col(j).mean();
        double var = (z.col(j).array() - mu).square().sum() / h;
        double inv = 1.0 / std::sqrt(var + eps);
        for (int i = 0; i < h; ++i) z(i, j) = gain.v[i] * ((z(i, j) - mu) * inv) + bias.v[i];
    }
}

}  // namespace detail

// Deterministic given (model, frame); channels may evaluate in parallel but
// the channel rows are written to disjoint storage, so the result is
// independent of the thread count.
inline std::vector<double> forward(const DetectorModel& m, const RangeAzimuthFrame& frame,
                                   ForwardPath path = ForwardPath::Convolution) {
    check_frame(m, frame);
    const auto& cfg = m.cfg;
    std::vector<double> u_std = standardize_frame(frame);
    if (cfg.num_blocks == 0) {
        std::vector<double> probs(u_std.size());
        for (size_t i = 0; i < probs.size(); ++i)
            probs[i] = 1.0 / (1.0 + std::exp(-u_std[i]));
        return probs;
    }

    ad::RowMat x = ad::RowMat::Zero(cfg.H, cfg.L);
    bool broadcast_input = true;
    for (int b = 0; b < cfg.num_blocks; ++b) {
        const DetectorBlock& blk = m.blocks[b];
        ad::RowMat y(cfg.H, cfg.L);
        ad::RowMat x_prev = x;
        parallel_for(cfg.H, [&](long h) {
            ContinuousSSM cs;
            cs.A = m.A;
            cs.B = m.B;
            cs.C = ad::CVecMap(blk.C.v.data() + static_cast<size_t>(h) * cfg.N, cfg.N);
            cs.D = blk.D.v[h];
            DiscreteSSM d = discretize_bilinear(cs, std::exp(blk.log_dt.v[h]));
            std::vector<double> u_h(cfg.L);
            if (broadcast_input)
                u_h = u_std;
            else
                for (int j = 0; j < cfg.L; ++j) u_h[j] = x_prev(h, j);
            std::vector<double> y_h = path == ForwardPath::Convolution
                                          ? conv_forward(krylov_kernel(d, cfg.L), u_h, d.D)
                                          : ssm_recurrent_forward(d, u_h);
            for (int j = 0; j < cfg.L; ++j) y(h, j) = y_h[j];
        });
        ad::RowMat z = ad::CMatMap(blk.mix_w.v.data(), cfg.H, cfg.H) * y;
        for (int i = 0; i < cfg.H; ++i) z.row(i).array() += blk.mix_b.v[i];
        detail::layer_norm_cols(z, blk.ln_gain, blk.ln_bias, 1e-5);
        for (int i = 0; i < z.rows(); ++i)
            for (int j = 0; j < z.cols(); ++j)
                z(i, j) = z(i, j) * ad::Tape::normal_cdf(z(i, j));
        x = std::move(z);
        broadcast_input = false;
    }

    std::vector<double> probs(static_cast<size_t>(cfg.L));
    for (int j = 0; j < cfg.L; ++j) {
        double mval = x.col(j).mean();
        double s = mval + u_std[j];
        probs[j] = s >= 0.0 ? 1.0 / (1.0 + std::exp(-s)) : std::exp(s) / (1.0 + std::exp(s));
        if (!std::isfinite(probs[j])) throw NumericError("forward: non-finite probability");
    }
    return probs;
}

// ---------------------------------------------------------------------------
// Binarization

// probs are in flatten order (range fastest); the mask is reshaped R x A.
inline DetectionMask predict_mask(const std::vector<double>& probs, double tau, int rows,
                                  int cols) {
    require(tau > 0.0 && tau < 1.0, "predict_mask: tau must be inside (0,1)");
    require(static_cast<int>(probs.size()) == rows * cols, "predict_mask: size mismatch");
    DetectionMask mask = DetectionMask::zeros(rows, cols);
    for (int c = 0; c < cols; ++c)
        for (int r = 0; r < rows; ++r)
            mask.at(r, c) = probs[static_cast<size_t>(c) * rows + r] >= tau ? 1 : 0;
    return mask;
}

}  // namespace raddet

#endif  // RADDET_MODEL_HPP
