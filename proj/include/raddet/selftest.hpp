// Invariant suites for every module, runnable from the CLI. Each check is a
// compact, fast version of the corresponding property test; the command exits
// nonzero if any check fails.

#ifndef RADDET_SELFTEST_HPP
#define RADDET_SELFTEST_HPP

#include <Eigen/Eigenvalues>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include "raddet/autodiff.hpp"
#include "raddet/cfar.hpp"
#include "raddet/datagen.hpp"
#include "raddet/eval.hpp"
#include "raddet/model.hpp"
#include "raddet/serialize.hpp"
#include "raddet/ssm.hpp"
#include "raddet/train.hpp"

namespace raddet::selftest {

inline void expect(bool cond, const std::string& msg) {
    if (!cond) throw std::runtime_error(msg);
}

namespace detail {

inline RangeAzimuthFrame random_frame(int rows, int cols, uint64_t seed, int targets = 2) {
    SceneConfig cfg;
    cfg.rows = rows;
    cfg.cols = cols;
    cfg.targets_min = targets;
    cfg.targets_max = targets;
    cfg.margin_range = std::min(4, rows / 4);
    cfg.margin_az = std::min(4, cols / 4);
    cfg.seed = seed;
    return gen_sample(cfg, 0).frame;
}

inline DiscreteSSM random_stable_dssm(int n, uint64_t seed) {
    std::mt19937_64 rng = rng_for(seed, 17);
    std::normal_distribution<double> norm(0.0, 1.0);
    Eigen::MatrixXd r(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) r(i, j) = norm(rng);
    double rho = std::abs(Eigen::EigenSolver<Eigen::MatrixXd>(r).eigenvalues().cwiseAbs().maxCoeff());
    DiscreteSSM d;
    d.A_bar = r * (0.95 / std::max(rho, 1e-9));
    d.B_bar = Eigen::VectorXd(n);
    d.C = Eigen::VectorXd(n);
    for (int i = 0; i < n; ++i) {
        d.B_bar(i) = norm(rng);
        d.C(i) = norm(rng);
    }
    d.D = norm(rng);
    d.dt = 1.0;
    return d;
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0.0;
    for (size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

inline Dataset tiny_dataset(int count, uint64_t seed) {
    SceneConfig cfg;
    cfg.rows = 16;
    cfg.cols = 8;
    cfg.margin_range = 4;
    cfg.margin_az = 3;
    cfg.seed = seed;
    Dataset ds;
    ds.scene = cfg;
    for (int i = 0; i < count; ++i) {
        ds.samples.push_back(gen_sample(cfg, static_cast<uint64_t>(i)));
        ds.split.push_back(i < (3 * count) / 4 ? kTrain : kVal);
    }
    return ds;
}

inline DetectorConfig tiny_model_cfg() {
    DetectorConfig cfg;
    cfg.L = 16 * 8;
    cfg.N = 4;
    cfg.H = 2;
    cfg.num_blocks = 2;
    cfg.dt_min = 1.0;
    cfg.dt_max = 16.0;
    cfg.seed = 11;
    return cfg;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// cfar invariants

inline void check_cfar_scale_invariance() {
    RangeAzimuthFrame f = detail::random_frame(24, 16, 101);
    for (CfarVariant v : {CfarVariant::ca(), CfarVariant::os(), CfarVariant::go(),
                          CfarVariant::so()}) {
        CfarConfig cfg{v, CfarWindow::defaults_2d(), 2.0};
        DetectionMask base = cfar_detect_2d(f, cfg).mask;
        // power-of-two factors keep the float scaling exact, so the masks
        // must match bit for bit
        for (double scale : {0.125, 8.0, 4096.0}) {
            RangeAzimuthFrame g = f;
            for (float& x : g.values) x = static_cast<float>(x * scale);
            expect(cfar_detect_2d(g, cfg).mask.cells == base.cells,
                   "cfar mask changed under input scaling, variant " + v.name());
        }
    }
}

inline void check_cfar_threshold_monotone() {
    RangeAzimuthFrame f = detail::random_frame(24, 16, 103);
    CfarConfig lo{CfarVariant::ca(), CfarWindow::defaults_2d(), 1.0};
    DetectionMask prev = cfar_detect_2d(f, lo).mask;
    for (double t : {2.0, 4.0, 8.0}) {
        CfarConfig cfg{CfarVariant::ca(), CfarWindow::defaults_2d(), t};
        DetectionMask cur = cfar_detect_2d(f, cfg).mask;
        for (size_t i = 0; i < cur.cells.size(); ++i)
            expect(!(cur.cells[i] && !prev.cells[i]), "raising T added a detection");
        prev = cur;
    }
}

inline void check_cfar_os_vs_ca() {
    std::mt19937_64 rng = rng_for(7, 3);
    std::exponential_distribution<double> exp1(1.0);
    for (int rep = 0; rep < 200; ++rep) {
        std::vector<double> lead(8), lag(8);
        for (auto& x : lead) x = exp1(rng);
        for (auto& x : lag) x = exp1(rng);
        double f_os = select_statistic(lead, lag, CfarVariant::os(16));
        double f_ca = select_statistic(lead, lag, CfarVariant::ca());
        expect(f_os >= f_ca - 1e-12, "OS(n_train) statistic fell below CA");
    }
}

inline void check_cfar_1d_matches_degenerate_2d() {
    RangeAzimuthFrame f = detail::random_frame(48, 6, 105);
    CfarWindow w1{4, 2, -1, -1};
    CfarWindow w2{4, 2, 0, 0};  // one-row window
    for (CfarVariant v : {CfarVariant::ca(), CfarVariant::os(), CfarVariant::go(),
                          CfarVariant::so()}) {
        CfarOutput out2 = cfar_detect_2d(f, {v, w2, 3.0});
        for (int c = 0; c < f.cols; ++c) {
            std::vector<double> row(f.rows);
            for (int r = 0; r < f.rows; ++r) row[r] = f.at(r, c);
            CfarOutput out1 = cfar_detect_1d(row, {v, w1, 3.0});
            for (int r = 0; r < f.rows; ++r) {
                double a = out1.scores[r];
                double b = out2.scores[static_cast<size_t>(r) * f.cols + c];
                expect(a == b || std::abs(a - b) < 1e-9, "1D/2D degenerate mismatch");
                expect(out1.mask.at(0, r) == out2.mask.at(r, c), "1D/2D degenerate mask mismatch");
            }
        }
    }
}

inline void check_cfar_ca_calibration() {
    const int n_train = 16;
    const double target = 1e-2;
    double t = threshold_factor(CfarVariant::ca(), n_train, target);
    std::mt19937_64 rng = rng_for(42, 5);
    std::exponential_distribution<double> exp1(1.0);
    const long cells = 1'000'000;
    CfarWindow w{8, 2, -1, -1};
    std::vector<double> u(cells + 2 * (w.train + w.guard));
    for (auto& x : u) x = exp1(rng);
    CfarOutput out = cfar_detect_1d(u, {CfarVariant::ca(), w, t});
    long fa = 0, valid = 0;
    for (int i = out.valid.c_lo; i <= out.valid.c_hi; ++i) {
        ++valid;
        fa += out.mask.cells[i];
    }
    double pfa = static_cast<double>(fa) / static_cast<double>(valid);
    expect(valid >= 1'000'000, "calibration harness too small");
    expect(std::abs(pfa - target) / target <= 0.2, "CA empirical Pfa off by more than 20%");
}

// ---------------------------------------------------------------------------
// ssm invariants

inline void check_ssm_equivalence() {
    for (uint64_t seed = 0; seed < 20; ++seed) {
        std::mt19937_64 rng = rng_for(seed, 23);
        std::uniform_int_distribution<int> nd(1, 12), ld(1, 256);
        std::normal_distribution<double> norm(0.0, 1.0);
        DiscreteSSM d = detail::random_stable_dssm(nd(rng), seed);
        int L = ld(rng);
        std::vector<double> u(L);
        for (auto& x : u) x = norm(rng);
        auto y1 = ssm_recurrent_forward(d, u);
        auto y2 = conv_forward(krylov_kernel(d, L), u, d.D);
        expect(detail::max_abs_diff(y1, y2) < 1e-8, "recurrence vs convolution mismatch");
    }
}

inline void check_ssm_order_of_accuracy() {
    ContinuousSSM cs;
    cs.A = Eigen::MatrixXd::Constant(1, 1, -1.0);
    cs.B = Eigen::VectorXd::Constant(1, 1.0);
    cs.C = Eigen::VectorXd::Constant(1, 1.0);
    cs.D = 0.0;
    auto sim_err = [&](double dt) {
        int steps = static_cast<int>(std::lround(1.0 / dt));
        DiscreteSSM d = discretize_bilinear(cs, dt);
        std::vector<double> u(steps, 1.0);
        auto y = ssm_recurrent_forward(d, u);
        return std::abs(y.back() - (1.0 - std::exp(-1.0)));
    };
    double ratio = sim_err(0.02) / sim_err(0.01);
    expect(ratio > 3.0 && ratio < 5.0, "bilinear error ratio outside [3,5]: " + std::to_string(ratio));
}

inline void check_ssm_picard_limit() {
    ContinuousSSM cs;
    cs.A = Eigen::MatrixXd::Constant(1, 1, -1.0);
    cs.B = Eigen::VectorXd::Constant(1, 1.0);
    cs.C = Eigen::VectorXd::Constant(1, 1.0);
    cs.D = 0.0;
    const double dt = 0.01;
    std::vector<double> u(100, 1.0);
    Eigen::MatrixXd picard = picard_solve(cs, u, dt, 60);
    DiscreteSSM d = discretize_bilinear(cs, dt);
    Eigen::MatrixXd states;
    ssm_recurrent_forward(d, u, &states);
    double gap = (picard - states).cwiseAbs().maxCoeff();
    expect(gap < 1e-6, "picard iterates did not reach the recurrence trajectory");
}

inline void check_ssm_bilinear_stability() {
    for (uint64_t seed = 0; seed < 20; ++seed) {
        std::mt19937_64 rng = rng_for(seed, 29);
        std::normal_distribution<double> norm(0.0, 1.0);
        int n = 4;
        Eigen::MatrixXd m(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) m(i, j) = norm(rng);
        // shift to make it Hurwitz
        double shift = std::abs(Eigen::EigenSolver<Eigen::MatrixXd>(m).eigenvalues().real().maxCoeff());
        ContinuousSSM cs;
        cs.A = m - (shift + 0.5) * Eigen::MatrixXd::Identity(n, n);
        cs.B = Eigen::VectorXd::Ones(n);
        cs.C = Eigen::VectorXd::Ones(n);
        DiscreteSSM d = discretize_bilinear(cs, 0.3);
        double rho =
            Eigen::EigenSolver<Eigen::MatrixXd>(d.A_bar).eigenvalues().cwiseAbs().maxCoeff();
        expect(rho < 1.0, "bilinear map lost stability for a Hurwitz A");
    }
}

inline void check_ssm_linearity() {
    DiscreteSSM d = detail::random_stable_dssm(6, 31);
    std::mt19937_64 rng = rng_for(31, 37);
    std::normal_distribution<double> norm(0.0, 1.0);
    int L = 64;
    std::vector<double> u1(L), u2(L), mix(L);
    for (int i = 0; i < L; ++i) {
        u1[i] = norm(rng);
        u2[i] = norm(rng);
        mix[i] = 2.0 * u1[i] - 3.0 * u2[i];
    }
    auto y1 = ssm_recurrent_forward(d, u1);
    auto y2 = ssm_recurrent_forward(d, u2);
    auto ym = ssm_recurrent_forward(d, mix);
    double err = 0.0;
    for (int i = 0; i < L; ++i) err = std::max(err, std::abs(ym[i] - (2.0 * y1[i] - 3.0 * y2[i])));
    expect(err < 1e-10, "SSM layer is not linear");
}

// ---------------------------------------------------------------------------
// autodiff invariants

inline void check_autodiff_ops_fd() {
    using namespace ad;
    std::mt19937_64 rng = rng_for(5, 41);
    std::normal_distribution<double> norm(0.0, 1.0);
    auto rand_tensor = [&](std::vector<int> shape) {
        Tensor t = Tensor::zeros(std::move(shape), true);
        for (auto& x : t.v) x = norm(rng);
        return t;
    };
    {
        Tensor a = rand_tensor({3, 4}), b = rand_tensor({4, 2});
        auto report = gradcheck(
            [](Tape& t, const std::vector<Var>& p) {
                Var y = t.matmul(p[0], p[1]);
                Var s = t.sigmoid(y);
                Var ones = t.constant({3, 2}, std::vector<double>(6, 1.0));
                return t.bce_loss(s, ones, 1.0);
            },
            {{"a", &a}, {"b", &b}}, 1e-4);
        expect(report.pass, "matmul+sigmoid+bce gradcheck failed");
    }
    {
        Tensor x = rand_tensor({3, 5}), g = rand_tensor({3}), b = rand_tensor({3});
        auto report = gradcheck(
            [](Tape& t, const std::vector<Var>& p) {
                Var y = t.gelu(t.layer_norm(p[0], p[1], p[2], 1e-5));
                Var m = t.mean_axis(y, 0);
                Var s = t.sigmoid(m);
                Var ones = t.constant({5}, std::vector<double>(5, 1.0));
                return t.bce_loss(s, ones, 2.0);
            },
            {{"x", &x}, {"g", &g}, {"b", &b}}, 1e-4);
        expect(report.pass, "layer_norm+gelu gradcheck failed");
    }
}

inline void check_autodiff_detector_gradcheck() {
    DetectorConfig cfg = detail::tiny_model_cfg();
    cfg.L = 32;
    DetectorModel model = init_model(cfg);
    std::mt19937_64 rng = rng_for(3, 43);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<double> u(cfg.L), labels(cfg.L);
    for (int i = 0; i < cfg.L; ++i) {
        u[i] = unit(rng) * 2.0 - 1.0;
        labels[i] = unit(rng) < 0.2 ? 1.0 : 0.0;
    }
    auto report = ad::gradcheck(
        [&](ad::Tape& t, const std::vector<ad::Var>& p) {
            ad::Var probs = detector_probs(model, t, p, u);
            ad::Var y = t.constant({cfg.L}, labels);
            return t.bce_loss(probs, y, 3.0);
        },
        model.params(), 1e-4);
    expect(report.pass, "full detector gradcheck failed");
}

inline void check_autodiff_backward_deterministic() {
    DetectorConfig cfg = detail::tiny_model_cfg();
    cfg.L = 32;
    DetectorModel model = init_model(cfg);
    std::vector<double> u(cfg.L, 0.1), labels(cfg.L, 0.0);
    labels[5] = 1.0;
    ad::Tape tape;
    TapeForward fwd = forward_on_tape(model, tape, u);
    ad::Var loss = tape.bce_loss(fwd.probs, tape.constant({cfg.L}, labels), 2.0);
    tape.backward(loss);
    std::vector<std::vector<double>> first;
    for (ad::Var v : fwd.leaves) first.push_back(tape.grad(v));
    tape.backward(loss);
    for (size_t i = 0; i < fwd.leaves.size(); ++i)
        expect(first[i] == tape.grad(fwd.leaves[i]), "backward re-run is not bitwise identical");
}

// ---------------------------------------------------------------------------
// model invariants

inline void check_model_init_deterministic() {
    DetectorConfig cfg = detail::tiny_model_cfg();
    DetectorModel a = init_model(cfg), b = init_model(cfg);
    auto pa = a.params(), pb = b.params();
    for (size_t i = 0; i < pa.size(); ++i)
        expect(pa[i].second->v == pb[i].second->v, "init_model is not deterministic");
}

inline void check_model_param_count() {
    DetectorConfig cfg;
    cfg.L = 4;
    cfg.N = 256;
    cfg.H = 256;
    cfg.num_blocks = 2;
    expect(count_params(init_model(cfg)) == 264704, "parameter count at N=H=256 is not 264704");
    cfg.num_blocks = 0;
    expect(count_params(init_model(cfg)) == 0, "0-block model should have 0 parameters");
}

inline void check_model_residual_collapse() {
    DetectorConfig cfg = detail::tiny_model_cfg();
    DetectorModel model = init_model(cfg);
    for (auto& [name, p] : model.params()) std::fill(p->v.begin(), p->v.end(), 0.0);
    RangeAzimuthFrame f = detail::random_frame(16, 8, 107);
    std::vector<double> probs = forward(model, f);
    std::vector<double> u = standardize_frame(f);
    for (size_t i = 0; i < u.size(); ++i) {
        double x = u[i];
        double expected = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
        expect(probs[i] == expected, "zeroed model did not collapse to sigmoid(u_std)");
    }
}

inline void check_model_channel_permutation() {
    DetectorConfig cfg = detail::tiny_model_cfg();
    cfg.H = 4;
    DetectorModel a = init_model(cfg);
    DetectorModel b = init_model(cfg);
    std::vector<int> perm{2, 0, 3, 1};
    for (int blk = 0; blk < cfg.num_blocks; ++blk) {
        DetectorBlock& src = a.blocks[blk];
        DetectorBlock& dst = b.blocks[blk];
        for (int h = 0; h < cfg.H; ++h) {
            for (int n = 0; n < cfg.N; ++n) dst.C.v[h * cfg.N + n] = src.C.v[perm[h] * cfg.N + n];
            dst.D.v[h] = src.D.v[perm[h]];
            dst.log_dt.v[h] = src.log_dt.v[perm[h]];
            dst.mix_b.v[h] = src.mix_b.v[perm[h]];
            dst.ln_gain.v[h] = src.ln_gain.v[perm[h]];
            dst.ln_bias.v[h] = src.ln_bias.v[perm[h]];
            for (int k = 0; k < cfg.H; ++k)
                dst.mix_w.v[h * cfg.H + k] = src.mix_w.v[perm[h] * cfg.H + perm[k]];
        }
    }
    RangeAzimuthFrame f = detail::random_frame(16, 8, 109);
    double err = detail::max_abs_diff(forward(a, f), forward(b, f));
    expect(err < 1e-10, "channel permutation changed the output");
}

inline void check_model_gradients_nonzero() {
    DetectorConfig cfg = detail::tiny_model_cfg();
    DetectorModel model = init_model(cfg);
    SceneConfig scfg;
    scfg.rows = 16;
    scfg.cols = 8;
    scfg.margin_range = 4;
    scfg.margin_az = 3;
    scfg.seed = 113;
    LabeledSample s = gen_sample(scfg, 0);
    SampleGrad sg = sample_gradient(model, s, 5.0);
    auto registry = model.params();
    for (size_t i = 0; i < registry.size(); ++i) {
        double norm = 0.0;
        for (double g : sg.grads[i]) norm += g * g;
        expect(norm > 0.0, "zero gradient for " + registry[i].first);
    }
}

inline void check_model_checkpoint_roundtrip() {
    namespace fs = std::filesystem;
    DetectorConfig cfg = detail::tiny_model_cfg();
    DetectorModel model = init_model(cfg);
    fs::path path = fs::temp_directory_path() / "raddet_selftest_ckpt.bin";
    save_checkpoint(model, path.string());
    Checkpoint back = load_checkpoint(path.string());
    auto pa = model.params(), pb = back.model.params();
    for (size_t i = 0; i < pa.size(); ++i)
        expect(pa[i].second->v == pb[i].second->v, "checkpoint round trip not bitwise exact");
    std::string bytes1 = read_file_bytes(path.string());
    save_checkpoint(back.model, path.string());
    expect(read_file_bytes(path.string()) == bytes1, "checkpoint re-save not byte identical");
    fs::remove(path);
}

// ---------------------------------------------------------------------------
// train invariants

inline void check_train_adam() {
    // zero gradients leave parameters unchanged
    DetectorConfig cfg = detail::tiny_model_cfg();
    DetectorModel model = init_model(cfg);
    AdamState st = AdamState::for_model(model);
    auto registry = model.params();
    std::vector<std::vector<double>> zero;
    std::vector<std::vector<double>> before;
    for (auto& [name, p] : registry) {
        zero.emplace_back(p->size(), 0.0);
        before.push_back(p->v);
    }
    TrainConfig tc;
    adam_step(registry, zero, st, tc);
    for (size_t i = 0; i < registry.size(); ++i)
        expect(registry[i].second->v == before[i], "adam moved parameters under zero gradient");

    // scalar quadratic: |x| decreases monotonically
    ad::Tensor x = ad::Tensor::zeros({1}, true);
    x.v[0] = 1.0;
    AdamState qs;
    qs.m.emplace_back(1, 0.0);
    qs.v.emplace_back(1, 0.0);
    std::vector<std::pair<std::string, ad::Tensor*>> params{{"x", &x}};
    double prev = std::abs(x.v[0]);
    for (int i = 0; i < 100; ++i) {
        std::vector<std::vector<double>> g{{2.0 * x.v[0]}};
        adam_step(params, g, qs, tc);
        expect(std::abs(x.v[0]) <= prev + 1e-12, "adam |x| increased on quadratic");
        prev = std::abs(x.v[0]);
    }
}

inline void check_train_determinism() {
    Dataset ds = detail::tiny_dataset(8, 971);
    DetectorConfig mc = detail::tiny_model_cfg();
    TrainConfig tc;
    tc.epochs = 2;
    tc.batch_size = 4;
    tc.seed = 5;
    auto [m1, r1] = train(init_model(mc), ds, tc);
    auto [m2, r2] = train(init_model(mc), ds, tc);
    expect(r1.records.size() == r2.records.size(), "train reports differ in length");
    for (size_t i = 0; i < r1.records.size(); ++i) {
        expect(r1.records[i].train_loss == r2.records[i].train_loss &&
                   r1.records[i].val_loss == r2.records[i].val_loss,
               "train losses are not bitwise reproducible");
    }
    auto p1 = m1.params(), p2 = m2.params();
    for (size_t i = 0; i < p1.size(); ++i)
        expect(p1[i].second->v == p2[i].second->v, "trained parameters differ between runs");
}

// ---------------------------------------------------------------------------
// datagen invariants

inline void check_datagen_frames() {
    SceneConfig cfg;
    cfg.seed = 31;
    for (uint64_t i = 0; i < 4; ++i) {
        LabeledSample s = gen_sample(cfg, i);
        for (float v : s.frame.values)
            expect(v > 0.0f && std::isfinite(v), "frame cell not strictly positive and finite");
        expect(s.mask.count() > 0, "targets requested but mask empty");
    }
    LabeledSample a = gen_sample(cfg, 2), b = gen_sample(cfg, 2);
    expect(a.frame.values == b.frame.values && a.mask.cells == b.mask.cells,
           "gen_sample not deterministic");
}

inline void check_datagen_het_step() {
    SceneConfig cfg;
    cfg.rows = 128;
    cfg.cols = 96;
    cfg.clutter = ClutterKind::Heterogeneous;
    cfg.het_ratio = 4.0;
    cfg.targets_min = cfg.targets_max = 0;
    cfg.seed = 33;
    LabeledSample s = gen_sample(cfg, 0);
    int edge = s.meta.het_edge_row;
    double sum_a = 0.0, sum_b = 0.0;
    long n_a = 0, n_b = 0;
    for (int r = 0; r < cfg.rows; ++r)
        for (int c = 0; c < cfg.cols; ++c) {
            if (r < edge) {
                sum_a += s.frame.at(r, c);
                ++n_a;
            } else {
                sum_b += s.frame.at(r, c);
                ++n_b;
            }
        }
    expect(n_a + n_b >= 10'000, "het step harness too small");
    double ratio = (sum_a / n_a) / (sum_b / n_b);
    if (ratio < 1.0) ratio = 1.0 / ratio;
    expect(std::abs(ratio - cfg.het_ratio) / cfg.het_ratio < 0.1,
           "heterogeneous clutter step off by more than 10%");
}

// ---------------------------------------------------------------------------
// eval invariants

inline void check_eval_auc_anchors() {
    std::vector<double> scores;
    std::vector<uint8_t> labels;
    std::mt19937_64 rng = rng_for(9, 47);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int i = 0; i < 5000; ++i) {
        bool t = unit(rng) < 0.1;
        labels.push_back(t ? 1 : 0);
        scores.push_back(t ? 1.0 : 0.0);
    }
    RocCurve perfect = raddet::detail::roc_from_scores({scores, labels}, 512, false);
    expect(std::abs(perfect.auc - 1.0) < 1e-12, "perfect scorer auc != 1");

    std::vector<double> const_scores(labels.size(), 0.5);
    RocCurve constant = raddet::detail::roc_from_scores({const_scores, labels}, 512, false);
    expect(std::abs(constant.auc - 0.5) < 1e-12, "constant scorer auc != 0.5");

    std::vector<double> uni(labels.size());
    for (auto& x : uni) x = unit(rng);
    RocCurve random_curve = raddet::detail::roc_from_scores({uni, labels}, 512, false);
    expect(random_curve.auc > 0.4 && random_curve.auc < 0.6, "random scorer auc far from 0.5");
    for (size_t i = 1; i < random_curve.points.size(); ++i) {
        expect(random_curve.points[i].pf >= random_curve.points[i - 1].pf &&
                   random_curve.points[i].pd >= random_curve.points[i - 1].pd - 1e-15,
               "roc curve not monotone");
    }
}

inline void check_eval_pooling() {
    SceneConfig cfg;
    cfg.rows = 24;
    cfg.cols = 16;
    cfg.seed = 51;
    LabeledSample s1 = gen_sample(cfg, 0), s2 = gen_sample(cfg, 1);
    CfarConfig cc{CfarVariant::ca(), CfarWindow::defaults_2d(), 3.0};
    CfarOutput o1 = cfar_detect_2d(s1.frame, cc), o2 = cfar_detect_2d(s2.frame, cc);
    MetricCounts pooled;
    pooled.add(o1.mask, s1.mask, o1.valid);
    pooled.add(o2.mask, s2.mask, o2.valid);
    MetricResult a = pd_pf(o1.mask, s1.mask, o1.valid);
    MetricResult b = pd_pf(o2.mask, s2.mask, o2.valid);
    MetricResult p = pooled.finalize();
    expect(p.n_hits == a.n_hits + b.n_hits && p.n_false_alarms == a.n_false_alarms + b.n_false_alarms,
           "pooled counts differ from per-frame counts");
}

// ---------------------------------------------------------------------------

struct NamedCheck {
    const char* name;
    std::function<void()> fn;
};

inline int run_all(std::ostream& out) {
    std::vector<NamedCheck> checks = {
        {"cfar.scale_invariance", check_cfar_scale_invariance},
        {"cfar.threshold_monotone", check_cfar_threshold_monotone},
        {"cfar.os_vs_ca", check_cfar_os_vs_ca},
        {"cfar.1d_matches_degenerate_2d", check_cfar_1d_matches_degenerate_2d},
        {"cfar.ca_calibration", check_cfar_ca_calibration},
        {"ssm.equivalence", check_ssm_equivalence},
        {"ssm.order_of_accuracy", check_ssm_order_of_accuracy},
        {"ssm.picard_limit", check_ssm_picard_limit},
        {"ssm.bilinear_stability", check_ssm_bilinear_stability},
        {"ssm.linearity", check_ssm_linearity},
        {"autodiff.op_gradchecks", check_autodiff_ops_fd},
        {"autodiff.detector_gradcheck", check_autodiff_detector_gradcheck},
        {"autodiff.backward_deterministic", check_autodiff_backward_deterministic},
        {"model.init_deterministic", check_model_init_deterministic},
        {"model.param_count", check_model_param_count},
        {"model.residual_collapse", check_model_residual_collapse},
        {"model.channel_permutation", check_model_channel_permutation},
        {"model.gradients_nonzero", check_model_gradients_nonzero},
        {"model.checkpoint_roundtrip", check_model_checkpoint_roundtrip},
        {"train.adam", check_train_adam},
        {"train.determinism", check_train_determinism},
        {"datagen.frames", check_datagen_frames},
        {"datagen.het_step", check_datagen_het_step},
        {"eval.auc_anchors", check_eval_auc_anchors},
        {"eval.pooling", check_eval_pooling},
    };
    int failures = 0;
    for (const NamedCheck& c : checks) {
        try {
            c.fn();
            out << "[PASS] " << c.name << "\n";
        } catch (const std::exception& e) {
            ++failures;
            out << "[FAIL] " << c.name << ": " << e.what() << "\n";
        }
    }
    if (failures)
        out << failures << " of " << checks.size() << " checks failed\n";
    else
        out << "all " << checks.size() << " checks passed\n";
    return failures;
}

}  // namespace raddet::selftest

#endif  // RADDET_SELFTEST_HPP
