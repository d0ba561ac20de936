#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "raddet/model.hpp"
#include "raddet/selftest.hpp"
#include "raddet/serialize.hpp"

using namespace raddet;

namespace {

DetectorConfig tiny_cfg() { return selftest::detail::tiny_model_cfg(); }

}  // namespace

TEST(InitModel, DeterministicUnderSeed) {
    EXPECT_NO_THROW(selftest::check_model_init_deterministic());
    DetectorConfig a = tiny_cfg(), b = tiny_cfg();
    b.seed = a.seed + 1;
    DetectorModel ma = init_model(a), mb = init_model(b);
    EXPECT_NE(ma.blocks[0].C.v, mb.blocks[0].C.v);
}

TEST(InitModel, StepSizesInsideConfiguredRange) {
    DetectorConfig cfg = tiny_cfg();
    cfg.dt_min = 1e-3;
    cfg.dt_max = 1e-1;
    DetectorModel m = init_model(cfg);
    for (const DetectorBlock& blk : m.blocks) {
        for (double rho : blk.log_dt.v) {
            double dt = std::exp(rho);
            EXPECT_GE(dt, cfg.dt_min * (1.0 - 1e-12));
            EXPECT_LE(dt, cfg.dt_max * (1.0 + 1e-12));
        }
    }
}

TEST(InitModel, InvalidConfigThrows) {
    DetectorConfig cfg = tiny_cfg();
    cfg.dt_min = 0.0;
    EXPECT_THROW(init_model(cfg), InvalidInput);
    cfg = tiny_cfg();
    cfg.H = 0;
    EXPECT_THROW(init_model(cfg), InvalidInput);
}

TEST(CountParams, PaperScaleBudget) {
    // per block: H*N + H*H + 5H; two blocks at N=H=256 give 264,704,
    // within 2% of the reported ~260K budget
    DetectorConfig cfg;
    cfg.L = 4;
    cfg.N = 256;
    cfg.H = 256;
    cfg.num_blocks = 2;
    size_t n = count_params(init_model(cfg));
    EXPECT_EQ(n, 264704u);
    EXPECT_LT(std::abs(static_cast<double>(n) - 260000.0) / 260000.0, 0.02);
}

TEST(CountParams, TinyLayoutArithmetic) {
    DetectorConfig cfg;
    cfg.L = 8;
    cfg.N = 4;
    cfg.H = 2;
    cfg.num_blocks = 2;
    // 2 * (H*N + H*H + 5H) = 2 * (8 + 4 + 10)
    EXPECT_EQ(count_params(init_model(cfg)), 44u);
}

TEST(CountParams, ZeroBlocks) {
    DetectorConfig cfg;
    cfg.L = 8;
    cfg.N = 4;
    cfg.H = 2;
    cfg.num_blocks = 0;
    EXPECT_EQ(count_params(init_model(cfg)), 0u);
}

TEST(Forward, OutputsAreStrictProbabilities) {
    DetectorConfig cfg = tiny_cfg();
    DetectorModel m = init_model(cfg);
    RangeAzimuthFrame f = selftest::detail::random_frame(16, 8, 301);
    for (ForwardPath path : {ForwardPath::Convolution, ForwardPath::Recurrence}) {
        std::vector<double> probs = forward(m, f, path);
        ASSERT_EQ(probs.size(), static_cast<size_t>(cfg.L));
        for (double p : probs) {
            EXPECT_GT(p, 0.0);
            EXPECT_LT(p, 1.0);
        }
    }
}

TEST(Forward, ZeroVarianceFrameStaysFinite) {
    DetectorConfig cfg = tiny_cfg();
    DetectorModel m = init_model(cfg);
    RangeAzimuthFrame f;
    f.rows = 16;
    f.cols = 8;
    f.values.assign(128, 4.2f);
    std::vector<double> probs = forward(m, f);
    for (double p : probs) EXPECT_TRUE(std::isfinite(p));
}

TEST(Forward, ResidualCollapseIsExact) {
    EXPECT_NO_THROW(selftest::check_model_residual_collapse());
}

TEST(Forward, WrongFrameSizeThrows) {
    DetectorModel m = init_model(tiny_cfg());
    RangeAzimuthFrame f;
    f.rows = 4;
    f.cols = 4;
    f.values.assign(16, 1.0f);
    EXPECT_THROW(forward(m, f), InvalidInput);
}

TEST(Forward, ChannelPermutationInvariance) {
    EXPECT_NO_THROW(selftest::check_model_channel_permutation());
}

TEST(Forward, TrainingPathMatchesInferencePath) {
    DetectorConfig cfg = tiny_cfg();
    DetectorModel m = init_model(cfg);
    RangeAzimuthFrame f = selftest::detail::random_frame(16, 8, 303);
    std::vector<double> u = standardize_frame(f);
    ad::Tape tape;
    TapeForward fwd = forward_on_tape(m, tape, u);
    std::vector<double> conv_probs = forward(m, f, ForwardPath::Convolution);
    std::vector<double> rec_probs = forward(m, f, ForwardPath::Recurrence);
    const auto& tape_probs = tape.val(fwd.probs);
    for (size_t i = 0; i < conv_probs.size(); ++i) {
        EXPECT_NEAR(tape_probs[i], conv_probs[i], 1e-8);
        EXPECT_NEAR(tape_probs[i], rec_probs[i], 1e-10);
    }
}

TEST(Forward, GradientsReachEveryTrainableTensor) {
    EXPECT_NO_THROW(selftest::check_model_gradients_nonzero());
}

TEST(PredictMask, ThresholdExamples) {
    std::vector<double> probs{0.2, 0.7};
    DetectionMask m = predict_mask(probs, 0.5, 2, 1);
    EXPECT_EQ(m.at(0, 0), 0);
    EXPECT_EQ(m.at(1, 0), 1);

    DetectionMask hi = predict_mask(probs, 1.0 - 1e-9, 2, 1);
    EXPECT_EQ(hi.count(), 0);
}

TEST(PredictMask, NestedUnderIncreasingTau) {
    RangeAzimuthFrame f = selftest::detail::random_frame(16, 8, 307);
    DetectorModel m = init_model(tiny_cfg());
    std::vector<double> probs = forward(m, f);
    DetectionMask prev = predict_mask(probs, 0.1, 16, 8);
    for (double tau : {0.3, 0.5, 0.7, 0.9}) {
        DetectionMask cur = predict_mask(probs, tau, 16, 8);
        for (size_t i = 0; i < cur.cells.size(); ++i)
            EXPECT_FALSE(cur.cells[i] && !prev.cells[i]);
        prev = cur;
    }
}

TEST(PredictMask, TauOutsideUnitIntervalThrows) {
    std::vector<double> probs{0.5};
    EXPECT_THROW(predict_mask(probs, 0.0, 1, 1), InvalidInput);
    EXPECT_THROW(predict_mask(probs, 1.0, 1, 1), InvalidInput);
}

TEST(PredictMask, FlattenOrderIsRangeFastest) {
    // probs index c*rows + r must land at mask (r, c)
    std::vector<double> probs(6, 0.0);
    probs[1 * 3 + 2] = 0.9;  // c=1, r=2
    DetectionMask m = predict_mask(probs, 0.5, 3, 2);
    EXPECT_EQ(m.count(), 1);
    EXPECT_EQ(m.at(2, 1), 1);
}

TEST(Checkpoint, RoundTripIsBitwiseExact) {
    EXPECT_NO_THROW(selftest::check_model_checkpoint_roundtrip());
}

TEST(Checkpoint, ExtrasSurviveRoundTrip) {
    namespace fs = std::filesystem;
    DetectorModel m = init_model(tiny_cfg());
    fs::path path = fs::temp_directory_path() / "raddet_test_extras.ckpt";
    save_checkpoint(m, path.string(), {{"state", {1.5, -2.25, 1e-300}}});
    Checkpoint ck = load_checkpoint(path.string());
    ASSERT_EQ(ck.extras.size(), 1u);
    EXPECT_EQ(ck.extras[0].name, "state");
    EXPECT_EQ(ck.extras[0].data, (std::vector<double>{1.5, -2.25, 1e-300}));
    fs::remove(path);
}

TEST(Checkpoint, LoadedModelForwardsIdentically) {
    namespace fs = std::filesystem;
    DetectorModel m = init_model(tiny_cfg());
    fs::path path = fs::temp_directory_path() / "raddet_test_fwd.ckpt";
    save_checkpoint(m, path.string());
    Checkpoint ck = load_checkpoint(path.string());
    RangeAzimuthFrame f = selftest::detail::random_frame(16, 8, 311);
    std::vector<double> a = forward(m, f), b = forward(ck.model, f);
    EXPECT_EQ(a, b);
    fs::remove(path);
}
