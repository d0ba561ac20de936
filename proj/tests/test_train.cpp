#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "raddet/selftest.hpp"
#include "raddet/train.hpp"

using namespace raddet;
namespace fs = std::filesystem;

namespace {

Dataset tiny_dataset(int count, uint64_t seed) { return selftest::detail::tiny_dataset(count, seed); }

DetectorConfig tiny_cfg() { return selftest::detail::tiny_model_cfg(); }

}  // namespace

TEST(Loss, PerfectPredictionIsNearZero) {
    std::vector<double> labels{1, 0, 0, 1, 0, 0, 0, 0, 0, 0};
    std::vector<double> probs(labels.begin(), labels.end());
    double loss = bce_loss_value(probs, labels, 1.0);
    EXPECT_GE(loss, 0.0);
    EXPECT_LT(loss, 1e-5);
}

TEST(Loss, UniformPredictionIsLogTwo) {
    std::vector<double> probs(8, 0.5), labels{1, 0, 1, 0, 1, 0, 1, 0};
    EXPECT_NEAR(bce_loss_value(probs, labels, 1.0), std::log(2.0), 1e-12);
}

TEST(Loss, WeightedHandFormula) {
    // one positive mispredicted at p=0.5, nine negatives correct at the clamp
    std::vector<double> probs(10, 0.0);
    std::vector<double> labels(10, 0.0);
    probs[0] = 0.5;
    labels[0] = 1.0;
    const double w = 10.0;
    double loss = bce_loss_value(probs, labels, w);
    double hand = -(w * std::log(0.5) + 9.0 * std::log(1.0 - 1e-7)) / 10.0;
    EXPECT_NEAR(loss, hand, 1e-9);
}

TEST(Loss, AutoPosWeight) {
    DetectionMask m = DetectionMask::zeros(10, 10);
    m.at(0, 0) = 1;
    m.at(0, 1) = 1;  // 2 targets, 98 background
    TrainConfig cfg;
    EXPECT_DOUBLE_EQ(batch_pos_weight({&m}, cfg), 49.0);

    DetectionMask empty = DetectionMask::zeros(10, 10);
    EXPECT_DOUBLE_EQ(batch_pos_weight({&empty}, cfg), 1.0);  // no positives: fall back

    DetectionMask one = DetectionMask::zeros(64, 64);
    one.at(5, 5) = 1;  // ratio 4095 clamps to 1000
    EXPECT_DOUBLE_EQ(batch_pos_weight({&one}, cfg), 1000.0);

    cfg.pos_weight_fixed = 7.5;
    EXPECT_DOUBLE_EQ(batch_pos_weight({&m}, cfg), 7.5);
}

TEST(Adam, ZeroGradientAndQuadraticDescent) {
    EXPECT_NO_THROW(selftest::check_train_adam());
}

TEST(Adam, NonFiniteGradientNamesParameter) {
    ad::Tensor x = ad::Tensor::zeros({2}, true);
    AdamState st;
    st.m.emplace_back(2, 0.0);
    st.v.emplace_back(2, 0.0);
    TrainConfig cfg;
    std::vector<std::pair<std::string, ad::Tensor*>> params{{"theta", &x}};
    try {
        adam_step(params, {{1.0, std::numeric_limits<double>::quiet_NaN()}}, st, cfg);
        FAIL() << "expected NumericError";
    } catch (const NumericError& e) {
        EXPECT_NE(std::string(e.what()).find("theta"), std::string::npos);
    }
}

TEST(Adam, IdenticalRunsAreBitwise) {
    auto run = [] {
        ad::Tensor x = ad::Tensor::zeros({3}, true);
        x.v = {1.0, -2.0, 0.5};
        AdamState st;
        st.m.emplace_back(3, 0.0);
        st.v.emplace_back(3, 0.0);
        TrainConfig cfg;
        std::vector<std::pair<std::string, ad::Tensor*>> params{{"x", &x}};
        for (int i = 0; i < 50; ++i) {
            std::vector<std::vector<double>> g{{2.0 * x.v[0], 2.0 * x.v[1], 2.0 * x.v[2]}};
            adam_step(params, g, st, cfg);
        }
        return x.v;
    };
    EXPECT_EQ(run(), run());
}

TEST(Train, OneEpochOneSample) {
    Dataset ds = tiny_dataset(1, 21);
    ds.split[0] = kTrain;
    TrainConfig cfg;
    cfg.epochs = 1;
    cfg.batch_size = 1;
    auto [model, report] = train(init_model(tiny_cfg()), ds, cfg);
    ASSERT_EQ(report.records.size(), 1u);
    EXPECT_TRUE(std::isfinite(report.records[0].train_loss));
    EXPECT_GE(report.records[0].train_loss, 0.0);
}

TEST(Train, EmptyDatasetThrows) {
    Dataset ds;
    TrainConfig cfg;
    DetectorModel m = init_model(tiny_cfg());
    EXPECT_THROW(train(m, ds, cfg), InvalidInput);
}

TEST(Train, DeterministicAcrossRuns) {
    EXPECT_NO_THROW(selftest::check_train_determinism());
}

TEST(Train, LossDecreasesOverFirstTenSteps) {
    // sanity property; allowed to fail on at most 1 of 10 seeds
    int ok = 0;
    for (uint64_t seed = 0; seed < 10; ++seed) {
        Dataset ds = tiny_dataset(8, 400 + seed);
        std::vector<const LabeledSample*> batch;
        for (const auto& s : ds.samples) batch.push_back(&s);
        DetectorConfig mc = tiny_cfg();
        mc.seed = seed;
        DetectorModel model = init_model(mc);
        AdamState adam = AdamState::for_model(model);
        TrainConfig cfg;
        cfg.lr = 1e-3;
        double first = 0.0, last = 0.0;
        for (int step = 0; step < 10; ++step) {
            double loss = train_step(model, batch, adam, cfg);
            if (step == 0) first = loss;
            last = loss;
        }
        if (last < first) ++ok;
    }
    EXPECT_GE(ok, 9);
}

TEST(Train, EarlyStoppingRespectsPatience) {
    Dataset ds = tiny_dataset(6, 31);
    TrainConfig cfg;
    cfg.epochs = 50;
    cfg.batch_size = 3;
    cfg.patience = 2;
    cfg.lr = 10.0;  // diverges quickly, so validation stops improving
    TrainState st = init_train_state(init_model(tiny_cfg()));
    run_epochs(st, ds, cfg);
    EXPECT_TRUE(st.stopped || static_cast<int>(st.report.records.size()) == cfg.epochs);
    EXPECT_LT(st.report.records.size(), 50u);
}

TEST(Train, ResumeReproducesUninterruptedRunBitwise) {
    Dataset ds = tiny_dataset(8, 55);
    DetectorConfig mc = tiny_cfg();
    TrainConfig cfg;
    cfg.epochs = 4;
    cfg.batch_size = 4;
    cfg.seed = 9;

    TrainState full = init_train_state(init_model(mc));
    run_epochs(full, ds, cfg);

    TrainState part = init_train_state(init_model(mc));
    run_epochs(part, ds, cfg, 2);
    fs::path path = fs::temp_directory_path() / "raddet_test_resume.ckpt";
    save_train_state(part, path.string());
    TrainState resumed = load_train_state(path.string());
    run_epochs(resumed, ds, cfg);
    fs::remove(path);

    ASSERT_EQ(full.report.records.size(), resumed.report.records.size());
    for (size_t i = 0; i < full.report.records.size(); ++i) {
        EXPECT_EQ(full.report.records[i].train_loss, resumed.report.records[i].train_loss) << i;
        EXPECT_EQ(full.report.records[i].val_loss, resumed.report.records[i].val_loss) << i;
    }
    auto pa = full.model.params(), pb = resumed.model.params();
    for (size_t i = 0; i < pa.size(); ++i) EXPECT_EQ(pa[i].second->v, pb[i].second->v);
}

TEST(Train, BestCheckpointForwardIsBitwise) {
    Dataset ds = tiny_dataset(6, 61);
    TrainConfig cfg;
    cfg.epochs = 2;
    cfg.batch_size = 3;
    auto [model, report] = train(init_model(tiny_cfg()), ds, cfg);
    fs::path path = fs::temp_directory_path() / "raddet_test_best.ckpt";
    save_checkpoint(model, path.string());
    Checkpoint ck = load_checkpoint(path.string());
    fs::remove(path);
    std::vector<double> a = forward(model, ds.samples[0].frame);
    std::vector<double> b = forward(ck.model, ds.samples[0].frame);
    EXPECT_EQ(a, b);
}

TEST(Train, ReportCsvShape) {
    TrainReport r;
    r.records.push_back({0, 0.5, 0.6, 0.9, 0.01});
    r.records.push_back({1, 0.4, 0.55, 0.92, 0.008});
    std::string csv = report_csv(r);
    EXPECT_NE(csv.find("epoch,train_loss,val_loss,val_pd,val_pf\n"), std::string::npos);
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
}
