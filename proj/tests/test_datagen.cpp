#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <numbers>

#include "raddet/datagen.hpp"
#include "raddet/selftest.hpp"

using namespace raddet;
namespace fs = std::filesystem;

namespace {

double sinc2(double x) {
    if (std::abs(x) < 1e-12) return 1.0;
    double s = std::sin(std::numbers::pi * x) / (std::numbers::pi * x);
    return s * s;
}

}  // namespace

TEST(GenSample, NoTargetsMeansEmptyMaskAndPositiveFrame) {
    SceneConfig cfg;
    cfg.targets_min = cfg.targets_max = 0;
    cfg.seed = 1;
    LabeledSample s = gen_sample(cfg, 0);
    EXPECT_EQ(s.mask.count(), 0);
    for (float v : s.frame.values) EXPECT_GT(v, 0.0f);
}

TEST(GenSample, PeakCellTracksConfiguredSnr) {
    // one 30 dB target on unit-mean clutter: the target's own contribution at
    // the peak grid cell must be within 5% of 1000x the clutter mean
    SceneConfig cfg;
    cfg.targets_min = cfg.targets_max = 1;
    cfg.snr_db_min = cfg.snr_db_max = 30.0;
    cfg.clutter = ClutterKind::Homogeneous;
    cfg.clutter_mean = 1.0;
    for (uint64_t i = 0; i < 8; ++i) {
        LabeledSample s = gen_sample(cfg, i);
        ASSERT_EQ(s.meta.targets.size(), 1u);
        const TargetMeta& t = s.meta.targets[0];
        int pr = static_cast<int>(std::lround(t.row_center));
        int pc = static_cast<int>(std::lround(t.col_center));
        double contrib = t.amplitude * sinc2((pr - t.row_center) / cfg.mainlobe_range_bins) *
                         sinc2((pc - t.col_center) / cfg.mainlobe_az_bins());
        EXPECT_GT(contrib, 1000.0 * 0.95);
        EXPECT_LT(contrib, 1000.0 * 1.05);
    }
}

TEST(GenSample, DeterministicUnderSeedAndIndex) {
    SceneConfig cfg;
    cfg.seed = 77;
    LabeledSample a = gen_sample(cfg, 3), b = gen_sample(cfg, 3);
    EXPECT_EQ(a.frame.values, b.frame.values);
    EXPECT_EQ(a.mask.cells, b.mask.cells);
    LabeledSample c = gen_sample(cfg, 4);
    EXPECT_NE(a.frame.values, c.frame.values);
}

TEST(GenSample, InvalidBoundsThrow) {
    SceneConfig cfg;
    cfg.range_min_m = 7.0;  // above range_max_m
    EXPECT_THROW(gen_sample(cfg, 0), InvalidInput);
    cfg = SceneConfig{};
    cfg.mask_level = 1.5;
    EXPECT_THROW(gen_sample(cfg, 0), InvalidInput);
    cfg = SceneConfig{};
    cfg.targets_min = 3;
    cfg.targets_max = 1;
    EXPECT_THROW(gen_sample(cfg, 0), InvalidInput);
}

TEST(GenSample, GlobalMaxOfStrongSingleTargetLiesInMask) {
    SceneConfig cfg;
    cfg.targets_min = cfg.targets_max = 1;
    cfg.snr_db_min = cfg.snr_db_max = 60.0;
    for (uint64_t i = 0; i < 4; ++i) {
        LabeledSample s = gen_sample(cfg, i);
        size_t argmax = 0;
        for (size_t j = 1; j < s.frame.values.size(); ++j)
            if (s.frame.values[j] > s.frame.values[argmax]) argmax = j;
        EXPECT_EQ(s.mask.cells[argmax], 1);
    }
}

TEST(GenSample, MaskCellsStayInsideGrid) {
    SceneConfig cfg;
    cfg.rows = 24;
    cfg.cols = 12;
    cfg.margin_range = 4;
    cfg.margin_az = 4;
    cfg.seed = 5;
    for (uint64_t i = 0; i < 6; ++i) {
        LabeledSample s = gen_sample(cfg, i);
        EXPECT_EQ(s.mask.rows, cfg.rows);
        EXPECT_EQ(s.mask.cols, cfg.cols);
        EXPECT_GT(s.mask.count(), 0);
    }
}

TEST(GenSample, HeterogeneousStepMatchesConfiguredRatio) {
    EXPECT_NO_THROW(selftest::check_datagen_het_step());
}

TEST(GenSample, FramesFiniteAndPositive) {
    EXPECT_NO_THROW(selftest::check_datagen_frames());
}

TEST(SplitCounts, FloorThenRemainderToTest) {
    auto c = split_counts(10, {0.7, 0.15, 0.15});
    EXPECT_EQ(c[0], 7);
    EXPECT_EQ(c[1], 1);
    EXPECT_EQ(c[2], 2);
    auto c2 = split_counts(625, {0.8, 0.04, 0.16});
    EXPECT_EQ(c2[0], 500);
    EXPECT_EQ(c2[1], 25);
    EXPECT_EQ(c2[2], 100);
}

TEST(SplitCounts, BadRatiosThrow) {
    EXPECT_THROW(split_counts(10, {0.5, 0.2, 0.2}), InvalidInput);
    EXPECT_THROW(split_counts(0, {0.7, 0.15, 0.15}), InvalidInput);
}

TEST(Dataset, RoundTripIsBitwiseExact) {
    fs::path dir = fs::temp_directory_path() / "raddet_test_dataset";
    fs::remove_all(dir);
    SceneConfig cfg;
    cfg.rows = 16;
    cfg.cols = 8;
    cfg.margin_range = 4;
    cfg.margin_az = 3;
    cfg.seed = 99;
    gen_dataset(cfg, 10, {0.7, 0.15, 0.15}, dir.string());
    Dataset ds = load_dataset(dir.string());
    ASSERT_EQ(ds.samples.size(), 10u);
    EXPECT_EQ(ds.indices_of(kTrain).size(), 7u);
    EXPECT_EQ(ds.indices_of(kVal).size(), 1u);
    EXPECT_EQ(ds.indices_of(kTest).size(), 2u);

    for (int i = 0; i < 10; ++i) {
        LabeledSample expected = gen_sample(cfg, static_cast<uint64_t>(i));
        EXPECT_EQ(ds.samples[i].frame.values, expected.frame.values) << "sample " << i;
        EXPECT_EQ(ds.samples[i].mask.cells, expected.mask.cells);
        ASSERT_EQ(ds.samples[i].meta.targets.size(), expected.meta.targets.size());
        for (size_t t = 0; t < expected.meta.targets.size(); ++t) {
            // %.17g round trip recovers the exact doubles
            EXPECT_EQ(ds.samples[i].meta.targets[t].row_center,
                      expected.meta.targets[t].row_center);
            EXPECT_EQ(ds.samples[i].meta.targets[t].amplitude,
                      expected.meta.targets[t].amplitude);
        }
    }
    fs::remove_all(dir);
}

TEST(Dataset, DifferentSeedsDiffer) {
    SceneConfig a;
    a.seed = 1;
    SceneConfig b;
    b.seed = 2;
    EXPECT_NE(gen_sample(a, 0).frame.values, gen_sample(b, 0).frame.values);
}

TEST(Dataset, RegeneratedDirectoryIsByteIdentical) {
    fs::path d1 = fs::temp_directory_path() / "raddet_test_ds_a";
    fs::path d2 = fs::temp_directory_path() / "raddet_test_ds_b";
    fs::remove_all(d1);
    fs::remove_all(d2);
    SceneConfig cfg;
    cfg.rows = 16;
    cfg.cols = 8;
    cfg.margin_range = 4;
    cfg.margin_az = 3;
    cfg.seed = 4;
    gen_dataset(cfg, 6, {0.7, 0.15, 0.15}, d1.string());
    gen_dataset(cfg, 6, {0.7, 0.15, 0.15}, d2.string());
    for (const auto& entry : fs::recursive_directory_iterator(d1)) {
        if (!entry.is_regular_file()) continue;
        fs::path rel = fs::relative(entry.path(), d1);
        EXPECT_EQ(read_file_bytes(entry.path().string()), read_file_bytes((d2 / rel).string()))
            << rel;
    }
    fs::remove_all(d1);
    fs::remove_all(d2);
}
