#include <gtest/gtest.h>

#include <chrono>
#include <cmath>

#include "corrnet3d/csv.hpp"
#include "corrnet3d/evaluation.hpp"
#include "corrnet3d/model.hpp"
#include "corrnet3d/synth.hpp"
#include "support/oracles.hpp"

using namespace corrnet3d;
using corrnet3d::testing::hadamard_corr;
using corrnet3d::testing::on_x_axis;

namespace {

PointCloud unit_cube() {
    PointCloud pc;
    for (int i = 0; i < 8; ++i) pc.points.push_back({double(i & 1), double((i >> 1) & 1), double((i >> 2) & 1)});
    return pc;
}

}  // namespace

TEST(CorrStrict, Examples) {
    const std::vector<std::size_t> gt{2, 0, 3, 1};
    EXPECT_EQ(corr_strict(gt, gt), 1.0);
    const std::vector<std::size_t> half{2, 0, 1, 3};
    EXPECT_EQ(corr_strict(half, gt), 0.5);
}

TEST(CorrStrict, SizeMismatchAndEmpty) {
    const std::vector<std::size_t> three{0, 1, 2}, two{0, 1}, none;
    EXPECT_THROW(corr_strict(three, two), ShapeError);
    EXPECT_THROW(corr_strict(none, none), ShapeError);
}

TEST(CorrStrict, MatchesMatrixFormula) {
    Rng rng(1);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 2 + rng.index(30);
        const auto gt = rng.permutation(n);
        std::vector<std::size_t> pred(n);
        for (auto& p : pred) p = rng.index(n);
        if (trial % 3 == 0) pred = gt;
        EXPECT_DOUBLE_EQ(corr_strict(pred, gt), hadamard_corr(pred, gt, n));
    }
}

TEST(DistMax, UnitCube) { EXPECT_DOUBLE_EQ(dist_max(unit_cube()), std::sqrt(3.0)); }

TEST(CorrTolerant, UnitCubeEdgeError) {
    // Every row predicts the corner one edge away from the truth.
    const auto cube = unit_cube();
    std::vector<std::size_t> gt(8), pred(8);
    for (std::size_t i = 0; i < 8; ++i) {
        gt[i] = i;
        pred[i] = i ^ 1u;
    }
    const double threshold = 1.0 / std::sqrt(3.0);
    EXPECT_EQ(corr_at(pred, gt, cube, threshold - 1e-6), 0.0);
    EXPECT_EQ(corr_at(pred, gt, cube, threshold + 1e-6), 1.0);
    EXPECT_EQ(corr_at(pred, gt, cube, 1.0), 1.0);
}

TEST(CorrTolerant, CurveEndpointsAndMonotonicity) {
    Rng rng(2);
    for (int trial = 0; trial < 50; ++trial) {
        const auto base = synth_base_shape(40, 10 + trial);
        const auto gt = rng.permutation(40);
        std::vector<std::size_t> pred = gt;
        for (std::size_t i = 0; i < 40; ++i)
            if (rng.uniform() < 0.6) pred[i] = rng.index(40);
        auto tolerances = default_tolerances();
        tolerances.push_back(1.0);
        const auto report = corr_tolerant(pred, gt, base, tolerances);
        EXPECT_EQ(report.curve.front().corr, report.strict);
        EXPECT_EQ(report.curve.back().corr, 1.0);
        EXPECT_TRUE(curve_is_monotone(report.curve));
        for (const auto& p : report.curve) {
            EXPECT_GE(p.corr, 0.0);
            EXPECT_LE(p.corr, 1.0);
        }
    }
}

TEST(CorrTolerant, DefaultGrid) {
    const auto t = default_tolerances();
    ASSERT_EQ(t.size(), 21u);
    EXPECT_EQ(t.front(), 0.0);
    EXPECT_DOUBLE_EQ(t.back(), 0.2);
}

TEST(CorrTolerant, RejectsBadTolerances) {
    const std::vector<std::size_t> gt{0, 1};
    const auto pc = on_x_axis({0, 1});
    const std::vector<double> empty, unsorted{0.2, 0.1}, too_big{0.5, 1.5};
    EXPECT_THROW(corr_tolerant(gt, gt, pc, empty), ContractError);
    EXPECT_THROW(corr_tolerant(gt, gt, pc, unsorted), ContractError);
    EXPECT_THROW(corr_tolerant(gt, gt, pc, too_big), ContractError);
}

TEST(Clusters, KeyPointLeadsItsCluster) {
    const auto pc = synth_base_shape(200, 3);
    const auto cm = build_clusters(pc, 12);
    std::vector<int> seen(200, 0);
    for (std::size_t c = 0; c < 12; ++c) {
        ASSERT_FALSE(cm.members[c].empty());
        EXPECT_EQ(cm.members[c].front(), cm.keys[c]);
        for (std::size_t r = 1; r < cm.members[c].size(); ++r) {
            EXPECT_LE(squared_distance(pc[cm.members[c][r - 1]], pc[cm.keys[c]]),
                      squared_distance(pc[cm.members[c][r]], pc[cm.keys[c]]));
        }
        for (auto i : cm.members[c]) {
            ++seen[i];
            EXPECT_EQ(cm.assignment[i], c);
        }
    }
    for (int s : seen) EXPECT_EQ(s, 1);
}

TEST(PseudoCluster, HandEnumeratedInstance) {
    const corrnet3d::testing::ClusterInstance inst;
    bool called = false;
    const KeyMatcher matcher = [&](const PointCloud& ka, const PointCloud& kb) {
        called = true;
        EXPECT_EQ(ka.size(), 3u);
        EXPECT_EQ(ka[1][0], 20.0);
        EXPECT_EQ(ka[2][0], 10.0);
        EXPECT_EQ(kb[1][0], 30.0);
        EXPECT_EQ(kb[2][0], 15.0);
        return inst.key_corr;
    };
    EXPECT_EQ(pseudo_cluster_correspond(inst.a, inst.b, inst.keypoints, matcher), inst.expected);
    EXPECT_TRUE(called);
}

TEST(PseudoCluster, SingletonClustersReduceToModelOutput) {
    ModelConfig cfg;
    cfg.embedding = {2, 16, 16, 4};
    cfg.deformer.hidden = 16;
    const CorrNet model(cfg, 4);
    const auto pair = synth_nonrigid_pair(synth_base_shape(24, 5), 0.3, 6);
    const KeyMatcher matcher = [&](const PointCloud& ka, const PointCloud& kb) { return model.infer(ka, kb); };
    const auto dense = pseudo_cluster_correspond(pair.source, pair.target, 24, matcher);
    const auto keys_a = fps_sample(pair.source, 24), keys_b = fps_sample(pair.target, 24);
    const auto key_corr = model.infer(pair.source.subset(keys_a), pair.target.subset(keys_b));
    for (std::size_t c = 0; c < 24; ++c) EXPECT_EQ(dense[keys_a[c]], keys_b[key_corr[c]]);
}

TEST(PseudoCluster, IdenticalCloudsWithIdentityKeysGiveIdentity) {
    const auto pc = synth_base_shape(300, 8);
    const KeyMatcher identity = [](const PointCloud& ka, const PointCloud&) {
        std::vector<std::size_t> out(ka.size());
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = i;
        return out;
    };
    const auto dense = pseudo_cluster_correspond(pc, pc, 16, identity);
    for (std::size_t i = 0; i < 300; ++i) EXPECT_EQ(dense[i], i);
}

TEST(PseudoCluster, DenseOutputIsTotalAndInRange) {
    const auto pair = synth_nonrigid_pair(synth_base_shape(500, 9), 0.3, 10);
    Rng rng(11);
    const KeyMatcher shuffled = [&](const PointCloud& ka, const PointCloud&) { return rng.permutation(ka.size()); };
    const auto dense = pseudo_cluster_correspond(pair.source, pair.target, 20, shuffled);
    ASSERT_EQ(dense.size(), 500u);
    for (auto j : dense) EXPECT_LT(j, 500u);
}

TEST(PseudoCluster, Errors) {
    const auto a = synth_base_shape(20, 1), b = synth_base_shape(21, 2);
    const KeyMatcher bad = [](const PointCloud&, const PointCloud&) { return std::vector<std::size_t>{0}; };
    EXPECT_THROW(pseudo_cluster_correspond(a, b, 4, bad), ShapeError);
    EXPECT_THROW(pseudo_cluster_correspond(a, a, 4, bad), ShapeError);
    const KeyMatcher failing = [](const PointCloud&, const PointCloud&) -> std::vector<std::size_t> {
        throw NumericError("model failed");
    };
    EXPECT_THROW(pseudo_cluster_correspond(a, a, 4, failing), NumericError);
}

TEST(Bench, OneRowPerMethodAndSize) {
    const std::vector<std::size_t> sizes{8, 16, 32};
    const auto rows = bench_normalizers(sizes, 30, 3);
    ASSERT_EQ(rows.size(), 6u);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        EXPECT_EQ(rows[i].method, i % 2 ? "sinkhorn" : "desmooth");
        EXPECT_EQ(rows[i].n, sizes[i / 2]);
        EXPECT_GT(rows[i].median_seconds, 0.0);
    }
    const std::vector<std::size_t> bad{1};
    EXPECT_THROW(bench_normalizers(bad, 30, 3), ContractError);
}

TEST(Bench, LogLogSlopeOfQuadraticTimes) {
    std::vector<BenchRow> rows;
    for (std::size_t n : {128, 256, 512, 1024}) rows.push_back({"x", n, 3e-9 * double(n) * double(n)});
    EXPECT_NEAR(loglog_slope(rows, "x"), 2.0, 1e-12);
    EXPECT_THROW(loglog_slope(rows, "y"), ContractError);
}

TEST(Bench, MedianOfOddAndEven) {
    EXPECT_EQ(median({3, 1, 2}), 2.0);
    EXPECT_EQ(median({4, 1, 3, 2}), 2.5);
}

TEST(Csv, CorrespondenceRoundTrip) {
    const std::vector<std::size_t> corr{3, 0, 0, 2};
    const auto text = write_correspondence_csv(corr);
    EXPECT_EQ(text, "source_index,target_index\n0,3\n1,0\n2,0\n3,2\n");
    EXPECT_EQ(parse_correspondence_csv(text), corr);
    EXPECT_EQ(parse_correspondence_csv("source_index,target_index\n1,5\n0,4\n"), (std::vector<std::size_t>{4, 5}));
}

TEST(Csv, CorrespondenceErrors) {
    EXPECT_THROW(parse_correspondence_csv("src,dst\n0,1\n"), ParseError);
    EXPECT_THROW(parse_correspondence_csv("source_index,target_index\n0,1\n0,2\n"), ParseError);
    EXPECT_THROW(parse_correspondence_csv("source_index,target_index\n0,1,2\n"), ParseError);
    EXPECT_THROW(parse_correspondence_csv("source_index,target_index\n0,-1\n"), ParseError);
}

TEST(Csv, CurveBenchAndLossRoundTrip) {
    const std::vector<CurvePoint> curve{{0.0, 0.25}, {0.1, 0.5}, {0.2, 0.875}};
    const auto parsed = parse_curve_csv(write_curve_csv(curve));
    ASSERT_EQ(parsed.size(), 3u);
    for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_EQ(parsed[i].tolerance, curve[i].tolerance);
        EXPECT_EQ(parsed[i].corr, curve[i].corr);
    }
    const std::vector<BenchRow> rows{{"desmooth", 128, 1.5e-4}, {"sinkhorn", 128, 0.1 / 3}};
    const auto bench = parse_bench_csv(write_bench_csv(rows));
    ASSERT_EQ(bench.size(), 2u);
    EXPECT_EQ(bench[1].method, "sinkhorn");
    EXPECT_EQ(bench[1].median_seconds, 0.1 / 3);
    const std::vector<double> losses{10.5, 3.0 / 7, 1e-9};
    EXPECT_EQ(parse_loss_csv(write_loss_csv(losses)), losses);
    EXPECT_THROW(parse_loss_csv("epoch,loss\n2,1.0\n"), ParseError);
}

TEST(Csv, MonotoneCheck) {
    const std::vector<CurvePoint> good{{0.0, 0.1}, {0.1, 0.1}, {0.2, 0.3}}, bad{{0.0, 0.5}, {0.1, 0.4}};
    EXPECT_TRUE(curve_is_monotone(good));
    EXPECT_FALSE(curve_is_monotone(bad));
}
