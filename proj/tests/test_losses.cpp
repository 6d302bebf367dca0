#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "corrnet3d/losses.hpp"
#include "support/gradcheck.hpp"
#include "support/oracles.hpp"

using namespace corrnet3d;
using corrnet3d::testing::random_tensor;

namespace {

Tensor random_row_stochastic(std::size_t n, Rng& rng) {
    std::vector<double> v(n * n);
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0;
        for (std::size_t j = 0; j < n; ++j) s += (v[i * n + j] = rng.uniform(0.01, 1.0));
        for (std::size_t j = 0; j < n; ++j) v[i * n + j] /= s;
    }
    return Tensor({n, n}, v);
}

}  // namespace

TEST(LossRec, HandExample) {
    const auto a = Tensor::zeros({2, 3});
    const auto ar = Tensor({2, 3}, {1, 1, 1, 1, 1, 1});
    EXPECT_EQ(loss_rec(a, ar, a, ar).item(), 12.0);
    EXPECT_EQ(loss_rec(a, ar, a, a).item(), 6.0);
}

TEST(LossRec, GradientIsTwiceResidual) {
    Rng rng(1);
    const auto a = random_tensor({5, 3}, rng, -1, 1, false), b = random_tensor({5, 3}, rng, -1, 1, false);
    auto ar = random_tensor({5, 3}, rng), br = random_tensor({5, 3}, rng);
    backward(loss_rec(a, ar, b, br));
    for (std::size_t i = 0; i < 15; ++i) {
        EXPECT_NEAR(ar.grad()[i], 2 * (ar[i] - a[i]), 1e-12);
        EXPECT_NEAR(br.grad()[i], 2 * (br[i] - b[i]), 1e-12);
    }
}

TEST(LossPerm, ZeroOnPermutations) {
    Rng rng(2);
    const auto perm = rng.permutation(7);
    EXPECT_EQ(loss_perm(permutation_matrix(perm)).item(), 0.0);
    EXPECT_EQ(loss_perm(Tensor::identity(4)).item(), 0.0);
}

TEST(LossPerm, UniformMatrixExample) {
    // (1/4) J times its transpose is (1/4) J; minus I leaves 4 diagonal
    // entries of -3/4 and 12 off-diagonal entries of 1/4.
    EXPECT_NEAR(loss_perm(Tensor::full({4, 4}, 0.25)).item(), 3.0, 1e-12);
}

TEST(LossPerm, BoundedAwayFromZeroOnSoftMatrices) {
    Rng rng(3);
    for (int trial = 0; trial < 100; ++trial) EXPECT_GE(loss_perm(random_row_stochastic(6, rng)).item(), 1e-2);
}

TEST(LossPerm, NonSquareRejected) { EXPECT_THROW(loss_perm(Tensor::zeros({2, 3})), ShapeError); }

TEST(LossMfd, IdentityOnIdenticalCloudsIsTwoNK) {
    Rng rng(4);
    const auto a = random_tensor({12, 3}, rng, -1, 1, false);
    EXPECT_NEAR(loss_mfd(Tensor::identity(12), a, a, 4).item(), 2.0 * 12 * 4, 1e-9);
}

TEST(LossMfd, UniformCorrespondenceIsZero) {
    Rng rng(5);
    const auto a = random_tensor({10, 3}, rng, -1, 1, false), b = random_tensor({10, 3}, rng, -1, 1, false);
    EXPECT_NEAR(loss_mfd(Tensor::full({10, 10}, 0.1), a, b, 3).item(), 0.0, 1e-20);
}

TEST(LossMfd, MatchesDirectSum) {
    Rng rng(6);
    const std::size_t n = 7, k = 2;
    const auto a = random_tensor({n, 3}, rng, -1, 1, false), b = random_tensor({n, 3}, rng, -1, 1, false);
    const auto p = random_row_stochastic(n, rng);
    auto sq = [](auto&& x, auto&& y) {
        double s = 0;
        for (std::size_t c = 0; c < 3; ++c) s += (x[c] - y[c]) * (x[c] - y[c]);
        return s;
    };
    auto row = [&](const Tensor& m, std::size_t i) { return std::vector<double>{m(i, 0), m(i, 1), m(i, 2)}; };
    auto neighbours = [&](const Tensor& m, std::size_t i) {
        std::vector<std::size_t> idx;
        for (std::size_t j = 0; j < n; ++j)
            if (j != i) idx.push_back(j);
        std::stable_sort(idx.begin(), idx.end(), [&](auto x, auto y) { return sq(row(m, i), row(m, x)) < sq(row(m, i), row(m, y)); });
        idx.resize(k);
        return idx;
    };
    auto mapped = [&](const Tensor& weights, bool by_row, const Tensor& cloud, std::size_t i) {
        std::vector<double> out(3, 0.0);
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t c = 0; c < 3; ++c) out[c] += (by_row ? weights(i, j) : weights(j, i)) * cloud(j, c);
        return out;
    };
    double expected = 0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j : neighbours(a, i))
            expected += sq(mapped(p, true, b, i), mapped(p, true, b, j)) / sq(row(a, i), row(a, j));
        for (std::size_t j : neighbours(b, i))
            expected += sq(mapped(p, false, a, i), mapped(p, false, a, j)) / sq(row(b, i), row(b, j));
    }
    EXPECT_NEAR(loss_mfd(p, a, b, k).item(), expected, 1e-10 * expected);
}

TEST(LossMfd, GroundTruthMinimizesOverAllPermutations) {
    const auto inst = corrnet3d::testing::mfd_instance();
    const auto search = corrnet3d::testing::mfd_brute_force(inst);
    EXPECT_EQ(search.visited, 720u);
    EXPECT_EQ(search.argmin, inst.gt);
    EXPECT_NEAR(search.best, 2.0 * 6 * 2, 1e-9);
    EXPECT_GT(search.runner_up, search.best);
}

TEST(LossMfd, GradientReachesOnlyP) {
    Rng rng(7);
    auto a = random_tensor({8, 3}, rng), b = random_tensor({8, 3}, rng), p = random_tensor({8, 8}, rng, 0, 1);
    backward(loss_mfd(p, a, b, 3));
    double pnorm = 0;
    for (double g : p.grad()) pnorm += g * g;
    EXPECT_GT(pnorm, 0.0);
    for (double g : a.grad()) EXPECT_EQ(g, 0.0);
    for (double g : b.grad()) EXPECT_EQ(g, 0.0);
}

TEST(LossMfd, ShapeMismatch) {
    EXPECT_THROW(loss_mfd(Tensor::identity(4), Tensor::zeros({5, 3}), Tensor::zeros({4, 3}), 2), ShapeError);
}

TEST(LossChamfer, MatchesBruteForce) {
    Rng rng(8);
    const auto x = random_tensor({9, 3}, rng, -1, 1, false), y = random_tensor({7, 3}, rng, -1, 1, false);
    auto nearest = [](const Tensor& from, const Tensor& to) {
        double total = 0;
        for (std::size_t i = 0; i < from.rows(); ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (std::size_t j = 0; j < to.rows(); ++j) {
                double d = 0;
                for (std::size_t c = 0; c < 3; ++c) d += (from(i, c) - to(j, c)) * (from(i, c) - to(j, c));
                best = std::min(best, d);
            }
            total += best;
        }
        return total / static_cast<double>(from.rows());
    };
    EXPECT_NEAR(loss_chamfer(x, y).item(), nearest(x, y) + nearest(y, x), 1e-12);
}

TEST(LossChamfer, PermutationInvariantAndZeroOnSelf) {
    Rng rng(9);
    const auto x = random_tensor({10, 3}, rng, -1, 1, false), y = random_tensor({10, 3}, rng, -1, 1, false);
    const auto perm = rng.permutation(10);
    EXPECT_NEAR(loss_chamfer(x, y).item(), loss_chamfer(gather_rows(x, perm), y).item(), 1e-12);
    EXPECT_EQ(loss_chamfer(x, gather_rows(x, perm)).item(), 0.0);
}

TEST(LossSupervised, UniformExample) {
    const std::vector<std::size_t> gt{1, 3, 0, 2};
    // Each row: (1 - 1/4)^2 + 3 (1/4)^2 = 3/4.
    EXPECT_NEAR(loss_supervised(Tensor::full({4, 4}, 0.25), gt).item(), 3.0, 1e-12);
    EXPECT_EQ(loss_supervised(permutation_matrix(gt), gt).item(), 0.0);
}

TEST(LossSupervised, MovingMassToTruthDecreasesLoss) {
    const std::vector<std::size_t> gt{2, 0, 1};
    const auto uniform = Tensor::full({3, 3}, 1.0 / 3);
    Tensor sharper({3, 3}, {0.2, 0.2, 0.6, 0.6, 0.2, 0.2, 0.2, 0.6, 0.2});
    EXPECT_LT(loss_supervised(sharper, gt).item(), loss_supervised(uniform, gt).item());
}

TEST(LossSupervised, SizeMismatchAndNonBijection) {
    const std::vector<std::size_t> three{0, 1, 2}, dup{0, 0, 1};
    EXPECT_THROW(loss_supervised(Tensor::identity(4), three), ShapeError);
    EXPECT_THROW(loss_supervised(Tensor::identity(3), dup), ContractError);
}

TEST(LossTotal, ReducesToReconstructionWithoutRegularizers) {
    Rng rng(10);
    const auto a = random_tensor({8, 3}, rng, -1, 1, false), b = random_tensor({8, 3}, rng, -1, 1, false);
    const auto ar = random_tensor({8, 3}, rng, -1, 1, false), br = random_tensor({8, 3}, rng, -1, 1, false);
    const auto p = random_row_stochastic(8, rng);
    EXPECT_EQ(loss_total(a, b, ar, br, p, {0.0, 0.0, 3}).item(), loss_rec(a, ar, b, br).item());
    const double full = loss_total(a, b, ar, br, p, {0.1, 0.01, 3}).item();
    const double parts = loss_rec(a, ar, b, br).item() + 0.1 * loss_perm(p).item() + 0.01 * loss_mfd(p, a, b, 3).item();
    EXPECT_NEAR(full, parts, 1e-12 * full);
}

TEST(LossTotal, NonNegative) {
    Rng rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        const auto a = random_tensor({8, 3}, rng, -1, 1, false), b = random_tensor({8, 3}, rng, -1, 1, false);
        const auto ar = random_tensor({8, 3}, rng, -1, 1, false), br = random_tensor({8, 3}, rng, -1, 1, false);
        EXPECT_GE(loss_total(a, b, ar, br, random_row_stochastic(8, rng), {0.1, 0.01, 3}).item(), 0.0);
    }
}
