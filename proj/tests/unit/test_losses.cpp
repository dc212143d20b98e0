#include "dualref/encoder.hpp"
#include "dualref/losses.hpp"

#include "../common/gradcheck.hpp"
#include "../common/oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace dualref;
using namespace dualref::loss;

TEST(CrossEntropy, UniformGivesLogL) {
    const Matrix p = Matrix::Constant(3, 4, 0.25);
    const std::vector<int> y{0, 3, 1};
    EXPECT_NEAR(cross_entropy(p, y).loss, std::log(4.0), 1e-15);
}

TEST(CrossEntropy, ConfidentCorrectIsNearZero) {
    Matrix p(1, 2);
    p << 1.0 - 1e-12, 1e-12;
    EXPECT_LT(cross_entropy(p, std::vector<int>{0}).loss, 1e-11);
}

TEST(CrossEntropy, GradientMatchesFiniteDifferencesAndRowsSumToZero) {
    std::mt19937_64 gen(1);
    const Matrix z = oracle::random_matrix(gen, 5, 4);
    const std::vector<int> y{0, 1, 2, 3, 1};
    const auto r = cross_entropy(nn::softmax_rows(z), y);
    auto f = [&](const Matrix& zz) { return cross_entropy(nn::softmax_rows(zz), y).loss; };
    EXPECT_LT(gradcheck::relative_error(r.grad_logits, gradcheck::numeric(f, z)), 1e-6);
    EXPECT_LT(r.grad_logits.rowwise().sum().cwiseAbs().maxCoeff(), 1e-15);
}

TEST(CrossEntropy, RejectsOutOfRangeLabel) {
    EXPECT_THROW(cross_entropy(Matrix::Constant(1, 2, 0.5), std::vector<int>{2}), std::invalid_argument);
    EXPECT_THROW(cross_entropy(Matrix::Constant(1, 2, 0.5), std::vector<int>{-1}), std::invalid_argument);
}

TEST(Triplet, SeparatedGroupsGiveZero) {
    Matrix f(4, 2);
    f << 0, 0, 0.1, 0, 5, 5, 5.1, 5;
    const std::vector<int> y{0, 0, 1, 1};
    const auto r = batch_hard_triplet(f, y, 0.3);
    EXPECT_EQ(r.loss, 0.0);
    EXPECT_EQ(r.grad_features.norm(), 0.0);
}

TEST(Triplet, ColocatedAnchorsGiveMargin) {
    const Matrix f = Matrix::Zero(4, 3);
    const std::vector<int> y{0, 0, 1, 1};
    const auto r = batch_hard_triplet(f, y, 0.3);
    EXPECT_DOUBLE_EQ(r.loss, 0.3);
    EXPECT_EQ(r.grad_features.norm(), 0.0);  // zero subgradient at coincident points
}

TEST(Triplet, RandomBatchesMatchOracleAndFiniteDifferences) {
    std::mt19937_64 gen(2);
    for (int t = 0; t < 30; ++t) {
        const Matrix f = oracle::random_matrix(gen, 8, 3);
        const std::vector<int> y{0, 0, 1, 1, 2, 2, 3, 3};
        const auto r = batch_hard_triplet(f, y, 0.3);
        EXPECT_NEAR(r.loss, oracle::triplet_loss(f, y, 0.3), 1e-12);
        auto loss = [&](const Matrix& x) { return batch_hard_triplet(x, y, 0.3).loss; };
        EXPECT_LT(gradcheck::relative_error(r.grad_features, gradcheck::numeric(loss, f)), 1e-6);
    }
}

TEST(Triplet, TranslationInvariant) {
    std::mt19937_64 gen(3);
    const Matrix f = oracle::random_matrix(gen, 6, 4);
    const std::vector<int> y{0, 1, 2, 0, 1, 2};
    const auto a = batch_hard_triplet(f, y, 0.5);
    const Matrix shifted = f.rowwise() + oracle::random_matrix(gen, 1, 4).row(0);
    const auto b = batch_hard_triplet(shifted, y, 0.5);
    EXPECT_NEAR(a.loss, b.loss, 1e-12);
    EXPECT_LT((a.grad_features - b.grad_features).norm(), 1e-12);
}

TEST(Triplet, StrictVariantChecksBatchShape) {
    const Matrix f = Matrix::Zero(3, 2);
    EXPECT_THROW(batch_hard_triplet(f, std::vector<int>{0, 0, 1}, 0.3), std::invalid_argument);
    EXPECT_THROW(batch_hard_triplet(f, std::vector<int>{0, 0, 0}, 0.3), std::invalid_argument);
    EXPECT_NO_THROW(batch_hard_triplet_relaxed(f, std::vector<int>{0, 0, 1}, 0.3));
}

TEST(Triplet, RelaxedAgreesWithStrictOnPkBatches) {
    std::mt19937_64 gen(4);
    const Matrix f = oracle::random_matrix(gen, 6, 2);
    const std::vector<int> y{0, 0, 1, 1, 2, 2};
    const auto a = batch_hard_triplet(f, y, 0.3);
    const auto b = batch_hard_triplet_relaxed(f, y, 0.3);
    EXPECT_EQ(a.loss, b.loss);
    EXPECT_EQ(a.grad_features, b.grad_features);
    // A lone anchor still counts in the mean and contributes nothing when it has no negatives.
    EXPECT_EQ(batch_hard_triplet_relaxed(f, std::vector<int>(6, 0), 0.3).loss, 0.0);
}

TEST(Blend, Endpoints) {
    const MetricLosses noisy{1.0, 2.0}, refined{3.0, 5.0};
    auto b0 = blend_metric_losses(noisy, refined, 0.0);
    EXPECT_EQ(b0.cls, 1.0);
    EXPECT_EQ(b0.tri, 2.0);
    auto b1 = blend_metric_losses(noisy, refined, 1.0);
    EXPECT_EQ(b1.cls, 3.0);
    EXPECT_EQ(b1.tri, 5.0);
    auto bh = blend_metric_losses(noisy, refined, 0.5);
    EXPECT_EQ(bh.cls, 2.0);
    EXPECT_EQ(bh.tri, 3.5);
    EXPECT_THROW(blend_metric_losses(noisy, refined, 1.3), std::invalid_argument);
    EXPECT_THROW(blend_metric_losses(noisy, refined, -0.1), std::invalid_argument);
}

TEST(Total, ComposesAndRejectsNegativeMu) {
    EXPECT_EQ(total_loss({0, 0}, 0, 0.1), 0.0);
    EXPECT_DOUBLE_EQ(total_loss({1.5, 0.25}, 4.0, 0.1), 1.5 + 0.25 + 0.4);
    EXPECT_EQ(total_loss({1.5, 0.25}, 4.0, 0.0), 1.75);
    EXPECT_THROW(total_loss({1, 1}, 1, -0.5), std::invalid_argument);
}
