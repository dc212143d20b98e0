#include "dualref/label_refinery.hpp"

#include "../common/oracles.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace dualref;
using namespace dualref::refine;

namespace {

cluster::CoarseClusters coarse_of(std::vector<int> labels, int clusters) {
    cluster::CoarseClusters c;
    c.assignment = std::move(labels);
    c.num_clusters = clusters;
    return c;
}

}  // namespace

TEST(Prototypes, ClampedToClusterSize) {
    Matrix f(3, 2);
    f << 0.6, 0.8, 0.6, 0.8, 0.6, 0.8;
    const auto p = select_prototypes(f, coarse_of({0, 0, 0}, 1), 5, 1);
    ASSERT_EQ(p.per_cluster[0].rows(), 3);
    for (int r = 0; r < 3; ++r) {
        EXPECT_NEAR(p.per_cluster[0](r, 0), 0.6, 1e-12);
        EXPECT_NEAR(p.per_cluster[0](r, 1), 0.8, 1e-12);
    }
}

TEST(Prototypes, SingleCenterIsNormalizedMean) {
    std::mt19937_64 gen(1);
    const Matrix f = oracle::random_matrix(gen, 8, 4);
    const auto p = select_prototypes(f, coarse_of({0, 0, 0, 0, 1, 1, 1, kOutlier}, 2), 1, 3);
    const Matrix n = l2_normalized_rows(f);
    const RowVector m0 = n.topRows(4).colwise().mean().normalized();
    const RowVector m1 = n.middleRows(4, 3).colwise().mean().normalized();
    EXPECT_LT((p.per_cluster[0].row(0) - m0).norm(), 1e-12);
    EXPECT_LT((p.per_cluster[1].row(0) - m1).norm(), 1e-12);
}

TEST(Prototypes, MatchIndependentPerClusterKMeans) {
    std::mt19937_64 gen(2);
    const Matrix f = oracle::random_matrix(gen, 12, 3);
    std::vector<int> labels;
    for (int i = 0; i < 12; ++i) {
        labels.push_back(i % 2);
    }
    const std::uint64_t seed = 77;
    const auto p = select_prototypes(f, coarse_of(labels, 2), 2, seed);
    const Matrix n = l2_normalized_rows(f);
    for (int l = 0; l < 2; ++l) {
        Matrix members(6, 3);
        for (int i = 0; i < 6; ++i) {
            members.row(i) = n.row(2 * i + l);
        }
        const auto km = cluster::kmeans(members, 2, cluster_seed(seed, l));
        EXPECT_LT((p.per_cluster[static_cast<std::size_t>(l)] - l2_normalized_rows(km.centers)).norm(), 1e-12);
        EXPECT_TRUE(rows_unit_norm(p.per_cluster[static_cast<std::size_t>(l)]));
    }
}

TEST(RefinedSimilarity, HandAverages) {
    PrototypeSet p;
    Matrix a(2, 2), b(1, 2);
    a << 1, 0, 0, 1;
    b << 0.6, 0.8;
    p.per_cluster = {a, b};
    Matrix f(2, 2);
    f << 1, 0, 0.6, 0.8;
    const Matrix s = refined_similarity(f, p);
    EXPECT_DOUBLE_EQ(s(0, 0), 0.5);  // (1 + 0) / 2
    EXPECT_DOUBLE_EQ(s(0, 1), 0.6);
    EXPECT_DOUBLE_EQ(s(1, 0), 0.7);  // (0.6 + 0.8) / 2
    EXPECT_DOUBLE_EQ(s(1, 1), 1.0);
}

TEST(AssignRefined, ArgmaxWithLowestIndexTies) {
    Matrix s(3, 2);
    s << 0.5, 0.6, 0.4, 0.4, 0.9, 0.1;
    const auto labels = assign_refined_labels(s, coarse_of({0, 1, kOutlier}, 2));
    EXPECT_EQ(labels.refined, (std::vector<int>{1, 0, kOutlier}));
    EXPECT_EQ(labels.coarse, (std::vector<int>{0, 1, kOutlier}));
    labels.validate();
    EXPECT_DOUBLE_EQ(labels.changed_fraction(), 1.0);
}

TEST(AssignRefined, SingleClusterKeepsZero) {
    Matrix s(3, 1);
    s << -0.3, 0.2, 0.9;
    const auto labels = assign_refined_labels(s, coarse_of({0, 0, 0}, 1));
    EXPECT_EQ(labels.refined, (std::vector<int>{0, 0, 0}));
}

TEST(AssignRefined, TightDistinctClustersAreUnchanged) {
    std::mt19937_64 gen(3);
    const Matrix centers = oracle::random_unit_rows(gen, 4, 5);
    Matrix f(20, 5);
    std::vector<int> y;
    for (int i = 0; i < 20; ++i) {
        f.row(i) = centers.row(i % 4);
        y.push_back(i % 4);
    }
    const auto c = coarse_of(y, 4);
    const auto p = select_prototypes(f, c, 3, 0);
    const auto labels = assign_refined_labels(refined_similarity(l2_normalized_rows(f), p), c);
    EXPECT_EQ(labels.refined, labels.coarse);
}

TEST(AssignRefined, PrototypeScaleDoesNotChangeLabels) {
    std::mt19937_64 gen(4);
    const Matrix f = oracle::random_unit_rows(gen, 15, 3);
    PrototypeSet p;
    p.per_cluster = {oracle::random_unit_rows(gen, 2, 3), oracle::random_unit_rows(gen, 3, 3)};
    std::vector<int> y(15, 0);
    y[3] = 1;
    const auto c = coarse_of(y, 2);
    const auto base = assign_refined_labels(refined_similarity(f, p), c);
    for (auto& m : p.per_cluster) {
        m = l2_normalized_rows(m * 3.7);
    }
    EXPECT_EQ(assign_refined_labels(refined_similarity(f, p), c).refined, base.refined);
}

TEST(PseudoLabels, ValidateCatchesBrokenInvariants) {
    PseudoLabelSet s;
    s.coarse = {0, kOutlier};
    s.refined = {0, 0};
    s.num_clusters = 1;
    EXPECT_THROW(s.validate(), std::logic_error);
    s.refined = {2, kOutlier};
    EXPECT_THROW(s.validate(), std::logic_error);
}
