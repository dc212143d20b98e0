#include "dualref/clustering.hpp"
#include "dualref/metric_graph.hpp"

#include "../common/oracles.hpp"

#include <gtest/gtest.h>

#include <map>
#include <random>

using namespace dualref;
using namespace dualref::cluster;

namespace {

// Same partition up to renaming of cluster ids; outliers must match exactly.
bool same_partition(const std::vector<int>& a, const std::vector<int>& b) {
    if (a.size() != b.size()) {
        return false;
    }
    std::map<int, int> ab, ba;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if ((a[i] == kOutlier) != (b[i] == kOutlier)) {
            return false;
        }
        if (a[i] == kOutlier) {
            continue;
        }
        if (ab.emplace(a[i], b[i]).first->second != b[i] || ba.emplace(b[i], a[i]).first->second != a[i]) {
            return false;
        }
    }
    return true;
}

Matrix random_distance(std::mt19937_64& gen, int n) {
    return graph::pairwise_euclidean(oracle::random_matrix(gen, n, 2));
}

}  // namespace

TEST(Dbscan, TwoSeparatedBlobs) {
    Matrix f(6, 1);
    f << 0, 0.1, 0.2, 5, 5.1, 5.2;
    const auto c = dbscan(graph::pairwise_euclidean(f), 0.5, 2);
    EXPECT_EQ(c.num_clusters, 2);
    EXPECT_EQ(c.assignment, (std::vector<int>{0, 0, 0, 1, 1, 1}));
    EXPECT_EQ(c.num_outliers(), 0u);
}

TEST(Dbscan, NoCorePointsMeansAllOutliers) {
    Matrix f(4, 1);
    f << 0, 1, 2, 3;
    const auto c = dbscan(graph::pairwise_euclidean(f), 0.5, 2);
    EXPECT_EQ(c.num_clusters, 0);
    EXPECT_EQ(c.num_outliers(), 4u);
}

TEST(Dbscan, CraftedInstanceMatchesBfsOracle) {
    // Dense run 0..4, a border point 5, far singleton 6, second dense run 7..9.
    Matrix f(10, 1);
    f << 0, 0.3, 0.6, 0.9, 1.2, 1.65, 9, 20, 20.3, 20.6;
    const Matrix d = graph::pairwise_euclidean(f);
    const auto c = dbscan(d, 0.5, 3);
    EXPECT_EQ(c.assignment, oracle::dbscan(d, 0.5, 3));
    EXPECT_EQ(c.assignment[5], 0);
    EXPECT_EQ(c.assignment[6], kOutlier);
}

TEST(Dbscan, RandomInstancesMatchOracle) {
    std::mt19937_64 gen(21);
    std::uniform_real_distribution<double> u(0.2, 1.2);
    for (int t = 0; t < 100; ++t) {
        const Matrix d = random_distance(gen, 5 + t % 20);
        const double eps = u(gen);
        const int min_pts = 1 + t % 4;
        const auto c = dbscan(d, eps, min_pts);
        ASSERT_EQ(c.assignment, oracle::dbscan(d, eps, min_pts));
        for (const auto& m : c.members()) {
            EXPECT_GE(static_cast<int>(m.size()), min_pts);
        }
    }
}

TEST(Dbscan, PermutationInvariantUpToRelabeling) {
    std::mt19937_64 gen(22);
    const int n = 18;
    const Matrix f = oracle::random_matrix(gen, n, 2);
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), gen);
    Matrix g(n, 2);
    for (int i = 0; i < n; ++i) {
        g.row(i) = f.row(perm[static_cast<std::size_t>(i)]);
    }
    // min_pts = 1 has no border points, so the partition is fully determined.
    const auto a = dbscan(graph::pairwise_euclidean(f), 0.6, 1);
    const auto b = dbscan(graph::pairwise_euclidean(g), 0.6, 1);
    std::vector<int> back(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        back[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])] = b.assignment[static_cast<std::size_t>(i)];
    }
    EXPECT_TRUE(same_partition(a.assignment, back));
}

TEST(Dbscan, SmallerEpsNeverMergesClusters) {
    std::mt19937_64 gen(23);
    for (int t = 0; t < 30; ++t) {
        const Matrix d = random_distance(gen, 25);
        const auto wide = dbscan(d, 0.6, 3);
        const auto tight = dbscan(d, 0.4, 3);
        // Points sharing a tight cluster share a wide cluster.
        for (int i = 0; i < 25; ++i) {
            for (int j = 0; j < 25; ++j) {
                if (tight.assignment[i] != kOutlier && tight.assignment[i] == tight.assignment[j]) {
                    EXPECT_NE(wide.assignment[i], kOutlier);
                    EXPECT_EQ(wide.assignment[i], wide.assignment[j]);
                }
            }
        }
        EXPECT_LE(tight.num_clusters, 25);
    }
}

TEST(Dbscan, RejectsBadInput) {
    Matrix d = Matrix::Zero(3, 3);
    d(0, 1) = 1.0;
    EXPECT_THROW(dbscan(d, 0.5, 2), std::invalid_argument);
    d(1, 0) = 1.0;
    d(0, 2) = d(2, 0) = -1.0;
    EXPECT_THROW(dbscan(d, 0.5, 2), std::invalid_argument);
    EXPECT_THROW(dbscan(Matrix::Zero(2, 3), 0.5, 2), std::invalid_argument);
    EXPECT_THROW(dbscan(Matrix::Zero(2, 2), 0.0, 2), std::invalid_argument);
}

TEST(Percentile, LinearInterpolationOverUpperTriangle) {
    Matrix d(3, 3);
    d << 0, 1, 2, 1, 0, 3, 2, 3, 0;
    EXPECT_DOUBLE_EQ(offdiagonal_percentile(d, 0), 1.0);
    EXPECT_DOUBLE_EQ(offdiagonal_percentile(d, 50), 2.0);
    EXPECT_DOUBLE_EQ(offdiagonal_percentile(d, 100), 3.0);
    EXPECT_DOUBLE_EQ(offdiagonal_percentile(d, 25), 1.5);
}

TEST(KMeans, SingleCenterIsTheMean) {
    std::mt19937_64 gen(31);
    const Matrix p = oracle::random_matrix(gen, 9, 3);
    const auto r = kmeans(p, 1, 0);
    EXPECT_LT((r.centers.row(0) - p.colwise().mean()).norm(), 1e-12);
}

TEST(KMeans, SaturationGivesZeroInertia) {
    std::mt19937_64 gen(32);
    const Matrix p = oracle::random_matrix(gen, 6, 2);
    const auto r = kmeans(p, 6, 3);
    EXPECT_LT(r.inertia, 1e-20);
    std::set<int> used(r.assignment.begin(), r.assignment.end());
    EXPECT_EQ(used.size(), 6u);
}

TEST(KMeans, CraftedInstanceReachesExhaustiveOptimum) {
    Matrix p(6, 2);
    p << 0, 0, 0.5, 0.2, 0.1, 0.6, 4, 4, 4.3, 3.8, 3.9, 4.4;
    const auto r = kmeans(p, 2, 0);
    EXPECT_NEAR(r.inertia, oracle::best_two_partition(p), 1e-9);
}

TEST(KMeans, InertiaNonIncreasingAndCentersAreMeans) {
    std::mt19937_64 gen(33);
    for (int t = 0; t < 40; ++t) {
        const int m = 10 + t;
        const Matrix p = oracle::random_matrix(gen, m, 3);
        const auto r = kmeans(p, 2 + t % 5, static_cast<std::uint64_t>(t));
        for (std::size_t i = 1; i < r.inertia_history.size(); ++i) {
            EXPECT_LE(r.inertia_history[i], r.inertia_history[i - 1] + 1e-12);
        }
        for (Eigen::Index c = 0; c < r.centers.rows(); ++c) {
            dualref::RowVector mean = dualref::RowVector::Zero(3);
            int count = 0;
            for (int i = 0; i < m; ++i) {
                if (r.assignment[static_cast<std::size_t>(i)] == c) {
                    mean += p.row(i);
                    ++count;
                }
            }
            ASSERT_GT(count, 0);
            EXPECT_LT((r.centers.row(c) - mean / count).norm(), 1e-9);
        }
    }
}

TEST(KMeans, DeterministicInSeed) {
    std::mt19937_64 gen(34);
    const Matrix p = oracle::random_matrix(gen, 30, 2);
    const auto a = kmeans(p, 4, 99);
    const auto b = kmeans(p, 4, 99);
    EXPECT_EQ(a.assignment, b.assignment);
    EXPECT_EQ(a.centers, b.centers);
}

TEST(KMeans, RejectsTooManyCenters) {
    EXPECT_THROW(kmeans(Matrix::Zero(3, 2), 4, 0), std::invalid_argument);
    EXPECT_THROW(kmeans(Matrix::Zero(3, 2), 0, 0), std::invalid_argument);
}
