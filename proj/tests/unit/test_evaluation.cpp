#include "dualref/data_model.hpp"
#include "dualref/evaluation.hpp"

#include "../common/oracles.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace dualref;
using namespace dualref::eval;

TEST(FScore, PerfectLabels) {
    const std::vector<int> y{3, 3, 5, 7, 7, 7};
    const auto f = pairwise_fscore(y, y);
    EXPECT_EQ(f.precision, 1.0);
    EXPECT_EQ(f.recall, 1.0);
    EXPECT_EQ(f.fscore, 1.0);
}

TEST(FScore, HandEnumeratedFourSamples) {
    const auto f = pairwise_fscore(std::vector<int>{0, 0, 0, 1}, std::vector<int>{0, 0, 1, 1});
    EXPECT_EQ(f.counts.tp, 1u);
    EXPECT_EQ(f.counts.fp, 2u);
    EXPECT_EQ(f.counts.fn, 1u);
    EXPECT_DOUBLE_EQ(f.precision, 1.0 / 3.0);
    EXPECT_DOUBLE_EQ(f.recall, 0.5);
    EXPECT_DOUBLE_EQ(f.fscore, 0.4);
}

TEST(FScore, OneClusterTwoIdentitiesClosedForm) {
    for (int n = 2; n <= 9; ++n) {
        std::vector<int> pseudo(static_cast<std::size_t>(2 * n), 0), truth;
        for (int i = 0; i < 2 * n; ++i) {
            truth.push_back(i < n ? 0 : 1);
        }
        const auto f = pairwise_fscore(pseudo, truth);
        const double choose_n = n * (n - 1) / 2.0;
        const double choose_2n = 2 * n * (2 * n - 1) / 2.0;
        EXPECT_EQ(f.recall, 1.0);
        EXPECT_DOUBLE_EQ(f.precision, 2.0 * choose_n / choose_2n);
        const auto brute = oracle::pair_counts(pseudo, truth);
        EXPECT_EQ(f.counts.tp, brute.tp);
        EXPECT_EQ(f.counts.fp, brute.fp);
    }
}

TEST(FScore, OutliersLeaveThePairUniverse) {
    const std::vector<int> pseudo{0, 0, kOutlier, 1, kOutlier};
    const std::vector<int> truth{0, 0, 0, 1, 1};
    const auto f = pairwise_fscore(pseudo, truth);
    EXPECT_EQ(f.num_outliers, 2u);
    EXPECT_EQ(f.counts.tp + f.counts.fp + f.counts.fn, 1u);
    EXPECT_EQ(f.fscore, 1.0);
}

TEST(FScore, DegenerateDenominatorsAreZero) {
    const auto f = pairwise_fscore(std::vector<int>{0, 1, 2}, std::vector<int>{0, 1, 2});
    EXPECT_EQ(f.precision, 0.0);
    EXPECT_EQ(f.recall, 0.0);
    EXPECT_EQ(f.fscore, 0.0);
    EXPECT_THROW(pairwise_fscore(std::vector<int>{0}, std::vector<int>{0, 1}), std::invalid_argument);
}

TEST(FScore, RandomMatchesPairEnumerationAndIgnoresRelabeling) {
    std::mt19937_64 gen(1);
    std::uniform_int_distribution<int> lab(-1, 4), id(0, 3);
    for (int t = 0; t < 100; ++t) {
        std::vector<int> pseudo, truth, renamed;
        for (int i = 0; i < 15; ++i) {
            pseudo.push_back(lab(gen));
            truth.push_back(id(gen));
            renamed.push_back(pseudo.back() == kOutlier ? kOutlier : 10 - pseudo.back());
        }
        const auto f = pairwise_fscore(pseudo, truth);
        const auto c = oracle::pair_counts(pseudo, truth);
        ASSERT_EQ(f.counts.tp, c.tp);
        ASSERT_EQ(f.counts.fp, c.fp);
        ASSERT_EQ(f.counts.fn, c.fn);
        const auto g = pairwise_fscore(renamed, truth);
        EXPECT_EQ(g.fscore, f.fscore);
    }
}

TEST(AveragePrecision, HandValues) {
    EXPECT_DOUBLE_EQ(average_precision(std::vector<char>{1, 1, 0, 0}), 1.0);
    EXPECT_DOUBLE_EQ(average_precision(std::vector<char>{0, 1, 0}), 0.5);
    EXPECT_DOUBLE_EQ(average_precision(std::vector<char>{1, 0, 1}), (1.0 + 2.0 / 3.0) / 2.0);
}

TEST(Retrieval, SingleQueryRelevantAtRankTwo) {
    Matrix q(1, 1), g(3, 1);
    q << 0;
    g << 1, 2, 3;
    const std::vector<int> qid{7}, qcam{0}, gid{1, 7, 2}, gcam{1, 1, 1};
    const auto r = retrieval_eval({q, qid, qcam}, {g, gid, gcam});
    EXPECT_DOUBLE_EQ(r.mAP, 0.5);
    EXPECT_EQ(r.rank(1), 0.0);
    EXPECT_EQ(r.rank(5), 1.0);
}

TEST(Retrieval, SameCameraMatchesAreJunk) {
    Matrix q(1, 1), g(3, 1);
    q << 0;
    g << 0.1, 0.2, 0.3;
    const std::vector<int> qid{1}, qcam{0}, gid{1, 2, 1}, gcam{0, 1, 1};
    const auto r = retrieval_eval({q, qid, qcam}, {g, gid, gcam});
    EXPECT_DOUBLE_EQ(r.mAP, 0.5);  // junk removed, match sits behind id 2
    const std::vector<int> only_junk{0, 1, 0};
    EXPECT_THROW(retrieval_eval({q, qid, qcam}, {g, std::vector<int>{1, 2, 3}, only_junk}), std::invalid_argument);
}

TEST(Retrieval, RandomInstancesMatchOracle) {
    std::mt19937_64 gen(2);
    for (int t = 0; t < 30; ++t) {
        const Matrix q = oracle::random_unit_rows(gen, 4, 3);
        const Matrix g = oracle::random_unit_rows(gen, 12, 3);
        std::vector<int> qid, qcam, gid, gcam;
        for (int i = 0; i < 4; ++i) {
            qid.push_back(i);
            qcam.push_back(0);
        }
        for (int j = 0; j < 12; ++j) {
            gid.push_back(j % 4);
            gcam.push_back(j % 3);
        }
        const auto r = retrieval_eval({q, qid, qcam}, {g, gid, gcam});
        const auto ref = oracle::retrieval_ap(q, qid, qcam, g, gid, gcam);
        for (std::size_t i = 0; i < ref.size(); ++i) {
            EXPECT_NEAR(r.average_precision[i], ref[i], 1e-12);
        }
        for (std::size_t k = 1; k < r.cmc.size(); ++k) {
            EXPECT_GE(r.cmc[k], r.cmc[k - 1]);
        }
        EXPECT_EQ(r.cmc.back(), 1.0);

        Rng rng(static_cast<std::uint64_t>(t));
        const Matrix rot = random_rotation(3, 2.0, rng);
        const Matrix qr = q * rot.transpose(), gr = g * rot.transpose();
        EXPECT_NEAR(retrieval_eval({qr, qid, qcam}, {gr, gid, gcam}).mAP, r.mAP, 1e-12);
    }
}
