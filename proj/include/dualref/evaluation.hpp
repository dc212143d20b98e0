#pragma once

#include "dualref/types.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace dualref::eval {

struct PairCounts {
    std::uint64_t tp = 0;
    std::uint64_t fp = 0;
    std::uint64_t fn = 0;
};

struct FScore {
    double precision = 0.0;
    double recall = 0.0;
    double fscore = 0.0;
    PairCounts counts;
    std::size_t num_samples = 0;
    std::size_t num_outliers = 0;
};

/// Pair-level agreement of pseudo labels with true identities. Outliers are
/// dropped from the pair universe; empty denominators give 0.
FScore pairwise_fscore(std::span<const int> pseudo, std::span<const int> truth);

struct RetrievalResult {
    double mAP = 0.0;
    /// cmc[r-1] = fraction of queries with a correct match within the top r.
    std::vector<double> cmc;
    std::vector<double> average_precision;

    double rank(int r) const;
};

struct LabeledFeatures {
    const Matrix& features;
    std::span<const int> identity;
    std::span<const int> camera;
};

/// Euclidean ranking of the gallery per query (ties by gallery index).
/// Gallery entries with the query's identity and camera are skipped. AP is
/// the mean of precision at each relevant rank. Throws std::invalid_argument
/// for a query without any valid match.
RetrievalResult retrieval_eval(const LabeledFeatures& query, const LabeledFeatures& gallery);

/// AP of a single ranked relevance list.
double average_precision(std::span<const char> relevant_in_rank_order);

}  // namespace dualref::eval
