#pragma once

#include "dualref/types.hpp"

#include <Eigen/SparseCore>

#include <vector>

namespace dualref::graph {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// k-reciprocal neighbor sets. Each set is sorted and contains the sample itself.
struct ReciprocalSets {
    int k_rr = 0;
    std::vector<std::vector<int>> sets;

    std::size_t size() const { return sets.size(); }
    bool contains(int i, int j) const;
};

struct DistanceGraph {
    SparseMatrix similarity;  // d_S
    Matrix jaccard;           // d_J
};

/// Exact Euclidean distances; symmetric with an exactly zero diagonal.
Matrix pairwise_euclidean(const Matrix& features);

/// Sorted neighbor list of `i`: itself plus the `k` closest other samples.
/// Samples at exactly the k-th distance are all included.
std::vector<int> k_nearest(const Matrix& dist, int i, int k);

/// R*(i,k) = { j in kNN(i) : i in kNN(j) } where kNN includes the sample itself.
/// With `expand`, candidates' k/2 reciprocal sets that overlap the base set by
/// more than two thirds are merged in.
ReciprocalSets reciprocal_sets(const Matrix& dist, int k_rr, bool expand = false);

/// d_S(i,j) = exp(-dist(i,j)) for j in R*(i,k), zero elsewhere.
SparseMatrix similarity_encoding(const Matrix& dist, const ReciprocalSets& sets);

/// d_J(i,j) = 1 - sum_k min(d_S(i,k), d_S(j,k)) / sum_k max(d_S(i,k), d_S(j,k)).
/// Symmetric by construction with a zero diagonal; rows with empty support are
/// at distance 1 from everything else.
Matrix jaccard_distance(const SparseMatrix& similarity);

/// features -> distances -> reciprocal sets -> d_S -> d_J.
DistanceGraph build_distance_graph(const Matrix& features, int k_rr, bool expand = false);

}  // namespace dualref::graph
