#pragma once

#include "dualref/clustering.hpp"
#include "dualref/types.hpp"

#include <cstdint>
#include <vector>

namespace dualref {

/// Coarse and refined pseudo labels of one epoch. Outliers carry kOutlier in both.
struct PseudoLabelSet {
    Labels coarse;
    Labels refined;
    int num_clusters = 0;

    std::size_t size() const { return coarse.size(); }
    std::size_t num_outliers() const;
    /// Fraction of non-outliers whose refined label differs from the coarse one.
    double changed_fraction() const;
    /// Throws std::logic_error when an invariant is broken.
    void validate() const;
};

namespace refine {

/// Unit-norm sub-cluster centers of every coarse cluster; row r of
/// `per_cluster[l]` is prototype c_{l,r}.
struct PrototypeSet {
    std::vector<Matrix> per_cluster;

    int num_clusters() const { return static_cast<int>(per_cluster.size()); }
};

/// Seed handed to k-means for coarse cluster `l`.
std::uint64_t cluster_seed(std::uint64_t seed, int l);

/// K-means with min(R, |cluster|) centers inside every coarse cluster, run on
/// L2-normalized features; centers are L2-normalized after averaging.
PrototypeSet select_prototypes(const Matrix& features, const cluster::CoarseClusters& coarse, int fine_clusters,
                               std::uint64_t seed, int kmeans_max_iter = 100);

/// s(i,l): mean dot product of normalized feature i with the prototypes of cluster l.
Matrix refined_similarity(const Matrix& normalized_features, const PrototypeSet& prototypes);

/// Refined label = argmax over clusters (ties to the lowest id); outliers stay outliers.
PseudoLabelSet assign_refined_labels(const Matrix& scores, const cluster::CoarseClusters& coarse);

}  // namespace refine
}  // namespace dualref
