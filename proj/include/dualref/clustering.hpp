#pragma once

#include "dualref/types.hpp"

#include <cstdint>
#include <vector>

namespace dualref::cluster {

/// DBSCAN output. Cluster ids are contiguous 0..num_clusters-1, ordered by the
/// lowest-indexed core point of each cluster; kOutlier marks noise.
struct CoarseClusters {
    Labels assignment;
    int num_clusters = 0;

    std::size_t num_outliers() const;
    /// Member indices of every cluster, in ascending order.
    std::vector<std::vector<int>> members() const;
};

/// Density clustering over a precomputed symmetric distance matrix.
/// A point is core when at least `min_pts` points (itself included) lie within
/// `eps`. Border points take the cluster of their lowest-indexed core neighbor.
CoarseClusters dbscan(const Matrix& dist, double eps, int min_pts);

/// Linear-interpolated percentile (`p` in percent) of the strictly off-diagonal
/// upper-triangle entries of a square matrix.
double offdiagonal_percentile(const Matrix& dist, double p);

struct KMeansResult {
    Matrix centers;
    std::vector<int> assignment;
    double inertia = 0.0;
    /// Inertia after every assignment step, in order.
    std::vector<double> inertia_history;
    int iterations = 0;
};

/// Lloyd iterations from k-means++ seeding until the assignment stops changing
/// or `max_iter` updates have run. Empty clusters are reseeded at the point
/// farthest from its current center. Deterministic in `seed`.
KMeansResult kmeans(const Matrix& points, int num_centers, std::uint64_t seed, int max_iter = 100);

}  // namespace dualref::cluster
