#include "dualref/label_refinery.hpp"

#include "dualref/random.hpp"

#include <algorithm>
#include <stdexcept>

namespace dualref {

std::size_t PseudoLabelSet::num_outliers() const {
    return static_cast<std::size_t>(std::count(coarse.begin(), coarse.end(), kOutlier));
}

double PseudoLabelSet::changed_fraction() const {
    std::size_t n = 0;
    std::size_t changed = 0;
    for (std::size_t i = 0; i < coarse.size(); ++i) {
        if (coarse[i] == kOutlier) {
            continue;
        }
        ++n;
        changed += coarse[i] != refined[i] ? 1 : 0;
    }
    return n == 0 ? 0.0 : static_cast<double>(changed) / static_cast<double>(n);
}

void PseudoLabelSet::validate() const {
    if (coarse.size() != refined.size()) {
        throw std::logic_error("coarse and refined label lengths differ");
    }
    bool any = false;
    for (std::size_t i = 0; i < coarse.size(); ++i) {
        if ((coarse[i] == kOutlier) != (refined[i] == kOutlier)) {
            throw std::logic_error("refined outlier flags must match coarse ones");
        }
        if (coarse[i] == kOutlier) {
            continue;
        }
        any = true;
        if (coarse[i] < 0 || coarse[i] >= num_clusters || refined[i] < 0 || refined[i] >= num_clusters) {
            throw std::logic_error("label out of range");
        }
    }
    if (any && num_clusters < 1) {
        throw std::logic_error("labels present but no clusters");
    }
}

namespace refine {

std::uint64_t cluster_seed(std::uint64_t seed, int l) {
    return Rng::splitmix(seed ^ Rng::splitmix(static_cast<std::uint64_t>(l) + 1));
}

PrototypeSet select_prototypes(const Matrix& features, const cluster::CoarseClusters& coarse, int fine_clusters,
                               std::uint64_t seed, int kmeans_max_iter) {
    if (fine_clusters < 1) {
        throw std::invalid_argument("number of prototypes per cluster must be >= 1");
    }
    if (coarse.assignment.size() != static_cast<std::size_t>(features.rows())) {
        throw std::invalid_argument("cluster assignment length does not match feature rows");
    }
    const Matrix normalized = l2_normalized_rows(features);
    const auto members = coarse.members();
    PrototypeSet out;
    out.per_cluster.reserve(members.size());
    for (std::size_t l = 0; l < members.size(); ++l) {
        const auto& idx = members[l];
        Matrix points(static_cast<Eigen::Index>(idx.size()), features.cols());
        for (std::size_t r = 0; r < idx.size(); ++r) {
            points.row(static_cast<Eigen::Index>(r)) = normalized.row(idx[r]);
        }
        const int r_l = std::min<int>(fine_clusters, static_cast<int>(idx.size()));
        const auto km = cluster::kmeans(points, r_l, cluster_seed(seed, static_cast<int>(l)), kmeans_max_iter);
        Matrix protos = km.centers;
        for (Eigen::Index r = 0; r < protos.rows(); ++r) {
            const double n = protos.row(r).norm();
            if (n > 0.0) {
                protos.row(r) /= n;
            } else {
                // Center of antipodal members; fall back to one of its points.
                const auto it = std::find(km.assignment.begin(), km.assignment.end(), static_cast<int>(r));
                protos.row(r) = points.row(it - km.assignment.begin());
            }
        }
        out.per_cluster.push_back(std::move(protos));
    }
    return out;
}

Matrix refined_similarity(const Matrix& normalized_features, const PrototypeSet& prototypes) {
    Matrix s(normalized_features.rows(), prototypes.num_clusters());
    for (int l = 0; l < prototypes.num_clusters(); ++l) {
        const Matrix& c = prototypes.per_cluster[static_cast<std::size_t>(l)];
        s.col(l) = (normalized_features * c.transpose()).rowwise().mean();
    }
    return s;
}

PseudoLabelSet assign_refined_labels(const Matrix& scores, const cluster::CoarseClusters& coarse) {
    if (static_cast<std::size_t>(scores.rows()) != coarse.assignment.size()) {
        throw std::invalid_argument("score rows do not match sample count");
    }
    if (scores.cols() != coarse.num_clusters) {
        throw std::invalid_argument("score columns do not match cluster count");
    }
    PseudoLabelSet out;
    out.coarse = coarse.assignment;
    out.refined.assign(coarse.assignment.size(), kOutlier);
    out.num_clusters = coarse.num_clusters;
    for (Eigen::Index i = 0; i < scores.rows(); ++i) {
        if (coarse.assignment[static_cast<std::size_t>(i)] == kOutlier) {
            continue;
        }
        int best = 0;
        for (Eigen::Index l = 1; l < scores.cols(); ++l) {
            if (scores(i, l) > scores(i, best)) {
                best = static_cast<int>(l);
            }
        }
        out.refined[static_cast<std::size_t>(i)] = best;
    }
    return out;
}

}  // namespace refine
}  // namespace dualref
