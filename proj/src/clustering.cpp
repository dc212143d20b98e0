#include "dualref/clustering.hpp"

#include "dualref/random.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <stdexcept>

namespace dualref::cluster {

std::size_t CoarseClusters::num_outliers() const {
    return static_cast<std::size_t>(std::count(assignment.begin(), assignment.end(), kOutlier));
}

std::vector<std::vector<int>> CoarseClusters::members() const {
    std::vector<std::vector<int>> out(static_cast<std::size_t>(num_clusters));
    for (std::size_t i = 0; i < assignment.size(); ++i) {
        if (assignment[i] != kOutlier) {
            out[static_cast<std::size_t>(assignment[i])].push_back(static_cast<int>(i));
        }
    }
    return out;
}

CoarseClusters dbscan(const Matrix& dist, double eps, int min_pts) {
    const Eigen::Index n = dist.rows();
    if (dist.cols() != n) {
        throw std::invalid_argument("dbscan: distance matrix must be square");
    }
    if (!(eps > 0.0) || min_pts < 1) {
        throw std::invalid_argument("dbscan: need eps > 0 and min_pts >= 1");
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i; j < n; ++j) {
            if (dist(i, j) < 0.0 || !std::isfinite(dist(i, j))) {
                throw std::invalid_argument("dbscan: distances must be finite and nonnegative");
            }
            if (std::abs(dist(i, j) - dist(j, i)) > 1e-9) {
                throw std::invalid_argument("dbscan: distance matrix is not symmetric");
            }
        }
    }

    std::vector<std::vector<int>> neighbors(static_cast<std::size_t>(n));
    std::vector<char> core(static_cast<std::size_t>(n), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
        auto& nb = neighbors[static_cast<std::size_t>(i)];
        for (Eigen::Index j = 0; j < n; ++j) {
            if (dist(i, j) <= eps) {
                nb.push_back(static_cast<int>(j));
            }
        }
        core[static_cast<std::size_t>(i)] = static_cast<int>(nb.size()) >= min_pts;
    }

    CoarseClusters out;
    out.assignment.assign(static_cast<std::size_t>(n), kOutlier);
    std::deque<int> queue;
    for (Eigen::Index seed = 0; seed < n; ++seed) {
        const auto s = static_cast<std::size_t>(seed);
        if (!core[s] || out.assignment[s] != kOutlier) {
            continue;
        }
        const int label = out.num_clusters++;
        out.assignment[s] = label;
        queue.push_back(static_cast<int>(seed));
        while (!queue.empty()) {
            const int p = queue.front();
            queue.pop_front();
            for (int q : neighbors[static_cast<std::size_t>(p)]) {
                const auto qs = static_cast<std::size_t>(q);
                if (core[qs] && out.assignment[qs] == kOutlier) {
                    out.assignment[qs] = label;
                    queue.push_back(q);
                }
            }
        }
    }
    // Border points: neighbor lists are ascending, so the first core found is
    // the lowest-indexed one.
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto is = static_cast<std::size_t>(i);
        if (core[is]) {
            continue;
        }
        for (int q : neighbors[is]) {
            if (core[static_cast<std::size_t>(q)]) {
                out.assignment[is] = out.assignment[static_cast<std::size_t>(q)];
                break;
            }
        }
    }
    return out;
}

double offdiagonal_percentile(const Matrix& dist, double p) {
    const Eigen::Index n = dist.rows();
    if (n < 2) {
        throw std::invalid_argument("percentile needs at least two samples");
    }
    std::vector<double> values;
    values.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i + 1; j < n; ++j) {
            values.push_back(dist(i, j));
        }
    }
    const double pos = std::clamp(p, 0.0, 100.0) / 100.0 * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, values.size() - 1);
    std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(lo), values.end());
    const double v_lo = values[lo];
    double v_hi = v_lo;
    if (hi != lo) {
        v_hi = *std::min_element(values.begin() + static_cast<std::ptrdiff_t>(lo) + 1, values.end());
    }
    return v_lo + (pos - static_cast<double>(lo)) * (v_hi - v_lo);
}

namespace {

double squared_distance(const Matrix& a, Eigen::Index i, const Matrix& b, Eigen::Index j) {
    return (a.row(i) - b.row(j)).squaredNorm();
}

Matrix kmeanspp_init(const Matrix& points, int r, Rng& rng) {
    const Eigen::Index m = points.rows();
    Matrix centers(r, points.cols());
    centers.row(0) = points.row(static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(m))));
    std::vector<double> d2(static_cast<std::size_t>(m));
    for (Eigen::Index i = 0; i < m; ++i) {
        d2[static_cast<std::size_t>(i)] = squared_distance(points, i, centers, 0);
    }
    for (int c = 1; c < r; ++c) {
        double total = 0.0;
        for (double v : d2) {
            total += v;
        }
        Eigen::Index pick = 0;
        if (total > 0.0) {
            const double target = rng.uniform() * total;
            double acc = 0.0;
            pick = m - 1;
            for (Eigen::Index i = 0; i < m; ++i) {
                acc += d2[static_cast<std::size_t>(i)];
                if (acc > target && d2[static_cast<std::size_t>(i)] > 0.0) {
                    pick = i;
                    break;
                }
            }
            while (d2[static_cast<std::size_t>(pick)] == 0.0 && pick > 0) {
                --pick;
            }
        } else {
            pick = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(m)));
        }
        centers.row(c) = points.row(pick);
        for (Eigen::Index i = 0; i < m; ++i) {
            d2[static_cast<std::size_t>(i)] = std::min(d2[static_cast<std::size_t>(i)], squared_distance(points, i, centers, c));
        }
    }
    return centers;
}

// Nearest center; a point keeps its current center when that one is tied for
// nearest, otherwise ties go to the lowest index.
std::vector<int> assign(const Matrix& points, const Matrix& centers, const std::vector<int>& current) {
    std::vector<int> out(static_cast<std::size_t>(points.rows()));
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
        int best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (Eigen::Index c = 0; c < centers.rows(); ++c) {
            const double d = squared_distance(points, i, centers, c);
            if (d < best_d) {
                best_d = d;
                best = static_cast<int>(c);
            }
        }
        if (!current.empty()) {
            const int cur = current[static_cast<std::size_t>(i)];
            if (squared_distance(points, i, centers, cur) == best_d) {
                best = cur;
            }
        }
        out[static_cast<std::size_t>(i)] = best;
    }
    return out;
}

double inertia_of(const Matrix& points, const Matrix& centers, const std::vector<int>& assignment) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
        total += squared_distance(points, i, centers, assignment[static_cast<std::size_t>(i)]);
    }
    return total;
}

// Means of the assigned points; empty clusters take over the point farthest
// from its own center (which mutates `assignment`).
Matrix update_centers(const Matrix& points, std::vector<int>& assignment, int r) {
    Matrix centers = Matrix::Zero(r, points.cols());
    std::vector<int> counts(static_cast<std::size_t>(r), 0);
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
        const int c = assignment[static_cast<std::size_t>(i)];
        centers.row(c) += points.row(i);
        ++counts[static_cast<std::size_t>(c)];
    }
    for (int c = 0; c < r; ++c) {
        if (counts[static_cast<std::size_t>(c)] > 0) {
            centers.row(c) /= counts[static_cast<std::size_t>(c)];
        }
    }
    for (int c = 0; c < r; ++c) {
        if (counts[static_cast<std::size_t>(c)] > 0) {
            continue;
        }
        Eigen::Index far = -1;
        double far_d = -1.0;
        for (Eigen::Index i = 0; i < points.rows(); ++i) {
            const int own = assignment[static_cast<std::size_t>(i)];
            if (counts[static_cast<std::size_t>(own)] < 2) {
                continue;
            }
            const double d = squared_distance(points, i, centers, own);
            if (d > far_d) {
                far_d = d;
                far = i;
            }
        }
        if (far < 0) {
            continue;
        }
        const int own = assignment[static_cast<std::size_t>(far)];
        const auto own_count = counts[static_cast<std::size_t>(own)];
        centers.row(own) = (centers.row(own) * own_count - points.row(far)) / (own_count - 1);
        --counts[static_cast<std::size_t>(own)];
        centers.row(c) = points.row(far);
        counts[static_cast<std::size_t>(c)] = 1;
        assignment[static_cast<std::size_t>(far)] = c;
    }
    return centers;
}

}  // namespace

KMeansResult kmeans(const Matrix& points, int num_centers, std::uint64_t seed, int max_iter) {
    const Eigen::Index m = points.rows();
    if (num_centers < 1 || num_centers > m) {
        throw std::invalid_argument("kmeans: need 1 <= R <= number of points");
    }
    Rng rng(seed);
    KMeansResult out;
    Matrix centers = kmeanspp_init(points, num_centers, rng);
    std::vector<int> assignment = assign(points, centers, {});
    out.inertia_history.push_back(inertia_of(points, centers, assignment));
    for (int it = 0; it < max_iter; ++it) {
        centers = update_centers(points, assignment, num_centers);
        ++out.iterations;
        std::vector<int> next = assign(points, centers, assignment);
        out.inertia_history.push_back(inertia_of(points, centers, next));
        if (next == assignment) {
            break;
        }
        assignment = std::move(next);
    }
    // Centers must be the means of the final assignment even when max_iter cut
    // the loop short.
    std::vector<int> final_assignment = assignment;
    Matrix final_centers = update_centers(points, final_assignment, num_centers);
    if (final_assignment == assignment) {
        centers = std::move(final_centers);
    }
    out.centers = std::move(centers);
    out.assignment = std::move(assignment);
    out.inertia = inertia_of(points, out.centers, out.assignment);
    return out;
}

}  // namespace dualref::cluster
