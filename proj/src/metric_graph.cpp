#include "dualref/metric_graph.hpp"

#include "dualref/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace dualref::graph {

bool ReciprocalSets::contains(int i, int j) const {
    const auto& s = sets.at(static_cast<std::size_t>(i));
    return std::binary_search(s.begin(), s.end(), j);
}

Matrix pairwise_euclidean(const Matrix& features) {
    const Eigen::Index n = features.rows();
    Matrix dist = Matrix::Zero(n, n);
    parallel_for(static_cast<std::size_t>(n), [&](std::size_t begin, std::size_t end) {
        for (auto i = static_cast<Eigen::Index>(begin); i < static_cast<Eigen::Index>(end); ++i) {
            for (Eigen::Index j = i + 1; j < n; ++j) {
                dist(i, j) = (features.row(i) - features.row(j)).norm();
            }
        }
    });
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i + 1; j < n; ++j) {
            dist(j, i) = dist(i, j);
        }
    }
    return dist;
}

std::vector<int> k_nearest(const Matrix& dist, int i, int k) {
    const int n = static_cast<int>(dist.rows());
    std::vector<int> others;
    others.reserve(static_cast<std::size_t>(n - 1));
    for (int j = 0; j < n; ++j) {
        if (j != i) {
            others.push_back(j);
        }
    }
    const auto by_distance = [&](int a, int b) {
        const double da = dist(i, a);
        const double db = dist(i, b);
        return da < db || (da == db && a < b);
    };
    std::sort(others.begin(), others.end(), by_distance);
    auto kk = std::min<std::size_t>(static_cast<std::size_t>(k), others.size());
    // Samples tied with the k-th neighbor are kept as well.
    while (kk > 0 && kk < others.size() && dist(i, others[kk]) == dist(i, others[kk - 1])) {
        ++kk;
    }
    others.resize(kk);
    others.push_back(i);
    std::sort(others.begin(), others.end());
    return others;
}

namespace {

std::vector<std::vector<int>> mutual_sets(const std::vector<std::vector<int>>& knn) {
    std::vector<std::vector<int>> sets(knn.size());
    for (std::size_t i = 0; i < knn.size(); ++i) {
        for (int j : knn[i]) {
            const auto& back = knn[static_cast<std::size_t>(j)];
            if (std::binary_search(back.begin(), back.end(), static_cast<int>(i))) {
                sets[i].push_back(j);
            }
        }
    }
    return sets;
}

}  // namespace

ReciprocalSets reciprocal_sets(const Matrix& dist, int k_rr, bool expand) {
    const int n = static_cast<int>(dist.rows());
    if (dist.cols() != n) {
        throw std::invalid_argument("distance matrix must be square");
    }
    if (k_rr < 1 || k_rr >= n) {
        throw std::invalid_argument("k_rr must satisfy 1 <= k_rr < N");
    }
    std::vector<std::vector<int>> knn(static_cast<std::size_t>(n));
    parallel_for(static_cast<std::size_t>(n), [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            knn[i] = k_nearest(dist, static_cast<int>(i), k_rr);
        }
    });
    ReciprocalSets out;
    out.k_rr = k_rr;
    out.sets = mutual_sets(knn);
    if (!expand) {
        return out;
    }

    const int half = std::max(1, static_cast<int>(std::lround(k_rr / 2.0)));
    std::vector<std::vector<int>> half_knn(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        half_knn[static_cast<std::size_t>(i)] = k_nearest(dist, i, half);
    }
    const auto half_sets = mutual_sets(half_knn);
    for (std::size_t i = 0; i < out.sets.size(); ++i) {
        std::vector<int> merged = out.sets[i];
        for (int c : out.sets[i]) {
            const auto& cand = half_sets[static_cast<std::size_t>(c)];
            std::vector<int> common;
            std::set_intersection(cand.begin(), cand.end(), out.sets[i].begin(), out.sets[i].end(),
                                  std::back_inserter(common));
            if (3 * common.size() > 2 * cand.size()) {
                std::vector<int> u;
                std::set_union(merged.begin(), merged.end(), cand.begin(), cand.end(), std::back_inserter(u));
                merged = std::move(u);
            }
        }
        out.sets[i] = std::move(merged);
    }
    return out;
}

SparseMatrix similarity_encoding(const Matrix& dist, const ReciprocalSets& sets) {
    const auto n = static_cast<Eigen::Index>(sets.size());
    std::vector<Eigen::Triplet<double>> entries;
    for (Eigen::Index i = 0; i < n; ++i) {
        for (int j : sets.sets[static_cast<std::size_t>(i)]) {
            entries.emplace_back(static_cast<int>(i), j, std::exp(-dist(i, j)));
        }
    }
    SparseMatrix s(n, n);
    s.setFromTriplets(entries.begin(), entries.end());
    s.makeCompressed();
    return s;
}

Matrix jaccard_distance(const SparseMatrix& similarity) {
    const Eigen::Index n = similarity.rows();
    // Column-major view gives, for each k, the rows i with d_S(i,k) > 0.
    const Eigen::SparseMatrix<double, Eigen::ColMajor> by_col = similarity;
    Vector row_sum = Vector::Zero(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (SparseMatrix::InnerIterator it(similarity, i); it; ++it) {
            row_sum(i) += it.value();
        }
    }

    Matrix dj = Matrix::Ones(n, n);
    parallel_for(static_cast<std::size_t>(n), [&](std::size_t begin, std::size_t end) {
        std::vector<double> min_sum(static_cast<std::size_t>(n), 0.0);
        std::vector<char> seen(static_cast<std::size_t>(n), 0);
        std::vector<Eigen::Index> touched;
        for (auto i = static_cast<Eigen::Index>(begin); i < static_cast<Eigen::Index>(end); ++i) {
            for (SparseMatrix::InnerIterator it(similarity, i); it; ++it) {
                const double a = it.value();
                for (decltype(by_col)::InnerIterator jt(by_col, it.col()); jt; ++jt) {
                    const Eigen::Index j = jt.row();
                    if (j <= i) {
                        continue;
                    }
                    if (!seen[static_cast<std::size_t>(j)]) {
                        seen[static_cast<std::size_t>(j)] = 1;
                        touched.push_back(j);
                    }
                    min_sum[static_cast<std::size_t>(j)] += std::min(a, jt.value());
                }
            }
            for (Eigen::Index j : touched) {
                const double mn = min_sum[static_cast<std::size_t>(j)];
                const double mx = row_sum(i) + row_sum(j) - mn;
                dj(i, j) = mx > 0.0 ? 1.0 - mn / mx : 1.0;
                min_sum[static_cast<std::size_t>(j)] = 0.0;
                seen[static_cast<std::size_t>(j)] = 0;
            }
            touched.clear();
        }
    });
    for (Eigen::Index i = 0; i < n; ++i) {
        dj(i, i) = 0.0;
        for (Eigen::Index j = i + 1; j < n; ++j) {
            dj(i, j) = std::clamp(dj(i, j), 0.0, 1.0);
            dj(j, i) = dj(i, j);
        }
    }
    return dj;
}

DistanceGraph build_distance_graph(const Matrix& features, int k_rr, bool expand) {
    const Matrix dist = pairwise_euclidean(features);
    const auto sets = reciprocal_sets(dist, k_rr, expand);
    DistanceGraph g;
    g.similarity = similarity_encoding(dist, sets);
    g.jaccard = jaccard_distance(g.similarity);
    return g;
}

}  // namespace dualref::graph
