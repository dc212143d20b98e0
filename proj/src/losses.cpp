#include "dualref/losses.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

namespace dualref::loss {

CrossEntropyResult cross_entropy(const Matrix& probabilities, std::span<const int> labels) {
    const Eigen::Index b = probabilities.rows();
    if (static_cast<std::size_t>(b) != labels.size() || b == 0) {
        throw std::invalid_argument("cross_entropy: label count must match a nonempty batch");
    }
    CrossEntropyResult r;
    r.grad_logits = probabilities;
    for (Eigen::Index i = 0; i < b; ++i) {
        const int y = labels[static_cast<std::size_t>(i)];
        if (y < 0 || y >= probabilities.cols()) {
            throw std::invalid_argument("cross_entropy: label " + std::to_string(y) + " out of range");
        }
        r.loss -= std::log(std::max(probabilities(i, y), std::numeric_limits<double>::min()));
        r.grad_logits(i, y) -= 1.0;
    }
    r.loss /= static_cast<double>(b);
    r.grad_logits /= static_cast<double>(b);
    return r;
}

TripletResult batch_hard_triplet_relaxed(const Matrix& features, std::span<const int> labels, double margin) {
    const Eigen::Index b = features.rows();
    if (static_cast<std::size_t>(b) != labels.size() || b == 0) {
        throw std::invalid_argument("triplet: label count must match a nonempty batch");
    }
    if (margin < 0.0) {
        throw std::invalid_argument("triplet: margin must be >= 0");
    }
    Matrix dist(b, b);
    for (Eigen::Index i = 0; i < b; ++i) {
        for (Eigen::Index j = 0; j < b; ++j) {
            dist(i, j) = i == j ? 0.0 : (features.row(i) - features.row(j)).norm();
        }
    }
    TripletResult r;
    r.grad_features = Matrix::Zero(b, features.cols());
    // d||fi - fj|| / dfi, zero at coincident points.
    auto add_pair_grad = [&](Eigen::Index i, Eigen::Index j, double scale) {
        const double d = dist(i, j);
        if (d <= 0.0) {
            return;
        }
        const RowVector u = (features.row(i) - features.row(j)) / d;
        r.grad_features.row(i) += scale * u;
        r.grad_features.row(j) -= scale * u;
    };
    for (Eigen::Index a = 0; a < b; ++a) {
        Eigen::Index pos = a;
        Eigen::Index neg = -1;
        for (Eigen::Index j = 0; j < b; ++j) {
            const bool same = labels[static_cast<std::size_t>(j)] == labels[static_cast<std::size_t>(a)];
            if (same) {
                if (dist(a, j) > dist(a, pos)) {
                    pos = j;
                }
            } else if (neg < 0 || dist(a, j) < dist(a, neg)) {
                neg = j;
            }
        }
        if (neg < 0) {
            continue;
        }
        const double act = margin + dist(a, pos) - dist(a, neg);
        if (act > 0.0) {
            r.loss += act;
            const double w = 1.0 / static_cast<double>(b);
            add_pair_grad(a, pos, w);
            add_pair_grad(a, neg, -w);
        }
    }
    r.loss /= static_cast<double>(b);
    return r;
}

TripletResult batch_hard_triplet(const Matrix& features, std::span<const int> labels, double margin) {
    std::map<int, int> counts;
    for (int y : labels) {
        ++counts[y];
    }
    if (counts.size() < 2) {
        throw std::invalid_argument("triplet: batch needs at least two distinct labels");
    }
    for (const auto& [label, n] : counts) {
        if (n < 2) {
            throw std::invalid_argument("triplet: label " + std::to_string(label) + " appears only once in the batch");
        }
    }
    return batch_hard_triplet_relaxed(features, labels, margin);
}

MetricLosses blend_metric_losses(const MetricLosses& noisy, const MetricLosses& refined, double alpha) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) {
        throw std::invalid_argument("alpha must lie in [0, 1]");
    }
    return MetricLosses{(1.0 - alpha) * noisy.cls + alpha * refined.cls, (1.0 - alpha) * noisy.tri + alpha * refined.tri};
}

double total_loss(const MetricLosses& blended, double spread, double mu) {
    if (mu < 0.0) {
        throw std::invalid_argument("mu must be >= 0");
    }
    return blended.cls + blended.tri + mu * spread;
}

}  // namespace dualref::loss
