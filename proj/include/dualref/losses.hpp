#pragma once

#include "dualref/types.hpp"

#include <span>

namespace dualref::loss {

struct CrossEntropyResult {
    double loss = 0.0;
    Matrix grad_logits;  // (p - onehot) / B
};

/// Mean over the batch of -log p[label].
CrossEntropyResult cross_entropy(const Matrix& probabilities, std::span<const int> labels);

struct TripletResult {
    double loss = 0.0;
    Matrix grad_features;
};

/// Batch-hard triplet loss: per anchor, the farthest same-label sample and the
/// nearest other-label sample (ties to the lowest index), hinge at `margin`,
/// averaged over anchors. Requires every label to occur at least twice and at
/// least two distinct labels.
TripletResult batch_hard_triplet(const Matrix& features, std::span<const int> labels, double margin);

/// Same loss without the batch-composition precondition. An anchor's positive
/// set always contains the anchor itself; anchors with no negative contribute
/// zero but still count in the mean.
TripletResult batch_hard_triplet_relaxed(const Matrix& features, std::span<const int> labels, double margin);

struct MetricLosses {
    double cls = 0.0;
    double tri = 0.0;
};

/// (1 - alpha) * noisy + alpha * refined, for both terms.
MetricLosses blend_metric_losses(const MetricLosses& noisy, const MetricLosses& refined, double alpha);

/// cls + tri + mu * spread.
double total_loss(const MetricLosses& blended, double spread, double mu);

/// One iteration's loss breakdown.
struct LossReport {
    double cls_noisy = 0.0;
    double cls_refined = 0.0;
    double tri_noisy = 0.0;
    double tri_refined = 0.0;
    double spread = 0.0;
    double cls = 0.0;
    double tri = 0.0;
    double total = 0.0;
    Matrix grad_features;
};

}  // namespace dualref::loss
