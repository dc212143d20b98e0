#pragma once

#include "dualref/types.hpp"

#include <span>
#include <string>
#include <vector>

namespace dualref::bank {

enum class BankMode { Instant, Momentum };

const char* to_string(BankMode m);
BankMode bank_mode_from_string(const std::string& s);

/// One unit-norm entry per target-train sample.
struct MemoryBank {
    Matrix entries;
    BankMode mode = BankMode::Instant;
    double momentum = 0.01;  // tau, momentum mode only
    int k_pos = 6;

    std::size_t size() const { return static_cast<std::size_t>(entries.rows()); }
};

/// v_i = f_i / ||f_i||. Throws std::invalid_argument on a zero row.
MemoryBank init_bank(const Matrix& features, BankMode mode = BankMode::Instant, double momentum = 0.01, int k_pos = 6);

/// Per anchor: the anchor's own index plus the k_pos bank entries with the
/// largest dot product against its feature (excluding itself, ties to the
/// lowest index). Sets are sorted.
std::vector<std::vector<int>> positive_sets(const MemoryBank& bank, const Matrix& anchor_features,
                                            std::span<const int> anchor_indices);

struct SpreadResult {
    double loss = 0.0;
    Matrix grad_features;  // B x d
    Matrix grad_bank;      // N x d
};

/// Spread-out regularizer over the whole bank, averaged over the batch anchors:
///   mean_i log(1 + sum_{k in K_i} sum_{n not in K_i} exp(f_i.v_n - f_i.v_k + m)).
/// The double sum factorizes into exp(m + lse_neg(s) + lse_pos(-s)) with
/// s = V f_i, which keeps the evaluation O(N d) per anchor and overflow free.
SpreadResult spread_loss(const Matrix& features, const MemoryBank& bank, const std::vector<std::vector<int>>& positives,
                         double margin);

/// v_j <- (v_j - eta * g_j) / ||.||. Rows with an all-zero gradient are left
/// alone. Throws NumericalError if an entry collapses to zero.
void instant_update(MemoryBank& bank, const Matrix& grad_bank, double eta);

/// v_i <- normalize(tau v_i + (1 - tau) f_i) for every batch row.
void momentum_update(MemoryBank& bank, const Matrix& features, std::span<const int> indices);

}  // namespace dualref::bank
