#include "dualref/memory_bank.hpp"

#include "dualref/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace dualref::bank {

const char* to_string(BankMode m) { return m == BankMode::Instant ? "instant" : "momentum"; }

BankMode bank_mode_from_string(const std::string& s) {
    if (s == "instant") {
        return BankMode::Instant;
    }
    if (s == "momentum") {
        return BankMode::Momentum;
    }
    throw std::invalid_argument("unknown bank mode '" + s + "'");
}

MemoryBank init_bank(const Matrix& features, BankMode mode, double momentum, int k_pos) {
    if (k_pos < 0) {
        throw std::invalid_argument("k_pos must be >= 0");
    }
    if (!(momentum >= 0.0 && momentum < 1.0)) {
        throw std::invalid_argument("bank momentum must lie in [0, 1)");
    }
    MemoryBank b;
    b.entries = features;
    for (Eigen::Index i = 0; i < b.entries.rows(); ++i) {
        const double n = b.entries.row(i).norm();
        if (!(n > 0.0) || !std::isfinite(n)) {
            throw std::invalid_argument("init_bank: feature row " + std::to_string(i) + " has zero or non-finite norm");
        }
        b.entries.row(i) /= n;
    }
    b.mode = mode;
    b.momentum = momentum;
    b.k_pos = k_pos;
    return b;
}

std::vector<std::vector<int>> positive_sets(const MemoryBank& bank, const Matrix& anchor_features,
                                            std::span<const int> anchor_indices) {
    const auto n = static_cast<int>(bank.size());
    if (static_cast<std::size_t>(anchor_features.rows()) != anchor_indices.size()) {
        throw std::invalid_argument("positive_sets: one index per anchor required");
    }
    const Matrix sims = anchor_features * bank.entries.transpose();
    std::vector<std::vector<int>> out(anchor_indices.size());
    std::vector<int> order;
    for (std::size_t a = 0; a < anchor_indices.size(); ++a) {
        const int self = anchor_indices[a];
        if (self < 0 || self >= n) {
            throw std::invalid_argument("positive_sets: anchor index out of range");
        }
        order.clear();
        for (int j = 0; j < n; ++j) {
            if (j != self) {
                order.push_back(j);
            }
        }
        const auto row = static_cast<Eigen::Index>(a);
        const auto k = std::min<std::size_t>(static_cast<std::size_t>(bank.k_pos), order.size());
        std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(), [&](int x, int y) {
            const double sx = sims(row, x);
            const double sy = sims(row, y);
            return sx > sy || (sx == sy && x < y);
        });
        order.resize(k);
        order.push_back(self);
        std::sort(order.begin(), order.end());
        out[a] = order;
    }
    return out;
}

SpreadResult spread_loss(const Matrix& features, const MemoryBank& bank, const std::vector<std::vector<int>>& positives,
                         double margin) {
    const Eigen::Index b = features.rows();
    const Eigen::Index n = bank.entries.rows();
    if (static_cast<std::size_t>(b) != positives.size() || b == 0) {
        throw std::invalid_argument("spread_loss: one positive set per anchor required");
    }
    if (margin < 0.0) {
        throw std::invalid_argument("spread_loss: margin must be >= 0");
    }
    SpreadResult r;
    r.grad_features = Matrix::Zero(b, features.cols());
    r.grad_bank = Matrix::Zero(n, features.cols());
    const Matrix sims = features * bank.entries.transpose();
    const double inv_b = 1.0 / static_cast<double>(b);
    std::vector<char> is_pos(static_cast<std::size_t>(n));
    Vector ds(n);  // d loss_i / d s_j
    for (Eigen::Index a = 0; a < b; ++a) {
        std::fill(is_pos.begin(), is_pos.end(), 0);
        for (int k : positives[static_cast<std::size_t>(a)]) {
            is_pos[static_cast<std::size_t>(k)] = 1;
        }
        double neg_max = -std::numeric_limits<double>::infinity();
        double pos_max = -std::numeric_limits<double>::infinity();
        for (Eigen::Index j = 0; j < n; ++j) {
            if (is_pos[static_cast<std::size_t>(j)]) {
                pos_max = std::max(pos_max, -sims(a, j));
            } else {
                neg_max = std::max(neg_max, sims(a, j));
            }
        }
        if (neg_max == -std::numeric_limits<double>::infinity() || pos_max == -std::numeric_limits<double>::infinity()) {
            continue;  // empty double sum: log(1 + 0) = 0
        }
        double neg_sum = 0.0;
        double pos_sum = 0.0;
        for (Eigen::Index j = 0; j < n; ++j) {
            if (is_pos[static_cast<std::size_t>(j)]) {
                pos_sum += std::exp(-sims(a, j) - pos_max);
            } else {
                neg_sum += std::exp(sims(a, j) - neg_max);
            }
        }
        const double log_s = margin + neg_max + std::log(neg_sum) + pos_max + std::log(pos_sum);
        // log(1 + S) and S / (1 + S) without overflow.
        const double term = log_s > 0.0 ? log_s + std::log1p(std::exp(-log_s)) : std::log1p(std::exp(log_s));
        const double w = 1.0 / (1.0 + std::exp(-log_s));
        r.loss += term;
        for (Eigen::Index j = 0; j < n; ++j) {
            if (is_pos[static_cast<std::size_t>(j)]) {
                ds(j) = -w * std::exp(-sims(a, j) - pos_max) / pos_sum;
            } else {
                ds(j) = w * std::exp(sims(a, j) - neg_max) / neg_sum;
            }
        }
        ds *= inv_b;
        r.grad_features.row(a) = ds.transpose() * bank.entries;
        r.grad_bank.noalias() += ds * features.row(a);
    }
    r.loss *= inv_b;
    return r;
}

void instant_update(MemoryBank& bank, const Matrix& grad_bank, double eta) {
    if (bank.mode != BankMode::Instant) {
        throw std::logic_error("instant_update on a momentum bank");
    }
    if (grad_bank.rows() != bank.entries.rows() || grad_bank.cols() != bank.entries.cols()) {
        throw std::invalid_argument("instant_update: gradient shape mismatch");
    }
    for (Eigen::Index j = 0; j < bank.entries.rows(); ++j) {
        if ((grad_bank.row(j).array() == 0.0).all()) {
            continue;
        }
        RowVector v = bank.entries.row(j) - eta * grad_bank.row(j);
        const double norm = v.norm();
        if (!(norm > 0.0) || !std::isfinite(norm)) {
            throw NumericalError("memory entry " + std::to_string(j) + " collapsed during update");
        }
        bank.entries.row(j) = v / norm;
    }
}

void momentum_update(MemoryBank& bank, const Matrix& features, std::span<const int> indices) {
    if (bank.mode != BankMode::Momentum) {
        throw std::logic_error("momentum_update on an instant bank");
    }
    if (static_cast<std::size_t>(features.rows()) != indices.size()) {
        throw std::invalid_argument("momentum_update: one index per feature row required");
    }
    const double tau = bank.momentum;
    for (std::size_t r = 0; r < indices.size(); ++r) {
        const int i = indices[r];
        RowVector v = tau * bank.entries.row(i) + (1.0 - tau) * features.row(static_cast<Eigen::Index>(r));
        const double norm = v.norm();
        if (!(norm > 0.0) || !std::isfinite(norm)) {
            throw NumericalError("memory entry " + std::to_string(i) + " collapsed during momentum update");
        }
        bank.entries.row(i) = v / norm;
    }
}

}  // namespace dualref::bank
