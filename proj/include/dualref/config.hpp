#pragma once

#include "dualref/encoder.hpp"
#include "dualref/memory_bank.hpp"

#include "json.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace dualref {

/// Every knob of pretraining and adaptation. JSON keys equal the field names.
struct TrainConfig {
    // Objective
    double alpha = 0.5;
    double mu = 0.1;
    double triplet_margin = 0.3;
    double spread_margin = 0.35;
    int k_pos = 6;
    // Off-line clustering
    int fine_clusters = 5;
    int k_rr = 20;
    bool reciprocal_expansion = false;
    double eps_percentile = 1.6;
    int min_pts = 4;
    int kmeans_max_iter = 100;
    // Batching
    int batch_p = 16;
    int batch_k = 4;
    // Adaptation schedule
    int epochs = 40;
    int iters_per_epoch = 0;  // 0: ceil(non-outliers / batch size)
    double lr = 3.5e-4;
    std::vector<int> lr_decay_epochs{20};
    double lr_decay_factor = 0.1;
    // Source pretraining schedule
    int pretrain_epochs = 80;
    int pretrain_iters_per_epoch = 0;  // 0: ceil(source size / batch size)
    double pretrain_lr = 3.5e-4;
    int pretrain_warmup_epochs = 10;
    double pretrain_warmup_start_factor = 0.1;
    std::vector<int> pretrain_decay_epochs{40, 70};
    double pretrain_decay_factor = 0.1;
    // Optimizer
    double weight_decay = 5e-4;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    // Model
    int feature_dim = 32;
    int hidden_dim = 0;  // 0: 2 * feature_dim
    std::string activation = "tanh";
    double classifier_init_std = 0.01;
    // Memory bank
    std::string bank_mode = "instant";
    double bank_momentum = 0.01;
    // Reproducibility
    std::uint64_t seed = 0;

    int batch_size() const { return batch_p * batch_k; }
    int hidden() const { return hidden_dim > 0 ? hidden_dim : 2 * feature_dim; }
    nn::LrSchedule adaptation_schedule() const;
    nn::LrSchedule pretrain_schedule() const;
    nn::AdamConfig adam() const;
    bank::BankMode bank() const;
    nn::Activation act() const;

    /// Throws ConfigError naming the first offending key.
    void validate() const;
};

nlohmann::json to_json(const TrainConfig& cfg);

/// Starts from the defaults and overrides every key present. Unknown keys and
/// wrongly typed values throw ConfigError; the result is validated.
TrainConfig config_from_json(const nlohmann::json& j);

TrainConfig load_config(const std::string& path);

}  // namespace dualref
