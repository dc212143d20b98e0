#pragma once

#include "dualref/clustering.hpp"
#include "dualref/config.hpp"
#include "dualref/data_model.hpp"
#include "dualref/encoder.hpp"
#include "dualref/evaluation.hpp"
#include "dualref/label_refinery.hpp"
#include "dualref/losses.hpp"
#include "dualref/memory_bank.hpp"
#include "dualref/random.hpp"

#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace dualref::train {

/// Encoder outputs for every row of `raw`, unnormalized.
Matrix extract_features(const nn::EncoderState& encoder, const Matrix& raw);

struct PretrainReport {
    std::vector<double> epoch_loss;
    double train_accuracy = 0.0;
};

/// Cross-entropy plus batch-hard triplet on the true source identities, with
/// the warmup schedule. Identities are remapped to 0..C-1 in order of appearance.
nn::EncoderState pretrain_source(const Dataset& source, const TrainConfig& cfg, Rng& rng,
                                 PretrainReport* report = nullptr);

/// Top-1 accuracy of the encoder's classifier on a labeled dataset whose
/// identities were remapped the way pretrain_source does.
double classification_accuracy(const nn::EncoderState& encoder, const Dataset& data);

struct EpochState {
    int epoch = 0;
    PseudoLabelSet labels;
    refine::PrototypeSet prototypes;
    double eps = 0.0;
    std::size_t num_outliers = 0;
    /// Filled only when ground truth is supplied for diagnostics.
    std::optional<eval::FScore> coarse_fscore;
    std::optional<eval::FScore> refined_fscore;
    /// Jaccard distances of this epoch (kept for optional dumps).
    Matrix jaccard;
};

/// Off-line stage: features -> Jaccard distances -> DBSCAN -> prototypes ->
/// refined labels. `truth` is a diagnostics-only channel used for F-scores.
/// Throws NumericalError when every sample is an outlier.
EpochState offline_epoch(const nn::EncoderState& encoder, const Matrix& target_raw, const TrainConfig& cfg, Rng& rng,
                         int epoch = 0, std::span<const int> truth = {});

/// P distinct non-outlier labels, K samples each (with replacement when a
/// cluster is smaller than K). Throws std::invalid_argument if fewer than P
/// labels are available.
std::vector<int> pk_sample(std::span<const int> labels, int num_clusters, int p, int k, Rng& rng);

struct JointResult {
    loss::LossReport report;
    nn::Params grads;
    Matrix grad_bank;  // N x d, d(spread)/d(bank) not scaled by mu; empty without a bank
    Matrix features;   // raw encoder output for the batch
};

/// Loss of the joint objective on one batch and its gradients with respect
/// to encoder, classifier and bank. Rows labeled kOutlier are skipped by the
/// supervised terms but still feed the spread term.
JointResult joint_objective(const nn::EncoderState& encoder, const bank::MemoryBank& bank, const Matrix& batch_raw,
                            std::span<const int> batch_indices, std::span<const int> coarse,
                            std::span<const int> refined, const TrainConfig& cfg);

/// One Adam step on the encoder and classifier and one bank update, all from
/// the same forward pass. Throws NumericalError on a non-finite loss.
loss::LossReport online_iteration(nn::EncoderState& encoder, bank::MemoryBank& bank, const Matrix& target_raw,
                                  std::span<const int> batch, const EpochState& epoch_state, const TrainConfig& cfg,
                                  double lr);

struct EpochMetrics {
    int epoch = 0;
    int num_clusters = 0;
    std::size_t num_outliers = 0;
    double eps = 0.0;
    std::optional<double> fscore_coarse;
    std::optional<double> fscore_refined;
    double changed_fraction = 0.0;
    int iterations = 0;
    int batch_p = 0;
    double cls = 0.0;
    double tri = 0.0;
    double spread = 0.0;
    double total = 0.0;
};

struct IterationRecord {
    int epoch = 0;
    int iter = 0;
    double cls = 0.0;
    double tri = 0.0;
    double spread = 0.0;
    double total = 0.0;
};

struct AdaptOptions {
    /// Diagnostics only: true target-train identities for per-epoch F-scores.
    std::span<const int> truth;
    /// When set, checkpoints, metrics.csv and iterations.csv go here.
    std::optional<std::filesystem::path> run_dir;
    /// Continue from the newest epoch checkpoint in run_dir.
    bool resume = false;
    std::optional<std::filesystem::path> dump_labels_dir;
    std::optional<std::filesystem::path> dump_jaccard;
    std::optional<std::filesystem::path> dump_bank;
    /// Called after every epoch with the current encoder.
    std::function<void(const EpochMetrics&, const nn::EncoderState&, const bank::MemoryBank&)> on_epoch;
    /// Called after every bank update.
    std::function<void(const bank::MemoryBank&)> on_bank_update;
};

struct AdaptResult {
    nn::EncoderState encoder;
    bank::MemoryBank bank;
    std::vector<EpochMetrics> epochs;
    std::vector<IterationRecord> iterations;
};

/// Alternating training: initialize the bank from the pretrained encoder, then
/// per epoch run the off-line stage, reinitialize the classifier, and run the
/// on-line iterations.
AdaptResult adapt(const nn::EncoderState& pretrained, const Matrix& target_raw, const TrainConfig& cfg, Rng& rng,
                  const AdaptOptions& options = {});

std::string metrics_csv(const std::vector<EpochMetrics>& rows);
std::string iterations_csv(const std::vector<IterationRecord>& rows);

/// L2-normalized encoder features of the query and gallery sets, evaluated
/// with the cross-camera protocol.
eval::RetrievalResult evaluate_retrieval(const nn::EncoderState& encoder, const Dataset& query, const Dataset& gallery);

}  // namespace dualref::train
