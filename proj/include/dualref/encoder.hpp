#pragma once

#include "dualref/random.hpp"
#include "dualref/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace dualref::nn {

enum class Activation { Tanh, Linear };

const char* to_string(Activation a);
Activation activation_from_string(const std::string& s);

/// Trainable tensors: the encoder MLP (w1, b1, w2, b2) and the identity
/// classifier (wc, bc). Gradients and Adam moments use the same layout.
struct Params {
    Matrix w1;  // hidden x d_in
    Vector b1;
    Matrix w2;  // d_out x hidden
    Vector b2;
    Matrix wc;  // classes x d_out
    Vector bc;

    Params zeros_like() const;
    std::size_t size() const;
    /// Concatenation of all tensors in declaration order (row-major).
    Vector flatten() const;
    /// Inverse of flatten(); shapes are taken from *this.
    void unflatten(const Vector& flat);
};

struct EncoderState {
    Activation activation = Activation::Tanh;
    Params params;
    Params m;
    Params v;
    std::int64_t step = 0;             // Adam steps taken by the encoder
    std::int64_t classifier_step = 0;  // Adam steps since the classifier was last reset

    int d_in() const { return static_cast<int>(params.w1.cols()); }
    int hidden() const { return static_cast<int>(params.w1.rows()); }
    int d_out() const { return static_cast<int>(params.w2.rows()); }
    int num_classes() const { return static_cast<int>(params.wc.rows()); }
};

/// Xavier-uniform MLP weights, zero biases, and a freshly initialized classifier.
EncoderState make_encoder(int d_in, int hidden, int d_out, int num_classes, Activation activation, Rng& rng);

/// New classifier of `num_classes` rows drawn from N(0, init_std^2); its Adam
/// moments and step counter reset. Encoder parameters are untouched.
void reinit_classifier(EncoderState& state, int num_classes, Rng& rng, double init_std = 0.01);

struct ForwardCache {
    Matrix input;
    Matrix hidden_pre;
    Matrix hidden;
};

/// features = act(x W1^T + b1) W2^T + b2, one row per sample.
Matrix forward(const EncoderState& state, const Matrix& batch, ForwardCache* cache = nullptr);

struct BackwardResult {
    Params grads;  // classifier tensors are zero
    Matrix grad_input;
};

BackwardResult backward(const EncoderState& state, const ForwardCache& cache, const Matrix& grad_features);

Matrix classifier_logits(const EncoderState& state, const Matrix& features);

/// Row-wise softmax with max shift.
Matrix softmax_rows(const Matrix& logits);

/// Class probabilities, B x L.
Matrix classifier_forward(const EncoderState& state, const Matrix& features);

/// Adds classifier gradients into `grads` and returns the gradient wrt features.
Matrix classifier_backward(const EncoderState& state, const Matrix& features, const Matrix& grad_logits,
                           Params& grads);

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 5e-4;  // decoupled
};

void adam_step(EncoderState& state, const Params& grads, double lr, const AdamConfig& cfg = {});

/// Linear warmup from `warmup_start_factor * base_lr` to `base_lr` over
/// `warmup_epochs`, then a factor `decay_factor` at every epoch in `decay_epochs`.
struct LrSchedule {
    double base_lr = 3.5e-4;
    int warmup_epochs = 0;
    double warmup_start_factor = 0.1;
    std::vector<int> decay_epochs{20};
    double decay_factor = 0.1;

    void validate() const;
};

/// 10 warmup epochs 3.5e-5 -> 3.5e-4, then /10 at epochs 40 and 70 (80 in total).
LrSchedule pretrain_schedule();
/// 3.5e-4, /10 at epoch 20 (40 in total).
LrSchedule adaptation_schedule();

double lr_at(const LrSchedule& schedule, int epoch);

}  // namespace dualref::nn
