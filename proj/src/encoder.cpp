#include "dualref/encoder.hpp"

#include <cmath>
#include <stdexcept>

namespace dualref::nn {

const char* to_string(Activation a) { return a == Activation::Tanh ? "tanh" : "linear"; }

Activation activation_from_string(const std::string& s) {
    if (s == "tanh") {
        return Activation::Tanh;
    }
    if (s == "linear") {
        return Activation::Linear;
    }
    throw std::invalid_argument("unknown activation '" + s + "'");
}

namespace {

template <typename F>
void visit(Params& p, F&& f) {
    f(p.w1.data(), p.w1.size());
    f(p.b1.data(), p.b1.size());
    f(p.w2.data(), p.w2.size());
    f(p.b2.data(), p.b2.size());
    f(p.wc.data(), p.wc.size());
    f(p.bc.data(), p.bc.size());
}

template <typename F>
void visit(const Params& p, F&& f) {
    f(p.w1.data(), p.w1.size());
    f(p.b1.data(), p.b1.size());
    f(p.w2.data(), p.w2.size());
    f(p.b2.data(), p.b2.size());
    f(p.wc.data(), p.wc.size());
    f(p.bc.data(), p.bc.size());
}

void xavier(Matrix& w, Rng& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
    for (Eigen::Index i = 0; i < w.size(); ++i) {
        w.data()[i] = limit * (2.0 * rng.uniform() - 1.0);
    }
}

}  // namespace

Params Params::zeros_like() const {
    Params z;
    z.w1 = Matrix::Zero(w1.rows(), w1.cols());
    z.b1 = Vector::Zero(b1.size());
    z.w2 = Matrix::Zero(w2.rows(), w2.cols());
    z.b2 = Vector::Zero(b2.size());
    z.wc = Matrix::Zero(wc.rows(), wc.cols());
    z.bc = Vector::Zero(bc.size());
    return z;
}

std::size_t Params::size() const {
    std::size_t n = 0;
    visit(*this, [&](const double*, Eigen::Index len) { n += static_cast<std::size_t>(len); });
    return n;
}

Vector Params::flatten() const {
    Vector flat(static_cast<Eigen::Index>(size()));
    Eigen::Index off = 0;
    visit(*this, [&](const double* p, Eigen::Index len) {
        flat.segment(off, len) = Eigen::Map<const Vector>(p, len);
        off += len;
    });
    return flat;
}

void Params::unflatten(const Vector& flat) {
    if (static_cast<std::size_t>(flat.size()) != size()) {
        throw std::invalid_argument("flat parameter vector has the wrong length");
    }
    Eigen::Index off = 0;
    visit(*this, [&](double* p, Eigen::Index len) {
        Eigen::Map<Vector>(p, len) = flat.segment(off, len);
        off += len;
    });
}

EncoderState make_encoder(int d_in, int hidden, int d_out, int num_classes, Activation activation, Rng& rng) {
    if (d_in < 1 || hidden < 1 || d_out < 1 || num_classes < 1) {
        throw std::invalid_argument("encoder dimensions must be >= 1");
    }
    EncoderState s;
    s.activation = activation;
    s.params.w1.resize(hidden, d_in);
    s.params.w2.resize(d_out, hidden);
    xavier(s.params.w1, rng);
    xavier(s.params.w2, rng);
    s.params.b1 = Vector::Zero(hidden);
    s.params.b2 = Vector::Zero(d_out);
    s.params.wc = Matrix::Zero(num_classes, d_out);
    s.params.bc = Vector::Zero(num_classes);
    s.m = s.params.zeros_like();
    s.v = s.params.zeros_like();
    reinit_classifier(s, num_classes, rng);
    return s;
}

void reinit_classifier(EncoderState& state, int num_classes, Rng& rng, double init_std) {
    if (num_classes < 1) {
        throw std::invalid_argument("classifier needs at least one class");
    }
    const int d = state.d_out();
    state.params.wc.resize(num_classes, d);
    for (Eigen::Index i = 0; i < state.params.wc.size(); ++i) {
        state.params.wc.data()[i] = init_std * rng.normal();
    }
    state.params.bc = Vector::Zero(num_classes);
    state.m.wc = Matrix::Zero(num_classes, d);
    state.m.bc = Vector::Zero(num_classes);
    state.v.wc = Matrix::Zero(num_classes, d);
    state.v.bc = Vector::Zero(num_classes);
    state.classifier_step = 0;
}

Matrix forward(const EncoderState& state, const Matrix& batch, ForwardCache* cache) {
    if (batch.rows() == 0) {
        throw std::invalid_argument("forward: empty batch");
    }
    if (batch.cols() != state.d_in()) {
        throw std::invalid_argument("forward: batch width " + std::to_string(batch.cols()) + " != d_in " +
                                    std::to_string(state.d_in()));
    }
    const auto& p = state.params;
    Matrix pre = batch * p.w1.transpose();
    pre.rowwise() += p.b1.transpose();
    Matrix hid = state.activation == Activation::Tanh ? Matrix(pre.array().tanh()) : pre;
    Matrix out = hid * p.w2.transpose();
    out.rowwise() += p.b2.transpose();
    if (cache != nullptr) {
        cache->input = batch;
        cache->hidden_pre = std::move(pre);
        cache->hidden = std::move(hid);
    }
    return out;
}

BackwardResult backward(const EncoderState& state, const ForwardCache& cache, const Matrix& grad_features) {
    const auto& p = state.params;
    if (grad_features.rows() != cache.hidden.rows() || grad_features.cols() != state.d_out() ||
        cache.hidden.cols() != state.hidden() || cache.input.cols() != state.d_in()) {
        throw std::invalid_argument("backward: cache does not match state or gradient shape");
    }
    BackwardResult r;
    r.grads = p.zeros_like();
    r.grads.w2 = grad_features.transpose() * cache.hidden;
    r.grads.b2 = grad_features.colwise().sum().transpose();
    Matrix grad_hidden = grad_features * p.w2;
    if (state.activation == Activation::Tanh) {
        grad_hidden.array() *= 1.0 - cache.hidden.array().square();
    }
    r.grads.w1 = grad_hidden.transpose() * cache.input;
    r.grads.b1 = grad_hidden.colwise().sum().transpose();
    r.grad_input = grad_hidden * p.w1;
    return r;
}

Matrix classifier_logits(const EncoderState& state, const Matrix& features) {
    if (features.cols() != state.d_out()) {
        throw std::invalid_argument("classifier: feature width does not match classifier input");
    }
    Matrix logits = features * state.params.wc.transpose();
    logits.rowwise() += state.params.bc.transpose();
    return logits;
}

Matrix softmax_rows(const Matrix& logits) {
    Matrix p(logits.rows(), logits.cols());
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        const double mx = logits.row(i).maxCoeff();
        p.row(i) = (logits.row(i).array() - mx).exp();
        p.row(i) /= p.row(i).sum();
    }
    return p;
}

Matrix classifier_forward(const EncoderState& state, const Matrix& features) {
    return softmax_rows(classifier_logits(state, features));
}

Matrix classifier_backward(const EncoderState& state, const Matrix& features, const Matrix& grad_logits,
                           Params& grads) {
    if (grad_logits.cols() != state.num_classes() || grad_logits.rows() != features.rows()) {
        throw std::invalid_argument("classifier_backward: gradient shape mismatch");
    }
    grads.wc += grad_logits.transpose() * features;
    grads.bc += grad_logits.colwise().sum().transpose();
    return grad_logits * state.params.wc;
}

namespace {

void adam_block(double* theta, double* m, double* v, const double* g, Eigen::Index n, double lr, double bc1,
                double bc2, const AdamConfig& cfg) {
    for (Eigen::Index i = 0; i < n; ++i) {
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
        const double mhat = m[i] / bc1;
        const double vhat = v[i] / bc2;
        theta[i] -= lr * (mhat / (std::sqrt(vhat) + cfg.eps) + cfg.weight_decay * theta[i]);
    }
}

}  // namespace

void adam_step(EncoderState& state, const Params& grads, double lr, const AdamConfig& cfg) {
    if (grads.size() != state.params.size() || grads.wc.rows() != state.params.wc.rows()) {
        throw std::invalid_argument("adam_step: gradient shapes do not match parameters");
    }
    ++state.step;
    ++state.classifier_step;
    const double e1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    const double e2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
    const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.classifier_step));
    const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.classifier_step));
    auto& p = state.params;
    adam_block(p.w1.data(), state.m.w1.data(), state.v.w1.data(), grads.w1.data(), p.w1.size(), lr, e1, e2, cfg);
    adam_block(p.b1.data(), state.m.b1.data(), state.v.b1.data(), grads.b1.data(), p.b1.size(), lr, e1, e2, cfg);
    adam_block(p.w2.data(), state.m.w2.data(), state.v.w2.data(), grads.w2.data(), p.w2.size(), lr, e1, e2, cfg);
    adam_block(p.b2.data(), state.m.b2.data(), state.v.b2.data(), grads.b2.data(), p.b2.size(), lr, e1, e2, cfg);
    adam_block(p.wc.data(), state.m.wc.data(), state.v.wc.data(), grads.wc.data(), p.wc.size(), lr, c1, c2, cfg);
    adam_block(p.bc.data(), state.m.bc.data(), state.v.bc.data(), grads.bc.data(), p.bc.size(), lr, c1, c2, cfg);
}

void LrSchedule::validate() const {
    if (!(base_lr >= 0.0)) {
        throw std::invalid_argument("base learning rate must be >= 0");
    }
    if (warmup_epochs < 0) {
        throw std::invalid_argument("warmup epochs must be >= 0");
    }
    for (std::size_t i = 1; i < decay_epochs.size(); ++i) {
        if (decay_epochs[i] <= decay_epochs[i - 1]) {
            throw std::invalid_argument("decay epochs must be strictly increasing");
        }
    }
}

LrSchedule pretrain_schedule() { return LrSchedule{3.5e-4, 10, 0.1, {40, 70}, 0.1}; }

LrSchedule adaptation_schedule() { return LrSchedule{3.5e-4, 0, 0.1, {20}, 0.1}; }

double lr_at(const LrSchedule& schedule, int epoch) {
    double lr = schedule.base_lr;
    if (epoch < schedule.warmup_epochs) {
        const double t = static_cast<double>(epoch) / static_cast<double>(schedule.warmup_epochs);
        lr *= schedule.warmup_start_factor + (1.0 - schedule.warmup_start_factor) * t;
    }
    for (int e : schedule.decay_epochs) {
        if (epoch >= e) {
            lr *= schedule.decay_factor;
        }
    }
    return lr;
}

}  // namespace dualref::nn
