#include "dualref/encoder.hpp"

#include "../common/gradcheck.hpp"
#include "../common/oracles.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace dualref;
using namespace dualref::nn;

TEST(Encoder, ShapesAndFlattenRoundTrip) {
    Rng rng(1);
    auto s = make_encoder(5, 7, 3, 4, Activation::Tanh, rng);
    EXPECT_EQ(s.d_in(), 5);
    EXPECT_EQ(s.hidden(), 7);
    EXPECT_EQ(s.d_out(), 3);
    EXPECT_EQ(s.num_classes(), 4);
    const Vector flat = s.params.flatten();
    EXPECT_EQ(static_cast<std::size_t>(flat.size()), s.params.size());
    Params copy = s.params.zeros_like();
    copy.unflatten(flat);
    EXPECT_EQ(copy.flatten(), flat);
}

TEST(Encoder, LinearForwardIsAffine) {
    Rng rng(2);
    auto s = make_encoder(3, 4, 2, 1, Activation::Linear, rng);
    Matrix x(1, 3);
    x << 1, -2, 0.5;
    const Matrix y = forward(s, x);
    const Matrix ref = ((x * s.params.w1.transpose()).rowwise() + s.params.b1.transpose()) * s.params.w2.transpose();
    EXPECT_LT((y - (ref.rowwise() + s.params.b2.transpose())).norm(), 1e-14);
}

TEST(Encoder, BackwardMatchesFiniteDifferences) {
    for (auto act : {Activation::Tanh, Activation::Linear}) {
        Rng rng(3);
        auto s = make_encoder(4, 6, 3, 2, act, rng);
        std::mt19937_64 gen(4);
        const Matrix x = oracle::random_matrix(gen, 5, 4);
        const Matrix w = oracle::random_matrix(gen, 5, 3);  // loss = sum(w .* F(x))
        ForwardCache cache;
        forward(s, x, &cache);
        const auto back = backward(s, cache, w);
        const Vector flat = s.params.flatten();
        auto loss_of = [&](const Matrix& p) {
            auto t = s;
            t.params.unflatten(Eigen::Map<const Vector>(p.data(), p.size()));
            return forward(t, x).cwiseProduct(w).sum();
        };
        const Matrix analytic = back.grads.flatten().transpose();
        const Matrix numeric = gradcheck::numeric(loss_of, flat.transpose());
        EXPECT_LT(gradcheck::relative_error(analytic, numeric), 1e-6) << to_string(act);
        const auto input_loss = [&](const Matrix& xi) { return forward(s, xi).cwiseProduct(w).sum(); };
        EXPECT_LT(gradcheck::relative_error(back.grad_input, gradcheck::numeric(input_loss, x)), 1e-6);
    }
}

TEST(Classifier, SoftmaxRowsSumToOneAndSurviveLargeLogits) {
    Matrix z(2, 3);
    z << 1000, 1001, 999, -5, 0, 5;
    const Matrix p = softmax_rows(z);
    EXPECT_NEAR(p.row(0).sum(), 1.0, 1e-15);
    EXPECT_NEAR(p.row(1).sum(), 1.0, 1e-15);
    EXPECT_TRUE(p.allFinite());
    EXPECT_GT(p(0, 1), p(0, 0));
}

TEST(Classifier, ReinitResetsMomentsAndStep) {
    Rng rng(5);
    auto s = make_encoder(3, 4, 2, 3, Activation::Tanh, rng);
    Params g = s.params.zeros_like();
    g.wc.setOnes();
    g.w1.setOnes();
    adam_step(s, g, 1e-3);
    EXPECT_EQ(s.classifier_step, 1);
    const Matrix w1 = s.params.w1;
    reinit_classifier(s, 5, rng, 0.01);
    EXPECT_EQ(s.num_classes(), 5);
    EXPECT_EQ(s.classifier_step, 0);
    EXPECT_EQ(s.step, 1);
    EXPECT_EQ(s.m.wc.rows(), 5);
    EXPECT_EQ(s.m.wc.norm(), 0.0);
    EXPECT_EQ(s.params.w1, w1);
    EXPECT_NE(s.m.w1.norm(), 0.0);
}

TEST(Adam, FirstStepMovesBySignTimesLr) {
    Rng rng(6);
    auto s = make_encoder(2, 2, 2, 2, Activation::Linear, rng);
    const auto before = s.params;
    Params g = s.params.zeros_like();
    g.b1 << 0.3, -2.0;
    AdamConfig cfg;
    cfg.weight_decay = 0.0;
    adam_step(s, g, 0.01, cfg);
    // Bias-corrected first step is lr * g / (|g| + eps').
    EXPECT_NEAR(s.params.b1(0) - before.b1(0), -0.01, 1e-7);
    EXPECT_NEAR(s.params.b1(1) - before.b1(1), 0.01, 1e-7);
    EXPECT_EQ(s.params.w1, before.w1);
}

TEST(Adam, ZeroLearningRateLeavesParameters) {
    Rng rng(7);
    auto s = make_encoder(2, 3, 2, 2, Activation::Tanh, rng);
    const Vector before = s.params.flatten();
    Params g = s.params.zeros_like();
    g.w2.setConstant(1.0);
    adam_step(s, g, 0.0);
    EXPECT_EQ(s.params.flatten(), before);
}

TEST(Schedule, PretrainWarmupAndDecay) {
    const auto s = pretrain_schedule();
    EXPECT_NEAR(lr_at(s, 0), 3.5e-5, 1e-15);
    EXPECT_NEAR(lr_at(s, 10), 3.5e-4, 1e-15);
    EXPECT_NEAR(lr_at(s, 39), 3.5e-4, 1e-15);
    EXPECT_NEAR(lr_at(s, 40), 3.5e-5, 1e-15);
    EXPECT_NEAR(lr_at(s, 70), 3.5e-6, 1e-16);
    for (int e = 1; e < 10; ++e) {
        EXPECT_GT(lr_at(s, e), lr_at(s, e - 1));
    }
}

TEST(Schedule, AdaptationStepDecay) {
    const auto s = adaptation_schedule();
    EXPECT_DOUBLE_EQ(lr_at(s, 0), 3.5e-4);
    EXPECT_DOUBLE_EQ(lr_at(s, 19), 3.5e-4);
    EXPECT_NEAR(lr_at(s, 20), 3.5e-5, 1e-18);
    LrSchedule bad;
    bad.base_lr = -1;
    EXPECT_THROW(bad.validate(), std::invalid_argument);
}
