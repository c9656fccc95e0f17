#include <gtest/gtest.h>

#include "aair/error.hpp"
#include "aair/optim.hpp"
#include "model_fixture.hpp"

namespace aair {
namespace {

// Bias-corrected ADAM for one scalar, written out step by step.
struct ScalarAdam {
  double p, m = 0.0, v = 0.0, lr = 1e-3;
  int t = 0;
  void step(double g) {
    ++t;
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    const double mh = m / (1.0 - std::pow(0.9, t));
    const double vh = v / (1.0 - std::pow(0.999, t));
    p = p - lr * mh / (std::sqrt(vh) + 1e-8);
  }
};

void run_adam(Tensor& p, const Tensor& g, OptimizerState& state) {
  Tensor* ps[] = {&p};
  const Tensor* gs[] = {&g};
  adam_step(ps, gs, state);
}

TEST(Adam, ZeroGradientLeavesParametersUnchanged) {
  Tensor p = Tensor::vector({0.3, -1.2});
  const Tensor before = p;
  OptimizerState state;
  run_adam(p, Tensor({2}, 0.0), state);
  EXPECT_EQ(p, before);
  EXPECT_EQ(state.step, 1u);
}

TEST(Adam, FirstStepClosedForm) {
  Tensor p = Tensor::scalar(0.5);
  OptimizerState state;
  run_adam(p, Tensor::scalar(1.0), state);
  // m_hat = v_hat = 1, so the step is lr / (1 + eps).
  EXPECT_NEAR(p[0], 0.5 - 1e-3 / (1.0 + 1e-8), 1e-12);
  EXPECT_NEAR(state.first_moment[0][0], 0.1, 1e-15);
  EXPECT_NEAR(state.second_moment[0][0], 0.001, 1e-15);
}

TEST(Adam, TwoIdenticalStepsUnrolled) {
  Tensor p = Tensor::scalar(0.5);
  OptimizerState state;
  run_adam(p, Tensor::scalar(1.0), state);
  run_adam(p, Tensor::scalar(1.0), state);
  const double m2 = 0.9 * 0.1 + 0.1, v2 = 0.999 * 0.001 + 0.001;
  const double step2 = 1e-3 * (m2 / (1 - 0.81)) / (std::sqrt(v2 / (1 - 0.998001)) + 1e-8);
  EXPECT_NEAR(p[0], 0.5 - 1e-3 / (1.0 + 1e-8) - step2, 1e-12);
}

TEST(Adam, VaryingGradientsMatchScalarOracle) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> dist(0.0, 3.0);
  Tensor p = Tensor::vector({0.1, -0.4, 2.0});
  std::vector<ScalarAdam> oracle;
  for (double x : p.data) oracle.push_back({x});
  OptimizerState state;
  for (int t = 0; t < 25; ++t) {
    Tensor g({3});
    for (std::size_t i = 0; i < 3; ++i) {
      g[i] = dist(rng);
      oracle[i].step(g[i]);
    }
    run_adam(p, g, state);
  }
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(p[i], oracle[i].p, 1e-12);
}

TEST(Adam, ShapeMismatchIsDimensionError) {
  Tensor p = Tensor::vector({1.0, 2.0});
  OptimizerState state;
  try {
    run_adam(p, Tensor({3}, 0.0), state);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Dimension);
  }
}

TEST(Clip, UnderThresholdIsBitwiseUnchanged) {
  Tensor g = Tensor::vector({1.0, 2.0, 2.0});  // norm 3
  const Tensor before = g;
  Tensor* gs[] = {&g};
  EXPECT_DOUBLE_EQ(clip_gradients(gs, 5.0), 3.0);
  EXPECT_EQ(g, before);
}

TEST(Clip, NormTenIsHalved) {
  Tensor g = Tensor::vector({6.0, 8.0});
  Tensor* gs[] = {&g};
  clip_gradients(gs, 5.0);
  EXPECT_EQ(g, Tensor::vector({3.0, 4.0}));
  const Tensor* view[] = {&g};
  EXPECT_NEAR(global_norm(view), 5.0, 1e-12);
}

TEST(Clip, MultiTensorNormAndDirection) {
  for (int seed = 0; seed < 50; ++seed) {
    std::mt19937_64 rng(seed);
    std::vector<Tensor> grads = {testing::random_tensor({4, 3}, rng, seed % 5 + 0.1),
                                 testing::random_tensor({7}, rng, seed % 5 + 0.1)};
    const auto original = grads;
    std::vector<Tensor*> ptrs = {&grads[0], &grads[1]};
    const double pre = clip_gradients(ptrs, 5.0);
    double sq = 0.0, pre_sq = 0.0;
    for (std::size_t k = 0; k < 2; ++k)
      for (std::size_t i = 0; i < grads[k].size(); ++i) {
        sq += grads[k][i] * grads[k][i];
        pre_sq += original[k][i] * original[k][i];
      }
    EXPECT_NEAR(pre, std::sqrt(pre_sq), 1e-12);
    EXPECT_NEAR(std::sqrt(sq), std::min(pre, 5.0), 1e-9);
    const double ratio = grads[0][0] / original[0][0];
    for (std::size_t k = 0; k < 2; ++k)
      for (std::size_t i = 0; i < grads[k].size(); ++i)
        EXPECT_NEAR(grads[k][i], ratio * original[k][i], 1e-12);
  }
}

TEST(Clip, NonFiniteNormIsNumericFault) {
  Tensor g = Tensor::vector({std::numeric_limits<double>::infinity(), 1.0});
  Tensor* gs[] = {&g};
  try {
    clip_gradients(gs, 5.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NumericFault);
  }
}

TEST(Plateau, ImprovingSequenceKeepsRate) {
  OptimizerState s;
  for (double acc : {0.1, 0.2, 0.5, 0.51}) {
    lr_plateau_decay(s, acc);
    EXPECT_EQ(s.learning_rate, 0.001);
  }
}

TEST(Plateau, TwoFlatWindows) {
  OptimizerState s;
  for (double acc : {0.4, 0.4, 0.4}) lr_plateau_decay(s, acc);
  EXPECT_NEAR(s.learning_rate, 0.00064, 1e-18);
}

TEST(Plateau, MixedSequenceStepThrough) {
  OptimizerState s;
  const double accs[] = {0.3, 0.3, 0.5, 0.45, 0.5};
  const double expected[] = {0.001, 0.0008, 0.0008, 0.00064, 0.000512};
  for (int i = 0; i < 5; ++i) {
    lr_plateau_decay(s, accs[i]);
    EXPECT_NEAR(s.learning_rate, expected[i], 1e-18) << i;
  }
  EXPECT_EQ(s.best_accuracy, 0.5);
}

TEST(Plateau, KFlatWindows) {
  OptimizerState s;
  lr_plateau_decay(s, 0.7);
  for (int k = 1; k <= 30; ++k) {
    lr_plateau_decay(s, 0.7);
    EXPECT_NEAR(s.learning_rate, 0.001 * std::pow(0.8, k), 1e-15 * 0.001);
  }
}

TEST(OptimizerStep, EmbeddingRegularisationGradient) {
  const HyperParams h = testing::tiny_hyper();
  const ModelParams params = init_params(h, 3);
  ModelParams grads = zeros_like(params);
  add_embedding_regularization(params, grads, 0.25);
  for (std::size_t i = 0; i < params.embedding.size(); ++i)
    EXPECT_EQ(grads.embedding[i], 0.5 * params.embedding[i]);
  EXPECT_EQ(grads.inference.hidden_reset, Tensor(grads.inference.hidden_reset.shape, 0.0));
}

TEST(OptimizerStep, RegularisationFeedsAdam) {
  const HyperParams h = testing::tiny_hyper();
  ModelParams params = init_params(h, 3);
  const ModelParams before = params;
  ModelParams grads = zeros_like(params);
  OptimizerState state;
  optimizer_step(params, grads, state, 1e-4);
  EXPECT_EQ(params.doc_fwd.input_reset, before.doc_fwd.input_reset);
  for (std::size_t i = 0; i < params.embedding.size(); ++i) {
    const double x = before.embedding[i];
    if (x == 0.0) continue;
    ScalarAdam oracle{x};
    oracle.step(2e-4 * x);
    EXPECT_NEAR(params.embedding[i], oracle.p, 1e-12);
  }
}

TEST(OptimizerStep, ParamListOrderIsStable) {
  const HyperParams h = testing::tiny_hyper();
  ModelParams params = init_params(h, 3);
  const auto list = param_list(params);
  EXPECT_EQ(list.front(), &params.embedding);
  EXPECT_EQ(list.back(), &params.initial_state);
  EXPECT_EQ(list.size(), 1u + 4 * 6 + 4 + 8 + 6 + 1);
}

}  // namespace
}  // namespace aair
