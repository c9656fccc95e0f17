#include <gtest/gtest.h>

#include "aair/error.hpp"
#include "aair/optim.hpp"
#include "aair/prediction.hpp"
#include "model_fixture.hpp"

namespace aair {
namespace {

using testing::tiny_hyper;

double orthogonality_error(const Tensor& w) {
  const std::size_t n = w.rows();
  double worst = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double dot = 0.0;
      for (std::size_t k = 0; k < n; ++k) dot += w(k, i) * w(k, j);
      worst = std::max(worst, std::abs(dot - (i == j ? 1.0 : 0.0)));
    }
  return worst;
}

void for_each_recurrent(const ModelParams& p, const std::function<void(const std::string&, const Tensor&)>& f) {
  for_each_param(
      [&](const std::string& name, const Tensor& t) {
        if (name.find(".hidden_reset") != std::string::npos || name.find(".hidden_update") != std::string::npos ||
            name.find(".hidden_candidate") != std::string::npos)
          f(name, t);
      },
      p);
}

TEST(Init, RecurrentMatricesAreOrthogonal) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const ModelParams p = init_params(tiny_hyper(), seed);
    int count = 0;
    for_each_recurrent(p, [&](const std::string& name, const Tensor& t) {
      ++count;
      EXPECT_LT(orthogonality_error(t), 1e-10) << name;
    });
    EXPECT_EQ(count, 15);
  }
  HyperParams desk = HyperParams::desk();
  desk.vocab_size = 10;
  for_each_recurrent(init_params(desk, 4), [](const std::string& name, const Tensor& t) {
    EXPECT_LT(orthogonality_error(t), 1e-10) << name;
  });
}

TEST(Init, SameSeedIsBitwiseIdentical) {
  const auto a = init_params(tiny_hyper(), 9), b = init_params(tiny_hyper(), 9), c = init_params(tiny_hyper(), 10);
  bool all_equal = true, any_diff = false;
  for_each_param(
      [&](const std::string&, const Tensor& x, const Tensor& y, const Tensor& z) {
        all_equal = all_equal && x == y;
        any_diff = any_diff || x != z;
      },
      a, b, c);
  EXPECT_TRUE(all_equal);
  EXPECT_TRUE(any_diff);
}

TEST(Init, BiasesAndInitialStateAreZero) {
  const auto p = init_params(tiny_hyper(), 5);
  for (const Tensor* t : {&p.attention.query_bias, &p.attention.doc_bias, &p.gates.query.hidden_b,
                          &p.gates.query.out_b, &p.gates.document.hidden_b, &p.gates.document.out_b,
                          &p.initial_state})
    EXPECT_EQ(*t, Tensor(t->shape, 0.0));
}

TEST(Init, ShapesFollowDimensions) {
  const HyperParams h = tiny_hyper(20);
  const auto p = init_params(h, 5);
  EXPECT_EQ(p.embedding.shape, (Shape{20, 8}));
  EXPECT_EQ(p.query_fwd.input_reset.shape, (Shape{4, 8}));
  EXPECT_EQ(p.doc_bwd.hidden_candidate.shape, (Shape{4, 4}));
  EXPECT_EQ(p.attention.query_proj.shape, (Shape{8, 6}));
  EXPECT_EQ(p.attention.doc_proj.shape, (Shape{8, 14}));
  EXPECT_EQ(p.gates.query.hidden_w.shape, (Shape{8, 30}));
  EXPECT_EQ(p.gates.document.out_w.shape, (Shape{8, 8}));
  EXPECT_EQ(p.inference.input_update.shape, (Shape{6, 16}));
  EXPECT_EQ(p.inference.hidden_update.shape, (Shape{6, 6}));
  EXPECT_EQ(p.initial_state.shape, (Shape{6}));
}

// 128 x 384 block: standard errors are 0.05/sqrt(n) for the mean and
// about 0.05/sqrt(2n) for the standard deviation.
TEST(Init, WeightStatisticsAtFullWidth) {
  HyperParams h = HyperParams::paper();
  h.vocab_size = 10;
  const auto p = init_params(h, 21);
  const Tensor& w = p.doc_fwd.input_reset;
  ASSERT_EQ(w.shape, (Shape{128, 384}));
  const double n = static_cast<double>(w.size());
  double mean = 0.0;
  for (double x : w.data) mean += x;
  mean /= n;
  double var = 0.0;
  for (double x : w.data) var += (x - mean) * (x - mean);
  const double sd = std::sqrt(var / (n - 1));
  EXPECT_LT(std::abs(mean), 3 * 0.05 / std::sqrt(n));
  EXPECT_LT(std::abs(sd - 0.05), 3 * 0.05 / std::sqrt(2 * n));
  EXPECT_LT(orthogonality_error(p.inference.hidden_candidate), 1e-10);
}

TEST(HyperParams, ProfilesAndValidation) {
  const auto paper = HyperParams::profile("paper");
  EXPECT_EQ(paper.embed_dim, 384u);
  EXPECT_EQ(paper.hidden_dim, 128u);
  EXPECT_EQ(paper.state_dim, 512u);
  EXPECT_EQ(paper.steps, 8u);
  EXPECT_EQ(paper.batch_size, 32u);
  EXPECT_EQ(paper.learning_rate, 0.001);
  EXPECT_EQ(paper.grad_clip, 5.0);
  EXPECT_EQ(paper.decay_factor, 0.8);
  const auto desk = HyperParams::profile("desk");
  EXPECT_EQ(desk.embed_dim, 32u);
  EXPECT_EQ(desk.hidden_dim, 32u);
  EXPECT_EQ(desk.state_dim, 64u);
  EXPECT_EQ(desk.steps, 3u);
  try {
    HyperParams::profile("laptop");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Config);
  }
  HyperParams bad = tiny_hyper();
  bad.steps = 0;
  EXPECT_THROW(bad.validate(), Error);
  bad = tiny_hyper();
  bad.dropout = 1.0;
  EXPECT_THROW(bad.validate(), Error);
}

TEST(HyperParams, MapRoundTripAndUnknownKeys) {
  HyperParams h = tiny_hyper();
  h.learning_rate = 0.0007;
  h.fixed_query_attention = true;
  HyperParams back = HyperParams::desk();
  back.apply(h.to_map());
  EXPECT_EQ(back, h);
  try {
    back.apply({{"depth", "3"}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Config);
  }
  EXPECT_THROW(back.apply({{"steps", "three"}}), Error);
}

// One example: |Q| = 5, |D| = 12, padded to 14 inside a two-row batch.
TEST(Forward, LossIsFiniteAtInitialisation) {
  const HyperParams h = tiny_hyper();
  const auto params = init_params(h, 1);
  const Batch batch = testing::fixture_batch();
  Graph g;
  const auto bound = bind_constant(g, params);
  const auto r = forward_example(bound, batch, 0, {2, false, {}});
  ASSERT_TRUE(r.loss.valid());
  const double loss = r.loss.value()[0];
  EXPECT_TRUE(std::isfinite(loss));
  EXPECT_GT(loss, 0.0);
  EXPECT_EQ(r.run.steps.size(), 2u);
  EXPECT_EQ(r.document.padded_length(), 14u);
  EXPECT_EQ(r.document.length, 12u);
}

TEST(Forward, RowEncodingIgnoresBatchPadding) {
  const HyperParams h = tiny_hyper();
  const auto params = testing::random_params(h, 2);
  const Batch batch = testing::fixture_batch();
  std::vector<Example> single(1);
  single[0].source_id = "a";
  single[0].query = {4, 2, 5, 6, 7};
  single[0].document = {8, 9, 4, 10, 11, 9, 12, 13, 10, 14, 9, 15};
  single[0].candidates = {9, 10, 11};
  single[0].answer = 9;
  single[0].answer_positions = positions_of(single[0].document, 9);
  const std::size_t row0[] = {0};
  const Batch alone = make_batch(single, row0);
  Graph g;
  const auto bound = bind_constant(g, params);
  const auto padded = forward_example(bound, batch, 0, {3, false, {}});
  const auto plain = forward_example(bound, alone, 0, {3, false, {}});
  EXPECT_EQ(padded.loss.value(), plain.loss.value());
}

TEST(Forward, UsesOneEncoderPassPerSequence) {
  const HyperParams h = tiny_hyper();
  const auto params = init_params(h, 1);
  const Batch batch = testing::fixture_batch();
  Graph g;
  const auto bound = bind_constant(g, params);
  const auto before = encoder_invocations();
  forward_example(bound, batch, 1, {5, false, {}});
  EXPECT_EQ(encoder_invocations() - before, 2u);
}

// Whole-model check at d=8, h=4, s=6, T=2, |Q|=5, |D|=12: every parameter
// tensor's analytic gradient against central differences.
TEST(Forward, WholeModelGradientCheck) {
  const HyperParams h = tiny_hyper();
  const ModelParams params = testing::random_params(h, 77, 0.3);
  const auto errors = testing::model_gradient_errors(params, testing::fixture_batch(), 0, 2);
  EXPECT_EQ(errors.size(), param_list(params).size());
  for (const auto& [name, err] : errors) EXPECT_LT(err, 1e-4) << name;
}

}  // namespace
}  // namespace aair
