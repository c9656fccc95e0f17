#include <gtest/gtest.h>

#include "aair/encoder.hpp"
#include "aair/error.hpp"
#include "test_support.hpp"

namespace aair {
namespace {

using testing::random_tensor;

GruParamsT<Tensor> random_gru(std::size_t in, std::size_t hidden, std::mt19937_64& rng) {
  return {random_tensor({hidden, in}, rng, 0.5),     random_tensor({hidden, in}, rng, 0.5),
          random_tensor({hidden, in}, rng, 0.5),     random_tensor({hidden, hidden}, rng, 0.5),
          random_tensor({hidden, hidden}, rng, 0.5), random_tensor({hidden, hidden}, rng, 0.5)};
}

GruParams bind_gru(Graph& g, const GruParamsT<Tensor>& p) {
  return {g.constant(p.input_reset),  g.constant(p.input_update),  g.constant(p.input_candidate),
          g.constant(p.hidden_reset), g.constant(p.hidden_update), g.constant(p.hidden_candidate)};
}

std::vector<double> hand_matvec(const Tensor& m, const std::vector<double>& x) {
  std::vector<double> y(m.rows(), 0.0);
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) y[i] += m(i, j) * x[j];
  return y;
}

// Plain-double evaluation of the bias-free GRU update.
std::vector<double> hand_gru(const std::vector<double>& x, const std::vector<double>& h,
                             const GruParamsT<Tensor>& p) {
  auto sig = [](double z) { return 1.0 / (1.0 + std::exp(-z)); };
  const auto xr = hand_matvec(p.input_reset, x), hr = hand_matvec(p.hidden_reset, h);
  const auto xu = hand_matvec(p.input_update, x), hu = hand_matvec(p.hidden_update, h);
  std::vector<double> r(h.size()), u(h.size()), rh(h.size());
  for (std::size_t i = 0; i < h.size(); ++i) {
    r[i] = sig(xr[i] + hr[i]);
    u[i] = sig(xu[i] + hu[i]);
    rh[i] = r[i] * h[i];
  }
  const auto xc = hand_matvec(p.input_candidate, x), hc = hand_matvec(p.hidden_candidate, rh);
  std::vector<double> out(h.size());
  for (std::size_t i = 0; i < h.size(); ++i)
    out[i] = (1.0 - u[i]) * h[i] + u[i] * std::tanh(xc[i] + hc[i]);
  return out;
}

TEST(GruStep, MatchesHandEvaluation) {
  for (int seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(seed);
    const auto p = random_gru(3, 4, rng);
    const Tensor x = random_tensor({3}, rng), h = random_tensor({4}, rng);
    Graph g;
    const Var out = gru_step(g.constant(x), g.constant(h), bind_gru(g, p));
    const auto expected = hand_gru(x.data, h.data, p);
    for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(out.value()[i], expected[i], 1e-14);
  }
}

TEST(GruStep, FullUpdateGateKeepsCandidateAndClosedGateKeepsState) {
  Graph g;
  GruParamsT<Tensor> p{Tensor({1, 1}, 0.0), Tensor({1, 1}, 0.0), Tensor({1, 1}, 1.0),
                       Tensor({1, 1}, 0.0), Tensor({1, 1}, 0.0), Tensor({1, 1}, 0.0)};
  // u = sigmoid(0) = 1/2, c = tanh(x): h' = h/2 + tanh(x)/2.
  const Var out = gru_step(g.constant(Tensor::vector({0.3})), g.constant(Tensor::vector({0.8})), bind_gru(g, p));
  EXPECT_NEAR(out.value()[0], 0.4 + 0.5 * std::tanh(0.3), 1e-15);
}

TEST(GruStep, RejectsMismatchedShapes) {
  std::mt19937_64 rng(1);
  const auto p = random_gru(3, 4, rng);
  Graph g;
  EXPECT_THROW(gru_step(g.constant(Tensor({2}, 0.0)), g.constant(Tensor({4}, 0.0)), bind_gru(g, p)), Error);
  EXPECT_THROW(gru_step(g.constant(Tensor({3}, 0.0)), g.constant(Tensor({5}, 0.0)), bind_gru(g, p)), Error);
}

struct Fixture {
  std::mt19937_64 rng{42};
  Tensor embedding = random_tensor({10, 3}, rng);
  GruParamsT<Tensor> fwd = random_gru(3, 4, rng);
  GruParamsT<Tensor> bwd = random_gru(3, 4, rng);
};

TEST(GruStep, ZeroParametersHalveTheState) {
  Graph g;
  const GruParamsT<Tensor> zero{Tensor({3, 2}, 0.0), Tensor({3, 2}, 0.0), Tensor({3, 2}, 0.0),
                                Tensor({3, 3}, 0.0), Tensor({3, 3}, 0.0), Tensor({3, 3}, 0.0)};
  const Var x = g.constant(Tensor::vector({0.7, -2.0}));
  EXPECT_EQ(gru_step(x, g.constant(Tensor({3}, 0.0)), bind_gru(g, zero)).value(), Tensor({3}, 0.0));
  EXPECT_EQ(gru_step(x, g.constant(Tensor::vector({1.0, -4.0, 0.5})), bind_gru(g, zero)).value(),
            Tensor::vector({0.5, -2.0, 0.25}));
}

TEST(GruStep, ScalarUnitWeights) {
  Graph g;
  const GruParamsT<Tensor> ones{Tensor({1, 1}, 1.0), Tensor({1, 1}, 1.0), Tensor({1, 1}, 1.0),
                                Tensor({1, 1}, 1.0), Tensor({1, 1}, 1.0), Tensor({1, 1}, 1.0)};
  // r = u = sigmoid(1), candidate = tanh(1 + r * 0), h = u * candidate.
  const double u = 1.0 / (1.0 + std::exp(-1.0));
  const Var h = gru_step(g.constant(Tensor::vector({1.0})), g.constant(Tensor::vector({0.0})), bind_gru(g, ones));
  EXPECT_NEAR(h.value()[0], u * std::tanh(1.0), 1e-15);
  EXPECT_NEAR(h.value()[0], 0.5567699411459397, 1e-15);
}

TEST(Encoder, SingleTokenIsOneStepEachWay) {
  Fixture f;
  const std::vector<std::int32_t> tokens = {6};
  Graph g;
  const GruParams fwd = bind_gru(g, f.fwd), bwd = bind_gru(g, f.bwd);
  const auto enc = encode_bidirectional(tokens, g.constant(f.embedding), fwd, bwd);
  const std::int32_t id[] = {6};
  const Var x = row(gather_rows(g.constant(f.embedding), id), 0);
  const Var zero = g.constant(Tensor({4}, 0.0));
  EXPECT_EQ(enc.encodings.value(),
            Tensor({1, 8}, concat({gru_step(x, zero, fwd), gru_step(x, zero, bwd)}).value().data));
}

TEST(Encoder, RowsAreForwardAndBackwardRecurrences) {
  Fixture f;
  const std::vector<std::int32_t> tokens = {3, 7, 1, 9, 4};
  Graph g;
  const auto enc = encode_bidirectional(tokens, g.constant(f.embedding), bind_gru(g, f.fwd), bind_gru(g, f.bwd));
  ASSERT_EQ(enc.encodings.shape(), (Shape{5, 8}));
  auto embed = [&](std::int32_t id) {
    return std::vector<double>(f.embedding.data.begin() + id * 3, f.embedding.data.begin() + id * 3 + 3);
  };
  std::vector<double> h(4, 0.0);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    h = hand_gru(embed(tokens[i]), h, f.fwd);
    for (std::size_t k = 0; k < 4; ++k) EXPECT_NEAR(enc.encodings.value()(i, k), h[k], 1e-13);
  }
  h.assign(4, 0.0);
  for (std::size_t i = tokens.size(); i-- > 0;) {
    h = hand_gru(embed(tokens[i]), h, f.bwd);
    for (std::size_t k = 0; k < 4; ++k) EXPECT_NEAR(enc.encodings.value()(i, 4 + k), h[k], 1e-13);
  }
  EXPECT_EQ(enc.encodings_t.value().shape, (Shape{8, 5}));
}

TEST(Encoder, PalindromeWithSharedWeightsMirrorsDirections) {
  Fixture f;
  const std::vector<std::int32_t> tokens = {2, 5, 8, 5, 2};
  Graph g;
  const GruParams shared = bind_gru(g, f.fwd);
  const auto enc = encode_bidirectional(tokens, g.constant(f.embedding), shared, shared);
  const Tensor& e = enc.encodings.value();
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t k = 0; k < 4; ++k) EXPECT_EQ(e(i, k), e(4 - i, 4 + k));
}

TEST(Encoder, PaddingIsNeutral) {
  Fixture f;
  const std::vector<std::int32_t> tokens = {3, 7, 1};
  const std::vector<std::int32_t> padded = {3, 7, 1, 0, 0, 0};
  Graph g;
  const Var emb = g.constant(f.embedding);
  const auto plain = encode_bidirectional(tokens, emb, bind_gru(g, f.fwd), bind_gru(g, f.bwd));
  const auto pad = encode_bidirectional(padded, 3, emb, bind_gru(g, f.fwd), bind_gru(g, f.bwd));
  EXPECT_EQ(pad.mask, (std::vector<std::uint8_t>{1, 1, 1, 0, 0, 0}));
  EXPECT_EQ(pad.length, 3u);
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t k = 0; k < 8; ++k)
      EXPECT_EQ(pad.encodings.value()(i, k), i < 3 ? plain.encodings.value()(i, k) : 0.0);
}

TEST(Encoder, CountsInvocations) {
  Fixture f;
  const std::vector<std::int32_t> tokens = {1, 2};
  Graph g;
  const auto before = encoder_invocations();
  encode_bidirectional(tokens, g.constant(f.embedding), bind_gru(g, f.fwd), bind_gru(g, f.bwd));
  EXPECT_EQ(encoder_invocations(), before + 1);
}

TEST(Encoder, Errors) {
  Fixture f;
  Graph g;
  const Var emb = g.constant(f.embedding);
  const std::vector<std::int32_t> empty;
  EXPECT_THROW(encode_bidirectional(empty, emb, bind_gru(g, f.fwd), bind_gru(g, f.bwd)), Error);
  const std::vector<std::int32_t> oov = {1, 10};
  try {
    encode_bidirectional(oov, emb, bind_gru(g, f.fwd), bind_gru(g, f.bwd));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Vocabulary);
  }
  std::mt19937_64 rng(3);
  const auto wrong = random_gru(2, 4, rng);
  const std::vector<std::int32_t> tokens = {1};
  try {
    encode_bidirectional(tokens, emb, bind_gru(g, wrong), bind_gru(g, f.bwd));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Dimension);
  }
}

TEST(Encoder, DropoutOnlyWhenTraining) {
  Fixture f;
  const std::vector<std::int32_t> tokens = {3, 7, 1, 4};
  Graph g;
  const Var emb = g.constant(f.embedding);
  std::mt19937_64 rng(5);
  DropoutConfig eval_cfg{0.5, false, &rng};
  const auto a = encode_bidirectional(tokens, emb, bind_gru(g, f.fwd), bind_gru(g, f.bwd));
  const auto b = encode_bidirectional(tokens, emb, bind_gru(g, f.fwd), bind_gru(g, f.bwd), eval_cfg);
  EXPECT_EQ(a.encodings.value(), b.encodings.value());
  DropoutConfig train_cfg{0.5, true, &rng};
  const auto c = encode_bidirectional(tokens, emb, bind_gru(g, f.fwd), bind_gru(g, f.bwd), train_cfg);
  EXPECT_NE(a.encodings.value(), c.encodings.value());
}

TEST(Encoder, GradientCheckThroughBothDirections) {
  Fixture f;
  const std::vector<std::int32_t> tokens = {3, 7, 3, 0};
  testing::ScalarFn fn = [&](Graph& g, const std::vector<Var>& x) {
    const GruParams fwd{x[1], x[2], x[3], x[4], x[5], x[6]};
    const GruParams bwd = bind_gru(g, f.bwd);
    const auto enc = encode_bidirectional(tokens, 3, x[0], fwd, bwd);
    return testing::project(g, tanh(enc.encodings), 21);
  };
  std::vector<Tensor> inputs = {f.embedding,       f.fwd.input_reset,  f.fwd.input_update,
                                f.fwd.input_candidate, f.fwd.hidden_reset, f.fwd.hidden_update,
                                f.fwd.hidden_candidate};
  EXPECT_LT(testing::gradient_check(fn, inputs), 1e-6);
}

}  // namespace
}  // namespace aair
