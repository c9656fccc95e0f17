#include "aair/encoder.hpp"

#include "aair/ops.hpp"

namespace aair {
namespace {

thread_local std::uint64_t g_invocations = 0;

struct Projected {
  Var reset, update, candidate;  // n x h each
};

Projected project_inputs(const Var& inputs, const GruParams& p) {
  return {matmul(inputs, transpose(p.input_reset)), matmul(inputs, transpose(p.input_update)),
          matmul(inputs, transpose(p.input_candidate))};
}

Var gru_update(const Var& xr, const Var& xu, const Var& xh, const Var& h_prev,
               const GruParams& p) {
  const Var r = sigmoid(add(xr, matvec(p.hidden_reset, h_prev)));
  const Var u = sigmoid(add(xu, matvec(p.hidden_update, h_prev)));
  const Var c = tanh(add(xh, matvec(p.hidden_candidate, mul(r, h_prev))));
  return add(mul(one_minus(u), h_prev), mul(u, c));
}

void check_gru(const GruParams& p, std::size_t input_dim, std::size_t hidden) {
  for (const Var* m : {&p.input_reset, &p.input_update, &p.input_candidate}) {
    require(m->shape() == Shape{hidden, input_dim}, ErrorKind::Dimension,
            "GRU input matrix " + shape_string(m->shape()) + " does not map " +
                std::to_string(input_dim) + " -> " + std::to_string(hidden));
  }
  for (const Var* m : {&p.hidden_reset, &p.hidden_update, &p.hidden_candidate}) {
    require(m->shape() == Shape{hidden, hidden}, ErrorKind::Dimension,
            "GRU recurrent matrix " + shape_string(m->shape()) + " is not " +
                std::to_string(hidden) + "x" + std::to_string(hidden));
  }
}

}  // namespace

Var apply_dropout(const Var& v, const DropoutConfig& cfg) {
  return cfg.active() ? dropout(v, cfg.rate, *cfg.rng) : v;
}

Var gru_step(const Var& x, const Var& h_prev, const GruParams& p) {
  require(x.shape().size() == 1 && h_prev.shape().size() == 1, ErrorKind::Dimension,
          "gru_step expects vectors, got " + shape_string(x.shape()) + " and " +
              shape_string(h_prev.shape()));
  check_gru(p, x.size(), h_prev.size());
  return gru_update(matvec(p.input_reset, x), matvec(p.input_update, x),
                    matvec(p.input_candidate, x), h_prev, p);
}

EncodedSequence encode_bidirectional(std::span<const std::int32_t> tokens, std::size_t length,
                                     const Var& embedding, const GruParams& fwd,
                                     const GruParams& bwd, const DropoutConfig& dropout) {
  ++g_invocations;
  require(length > 0, ErrorKind::Contract, "cannot encode an empty sequence");
  require(length <= tokens.size(), ErrorKind::Contract, "sequence length exceeds token buffer");
  require(embedding.shape().size() == 2, ErrorKind::Dimension, "embedding table must be a matrix");
  const std::size_t dim = embedding.shape()[1];
  const std::size_t hidden = fwd.hidden_reset.shape().at(0);
  check_gru(fwd, dim, hidden);
  check_gru(bwd, dim, hidden);

  Graph& g = embedding.graph();
  const Var inputs = apply_dropout(gather_rows(embedding, tokens.first(length)), dropout);
  const Projected pf = project_inputs(inputs, fwd);
  const Projected pb = project_inputs(inputs, bwd);

  std::vector<Var> forward(length), backward(length);
  Var h = g.constant(Tensor({hidden}, 0.0));
  for (std::size_t i = 0; i < length; ++i) {
    h = gru_update(row(pf.reset, i), row(pf.update, i), row(pf.candidate, i), h, fwd);
    forward[i] = h;
  }
  h = g.constant(Tensor({hidden}, 0.0));
  for (std::size_t i = length; i-- > 0;) {
    h = gru_update(row(pb.reset, i), row(pb.update, i), row(pb.candidate, i), h, bwd);
    backward[i] = h;
  }

  std::vector<Var> rows;
  rows.reserve(tokens.size());
  for (std::size_t i = 0; i < length; ++i) rows.push_back(concat({forward[i], backward[i]}));
  if (tokens.size() > length) {
    const Var pad = g.constant(Tensor({2 * hidden}, 0.0));
    rows.resize(tokens.size(), pad);
  }

  EncodedSequence out;
  out.encodings = stack_rows(rows);
  out.encodings_t = transpose(out.encodings);
  out.mask.assign(tokens.size(), 0);
  std::fill_n(out.mask.begin(), length, std::uint8_t{1});
  out.tokens.assign(tokens.begin(), tokens.end());
  out.length = length;
  return out;
}

std::uint64_t encoder_invocations() { return g_invocations; }

}  // namespace aair
