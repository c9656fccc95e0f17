#include "aair/inference.hpp"

#include "aair/ops.hpp"

namespace aair {
namespace {

void expect_shape(const Var& v, const Shape& shape, const char* what) {
  require(v.shape() == shape, ErrorKind::Dimension,
          std::string(what) + " has shape " + shape_string(v.shape()) + ", expected " +
              shape_string(shape));
}

std::size_t encoding_width(const EncodedSequence& seq) {
  require(seq.length > 0 && seq.encodings.valid(), ErrorKind::Contract,
          "attentive read over an empty sequence");
  return seq.encodings.shape()[1];
}

// Masks only the true rows, so the random stream does not depend on batch padding.
Var dropout_encodings(const EncodedSequence& seq, const DropoutConfig& cfg) {
  if (!cfg.active()) return seq.encodings;
  return dropout(seq.encodings, cfg.rate, *cfg.rng, seq.length * seq.encodings.shape()[1]);
}

Var gate_net(const Var& input, const GateNet& net) {
  const Var hidden = tanh(add(matvec(net.hidden_w, input), net.hidden_b));
  return sigmoid(add(matvec(net.out_w, hidden), net.out_b));
}

}  // namespace

Glimpse query_attentive_read(const EncodedSequence& query, const Var& state,
                             const AttentionParams& params, bool fixed_uniform,
                             const DropoutConfig& dropout) {
  const std::size_t width = encoding_width(query);
  expect_shape(params.query_proj, {width, state.size()}, "query attention matrix");
  expect_shape(params.query_bias, {width}, "query attention bias");
  Graph& g = state.graph();
  Var weights;
  if (fixed_uniform) {
    Tensor uniform({query.padded_length()}, 0.0);
    const double w = 1.0 / static_cast<double>(query.length);
    for (std::size_t i = 0; i < query.length; ++i) uniform.data[i] = w;
    weights = g.constant(std::move(uniform));
  } else {
    const Var key = add(matvec(params.query_proj, state), params.query_bias);
    const Var logits = matvec(dropout_encodings(query, dropout), key);
    weights = masked_softmax(logits, query.mask);
  }
  return {matvec(query.encodings_t, weights), weights};
}

Glimpse document_attentive_read(const EncodedSequence& document, const Var& state,
                                const Var& query_glimpse, const AttentionParams& params,
                                const DropoutConfig& dropout) {
  const std::size_t width = encoding_width(document);
  expect_shape(query_glimpse, {width}, "query glimpse");
  expect_shape(params.doc_proj, {width, state.size() + width}, "document attention matrix");
  expect_shape(params.doc_bias, {width}, "document attention bias");
  const Var key = add(matvec(params.doc_proj, concat({state, query_glimpse})), params.doc_bias);
  const Var logits = matvec(dropout_encodings(document, dropout), key);
  const Var weights = masked_softmax(logits, document.mask);
  return {matvec(document.encodings_t, weights), weights};
}

GateOutput gate(const Var& state, const Var& query_glimpse, const Var& document_glimpse,
                const GateParams& params, const DropoutConfig& dropout) {
  require(query_glimpse.shape() == document_glimpse.shape(), ErrorKind::Dimension,
          "gate: glimpse shapes " + shape_string(query_glimpse.shape()) + " and " +
              shape_string(document_glimpse.shape()) + " differ");
  const Var input = apply_dropout(
      concat({state, query_glimpse, document_glimpse, mul(query_glimpse, document_glimpse)}),
      dropout);
  for (const GateNet* net : {&params.query, &params.document}) {
    require(net->hidden_w.shape().size() == 2 && net->hidden_w.shape()[1] == input.size(),
            ErrorKind::Dimension,
            "gate hidden layer " + shape_string(net->hidden_w.shape()) + " does not accept input of " +
                std::to_string(input.size()));
  }
  return {gate_net(input, params.query), gate_net(input, params.document)};
}

InferenceRun run_inference(const EncodedSequence& query, const EncodedSequence& document,
                           const BoundParams& params, std::size_t steps, bool fixed_uniform,
                           const DropoutConfig& dropout) {
  require(steps >= 1, ErrorKind::Contract, "inference needs at least one step");
  InferenceRun run;
  run.steps.reserve(steps);
  Var state = params.initial_state;
  for (std::size_t t = 0; t < steps; ++t) {
    InferenceStep step;
    step.query = query_attentive_read(query, state, params.attention, fixed_uniform, dropout);
    step.document =
        document_attentive_read(document, state, step.query.vector, params.attention, dropout);
    step.gates = gate(state, step.query.vector, step.document.vector, params.gates, dropout);
    const Var input = concat({mul(step.gates.query_reset, step.query.vector),
                              mul(step.gates.document_reset, step.document.vector)});
    state = gru_step(input, state, params.inference);
    step.state = state;
    run.steps.push_back(std::move(step));
  }
  return run;
}

InferenceTrace InferenceRun::trace() const {
  InferenceTrace out;
  for (const auto& s : steps) {
    out.steps.push_back({s.query.weights.value().data, s.document.weights.value().data,
                         s.query.vector.value().data, s.document.vector.value().data,
                         s.gates.query_reset.value().data, s.gates.document_reset.value().data});
  }
  return out;
}

}  // namespace aair
