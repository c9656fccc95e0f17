#pragma once

#include <vector>

#include "aair/encoder.hpp"
#include "aair/params.hpp"

namespace aair {

using AttentionParams = AttentionParamsT<Var>;
using GateNet = GateNetT<Var>;
using GateParams = GateParamsT<Var>;
using BoundParams = ModelParamsT<Var>;

struct Glimpse {
  Var vector;   // 2h, attention-weighted sum of encodings
  Var weights;  // padded length, zero on masked positions
};

// Query read: weights = softmax_i q_i^T (A_q s + a_q). With `fixed_uniform`
// the weights are exactly 1/|Q| on every unpadded position.
Glimpse query_attentive_read(const EncodedSequence& query, const Var& state,
                             const AttentionParams& params, bool fixed_uniform,
                             const DropoutConfig& dropout = {});

// Document read conditioned on both the state and the current query glimpse:
// weights = softmax_i d_i^T (A_d [s, q_t] + a_d).
Glimpse document_attentive_read(const EncodedSequence& document, const Var& state,
                                const Var& query_glimpse, const AttentionParams& params,
                                const DropoutConfig& dropout = {});

struct GateOutput {
  Var query_reset;     // r_q in (0,1)^2h
  Var document_reset;  // r_d in (0,1)^2h
};

// Both gates read [s, q_t, d_t, q_t . d_t].
GateOutput gate(const Var& state, const Var& query_glimpse, const Var& document_glimpse,
                const GateParams& params, const DropoutConfig& dropout = {});

struct InferenceStep {
  Glimpse query;
  Glimpse document;
  GateOutput gates;
  Var state;  // s_t
};

struct StepTrace {
  std::vector<double> query_weights;
  std::vector<double> document_weights;
  std::vector<double> query_glimpse;
  std::vector<double> document_glimpse;
  std::vector<double> query_gate;
  std::vector<double> document_gate;
};

struct InferenceTrace {
  std::vector<StepTrace> steps;

  const std::vector<double>& final_document_weights() const { return steps.back().document_weights; }
};

struct InferenceRun {
  std::vector<InferenceStep> steps;

  const Var& final_document_weights() const { return steps.back().document.weights; }
  InferenceTrace trace() const;
};

InferenceRun run_inference(const EncodedSequence& query, const EncodedSequence& document,
                           const BoundParams& params, std::size_t steps, bool fixed_uniform,
                           const DropoutConfig& dropout = {});

}  // namespace aair
