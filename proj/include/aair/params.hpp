#pragma once

#include <string>

namespace aair {

// Parameter containers are templated on the element type so one layout serves
// stored values (Tensor), gradient buffers (Tensor) and graph bindings (Var).

// GRU without bias terms: r = s(I_r x + H_r h), u = s(I_u x + H_u h),
// c = tanh(I_h x + H_h (r . h)), h' = (1 - u) . h + u . c
template <class T>
struct GruParamsT {
  T input_reset, input_update, input_candidate;
  T hidden_reset, hidden_update, hidden_candidate;
};

// Bilinear attention keys: query logits q_i^T (query_proj s + query_bias),
// document logits d_i^T (doc_proj [s, q] + doc_bias).
template <class T>
struct AttentionParamsT {
  T query_proj, query_bias;
  T doc_proj, doc_bias;
};

// Two-layer gate: sigmoid(out_w tanh(hidden_w x + hidden_b) + out_b).
template <class T>
struct GateNetT {
  T hidden_w, hidden_b, out_w, out_b;
};

template <class T>
struct GateParamsT {
  GateNetT<T> query, document;
};

template <class T>
struct ModelParamsT {
  T embedding;
  GruParamsT<T> query_fwd, query_bwd, doc_fwd, doc_bwd;
  AttentionParamsT<T> attention;
  GateParamsT<T> gates;
  GruParamsT<T> inference;
  T initial_state;
};

namespace detail {

template <class F, class... G>
void visit_gru(const std::string& prefix, F& f, G&... g) {
  f(prefix + ".input_reset", g.input_reset...);
  f(prefix + ".input_update", g.input_update...);
  f(prefix + ".input_candidate", g.input_candidate...);
  f(prefix + ".hidden_reset", g.hidden_reset...);
  f(prefix + ".hidden_update", g.hidden_update...);
  f(prefix + ".hidden_candidate", g.hidden_candidate...);
}

template <class F, class... G>
void visit_gate(const std::string& prefix, F& f, G&... g) {
  f(prefix + ".hidden_w", g.hidden_w...);
  f(prefix + ".hidden_b", g.hidden_b...);
  f(prefix + ".out_w", g.out_w...);
  f(prefix + ".out_b", g.out_b...);
}

}  // namespace detail

// Calls f(name, p.member...) for every parameter, in a fixed order, across one
// or more parameter sets of possibly different element types.
template <class F, class... P>
void for_each_param(F&& f, P&... p) {
  f(std::string("embedding"), p.embedding...);
  detail::visit_gru("query_fwd", f, p.query_fwd...);
  detail::visit_gru("query_bwd", f, p.query_bwd...);
  detail::visit_gru("doc_fwd", f, p.doc_fwd...);
  detail::visit_gru("doc_bwd", f, p.doc_bwd...);
  f(std::string("attention.query_proj"), p.attention.query_proj...);
  f(std::string("attention.query_bias"), p.attention.query_bias...);
  f(std::string("attention.doc_proj"), p.attention.doc_proj...);
  f(std::string("attention.doc_bias"), p.attention.doc_bias...);
  detail::visit_gate("gate_query", f, p.gates.query...);
  detail::visit_gate("gate_doc", f, p.gates.document...);
  detail::visit_gru("inference", f, p.inference...);
  f(std::string("initial_state"), p.initial_state...);
}

}  // namespace aair
