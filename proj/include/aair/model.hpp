#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>

#include "aair/data.hpp"
#include "aair/encoder.hpp"
#include "aair/inference.hpp"
#include "aair/params.hpp"
#include "aair/prediction.hpp"

namespace aair {

struct HyperParams {
  std::size_t vocab_size = 0;
  std::size_t embed_dim = 32;   // d
  std::size_t hidden_dim = 32;  // h, per encoder direction
  std::size_t state_dim = 64;   // s
  std::size_t steps = 3;        // T
  std::size_t batch_size = 32;
  double learning_rate = 1e-3;
  double decay_factor = 0.8;
  std::size_t eval_window = 2000;  // batches between validations
  double grad_clip = 5.0;
  double dropout = 0.2;
  double embedding_reg = 1e-4;
  std::size_t max_epochs = 10;
  std::uint64_t seed = 1;
  bool fixed_query_attention = false;

  // T=8, d=384, h=128, s=512, dropout 0.2, embedding regularisation 1e-4.
  static HyperParams paper();
  // Desk-scale dimensions for the synthetic benchmark: d=32, h=32, s=64, T=3,
  // learning rate 3e-3, one validation per epoch of 5,000 examples, no dropout.
  static HyperParams desk();
  static HyperParams profile(const std::string& name);

  void validate() const;
  std::map<std::string, std::string> to_map() const;
  // Applies key=value settings over the current values; unknown keys are a config error.
  void apply(const std::map<std::string, std::string>& settings);
  bool operator==(const HyperParams&) const = default;
};

using ModelParams = ModelParamsT<Tensor>;

// Normal(0, 0.05) weights, orthogonal recurrent matrices, zero biases and initial state.
ModelParams init_params(const HyperParams& hyper, std::uint64_t seed);
ModelParams zeros_like(const ModelParams& params);
void fill_zero(ModelParams& params);
std::size_t parameter_count(const ModelParams& params);

// Registers every parameter as a graph leaf whose gradient accumulates into `grads`.
BoundParams bind(Graph& graph, const ModelParams& params, ModelParams& grads);
// Registers every parameter as a constant (evaluation only).
BoundParams bind_constant(Graph& graph, const ModelParams& params);

struct ForwardOptions {
  std::size_t steps = 1;
  bool fixed_query_attention = false;
  DropoutConfig dropout;
};

struct ForwardResult {
  EncodedSequence query;
  EncodedSequence document;
  InferenceRun run;
  Var loss;  // -log P(answer); set only when the example has answer positions
};

// Encodes row `b` of the batch once, runs T inference steps over it and
// attaches the pointer-sum loss.
ForwardResult forward_example(const BoundParams& params, const Batch& batch, std::size_t b,
                              const ForwardOptions& options);

}  // namespace aair
