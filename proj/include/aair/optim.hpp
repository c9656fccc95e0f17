#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "aair/model.hpp"
#include "aair/tensor.hpp"

namespace aair {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct OptimizerState {
  std::vector<Tensor> first_moment;
  std::vector<Tensor> second_moment;
  std::uint64_t step = 0;
  double learning_rate = 1e-3;
  double best_accuracy = -1.0;  // below any real accuracy

  bool operator==(const OptimizerState&) const = default;
};

// One bias-corrected ADAM update. Moments are created on first use.
void adam_step(std::span<Tensor* const> params, std::span<const Tensor* const> grads,
               OptimizerState& state, const AdamConfig& config = {});

// Global L2 norm over all gradients.
double global_norm(std::span<const Tensor* const> grads);

// Rescales every gradient by max_norm / norm when the global norm exceeds
// max_norm. Returns the norm before clipping.
double clip_gradients(std::span<Tensor* const> grads, double max_norm);

// Decays the learning rate by `factor` unless `accuracy` beats the best seen so far.
void lr_plateau_decay(OptimizerState& state, double accuracy, double factor = 0.8);

// Model-level helpers over the fixed parameter order.
std::vector<Tensor*> param_list(ModelParams& params);
std::vector<const Tensor*> param_list(const ModelParams& params);

// Adds the gradient of coeff * ||embedding||^2 to the embedding gradient.
void add_embedding_regularization(const ModelParams& params, ModelParams& grads, double coeff);

// add_embedding_regularization followed by adam_step over all parameters.
void optimizer_step(ModelParams& params, ModelParams& grads, OptimizerState& state,
                    double embedding_reg, const AdamConfig& config = {});

}  // namespace aair
