#include "aair/optim.hpp"

#include <cmath>

namespace aair {

void adam_step(std::span<Tensor* const> params, std::span<const Tensor* const> grads,
               OptimizerState& state, const AdamConfig& config) {
  require(params.size() == grads.size(), ErrorKind::Dimension,
          "adam_step: " + std::to_string(params.size()) + " parameters but " +
              std::to_string(grads.size()) + " gradients");
  if (state.first_moment.empty()) {
    for (const Tensor* p : params) {
      state.first_moment.emplace_back(p->shape, 0.0);
      state.second_moment.emplace_back(p->shape, 0.0);
    }
  }
  require(state.first_moment.size() == params.size() && state.second_moment.size() == params.size(),
          ErrorKind::Dimension, "adam_step: optimizer state tracks a different parameter set");
  for (std::size_t i = 0; i < params.size(); ++i) {
    require(params[i]->shape == grads[i]->shape && params[i]->shape == state.first_moment[i].shape,
            ErrorKind::Dimension,
            "adam_step: parameter " + std::to_string(i) + " shape " + shape_string(params[i]->shape) +
                " vs gradient " + shape_string(grads[i]->shape));
  }

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(config.beta1, t);
  const double correction2 = 1.0 - std::pow(config.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i]->data;
    const auto& g = grads[i]->data;
    auto& m = state.first_moment[i].data;
    auto& v = state.second_moment[i].data;
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = config.beta1 * m[j] + (1.0 - config.beta1) * g[j];
      v[j] = config.beta2 * v[j] + (1.0 - config.beta2) * g[j] * g[j];
      const double m_hat = m[j] / correction1;
      const double v_hat = v[j] / correction2;
      p[j] -= state.learning_rate * m_hat / (std::sqrt(v_hat) + config.epsilon);
    }
  }
}

double global_norm(std::span<const Tensor* const> grads) {
  double sq = 0.0;
  for (const Tensor* g : grads)
    for (double x : g->data) sq += x * x;
  return std::sqrt(sq);
}

double clip_gradients(std::span<Tensor* const> grads, double max_norm) {
  require(!grads.empty(), ErrorKind::Contract, "clip_gradients: no gradients");
  std::vector<const Tensor*> view(grads.begin(), grads.end());
  const double norm = global_norm(view);
  require(std::isfinite(norm), ErrorKind::NumericFault, "gradient norm is not finite");
  if (norm > max_norm) {
    const double factor = max_norm / norm;
    for (Tensor* g : grads)
      for (double& x : g->data) x *= factor;
  }
  return norm;
}

void lr_plateau_decay(OptimizerState& state, double accuracy, double factor) {
  if (accuracy <= state.best_accuracy) {
    state.learning_rate *= factor;
  } else {
    state.best_accuracy = accuracy;
  }
}

std::vector<Tensor*> param_list(ModelParams& params) {
  std::vector<Tensor*> out;
  for_each_param([&](const std::string&, Tensor& t) { out.push_back(&t); }, params);
  return out;
}

std::vector<const Tensor*> param_list(const ModelParams& params) {
  std::vector<const Tensor*> out;
  for_each_param([&](const std::string&, const Tensor& t) { out.push_back(&t); }, params);
  return out;
}

void add_embedding_regularization(const ModelParams& params, ModelParams& grads, double coeff) {
  if (coeff == 0.0) return;
  auto& g = grads.embedding.data;
  const auto& x = params.embedding.data;
  for (std::size_t i = 0; i < g.size(); ++i) g[i] += 2.0 * coeff * x[i];
}

void optimizer_step(ModelParams& params, ModelParams& grads, OptimizerState& state,
                    double embedding_reg, const AdamConfig& config) {
  add_embedding_regularization(params, grads, embedding_reg);
  const auto p = param_list(params);
  const auto g = param_list(static_cast<const ModelParams&>(grads));
  adam_step(p, g, state, config);
}

}  // namespace aair
