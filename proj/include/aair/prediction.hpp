#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "aair/data.hpp"
#include "aair/tensor.hpp"

namespace aair {

inline constexpr double kLogFloor = 1e-12;

// Per-candidate probability mass and the predicted (argmax) candidate.
struct CandidateScores {
  std::vector<std::int32_t> candidates;
  std::vector<double> mass;
  std::size_t best = 0;  // lowest index among ties

  std::int32_t predicted() const { return candidates.at(best); }
};

// Sum of the attention weights over the positions where a token occurs.
double pointer_sum(std::span<const double> weights, std::span<const std::size_t> positions);
Var pointer_sum(const Var& weights, std::span<const std::size_t> positions);

// Scores every candidate of `example` against the final document weights.
// The weights may cover a padded document; padding carries zero weight.
CandidateScores predict_answer(std::span<const double> final_weights, const Example& example);

// -log(p + 1e-12).
Var nll_loss(const Var& probability);
double nll_loss(double probability);

CandidateScores ensemble_average(std::span<const CandidateScores> members);

}  // namespace aair
