#include "aair/prediction.hpp"

#include <cmath>

#include "aair/error.hpp"
#include "aair/ops.hpp"

namespace aair {
namespace {

std::size_t argmax_first(const std::vector<double>& v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

}  // namespace

double pointer_sum(std::span<const double> weights, std::span<const std::size_t> positions) {
  require(!positions.empty(), ErrorKind::Contract, "pointer_sum over an empty position set");
  double total = 0.0;
  for (auto p : positions) {
    require(p < weights.size(), ErrorKind::Bounds,
            "position " + std::to_string(p) + " outside document of length " +
                std::to_string(weights.size()));
    total += weights[p];
  }
  return total;
}

Var pointer_sum(const Var& weights, std::span<const std::size_t> positions) {
  require(!positions.empty(), ErrorKind::Contract, "pointer_sum over an empty position set");
  return sum_at(weights, positions);
}

CandidateScores predict_answer(std::span<const double> final_weights, const Example& example) {
  require(!example.candidates.empty(), ErrorKind::Contract, example.source_id + ": no candidates");
  CandidateScores scores;
  scores.candidates = example.candidates;
  for (auto c : example.candidates) {
    const auto positions = positions_of(example.document, c);
    require(!positions.empty(), ErrorKind::DataIntegrity,
            example.source_id + ": candidate id " + std::to_string(c) + " does not occur in the document");
    scores.mass.push_back(pointer_sum(final_weights, positions));
  }
  scores.best = argmax_first(scores.mass);
  return scores;
}

Var nll_loss(const Var& probability) {
  require(probability.size() == 1, ErrorKind::Contract, "nll_loss expects a scalar probability");
  return neg_log(probability, kLogFloor);
}

double nll_loss(double probability) {
  require(probability + kLogFloor > 0.0, ErrorKind::NumericFault,
          "nll_loss of non-positive probability " + std::to_string(probability));
  return -std::log(probability + kLogFloor);
}

CandidateScores ensemble_average(std::span<const CandidateScores> members) {
  require(!members.empty(), ErrorKind::Contract, "ensemble of zero members");
  CandidateScores out;
  out.candidates = members[0].candidates;
  out.mass.assign(out.candidates.size(), 0.0);
  for (const auto& m : members) {
    require(m.candidates == out.candidates && m.mass.size() == out.mass.size(), ErrorKind::Contract,
            "ensemble members score different candidate sets");
    for (std::size_t i = 0; i < out.mass.size(); ++i) out.mass[i] += m.mass[i];
  }
  for (double& x : out.mass) x /= static_cast<double>(members.size());
  out.best = argmax_first(out.mass);
  return out;
}

}  // namespace aair
