#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "aair/checkpoint.hpp"
#include "aair/data.hpp"
#include "aair/model.hpp"
#include "aair/optim.hpp"

namespace aair {

// Per-worker gradient buffers for one model shape. Examples of a batch are
// split into contiguous static chunks, one per worker; each worker runs its
// own graphs and the buffers are summed in worker order afterwards, so the
// result depends only on the worker count. workers == 1 is the serial path.
class GradientWorkspace {
 public:
  GradientWorkspace(const ModelParams& like, std::size_t workers);

  // Writes the gradient of the batch-mean loss into `out` and returns the summed
  // (unscaled) loss. `step_seed` drives dropout.
  double compute(const ModelParams& params, const Batch& batch, const HyperParams& hyper,
                 std::uint64_t step_seed, ModelParams& out);

  std::size_t workers() const { return buffers_.size(); }

 private:
  std::vector<ModelParams> buffers_;
};

// Scores of each example, or nullopt for examples that cannot be answered.
using ExampleScores = std::vector<std::optional<CandidateScores>>;

ExampleScores score_examples(const ModelParams& params, std::span<const Example> examples,
                             const HyperParams& hyper, std::size_t workers = 1);

struct EvalResult {
  std::size_t total = 0;
  std::size_t correct = 0;

  double accuracy() const { return total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0; }
};

EvalResult accuracy_of(std::span<const Example> examples, const ExampleScores& scores);
EvalResult evaluate(const ModelParams& params, std::span<const Example> examples,
                    const HyperParams& hyper, std::size_t workers = 1);
// Averages candidate masses across members before taking the argmax.
EvalResult evaluate_ensemble(std::span<const ExampleScores> members, std::span<const Example> examples);

struct WindowMetrics {
  std::size_t window = 0;
  std::size_t epoch = 0;  // 0-based
  std::size_t batches = 0;
  double train_loss = 0.0;  // mean per-example loss since the previous window
  double valid_accuracy = 0.0;
  double learning_rate = 0.0;
};

struct TrainOptions {
  std::size_t workers = 1;
  // Return false to stop training after this window.
  std::function<bool(const WindowMetrics&)> on_window;
  std::ostream* metrics_log = nullptr;
  std::filesystem::path checkpoint_path;  // best-so-far checkpoint, written when set
  std::vector<std::string> vocabulary;    // stored in checkpoints
};

struct TrainResult {
  ModelParams best_params;
  ModelParams final_params;
  OptimizerState optimizer;
  double best_accuracy = 0.0;
  std::vector<WindowMetrics> windows;
  std::size_t skipped_unanswerable = 0;
};

void write_metrics_header(std::ostream& out, const HyperParams& hyper);
void write_metrics_row(std::ostream& out, const WindowMetrics& m);

TrainResult train(std::span<const Example> train_set, std::span<const Example> valid_set,
                  const HyperParams& hyper, const TrainOptions& options = {});

}  // namespace aair
