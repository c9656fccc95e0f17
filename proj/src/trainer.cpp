#include "aair/trainer.hpp"

#include <charconv>
#include <cstdio>
#include <exception>
#include <ostream>

#include "aair/ops.hpp"

namespace aair {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::pair<std::size_t, std::size_t> chunk(std::size_t n, std::size_t workers, std::size_t w) {
  return {n * w / workers, n * (w + 1) / workers};
}

// Runs body(worker, begin, end) for contiguous chunks of [0, n); rethrows the
// first worker exception.
template <class Body>
void run_chunked(std::size_t n, std::size_t workers, Body&& body) {
  if (workers <= 1) {
    body(std::size_t{0}, std::size_t{0}, n);
    return;
  }
  std::vector<std::exception_ptr> errors(workers);
  const auto w_count = static_cast<int>(workers);
#pragma omp parallel for num_threads(w_count) schedule(static, 1)
  for (int w = 0; w < w_count; ++w) {
    try {
      const auto [begin, end] = chunk(n, workers, static_cast<std::size_t>(w));
      body(static_cast<std::size_t>(w), begin, end);
    } catch (...) {
      errors[static_cast<std::size_t>(w)] = std::current_exception();
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace

GradientWorkspace::GradientWorkspace(const ModelParams& like, std::size_t workers) {
  require(workers >= 1, ErrorKind::Config, "worker count must be >= 1");
  for (std::size_t i = 0; i < workers; ++i) buffers_.push_back(zeros_like(like));
}

double GradientWorkspace::compute(const ModelParams& params, const Batch& batch,
                                  const HyperParams& hyper, std::uint64_t step_seed, ModelParams& out) {
  const std::size_t n = batch.size();
  require(n > 0, ErrorKind::Contract, "empty batch");
  const std::size_t workers = std::min(buffers_.size(), n);
  const double inv_batch = 1.0 / static_cast<double>(n);
  std::vector<double> losses(n, 0.0);

  run_chunked(n, workers, [&](std::size_t w, std::size_t begin, std::size_t end) {
    ModelParams& grads = buffers_[w];
    fill_zero(grads);
    Graph graph;
    for (std::size_t b = begin; b < end; ++b) {
      require(!batch.answer_positions[b].empty(), ErrorKind::DataIntegrity,
              "training example " + std::to_string(batch.indices[b]) + " has no answer position");
      graph.reset();
      std::mt19937_64 rng(splitmix64(step_seed ^ splitmix64(batch.indices[b])));
      ForwardOptions fo;
      fo.steps = hyper.steps;
      fo.fixed_query_attention = hyper.fixed_query_attention;
      fo.dropout = {hyper.dropout, true, &rng};
      const BoundParams bound = bind(graph, params, grads);
      const ForwardResult fr = forward_example(bound, batch, b, fo);
      losses[b] = fr.loss.value().data[0];
      graph.backward(scale(fr.loss, inv_batch));
    }
  });

  // Fixed-order reduction across workers.
  auto dst = param_list(out);
  for (std::size_t w = 0; w < workers; ++w) {
    const auto src = param_list(static_cast<const ModelParams&>(buffers_[w]));
    for (std::size_t i = 0; i < dst.size(); ++i) {
      auto& d = dst[i]->data;
      const auto& s = src[i]->data;
      if (w == 0) d = s;
      else
        for (std::size_t j = 0; j < d.size(); ++j) d[j] += s[j];
    }
  }
  double total = 0.0;
  for (double l : losses) total += l;
  return total;
}

ExampleScores score_examples(const ModelParams& params, std::span<const Example> examples,
                             const HyperParams& hyper, std::size_t workers) {
  ExampleScores out(examples.size());
  const std::size_t w_count = std::max<std::size_t>(1, std::min(workers, examples.size()));
  run_chunked(examples.size(), w_count, [&](std::size_t, std::size_t begin, std::size_t end) {
    Graph graph;
    for (std::size_t i = begin; i < end; ++i) {
      if (!examples[i].answerable) continue;
      graph.reset();
      const std::size_t index[] = {i};
      const Batch batch = make_batch(examples, index);
      ForwardOptions fo;
      fo.steps = hyper.steps;
      fo.fixed_query_attention = hyper.fixed_query_attention;
      const BoundParams bound = bind_constant(graph, params);
      const ForwardResult fr = forward_example(bound, batch, 0, fo);
      out[i] = predict_answer(fr.run.final_document_weights().value().data, examples[i]);
    }
  });
  return out;
}

EvalResult accuracy_of(std::span<const Example> examples, const ExampleScores& scores) {
  require(scores.size() == examples.size(), ErrorKind::Contract, "scores do not match examples");
  EvalResult r;
  r.total = examples.size();
  for (std::size_t i = 0; i < examples.size(); ++i)
    if (scores[i] && scores[i]->predicted() == examples[i].answer) ++r.correct;
  return r;
}

EvalResult evaluate(const ModelParams& params, std::span<const Example> examples,
                    const HyperParams& hyper, std::size_t workers) {
  return accuracy_of(examples, score_examples(params, examples, hyper, workers));
}

EvalResult evaluate_ensemble(std::span<const ExampleScores> members, std::span<const Example> examples) {
  require(!members.empty(), ErrorKind::Contract, "ensemble of zero members");
  ExampleScores combined(examples.size());
  for (std::size_t i = 0; i < examples.size(); ++i) {
    std::vector<CandidateScores> per;
    for (const auto& m : members) {
      require(m.size() == examples.size(), ErrorKind::Contract, "ensemble member scored another split");
      if (m[i]) per.push_back(*m[i]);
    }
    if (per.size() == members.size()) combined[i] = ensemble_average(per);
  }
  return accuracy_of(examples, combined);
}

void write_metrics_header(std::ostream& out, const HyperParams& hyper) {
  out << "# fixed_query_attention=" << (hyper.fixed_query_attention ? 1 : 0) << '\n';
  for (const auto& [k, v] : hyper.to_map()) out << "# " << k << '=' << v << '\n';
  out << "window\ttrain_loss\tvalid_accuracy\tlearning_rate\n";
}

void write_metrics_row(std::ostream& out, const WindowMetrics& m) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "%zu\t%.6f\t%.4f\t", m.window, m.train_loss, m.valid_accuracy);
  out << buf << format_double(m.learning_rate) << '\n';
  out.flush();
}

TrainResult train(std::span<const Example> train_set, std::span<const Example> valid_set,
                  const HyperParams& hyper, const TrainOptions& options) {
  hyper.validate();
  std::vector<Example> usable;
  TrainResult result;
  for (const auto& ex : train_set) {
    if (ex.answerable) usable.push_back(ex);
    else ++result.skipped_unanswerable;
  }
  require(!usable.empty(), ErrorKind::DataIntegrity, "no answerable training examples");
  require(!valid_set.empty(), ErrorKind::DataIntegrity, "empty validation split");

  ModelParams params = init_params(hyper, hyper.seed);
  ModelParams grads = zeros_like(params);
  OptimizerState state;
  state.learning_rate = hyper.learning_rate;
  GradientWorkspace workspace(params, options.workers);
  result.best_params = params;

  if (options.metrics_log) write_metrics_header(*options.metrics_log, hyper);

  std::size_t batches_done = 0, window_examples = 0;
  double window_loss = 0.0;
  bool stop = false;

  auto close_window = [&](std::size_t epoch) {
    WindowMetrics m;
    m.window = result.windows.size() + 1;
    m.epoch = epoch;
    m.batches = batches_done;
    m.train_loss = window_examples ? window_loss / static_cast<double>(window_examples) : 0.0;
    m.valid_accuracy = evaluate(params, valid_set, hyper, options.workers).accuracy();
    const bool improved = m.valid_accuracy > state.best_accuracy;
    lr_plateau_decay(state, m.valid_accuracy, hyper.decay_factor);
    m.learning_rate = state.learning_rate;
    if (improved) {
      result.best_params = params;
      result.best_accuracy = m.valid_accuracy;
      if (!options.checkpoint_path.empty()) {
        save_checkpoint(options.checkpoint_path,
                        Checkpoint{hyper, options.vocabulary, params, state});
      }
    }
    result.windows.push_back(m);
    if (options.metrics_log) write_metrics_row(*options.metrics_log, m);
    window_loss = 0.0;
    window_examples = 0;
    if (options.on_window && !options.on_window(m)) stop = true;
  };

  for (std::size_t epoch = 0; epoch < hyper.max_epochs && !stop; ++epoch) {
    const auto batches = make_batches(usable, hyper.batch_size, splitmix64(hyper.seed + epoch), true);
    for (const auto& batch : batches) {
      const double loss = workspace.compute(params, batch, hyper, splitmix64(hyper.seed) ^ state.step, grads);
      clip_gradients(param_list(grads), hyper.grad_clip);
      optimizer_step(params, grads, state, hyper.embedding_reg);
      window_loss += loss;
      window_examples += batch.size();
      ++batches_done;
      if (batches_done % hyper.eval_window == 0) {
        close_window(epoch);
        if (stop) break;
      }
    }
  }
  if (!stop && window_examples > 0) close_window(hyper.max_epochs - 1);

  result.final_params = std::move(params);
  result.optimizer = std::move(state);
  return result;
}

}  // namespace aair
