// Command-line driver: train, eval (single model or ensemble) and trace.
#include <omp.h>

#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>

#include "aair/checkpoint.hpp"
#include "aair/data.hpp"
#include "aair/trainer.hpp"

namespace {

using namespace aair;

struct RunConfig {
  std::string format = "synthetic";
  std::string data;
  std::string valid;
  std::string profile = "desk";
  std::string config_file;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> steps, epochs, batch_size, eval_window, embed_dim, hidden_dim, state_dim;
  std::optional<double> learning_rate, dropout;
  bool fixed_query_attention = false;
  bool lowercase = false;
  bool lenient_candidates = false;
  std::vector<std::string> checkpoints;
  std::string out;
  std::string metrics;
  std::string write_corpus_path;
  std::size_t workers = 1;
  std::size_t min_count = 1;
  // synthetic corpus
  std::size_t synthetic_train = 5000;
  std::size_t synthetic_valid = 500;
  std::uint64_t data_seed = 1234;
  std::string split = "valid";
  std::string example;
};

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Io: return 2;
    case ErrorKind::Parse:
    case ErrorKind::DataIntegrity: return 3;
    case ErrorKind::Config:
    case ErrorKind::Vocabulary: return 4;
    case ErrorKind::NumericFault: return 5;
    case ErrorKind::Lookup: return 6;
    default: return 1;
  }
}

std::map<std::string, std::string> read_config_file(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), ErrorKind::Io, "cannot open config file " + path);
  std::map<std::string, std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    require(eq != std::string::npos, ErrorKind::Config, "config line without '=': " + line);
    out[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return out;
}

// Flags > config file > profile defaults.
HyperParams resolve_hyper(const RunConfig& rc) {
  HyperParams h = HyperParams::profile(rc.profile);
  if (!rc.config_file.empty()) h.apply(read_config_file(rc.config_file));
  if (rc.seed) h.seed = *rc.seed;
  if (rc.steps) h.steps = *rc.steps;
  if (rc.epochs) h.max_epochs = *rc.epochs;
  if (rc.batch_size) h.batch_size = *rc.batch_size;
  if (rc.eval_window) h.eval_window = *rc.eval_window;
  if (rc.embed_dim) h.embed_dim = *rc.embed_dim;
  if (rc.hidden_dim) h.hidden_dim = *rc.hidden_dim;
  if (rc.state_dim) h.state_dim = *rc.state_dim;
  if (rc.learning_rate) h.learning_rate = *rc.learning_rate;
  if (rc.dropout) h.dropout = *rc.dropout;
  if (rc.fixed_query_attention) h.fixed_query_attention = true;
  return h;
}

void require_path(const std::string& path, const char* what) {
  require(!path.empty(), ErrorKind::Config, std::string("missing ") + what + " path");
  require(std::filesystem::exists(path), ErrorKind::Io, std::string(what) + " not found: " + path);
}

std::vector<RawExample> load_split(const RunConfig& rc, const std::string& path, bool validation) {
  ParseOptions po;
  po.lowercase = rc.lowercase;
  po.require_candidates_in_document = !rc.lenient_candidates;
  if (rc.format == "synthetic") {
    SyntheticConfig sc;
    sc.n_examples = validation ? rc.synthetic_valid : rc.synthetic_train;
    sc.seed = validation ? rc.data_seed + 1 : rc.data_seed;
    return generate_synthetic(sc);
  }
  require_path(path, validation ? "validation data" : "data");
  if (rc.format == "cbt") return parse_cbt_file(path, po);
  if (rc.format == "cnn") return parse_cnn_directory(path, po);
  if (rc.format == "corpus") return read_corpus(std::filesystem::path(path));
  fail(ErrorKind::Config, "unknown format '" + rc.format + "' (expected cbt, cnn, synthetic or corpus)");
}

// Evaluation data: --data for file formats, or the requested synthetic split.
std::vector<RawExample> load_eval_split(const RunConfig& rc) {
  if (rc.format == "synthetic") {
    require(rc.split == "train" || rc.split == "valid", ErrorKind::Config, "split must be train or valid");
    return load_split(rc, rc.data, rc.split == "valid");
  }
  return load_split(rc, rc.data, false);
}

std::vector<Example> encode_for_checkpoint(const std::vector<RawExample>& raw, const Vocabulary& vocab) {
  EncodeReport report;
  auto examples = encode_examples(raw, vocab, &report);
  require(report.unanswerable * 2 <= report.total, ErrorKind::Config,
          std::to_string(report.unanswerable) + " of " + std::to_string(report.total) +
              " examples are unanswerable under the checkpoint vocabulary");
  if (report.unanswerable)
    std::cerr << "warning: " << report.unanswerable << " unanswerable examples counted as wrong\n";
  return examples;
}

int cmd_train(const RunConfig& rc) {
  require(!rc.out.empty(), ErrorKind::Config, "train needs --out <checkpoint path>");
  HyperParams hyper = resolve_hyper(rc);
  const auto train_raw = load_split(rc, rc.data, false);
  const auto valid_raw = rc.format == "synthetic" ? load_split(rc, "", true) : load_split(rc, rc.valid, true);
  if (!rc.write_corpus_path.empty()) write_corpus(std::filesystem::path(rc.write_corpus_path), train_raw);

  const Vocabulary vocab = Vocabulary::build(train_raw, rc.min_count);
  hyper.vocab_size = vocab.size();
  EncodeReport train_report, valid_report;
  const auto train_set = encode_examples(train_raw, vocab, &train_report);
  const auto valid_set = encode_examples(valid_raw, vocab, &valid_report);
  std::cerr << "train examples " << train_report.total << " (unanswerable " << train_report.unanswerable
            << "), valid examples " << valid_report.total << " (unanswerable " << valid_report.unanswerable
            << "), vocabulary " << vocab.size() << '\n';

  const std::string metrics_path = rc.metrics.empty() ? rc.out + ".metrics.tsv" : rc.metrics;
  std::ofstream metrics(metrics_path);
  require(metrics.good(), ErrorKind::Io, "cannot write " + metrics_path);

  TrainOptions options;
  options.workers = rc.workers;
  options.metrics_log = &metrics;
  options.checkpoint_path = rc.out;
  options.vocabulary = vocab.tokens();
  options.on_window = [](const WindowMetrics& m) {
    std::fprintf(stderr, "window %zu  epoch %zu  loss %.4f  valid %.4f  lr %g\n", m.window, m.epoch + 1,
                 m.train_loss, m.valid_accuracy, m.learning_rate);
    return true;
  };
  const TrainResult result = train(train_set, valid_set, hyper, options);
  std::printf("best_valid_accuracy\t%.4f\n", result.best_accuracy);
  return 0;
}

int cmd_eval(const RunConfig& rc) {
  require(!rc.checkpoints.empty(), ErrorKind::Config, "eval needs at least one --checkpoint");
  for (const auto& c : rc.checkpoints) require_path(c, "checkpoint");
  std::vector<Checkpoint> models;
  for (const auto& c : rc.checkpoints) models.push_back(load_checkpoint(std::filesystem::path(c)));
  for (const auto& m : models) {
    require(m.vocabulary == models.front().vocabulary, ErrorKind::Config,
            "ensemble members were trained with different vocabularies");
  }
  const Vocabulary vocab = Vocabulary::from_tokens(models.front().vocabulary);
  const auto examples = encode_for_checkpoint(load_eval_split(rc), vocab);

  std::vector<ExampleScores> members;
  for (const auto& m : models) members.push_back(score_examples(m.params, examples, m.hyper, rc.workers));
  const EvalResult r = members.size() == 1 ? accuracy_of(examples, members.front())
                                           : evaluate_ensemble(members, examples);
  std::printf("models\t%zu\nexamples\t%zu\ncorrect\t%zu\naccuracy\t%.4f\n", members.size(), r.total,
              r.correct, r.accuracy());
  return 0;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

int cmd_trace(const RunConfig& rc) {
  require(rc.checkpoints.size() == 1, ErrorKind::Config, "trace needs exactly one --checkpoint");
  require(!rc.out.empty(), ErrorKind::Config, "trace needs --out <csv path>");
  require(!rc.example.empty(), ErrorKind::Config, "trace needs --example <id>");
  require_path(rc.checkpoints.front(), "checkpoint");
  const Checkpoint ckpt = load_checkpoint(std::filesystem::path(rc.checkpoints.front()));
  const Vocabulary vocab = Vocabulary::from_tokens(ckpt.vocabulary);
  const auto raw = load_eval_split(rc);

  std::optional<std::size_t> index;
  for (std::size_t i = 0; i < raw.size() && !index; ++i)
    if (raw[i].source_id == rc.example) index = i;
  if (!index && !rc.example.empty() &&
      rc.example.find_first_not_of("0123456789") == std::string::npos) {
    const auto i = std::stoull(rc.example);
    if (i < raw.size()) index = i;
  }
  require(index.has_value(), ErrorKind::Lookup, "no example with id '" + rc.example + "'");

  const std::vector<Example> one = {encode_example(raw[*index], vocab)};
  const std::size_t rows[] = {0};
  const Batch batch = make_batch(one, rows);
  Graph graph;
  const BoundParams bound = bind_constant(graph, ckpt.params);
  ForwardOptions fo;
  fo.steps = rc.steps.value_or(ckpt.hyper.steps);
  fo.fixed_query_attention = ckpt.hyper.fixed_query_attention;
  const ForwardResult fr = forward_example(bound, batch, 0, fo);
  const InferenceTrace trace = fr.run.trace();

  std::ofstream out(rc.out);
  require(out.good(), ErrorKind::Io, "cannot write " + rc.out);
  out << "step,side,position,token,weight\n";
  char buf[32];
  auto emit = [&](std::size_t step, const char* side, const std::vector<std::string>& tokens,
                  const std::vector<double>& weights) {
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.6f", weights[i]);
      out << step << ',' << side << ',' << i << ',' << csv_field(tokens[i]) << ',' << buf << '\n';
    }
  };
  for (std::size_t t = 0; t < trace.steps.size(); ++t) {
    emit(t + 1, "query", raw[*index].query, trace.steps[t].query_weights);
    emit(t + 1, "document", raw[*index].document, trace.steps[t].document_weights);
  }
  require(out.good(), ErrorKind::Io, "failed writing " + rc.out);
  return 0;
}

void add_shared(CLI::App* app, RunConfig& rc) {
  app->add_option("--data", rc.data, "Dataset path (CBT file, CNN question directory or corpus cache)");
  app->add_option("--format", rc.format, "Dataset format")
      ->check(CLI::IsMember({"cbt", "cnn", "synthetic", "corpus"}));
  app->add_option("--profile", rc.profile, "Hyperparameter profile")->check(CLI::IsMember({"paper", "desk"}));
  app->add_option("--config", rc.config_file, "key=value hyperparameter file");
  app->add_option("--seed", rc.seed, "Model seed");
  app->add_option("--steps", rc.steps, "Inference steps T");
  app->add_flag("--fixed-query-attention", rc.fixed_query_attention, "Uniform query attention ablation");
  app->add_option("--checkpoint", rc.checkpoints, "Checkpoint path (repeat for an ensemble)");
  app->add_option("--out", rc.out, "Output path");
  app->add_option("--workers", rc.workers, "Parallel workers (1 = deterministic serial path)")
      ->check(CLI::PositiveNumber);
  app->add_flag("--lowercase", rc.lowercase, "Lowercase tokens while parsing");
  app->add_flag("--lenient-candidates", rc.lenient_candidates,
                "Drop CBT candidates that do not occur in the document instead of failing");
  app->add_option("--data-seed", rc.data_seed, "Seed of the synthetic corpus");
  app->add_option("--synthetic-train", rc.synthetic_train, "Synthetic training examples");
  app->add_option("--synthetic-valid", rc.synthetic_valid, "Synthetic validation examples");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Iterative alternating attention reader for Cloze-style comprehension"};
  app.require_subcommand(1);
  RunConfig rc;

  auto* train_cmd = app.add_subcommand("train", "Train a model and write the best checkpoint");
  add_shared(train_cmd, rc);
  train_cmd->add_option("--valid", rc.valid, "Validation split (cbt/cnn/corpus)");
  train_cmd->add_option("--metrics", rc.metrics, "Metrics log path (default <out>.metrics.tsv)");
  train_cmd->add_option("--epochs", rc.epochs, "Maximum epochs");
  train_cmd->add_option("--batch-size", rc.batch_size, "Batch size");
  train_cmd->add_option("--eval-window", rc.eval_window, "Batches between validations");
  train_cmd->add_option("--lr", rc.learning_rate, "Initial learning rate");
  train_cmd->add_option("--dropout", rc.dropout, "Dropout rate");
  train_cmd->add_option("--embed-dim", rc.embed_dim, "Embedding size d");
  train_cmd->add_option("--hidden-dim", rc.hidden_dim, "Encoder size h");
  train_cmd->add_option("--state-dim", rc.state_dim, "Inference state size s");
  train_cmd->add_option("--min-count", rc.min_count, "Vocabulary frequency cutoff");
  train_cmd->add_option("--write-corpus", rc.write_corpus_path, "Also write the training split as a corpus cache");

  auto* eval_cmd = app.add_subcommand("eval", "Report accuracy of one model or an ensemble");
  add_shared(eval_cmd, rc);
  eval_cmd->add_option("--split", rc.split, "Synthetic split to evaluate (train|valid)");

  auto* trace_cmd = app.add_subcommand("trace", "Write per-step attention weights of one example as CSV");
  add_shared(trace_cmd, rc);
  trace_cmd->add_option("--example", rc.example, "Example source id or index");
  trace_cmd->add_option("--split", rc.split, "Synthetic split to read (train|valid)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::string msg = e.what();
    for (char& c : msg)
      if (c == '\n') c = ' ';
    std::fprintf(stderr, "error\tconfig\t%s\n", msg.c_str());
    return exit_code(ErrorKind::Config);
  }
  omp_set_num_threads(static_cast<int>(rc.workers));

  try {
    if (train_cmd->parsed()) return cmd_train(rc);
    if (eval_cmd->parsed()) return cmd_eval(rc);
    return cmd_trace(rc);
  } catch (const Error& e) {
    std::string msg = e.what();
    for (char& c : msg)
      if (c == '\n') c = ' ';
    std::fprintf(stderr, "error\t%s\t%s\n", std::string(error_kind_name(e.kind())).c_str(), msg.c_str());
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error\tinternal\t%s\n", e.what());
    return 1;
  }
}
