#include "aair/model.hpp"

#include <Eigen/QR>
#include <charconv>

#include "aair/ops.hpp"

namespace aair {
namespace {

constexpr double kInitStd = 0.05;

Tensor normal(Shape shape, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, kInitStd);
  Tensor t(std::move(shape));
  for (double& x : t.data) x = dist(rng);
  return t;
}

// Orthogonal factor of a Gaussian matrix, sign-corrected so the draw is uniform.
Tensor orthogonal(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Eigen::MatrixXd a(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) a(i, j) = dist(rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  Eigen::MatrixXd q = qr.householderQ();
  const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (std::size_t j = 0; j < n; ++j)
    if (r(j, j) < 0) q.col(j) *= -1.0;
  Tensor t({n, n});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) t(i, j) = q(i, j);
  return t;
}

GruParamsT<Tensor> init_gru(std::size_t input, std::size_t hidden, std::mt19937_64& rng) {
  GruParamsT<Tensor> p;
  p.input_reset = normal({hidden, input}, rng);
  p.input_update = normal({hidden, input}, rng);
  p.input_candidate = normal({hidden, input}, rng);
  p.hidden_reset = orthogonal(hidden, rng);
  p.hidden_update = orthogonal(hidden, rng);
  p.hidden_candidate = orthogonal(hidden, rng);
  return p;
}

GateNetT<Tensor> init_gate(std::size_t input, std::size_t width, std::mt19937_64& rng) {
  return {normal({width, input}, rng), Tensor({width}, 0.0), normal({width, width}, rng),
          Tensor({width}, 0.0)};
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

template <class T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
  require(res.ec == std::errc() && res.ptr == text.data() + text.size(), ErrorKind::Config,
          "invalid value '" + text + "' for " + key);
  return value;
}

}  // namespace

HyperParams HyperParams::paper() {
  HyperParams h;
  h.embed_dim = 384;
  h.hidden_dim = 128;
  h.state_dim = 512;
  h.steps = 8;
  h.batch_size = 32;
  h.learning_rate = 1e-3;
  h.decay_factor = 0.8;
  h.eval_window = 2000;
  h.grad_clip = 5.0;
  h.dropout = 0.2;
  h.embedding_reg = 1e-4;
  h.max_epochs = 10;
  return h;
}

HyperParams HyperParams::desk() {
  HyperParams h;
  h.embed_dim = 32;
  h.hidden_dim = 32;
  h.state_dim = 64;
  h.steps = 3;
  h.batch_size = 32;
  h.learning_rate = 3e-3;
  h.eval_window = 157;  // one epoch of the 5,000-example synthetic split
  h.dropout = 0.0;
  h.max_epochs = 10;
  return h;
}

HyperParams HyperParams::profile(const std::string& name) {
  if (name == "paper") return paper();
  if (name == "desk") return desk();
  fail(ErrorKind::Config, "unknown profile '" + name + "' (expected paper or desk)");
}

void HyperParams::validate() const {
  require(vocab_size > Vocabulary::kReserved, ErrorKind::Config, "vocabulary size not set");
  require(embed_dim > 0 && hidden_dim > 0 && state_dim > 0 && batch_size > 0 && max_epochs > 0 &&
              eval_window > 0,
          ErrorKind::Config, "dimensions, batch size, epochs and window must be positive");
  require(steps >= 1, ErrorKind::Config, "inference steps T must be >= 1");
  require(learning_rate > 0 && decay_factor > 0 && decay_factor <= 1 && grad_clip > 0,
          ErrorKind::Config, "learning rate, decay factor and clip norm must be positive");
  require(dropout >= 0 && dropout < 1, ErrorKind::Config, "dropout must be in [0, 1)");
  require(embedding_reg >= 0, ErrorKind::Config, "embedding regularisation must be >= 0");
}

std::map<std::string, std::string> HyperParams::to_map() const {
  return {{"vocab_size", std::to_string(vocab_size)},
          {"embed_dim", std::to_string(embed_dim)},
          {"hidden_dim", std::to_string(hidden_dim)},
          {"state_dim", std::to_string(state_dim)},
          {"steps", std::to_string(steps)},
          {"batch_size", std::to_string(batch_size)},
          {"learning_rate", format_double(learning_rate)},
          {"decay_factor", format_double(decay_factor)},
          {"eval_window", std::to_string(eval_window)},
          {"grad_clip", format_double(grad_clip)},
          {"dropout", format_double(dropout)},
          {"embedding_reg", format_double(embedding_reg)},
          {"max_epochs", std::to_string(max_epochs)},
          {"seed", std::to_string(seed)},
          {"fixed_query_attention", fixed_query_attention ? "1" : "0"}};
}

void HyperParams::apply(const std::map<std::string, std::string>& settings) {
  for (const auto& [key, text] : settings) {
    if (key == "vocab_size") vocab_size = parse_number<std::size_t>(key, text);
    else if (key == "embed_dim") embed_dim = parse_number<std::size_t>(key, text);
    else if (key == "hidden_dim") hidden_dim = parse_number<std::size_t>(key, text);
    else if (key == "state_dim") state_dim = parse_number<std::size_t>(key, text);
    else if (key == "steps") steps = parse_number<std::size_t>(key, text);
    else if (key == "batch_size") batch_size = parse_number<std::size_t>(key, text);
    else if (key == "learning_rate") learning_rate = parse_number<double>(key, text);
    else if (key == "decay_factor") decay_factor = parse_number<double>(key, text);
    else if (key == "eval_window") eval_window = parse_number<std::size_t>(key, text);
    else if (key == "grad_clip") grad_clip = parse_number<double>(key, text);
    else if (key == "dropout") dropout = parse_number<double>(key, text);
    else if (key == "embedding_reg") embedding_reg = parse_number<double>(key, text);
    else if (key == "max_epochs") max_epochs = parse_number<std::size_t>(key, text);
    else if (key == "seed") seed = parse_number<std::uint64_t>(key, text);
    else if (key == "fixed_query_attention") fixed_query_attention = parse_number<int>(key, text) != 0;
    else fail(ErrorKind::Config, "unknown hyperparameter '" + key + "'");
  }
}

ModelParams init_params(const HyperParams& hyper, std::uint64_t seed) {
  hyper.validate();
  const std::size_t d = hyper.embed_dim, h = hyper.hidden_dim, s = hyper.state_dim;
  std::mt19937_64 rng(seed);
  ModelParams p;
  p.embedding = normal({hyper.vocab_size, d}, rng);
  p.query_fwd = init_gru(d, h, rng);
  p.query_bwd = init_gru(d, h, rng);
  p.doc_fwd = init_gru(d, h, rng);
  p.doc_bwd = init_gru(d, h, rng);
  p.attention.query_proj = normal({2 * h, s}, rng);
  p.attention.query_bias = Tensor({2 * h}, 0.0);
  p.attention.doc_proj = normal({2 * h, s + 2 * h}, rng);
  p.attention.doc_bias = Tensor({2 * h}, 0.0);
  p.gates.query = init_gate(s + 6 * h, 2 * h, rng);
  p.gates.document = init_gate(s + 6 * h, 2 * h, rng);
  p.inference = init_gru(4 * h, s, rng);
  p.initial_state = Tensor({s}, 0.0);
  return p;
}

ModelParams zeros_like(const ModelParams& params) {
  ModelParams out;
  for_each_param([](const std::string&, const Tensor& src, Tensor& dst) { dst = Tensor(src.shape, 0.0); },
                 params, out);
  return out;
}

void fill_zero(ModelParams& params) {
  for_each_param([](const std::string&, Tensor& t) { std::fill(t.data.begin(), t.data.end(), 0.0); },
                 params);
}

std::size_t parameter_count(const ModelParams& params) {
  std::size_t n = 0;
  for_each_param([&](const std::string&, const Tensor& t) { n += t.size(); }, params);
  return n;
}

BoundParams bind(Graph& graph, const ModelParams& params, ModelParams& grads) {
  BoundParams out;
  for_each_param(
      [&](const std::string&, const Tensor& value, Tensor& grad, Var& var) {
        var = graph.parameter(value, grad);
      },
      params, grads, out);
  return out;
}

BoundParams bind_constant(Graph& graph, const ModelParams& params) {
  BoundParams out;
  for_each_param([&](const std::string&, const Tensor& value, Var& var) { var = graph.reference(value); },
                 params, out);
  return out;
}

ForwardResult forward_example(const BoundParams& params, const Batch& batch, std::size_t b,
                              const ForwardOptions& options) {
  require(b < batch.size(), ErrorKind::Bounds, "batch row out of range");
  ForwardResult out;
  out.query = encode_bidirectional(batch.query(b), batch.query_lengths[b], params.embedding,
                                   params.query_fwd, params.query_bwd, options.dropout);
  out.document = encode_bidirectional(batch.document(b), batch.document_lengths[b], params.embedding,
                                      params.doc_fwd, params.doc_bwd, options.dropout);
  out.run = run_inference(out.query, out.document, params, options.steps,
                          options.fixed_query_attention, options.dropout);
  const auto& positions = batch.answer_positions[b];
  if (!positions.empty()) out.loss = nll_loss(pointer_sum(out.run.final_document_weights(), positions));
  return out;
}

}  // namespace aair
