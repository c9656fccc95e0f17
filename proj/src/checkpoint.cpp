#include "aair/checkpoint.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

#include "aair/binary_io.hpp"

namespace aair {
namespace {

constexpr char kMagic[4] = {'A', 'A', 'I', 'R'};
constexpr std::string_view kFirstMoment = "adam.m/";
constexpr std::string_view kSecondMoment = "adam.v/";

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& key, const std::string& text) {
  double v = 0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  require(res.ec == std::errc() && res.ptr == text.data() + text.size(), ErrorKind::Config,
          "checkpoint header: bad value for " + key);
  return v;
}

void put_record(std::ostream& out, const std::string& name, const Tensor& t) {
  require(name.size() <= 0xffff, ErrorKind::Contract, "tensor name too long");
  io::put_uint<std::uint16_t>(out, static_cast<std::uint16_t>(name.size()));
  io::put_bytes(out, name);
  io::put_uint<std::uint8_t>(out, static_cast<std::uint8_t>(t.rank()));
  for (auto d : t.shape) io::put_uint<std::uint32_t>(out, static_cast<std::uint32_t>(d));
  for (double x : t.data) io::put_f64(out, x);
}

std::pair<std::string, Tensor> get_record(std::istream& in) {
  const auto len = io::get_uint<std::uint16_t>(in);
  std::string name = io::get_bytes(in, len);
  const auto rank = io::get_uint<std::uint8_t>(in);
  Shape shape;
  require(rank <= 2, ErrorKind::Parse, "tensor record '" + name + "' has rank " + std::to_string(rank));
  std::uint64_t count = 1;
  for (std::uint8_t i = 0; i < rank; ++i) {
    shape.push_back(io::get_uint<std::uint32_t>(in));
    count *= shape.back();
  }
  require(count <= (std::uint64_t{1} << 28), ErrorKind::Parse, "tensor record '" + name + "' is implausibly large");
  Tensor t(shape);
  for (double& x : t.data) x = io::get_f64(in);
  return {std::move(name), std::move(t)};
}

}  // namespace

void save_checkpoint(std::ostream& out, const Checkpoint& ckpt) {
  std::ostringstream header;
  for (const auto& [k, v] : ckpt.hyper.to_map()) header << k << '=' << v << '\n';
  header << "optimizer.step=" << ckpt.optimizer.step << '\n';
  header << "optimizer.learning_rate=" << format_double(ckpt.optimizer.learning_rate) << '\n';
  header << "optimizer.best_accuracy=" << format_double(ckpt.optimizer.best_accuracy) << '\n';
  header << "vocabulary=";
  for (std::size_t i = 0; i < ckpt.vocabulary.size(); ++i) header << (i ? " " : "") << ckpt.vocabulary[i];
  header << '\n';
  const std::string text = header.str();

  std::vector<std::pair<std::string, const Tensor*>> records;
  for_each_param([&](const std::string& name, const Tensor& t) { records.emplace_back(name, &t); },
                 ckpt.params);
  const std::size_t n_params = records.size();
  if (!ckpt.optimizer.first_moment.empty()) {
    require(ckpt.optimizer.first_moment.size() == n_params &&
                ckpt.optimizer.second_moment.size() == n_params,
            ErrorKind::Contract, "optimizer moments do not match the parameter set");
    for (std::size_t i = 0; i < n_params; ++i)
      records.emplace_back(std::string(kFirstMoment) + records[i].first, &ckpt.optimizer.first_moment[i]);
    for (std::size_t i = 0; i < n_params; ++i)
      records.emplace_back(std::string(kSecondMoment) + records[i].first, &ckpt.optimizer.second_moment[i]);
  }

  out.write(kMagic, 4);
  io::put_uint<std::uint16_t>(out, kCheckpointVersion);
  io::put_uint<std::uint32_t>(out, static_cast<std::uint32_t>(text.size()));
  io::put_bytes(out, text);
  io::put_uint<std::uint32_t>(out, static_cast<std::uint32_t>(records.size()));
  for (const auto& [name, t] : records) put_record(out, name, *t);
  require(out.good(), ErrorKind::Io, "failed writing checkpoint");
}

Checkpoint load_checkpoint(std::istream& in) {
  require(io::get_bytes(in, 4) == std::string(kMagic, 4), ErrorKind::Parse,
          "not a checkpoint (bad magic)");
  const auto version = io::get_uint<std::uint16_t>(in);
  require(version == kCheckpointVersion, ErrorKind::Parse,
          "unsupported checkpoint version " + std::to_string(version));
  const std::string text = io::get_bytes(in, io::get_uint<std::uint32_t>(in));

  Checkpoint ckpt;
  std::map<std::string, std::string> hyper;
  std::istringstream lines(text);
  std::string line;
  while (std::getline(lines, line)) {
    const auto eq = line.find('=');
    require(eq != std::string::npos, ErrorKind::Parse, "checkpoint header line without '='");
    const std::string key = line.substr(0, eq), value = line.substr(eq + 1);
    if (key == "vocabulary") {
      std::istringstream toks(value);
      std::string t;
      while (toks >> t) ckpt.vocabulary.push_back(t);
    } else if (key == "optimizer.step") {
      ckpt.optimizer.step = static_cast<std::uint64_t>(std::stoull(value));
    } else if (key == "optimizer.learning_rate") {
      ckpt.optimizer.learning_rate = parse_double(key, value);
    } else if (key == "optimizer.best_accuracy") {
      ckpt.optimizer.best_accuracy = parse_double(key, value);
    } else {
      hyper[key] = value;
    }
  }
  ckpt.hyper.apply(hyper);

  std::map<std::string, Tensor> records;
  const auto count = io::get_uint<std::uint32_t>(in);
  for (std::uint32_t i = 0; i < count; ++i) {
    auto [name, t] = get_record(in);
    records.emplace(std::move(name), std::move(t));
  }

  const ModelParams expected = zeros_like(init_params(ckpt.hyper, 0));
  auto take = [&](const std::string& name, const Shape& shape) {
    const auto it = records.find(name);
    require(it != records.end(), ErrorKind::Config, "checkpoint lacks tensor " + name);
    require(it->second.shape == shape, ErrorKind::Config,
            "checkpoint tensor " + name + " has shape " + shape_string(it->second.shape) +
                ", hyperparameters imply " + shape_string(shape));
    return std::move(it->second);
  };
  for_each_param([&](const std::string& name, const Tensor& ref, Tensor& dst) { dst = take(name, ref.shape); },
                 expected, ckpt.params);
  if (records.count(std::string(kFirstMoment) + "embedding")) {
    for_each_param(
        [&](const std::string& name, const Tensor& ref) {
          ckpt.optimizer.first_moment.push_back(take(std::string(kFirstMoment) + name, ref.shape));
          ckpt.optimizer.second_moment.push_back(take(std::string(kSecondMoment) + name, ref.shape));
        },
        expected);
  }
  require(ckpt.vocabulary.size() == ckpt.hyper.vocab_size, ErrorKind::Config,
          "checkpoint vocabulary has " + std::to_string(ckpt.vocabulary.size()) +
              " entries but vocab_size is " + std::to_string(ckpt.hyper.vocab_size));
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), ErrorKind::Io, "cannot write " + path.string());
  save_checkpoint(out, ckpt);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorKind::Io, "cannot open " + path.string());
  return load_checkpoint(in);
}

}  // namespace aair
