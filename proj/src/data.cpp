#include "aair/data.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "aair/binary_io.hpp"
#include "aair/error.hpp"

namespace aair {
namespace {

std::vector<std::string> split_ws(std::string_view text, bool lowercase) {
  std::vector<std::string> out;
  std::istringstream is{std::string(text)};
  std::string tok;
  while (is >> tok) {
    if (lowercase && !is_placeholder(tok))
      std::transform(tok.begin(), tok.end(), tok.begin(),
                     [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    out.push_back(std::move(tok));
  }
  return out;
}

std::string strip_cr(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

bool blank(std::string_view line) {
  return std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); });
}

[[noreturn]] void parse_error(const std::string& where, std::size_t line, const std::string& what) {
  fail(ErrorKind::Parse, where + ":" + std::to_string(line) + ": " + what);
}

void check_length(const RawExample& ex, const ParseOptions& options) {
  require(ex.document.size() <= options.max_document_tokens, ErrorKind::DataIntegrity,
          ex.source_id + ": document has " + std::to_string(ex.document.size()) +
              " tokens, above the cap of " + std::to_string(options.max_document_tokens));
}

// Parses one numbered CBT line "N text", returning the text part.
std::string cbt_line_body(const std::string& line, std::size_t expected, const std::string& where,
                          std::size_t lineno) {
  std::size_t pos = 0;
  while (pos < line.size() && std::isdigit(static_cast<unsigned char>(line[pos]))) ++pos;
  if (pos == 0 || std::stoul(line.substr(0, pos)) != expected)
    parse_error(where, lineno, "expected line number " + std::to_string(expected));
  return pos < line.size() ? line.substr(pos + 1) : std::string();
}

RawExample parse_cbt_block(const std::vector<std::pair<std::size_t, std::string>>& block,
                           const std::string& source, const ParseOptions& options) {
  const std::size_t start = block.front().first;
  if (block.size() != 21)
    parse_error(source, start, "block has " + std::to_string(block.size()) + " lines, expected 21");
  RawExample ex;
  ex.source_id = source + ":" + std::to_string(start);
  for (std::size_t i = 0; i < 20; ++i) {
    const auto& [lineno, line] = block[i];
    const auto body = cbt_line_body(line, i + 1, source, lineno);
    if (body.find('\t') != std::string::npos) parse_error(source, lineno, "tab inside a context line");
    for (auto& t : split_ws(body, options.lowercase)) ex.document.push_back(std::move(t));
  }
  const auto& [qline, last] = block[20];
  const auto body = cbt_line_body(last, 21, source, qline);
  std::vector<std::string> fields;
  std::size_t pos = 0;
  while (true) {
    const auto tab = body.find('\t', pos);
    auto field = body.substr(pos, tab == std::string::npos ? std::string::npos : tab - pos);
    if (!blank(field)) fields.push_back(std::move(field));
    if (tab == std::string::npos) break;
    pos = tab + 1;
  }
  if (fields.size() != 3)
    parse_error(source, qline, "query line needs query, answer and candidate fields separated by tabs");
  ex.query = split_ws(fields[0], options.lowercase);
  const auto answer = split_ws(fields[1], options.lowercase);
  if (answer.size() != 1) parse_error(source, qline, "answer field must be a single token");
  ex.answer = answer[0];
  std::string cand;
  std::istringstream cs(fields[2]);
  while (std::getline(cs, cand, '|')) {
    auto toks = split_ws(cand, options.lowercase);
    if (toks.size() != 1) parse_error(source, qline, "malformed candidate '" + cand + "'");
    ex.candidates.push_back(toks[0]);
  }
  if (ex.candidates.size() != 10)
    parse_error(source, qline,
                "expected 10 candidates, found " + std::to_string(ex.candidates.size()));
  if (std::find(ex.candidates.begin(), ex.candidates.end(), ex.answer) == ex.candidates.end())
    parse_error(source, qline, "answer '" + ex.answer + "' is not among the candidates");
  const auto placeholders = std::count_if(ex.query.begin(), ex.query.end(),
                                          [](const std::string& t) { return is_placeholder(t); });
  if (placeholders != 1)
    parse_error(source, qline,
                "query must contain exactly one placeholder, found " + std::to_string(placeholders));
  check_length(ex, options);
  validate_example(ex, options.require_candidates_in_document);
  if (!options.require_candidates_in_document) {
    const std::set<std::string> doc(ex.document.begin(), ex.document.end());
    std::erase_if(ex.candidates, [&](const std::string& c) { return c != ex.answer && !doc.count(c); });
  }
  return ex;
}

std::size_t uniform_index(std::mt19937_64& rng, std::size_t n) {
  // Multiply-shift keeps generation identical across standard libraries.
  return static_cast<std::size_t>((static_cast<unsigned __int128>(rng()) * n) >> 64);
}

template <class T>
void portable_shuffle(std::vector<T>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[uniform_index(rng, i)]);
}

constexpr char kCorpusMagic[4] = {'A', 'A', 'I', 'C'};
constexpr std::uint16_t kCorpusVersion = 1;

void put_tokens(std::ostream& out, const std::vector<std::string>& tokens) {
  io::put_uint<std::uint32_t>(out, static_cast<std::uint32_t>(tokens.size()));
  for (const auto& t : tokens) io::put_string32(out, t);
}

std::vector<std::string> get_tokens(std::istream& in) {
  const auto n = io::get_uint<std::uint32_t>(in);
  std::vector<std::string> out;
  out.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) out.push_back(io::get_string32(in));
  return out;
}

}  // namespace

bool is_placeholder(std::string_view token) {
  return token == kCbtPlaceholder || token == kCnnPlaceholder;
}

void validate_example(const RawExample& ex, bool require_candidates_in_document) {
  const auto placeholders = std::count_if(ex.query.begin(), ex.query.end(),
                                          [](const std::string& t) { return is_placeholder(t); });
  require(placeholders == 1, ErrorKind::Parse,
          ex.source_id + ": query must contain exactly one placeholder, found " +
              std::to_string(placeholders));
  const std::set<std::string> distinct(ex.candidates.begin(), ex.candidates.end());
  require(distinct.size() == ex.candidates.size() && distinct.size() >= 2, ErrorKind::DataIntegrity,
          ex.source_id + ": candidates must be at least two distinct tokens");
  require(distinct.count(ex.answer) == 1, ErrorKind::DataIntegrity,
          ex.source_id + ": answer '" + ex.answer + "' is not a candidate");
  if (!require_candidates_in_document) return;
  const std::set<std::string> doc(ex.document.begin(), ex.document.end());
  for (const auto& c : ex.candidates) {
    require(doc.count(c) == 1, ErrorKind::DataIntegrity,
            ex.source_id + ": candidate '" + c + "' does not occur in the document");
  }
}

std::vector<RawExample> parse_cbt(std::istream& in, const std::string& source_name,
                                  const ParseOptions& options) {
  std::vector<RawExample> out;
  std::vector<std::pair<std::size_t, std::string>> block;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = strip_cr(std::move(line));
    if (blank(line)) {
      if (!block.empty()) out.push_back(parse_cbt_block(block, source_name, options));
      block.clear();
      continue;
    }
    block.emplace_back(lineno, line);
  }
  if (!block.empty()) out.push_back(parse_cbt_block(block, source_name, options));
  return out;
}

std::vector<RawExample> parse_cbt_file(const std::filesystem::path& path, const ParseOptions& options) {
  std::ifstream in(path);
  require(in.good(), ErrorKind::Io, "cannot open " + path.string());
  return parse_cbt(in, path.filename().string(), options);
}

RawExample parse_cnn(std::istream& in, const std::string& source_id, const ParseOptions& options) {
  std::vector<std::vector<std::string>> sections(1);
  std::string line;
  while (std::getline(in, line)) {
    line = strip_cr(std::move(line));
    if (blank(line)) {
      if (!sections.back().empty()) sections.emplace_back();
      continue;
    }
    sections.back().push_back(line);
  }
  if (sections.back().empty()) sections.pop_back();
  const char* names[] = {"url", "passage", "question", "answer", "entity mapping"};
  for (std::size_t i = sections.size(); i < 5; ++i)
    fail(ErrorKind::Parse, source_id + ": missing " + names[i] + " section");

  RawExample ex;
  ex.source_id = source_id;
  for (const auto& l : sections[1])
    for (auto& t : split_ws(l, options.lowercase)) ex.document.push_back(std::move(t));
  for (const auto& l : sections[2])
    for (auto& t : split_ws(l, options.lowercase)) ex.query.push_back(std::move(t));
  const auto answer = split_ws(sections[3].front(), options.lowercase);
  require(sections[3].size() == 1 && answer.size() == 1, ErrorKind::Parse,
          source_id + ": answer section must be a single token");
  ex.answer = answer[0];
  for (const auto& l : sections[4]) {
    require(l.rfind("@entity", 0) == 0 && l.find(':') != std::string::npos, ErrorKind::Parse,
            source_id + ": malformed entity mapping line '" + l + "'");
  }
  const auto placeholders = std::count_if(ex.query.begin(), ex.query.end(),
                                          [](const std::string& t) { return t == kCnnPlaceholder; });
  require(placeholders == 1, ErrorKind::Parse,
          source_id + ": question must contain @placeholder exactly once");
  std::set<std::string> seen;
  for (const auto& t : ex.document) {
    if (t.rfind("@entity", 0) == 0 && seen.insert(t).second) ex.candidates.push_back(t);
  }
  require(seen.count(ex.answer) == 1, ErrorKind::DataIntegrity,
          source_id + ": answer entity " + ex.answer + " does not occur in the passage");
  check_length(ex, options);
  validate_example(ex);
  return ex;
}

std::vector<RawExample> parse_cnn_directory(const std::filesystem::path& dir, const ParseOptions& options) {
  require(std::filesystem::is_directory(dir), ErrorKind::Io, "not a directory: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".question") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<RawExample> out;
  out.reserve(files.size());
  for (const auto& f : files) {
    std::ifstream in(f);
    require(in.good(), ErrorKind::Io, "cannot open " + f.string());
    out.push_back(parse_cnn(in, f.filename().string(), options));
  }
  return out;
}

Vocabulary::Vocabulary() : tokens_{"<pad>", "<unk>", "<placeholder>"} {}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens) {
  require(tokens.size() >= kReserved, ErrorKind::Config, "vocabulary lacks reserved entries");
  Vocabulary v;
  v.tokens_ = std::move(tokens);
  v.index_.clear();
  for (std::size_t i = kReserved; i < v.tokens_.size(); ++i) {
    const bool fresh = v.index_.emplace(v.tokens_[i], static_cast<std::int32_t>(i)).second;
    require(fresh, ErrorKind::Config, "duplicate vocabulary entry '" + v.tokens_[i] + "'");
  }
  return v;
}

Vocabulary Vocabulary::build(std::span<const RawExample> examples, std::size_t min_count) {
  std::map<std::string, std::size_t> counts;
  auto add = [&](const std::string& t) {
    if (!is_placeholder(t)) ++counts[t];
  };
  for (const auto& ex : examples) {
    for (const auto& t : ex.document) add(t);
    for (const auto& t : ex.query) add(t);
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> tokens = {"<pad>", "<unk>", "<placeholder>"};
  for (auto& [tok, n] : ranked) {
    if (n >= min_count) tokens.push_back(tok);
  }
  return from_tokens(std::move(tokens));
}

std::int32_t Vocabulary::id(std::string_view token) const {
  if (is_placeholder(token)) return kPlaceholder;
  const auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnknown : it->second;
}

const std::string& Vocabulary::token(std::int32_t id) const {
  require(id >= 0 && static_cast<std::size_t>(id) < tokens_.size(), ErrorKind::Vocabulary,
          "token id " + std::to_string(id) + " outside vocabulary of size " + std::to_string(size()));
  return tokens_[static_cast<std::size_t>(id)];
}

std::vector<std::int32_t> Vocabulary::encode(std::span<const std::string> tokens) const {
  std::vector<std::int32_t> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(id(t));
  return out;
}

std::vector<std::string> Vocabulary::decode(std::span<const std::int32_t> ids) const {
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (auto i : ids) out.push_back(token(i));
  return out;
}

std::vector<std::size_t> positions_of(std::span<const std::int32_t> document, std::int32_t token) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < document.size(); ++i)
    if (document[i] == token) out.push_back(i);
  return out;
}

Example encode_example(const RawExample& raw, const Vocabulary& vocab) {
  Example ex;
  ex.source_id = raw.source_id;
  ex.query = vocab.encode(raw.query);
  ex.document = vocab.encode(raw.document);
  ex.candidates = vocab.encode(raw.candidates);
  ex.answer = vocab.id(raw.answer);
  ex.answer_positions = positions_of(ex.document, ex.answer);
  const std::set<std::int32_t> distinct(ex.candidates.begin(), ex.candidates.end());
  ex.answerable = ex.answer != Vocabulary::kUnknown && !ex.answer_positions.empty() &&
                  distinct.size() == ex.candidates.size() && !distinct.count(Vocabulary::kUnknown);
  return ex;
}

std::vector<Example> encode_examples(std::span<const RawExample> raw, const Vocabulary& vocab,
                                     EncodeReport* report) {
  std::vector<Example> out;
  out.reserve(raw.size());
  EncodeReport local;
  for (const auto& r : raw) {
    out.push_back(encode_example(r, vocab));
    ++local.total;
    if (!out.back().answerable) {
      ++local.unanswerable;
      local.unanswerable_ids.push_back(r.source_id);
    }
  }
  if (report) *report = std::move(local);
  return out;
}

Batch make_batch(std::span<const Example> examples, std::span<const std::size_t> indices) {
  Batch b;
  b.indices.assign(indices.begin(), indices.end());
  for (auto i : indices) {
    const auto& ex = examples[i];
    require(!ex.document.empty() && !ex.query.empty(), ErrorKind::DataIntegrity,
            ex.source_id + ": empty document or query");
    b.max_document = std::max(b.max_document, ex.document.size());
    b.max_query = std::max(b.max_query, ex.query.size());
  }
  b.documents.assign(indices.size() * b.max_document, Vocabulary::kPad);
  b.queries.assign(indices.size() * b.max_query, Vocabulary::kPad);
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const auto& ex = examples[indices[r]];
    std::copy(ex.document.begin(), ex.document.end(), b.documents.begin() + r * b.max_document);
    std::copy(ex.query.begin(), ex.query.end(), b.queries.begin() + r * b.max_query);
    b.document_lengths.push_back(ex.document.size());
    b.query_lengths.push_back(ex.query.size());
    b.candidates.push_back(ex.candidates);
    b.answers.push_back(ex.answer);
    b.answer_positions.push_back(ex.answer_positions);
  }
  return b;
}

std::vector<Batch> make_batches(std::span<const Example> examples, std::size_t batch_size,
                                std::uint64_t seed, bool shuffle) {
  require(batch_size > 0, ErrorKind::Contract, "batch size must be positive");
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (shuffle) {
    std::mt19937_64 rng(seed);
    portable_shuffle(order, rng);
  }
  std::vector<Batch> out;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t n = std::min(batch_size, order.size() - start);
    out.push_back(make_batch(examples, std::span(order).subspan(start, n)));
  }
  return out;
}

std::vector<RawExample> generate_synthetic(const SyntheticConfig& c) {
  const std::size_t key_len = c.context_len + 3;  // context, marker, answer, tail
  require(c.n_candidates >= 2 && c.n_distractor_pairs < c.n_candidates, ErrorKind::Contract,
          "synthetic: need >= 2 candidates and fewer distractor pairs than candidates");
  require(c.n_markers > c.n_distractor_pairs, ErrorKind::Contract,
          "synthetic: need more markers than distractor pairs");
  // Longest possible set of mandatory chunks: every candidate with two extra occurrences.
  const std::size_t max_used =
      key_len + 2 * c.n_distractor_pairs + (c.n_candidates - 1 - c.n_distractor_pairs) + 2 * c.n_candidates;
  require(c.doc_len_min <= c.doc_len_max && c.doc_len_max >= max_used, ErrorKind::Contract,
          "synthetic: maximum document length must be at least " + std::to_string(max_used));
  require(c.vocab_size >= c.n_markers + c.n_candidates + c.context_len + 10, ErrorKind::Contract,
          "synthetic: vocabulary too small for the candidate and marker sets");

  const std::size_t n_words = c.vocab_size - c.n_markers;
  auto word = [](std::size_t i) { return "w" + std::to_string(i); };
  auto marker = [](std::size_t i) { return "m" + std::to_string(i); };

  std::mt19937_64 rng(c.seed);
  std::vector<RawExample> out;
  out.reserve(c.n_examples);
  std::vector<std::size_t> word_pool(n_words);
  std::iota(word_pool.begin(), word_pool.end(), std::size_t{0});
  std::vector<std::size_t> marker_pool(c.n_markers);
  std::iota(marker_pool.begin(), marker_pool.end(), std::size_t{0});

  for (std::size_t e = 0; e < c.n_examples; ++e) {
    // Partial shuffles pick distinct candidates and markers.
    for (std::size_t i = 0; i < c.n_candidates; ++i)
      std::swap(word_pool[i], word_pool[i + uniform_index(rng, n_words - i)]);
    for (std::size_t i = 0; i <= c.n_distractor_pairs; ++i)
      std::swap(marker_pool[i], marker_pool[i + uniform_index(rng, c.n_markers - i)]);
    std::set<std::size_t> cand_ids(word_pool.begin(), word_pool.begin() + c.n_candidates);
    auto filler = [&] {
      std::size_t w;
      do w = uniform_index(rng, n_words);
      while (cand_ids.count(w));
      return word(w);
    };

    RawExample ex;
    ex.source_id = "synthetic:" + std::to_string(e);
    for (std::size_t i = 0; i < c.n_candidates; ++i) ex.candidates.push_back(word(word_pool[i]));
    const std::size_t answer_idx = uniform_index(rng, c.n_candidates);
    ex.answer = ex.candidates[answer_idx];

    std::vector<std::vector<std::string>> chunks;
    std::vector<std::string> key;
    for (std::size_t i = 0; i < c.context_len; ++i) key.push_back(filler());
    key.push_back(marker(marker_pool[0]));
    ex.query = key;
    key.push_back(ex.answer);
    ex.query.emplace_back(kCbtPlaceholder);
    key.push_back(filler());
    ex.query.push_back(key.back());
    chunks.push_back(std::move(key));

    // Every candidate gets 1 + {0,1,2} occurrences; the first answer
    // occurrence is the key sentence and the first occurrences of the
    // distractors follow the other markers.
    std::size_t pair = 0;
    for (std::size_t i = 0; i < c.n_candidates; ++i) {
      const std::size_t extra = uniform_index(rng, 3);
      if (i == answer_idx) {
      } else if (pair < c.n_distractor_pairs) {
        chunks.push_back({marker(marker_pool[1 + pair]), ex.candidates[i]});
        ++pair;
      } else {
        chunks.push_back({ex.candidates[i]});
      }
      for (std::size_t k = 0; k < extra; ++k) chunks.push_back({ex.candidates[i]});
    }

    std::size_t used = 0;
    for (const auto& ch : chunks) used += ch.size();
    const std::size_t length =
        std::max(used, c.doc_len_min + uniform_index(rng, c.doc_len_max - c.doc_len_min + 1));
    while (used < length) {
      chunks.push_back({filler()});
      ++used;
    }
    // Markers only start key and distractor chunks, so the token after the
    // query's marker is always the answer whatever the chunk order.
    portable_shuffle(chunks, rng);
    for (auto& ch : chunks)
      for (auto& t : ch) ex.document.push_back(std::move(t));
    validate_example(ex);
    out.push_back(std::move(ex));
  }
  return out;
}

void write_corpus(std::ostream& out, std::span<const RawExample> examples) {
  out.write(kCorpusMagic, 4);
  io::put_uint<std::uint16_t>(out, kCorpusVersion);
  io::put_uint<std::uint32_t>(out, static_cast<std::uint32_t>(examples.size()));
  for (const auto& ex : examples) {
    io::put_string32(out, ex.source_id);
    put_tokens(out, ex.query);
    put_tokens(out, ex.document);
    put_tokens(out, ex.candidates);
    io::put_string32(out, ex.answer);
  }
  require(out.good(), ErrorKind::Io, "failed writing corpus");
}

std::vector<RawExample> read_corpus(std::istream& in) {
  const auto magic = io::get_bytes(in, 4);
  require(magic == std::string(kCorpusMagic, 4), ErrorKind::Parse, "not a corpus file (bad magic)");
  const auto version = io::get_uint<std::uint16_t>(in);
  require(version == kCorpusVersion, ErrorKind::Parse,
          "unsupported corpus version " + std::to_string(version));
  const auto n = io::get_uint<std::uint32_t>(in);
  std::vector<RawExample> out;
  out.reserve(std::min<std::uint32_t>(n, 1u << 16));
  for (std::uint32_t i = 0; i < n; ++i) {
    RawExample ex;
    ex.source_id = io::get_string32(in);
    ex.query = get_tokens(in);
    ex.document = get_tokens(in);
    ex.candidates = get_tokens(in);
    ex.answer = io::get_string32(in);
    out.push_back(std::move(ex));
  }
  return out;
}

void write_corpus(const std::filesystem::path& path, std::span<const RawExample> examples) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), ErrorKind::Io, "cannot write " + path.string());
  write_corpus(out, examples);
}

std::vector<RawExample> read_corpus(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorKind::Io, "cannot open " + path.string());
  return read_corpus(in);
}

}  // namespace aair
