#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace aair {

// One comprehension instance in token form, as read from a corpus file.
struct RawExample {
  std::string source_id;
  std::vector<std::string> query;     // contains exactly one placeholder token
  std::vector<std::string> document;
  std::vector<std::string> candidates;
  std::string answer;

  bool operator==(const RawExample&) const = default;
};

// Placeholder spellings used by the CBT and CNN distributions.
inline constexpr std::string_view kCbtPlaceholder = "XXXXX";
inline constexpr std::string_view kCnnPlaceholder = "@placeholder";

bool is_placeholder(std::string_view token);

// Throws DataIntegrity (or Parse for a bad query) when an invariant fails:
// one placeholder in the query, >= 2 distinct candidates, answer among the
// candidates, every candidate present in the document.
void validate_example(const RawExample& ex, bool require_candidates_in_document = true);

struct ParseOptions {
  bool lowercase = false;
  std::size_t max_document_tokens = 2000;
  // When false, CBT candidates missing from the document are dropped (they can
  // never receive attention mass) and an answer missing from the document
  // leaves the example unanswerable instead of failing the parse.
  bool require_candidates_in_document = true;
};

// CBT block format: 21 numbered lines per block, blank-line separated. Line 21
// is "21 <query>\t<answer>\t\t<c1>|...|<c10>".
std::vector<RawExample> parse_cbt(std::istream& in, const std::string& source_name,
                                  const ParseOptions& options = {});
std::vector<RawExample> parse_cbt_file(const std::filesystem::path& path,
                                       const ParseOptions& options = {});

// CNN .question format: url, passage, question, answer and entity-mapping
// sections separated by blank lines.
RawExample parse_cnn(std::istream& in, const std::string& source_id,
                     const ParseOptions& options = {});
// Every *.question file under `dir`, in lexicographic path order.
std::vector<RawExample> parse_cnn_directory(const std::filesystem::path& dir,
                                            const ParseOptions& options = {});

class Vocabulary {
 public:
  static constexpr std::int32_t kPad = 0;
  static constexpr std::int32_t kUnknown = 1;
  static constexpr std::int32_t kPlaceholder = 2;
  static constexpr std::size_t kReserved = 3;

  Vocabulary();

  // Frequency-ranked (ties by token text); tokens seen fewer than `min_count`
  // times are left out and map to kUnknown.
  static Vocabulary build(std::span<const RawExample> examples, std::size_t min_count = 1);
  // Rebuilds from the id -> token list (reserved entries first), e.g. from a checkpoint.
  static Vocabulary from_tokens(std::vector<std::string> tokens);

  std::int32_t id(std::string_view token) const;
  const std::string& token(std::int32_t id) const;
  std::vector<std::int32_t> encode(std::span<const std::string> tokens) const;
  std::vector<std::string> decode(std::span<const std::int32_t> ids) const;

  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::int32_t> index_;
};

// Example over vocabulary ids.
struct Example {
  std::string source_id;
  std::vector<std::int32_t> query;
  std::vector<std::int32_t> document;
  std::vector<std::int32_t> candidates;
  std::int32_t answer = Vocabulary::kUnknown;
  std::vector<std::size_t> answer_positions;
  // False when vocabulary mapping broke the example (answer or a candidate
  // became unknown, or candidates collided). Such examples are scored wrong.
  bool answerable = true;
};

std::vector<std::size_t> positions_of(std::span<const std::int32_t> document, std::int32_t token);

struct EncodeReport {
  std::size_t total = 0;
  std::size_t unanswerable = 0;
  std::vector<std::string> unanswerable_ids;
};

Example encode_example(const RawExample& raw, const Vocabulary& vocab);
std::vector<Example> encode_examples(std::span<const RawExample> raw, const Vocabulary& vocab,
                                     EncodeReport* report = nullptr);

// Padded mini-batch. Row b of `documents` / `queries` holds the tokens of one
// example followed by kPad up to the batch maxima.
struct Batch {
  std::vector<std::size_t> indices;
  std::size_t max_document = 0;
  std::size_t max_query = 0;
  std::vector<std::int32_t> documents;
  std::vector<std::int32_t> queries;
  std::vector<std::size_t> document_lengths;
  std::vector<std::size_t> query_lengths;
  std::vector<std::vector<std::int32_t>> candidates;
  std::vector<std::int32_t> answers;
  std::vector<std::vector<std::size_t>> answer_positions;

  std::size_t size() const { return indices.size(); }
  std::span<const std::int32_t> document(std::size_t b) const {
    return {documents.data() + b * max_document, max_document};
  }
  std::span<const std::int32_t> query(std::size_t b) const {
    return {queries.data() + b * max_query, max_query};
  }
};

Batch make_batch(std::span<const Example> examples, std::span<const std::size_t> indices);
std::vector<Batch> make_batches(std::span<const Example> examples, std::size_t batch_size,
                                std::uint64_t seed, bool shuffle);

struct SyntheticConfig {
  std::size_t n_examples = 5000;
  std::size_t vocab_size = 500;
  std::size_t doc_len_min = 30;
  std::size_t doc_len_max = 60;
  std::size_t n_candidates = 10;
  std::size_t n_markers = 8;
  std::size_t n_distractor_pairs = 3;
  std::size_t context_len = 3;
  std::uint64_t seed = 1;
};

// Each document holds one key sentence "<context...> <marker> <answer> <tail>";
// the query repeats it with the answer replaced by the placeholder. Other
// markers precede distractor candidates, and the query's marker occurs once
// in the document, so the answer is the token after it.
std::vector<RawExample> generate_synthetic(const SyntheticConfig& config);

// Length-prefixed binary corpus cache ("AAIC").
void write_corpus(const std::filesystem::path& path, std::span<const RawExample> examples);
std::vector<RawExample> read_corpus(const std::filesystem::path& path);
void write_corpus(std::ostream& out, std::span<const RawExample> examples);
std::vector<RawExample> read_corpus(std::istream& in);

}  // namespace aair
