#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "aair/params.hpp"
#include "aair/tensor.hpp"

namespace aair {

using GruParams = GruParamsT<Var>;

struct DropoutConfig {
  double rate = 0.0;
  bool training = false;
  std::mt19937_64* rng = nullptr;

  bool active() const { return training && rate > 0.0 && rng != nullptr; }
};

Var apply_dropout(const Var& v, const DropoutConfig& cfg);

// Contextual encodings of one token sequence laid out over its padded length.
// Rows at or beyond `length` are zero and masked out.
struct EncodedSequence {
  Var encodings;             // n x 2h, row i = [forward_i, backward_i]
  Var encodings_t;           // 2h x n, same values transposed
  std::vector<std::uint8_t> mask;
  std::vector<std::int32_t> tokens;
  std::size_t length = 0;

  std::size_t padded_length() const { return mask.size(); }
};

Var gru_step(const Var& x, const Var& h_prev, const GruParams& p);

// Runs the forward GRU left to right and the backward GRU right to left over
// tokens[0, length), both from zero states. Tokens past `length` are padding.
EncodedSequence encode_bidirectional(std::span<const std::int32_t> tokens, std::size_t length,
                                     const Var& embedding, const GruParams& fwd,
                                     const GruParams& bwd, const DropoutConfig& dropout = {});

inline EncodedSequence encode_bidirectional(std::span<const std::int32_t> tokens,
                                            const Var& embedding, const GruParams& fwd,
                                            const GruParams& bwd,
                                            const DropoutConfig& dropout = {}) {
  return encode_bidirectional(tokens, tokens.size(), embedding, fwd, bwd, dropout);
}

// Number of encode_bidirectional calls made by this thread.
std::uint64_t encoder_invocations();

}  // namespace aair
