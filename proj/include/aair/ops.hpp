#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "aair/tensor.hpp"

namespace aair {

// Linear algebra. matmul takes rank-2 operands; matvec takes [m x n] and [n].
Var matmul(const Var& a, const Var& b);
Var matvec(const Var& a, const Var& x);
Var transpose(const Var& a);

// Elementwise ops on equal shapes, or a scalar (size 1) against any tensor for add/mul.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double factor);
Var sigmoid(const Var& a);
Var tanh(const Var& a);
Var one_minus(const Var& a);

enum class Elementwise { Add, Mul, Sigmoid, Tanh, OneMinus, Scale };
// Tag-dispatched form of the ops above; `b` is ignored by unary tags and
// `factor` is used only by Scale.
Var elementwise(Elementwise tag, const Var& a, const Var* b = nullptr, double factor = 1.0);

// Concatenation along the last axis. Rank-1 parts, or rank-2 parts with equal row counts.
Var concat(std::span<const Var> parts);
Var concat(std::initializer_list<Var> parts);
// Contiguous piece [offset, offset + length) of a vector.
Var slice(const Var& v, std::size_t offset, std::size_t length);
std::vector<Var> split(const Var& v, std::span<const std::size_t> sizes);
Var row(const Var& m, std::size_t index);
Var stack_rows(std::span<const Var> rows);

// Exp-normalised over positions where mask != 0 (max-subtracted); masked positions are exactly 0.
Var masked_softmax(const Var& logits, std::span<const std::uint8_t> mask);

// Embedding lookup: one row of `table` per id.
Var gather_rows(const Var& table, std::span<const std::int32_t> ids);

Var sum(const Var& a);
// Sum of the listed entries of a vector.
Var sum_at(const Var& v, std::span<const std::size_t> positions);
// -log(x + eps) of a scalar.
Var neg_log(const Var& x, double eps);

// Inverted dropout: keeps each entry with probability 1 - rate and scales it by 1 / (1 - rate).
// Only the first `draws` entries (row-major) are masked; the rest pass through and consume no
// random numbers.
Var dropout(const Var& a, double rate, std::mt19937_64& rng);
Var dropout(const Var& a, double rate, std::mt19937_64& rng, std::size_t draws);

}  // namespace aair
