#pragma once

#include <cstddef>
#include <span>

namespace aair::kernels {

enum class Trans { No, Yes };

// C[m x n] (+)= op(A) * op(B), row-major, op(A) is m x k and op(B) is k x n.
// Leading dimensions follow from the untransposed storage shapes.
struct GemmArgs {
  std::size_t m = 0, n = 0, k = 0;
  Trans trans_a = Trans::No;
  Trans trans_b = Trans::No;
  bool accumulate = false;
};

namespace ref {

// Serial reference kernels. Kept for tests and the benchmark baseline.
void gemm(const GemmArgs& args, std::span<const double> a, std::span<const double> b,
          std::span<double> c);
void gemv(std::size_t rows, std::size_t cols, std::span<const double> a,
          std::span<const double> x, std::span<double> y, bool accumulate);

}  // namespace ref

// OpenMP kernels: rows of the output are split across threads while every
// output element keeps the serial summation order, so results are bitwise
// identical to ref:: for any thread count.
void gemm(const GemmArgs& args, std::span<const double> a, std::span<const double> b,
          std::span<double> c);
void gemv(std::size_t rows, std::size_t cols, std::span<const double> a,
          std::span<const double> x, std::span<double> y, bool accumulate);

// Work (multiply-adds) below which the OpenMP kernels stay on the calling thread.
inline constexpr std::size_t kParallelThreshold = 1u << 16;

}  // namespace aair::kernels
