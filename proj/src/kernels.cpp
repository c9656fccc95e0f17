#include "aair/kernels.hpp"

#include <algorithm>

namespace aair::kernels {
namespace {

// One output row of C = op(A) * op(B). Shared by the serial and parallel
// drivers so both evaluate each element in the same order.
inline void gemm_row(const GemmArgs& g, std::size_t i, const double* a, const double* b,
                     double* c) {
  double* crow = c + i * g.n;
  if (!g.accumulate) std::fill(crow, crow + g.n, 0.0);
  const bool ta = g.trans_a == Trans::Yes;
  const bool tb = g.trans_b == Trans::Yes;
  if (!tb) {
    // B stored k x n: stream rows of B.
    for (std::size_t p = 0; p < g.k; ++p) {
      const double aip = ta ? a[p * g.m + i] : a[i * g.k + p];
      if (aip == 0.0) continue;
      const double* brow = b + p * g.n;
      for (std::size_t j = 0; j < g.n; ++j) crow[j] += aip * brow[j];
    }
  } else {
    // B stored n x k: dot products against rows of B.
    for (std::size_t j = 0; j < g.n; ++j) {
      const double* brow = b + j * g.k;
      double acc = 0.0;
      if (!ta) {
        const double* arow = a + i * g.k;
        for (std::size_t p = 0; p < g.k; ++p) acc += arow[p] * brow[p];
      } else {
        for (std::size_t p = 0; p < g.k; ++p) acc += a[p * g.m + i] * brow[p];
      }
      crow[j] += acc;
    }
  }
}

inline void gemv_row(std::size_t i, std::size_t cols, const double* a, const double* x,
                     double* y, bool accumulate) {
  const double* arow = a + i * cols;
  double acc = 0.0;
  for (std::size_t j = 0; j < cols; ++j) acc += arow[j] * x[j];
  y[i] = accumulate ? y[i] + acc : acc;
}

}  // namespace

namespace ref {

void gemm(const GemmArgs& args, std::span<const double> a, std::span<const double> b,
          std::span<double> c) {
  for (std::size_t i = 0; i < args.m; ++i) gemm_row(args, i, a.data(), b.data(), c.data());
}

void gemv(std::size_t rows, std::size_t cols, std::span<const double> a,
          std::span<const double> x, std::span<double> y, bool accumulate) {
  for (std::size_t i = 0; i < rows; ++i) gemv_row(i, cols, a.data(), x.data(), y.data(), accumulate);
}

}  // namespace ref

void gemm(const GemmArgs& args, std::span<const double> a, std::span<const double> b,
          std::span<double> c) {
  const auto m = static_cast<long>(args.m);
  const bool big = args.m * args.n * args.k >= kParallelThreshold;
#pragma omp parallel for schedule(static) if (big)
  for (long i = 0; i < m; ++i)
    gemm_row(args, static_cast<std::size_t>(i), a.data(), b.data(), c.data());
}

void gemv(std::size_t rows, std::size_t cols, std::span<const double> a,
          std::span<const double> x, std::span<double> y, bool accumulate) {
  const auto m = static_cast<long>(rows);
  const bool big = rows * cols >= kParallelThreshold;
#pragma omp parallel for schedule(static) if (big)
  for (long i = 0; i < m; ++i)
    gemv_row(static_cast<std::size_t>(i), cols, a.data(), x.data(), y.data(), accumulate);
}

}  // namespace aair::kernels
