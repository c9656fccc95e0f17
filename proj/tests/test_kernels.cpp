#include <gtest/gtest.h>
#include <omp.h>

#include "aair/kernels.hpp"
#include "test_support.hpp"

namespace aair {
namespace {

using kernels::GemmArgs;
using kernels::Trans;

std::vector<double> random_values(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  std::vector<double> v(n);
  for (double& x : v) x = dist(rng);
  return v;
}

// Triple loop over the logical (untransposed) operands.
std::vector<double> naive_gemm(const GemmArgs& g, const std::vector<double>& a,
                               const std::vector<double>& b, std::vector<double> c) {
  for (std::size_t i = 0; i < g.m; ++i)
    for (std::size_t j = 0; j < g.n; ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < g.k; ++p) {
        const double av = g.trans_a == Trans::Yes ? a[p * g.m + i] : a[i * g.k + p];
        const double bv = g.trans_b == Trans::Yes ? b[j * g.k + p] : b[p * g.n + j];
        s += av * bv;
      }
      c[i * g.n + j] = (g.accumulate ? c[i * g.n + j] : 0.0) + s;
    }
  return c;
}

struct GemmCase {
  std::size_t m, n, k;
  Trans ta, tb;
  bool acc;
};

class GemmShapes : public ::testing::TestWithParam<GemmCase> {};

TEST_P(GemmShapes, MatchesNaiveLoop) {
  const auto& p = GetParam();
  std::mt19937_64 rng(p.m * 131 + p.n * 7 + p.k);
  GemmArgs g{p.m, p.n, p.k, p.ta, p.tb, p.acc};
  const auto a = random_values(p.m * p.k, rng);
  const auto b = random_values(p.k * p.n, rng);
  const auto c0 = random_values(p.m * p.n, rng);
  const auto expected = naive_gemm(g, a, b, c0);
  auto c = c0;
  kernels::ref::gemm(g, a, b, c);
  for (std::size_t i = 0; i < c.size(); ++i) EXPECT_NEAR(c[i], expected[i], 1e-12);
}

TEST_P(GemmShapes, ParallelIsBitwiseEqualToSerial) {
  const auto& p = GetParam();
  std::mt19937_64 rng(p.m + p.n + p.k);
  GemmArgs g{p.m, p.n, p.k, p.ta, p.tb, p.acc};
  const auto a = random_values(p.m * p.k, rng);
  const auto b = random_values(p.k * p.n, rng);
  const auto c0 = random_values(p.m * p.n, rng);
  auto serial = c0;
  kernels::ref::gemm(g, a, b, serial);
  for (int threads : {1, 2, 4}) {
    omp_set_num_threads(threads);
    auto parallel = c0;
    kernels::gemm(g, a, b, parallel);
    EXPECT_EQ(parallel, serial) << threads << " threads";
  }
  omp_set_num_threads(1);
}

INSTANTIATE_TEST_SUITE_P(
    Kernels, GemmShapes,
    ::testing::Values(GemmCase{1, 1, 1, Trans::No, Trans::No, false},
                      GemmCase{3, 5, 4, Trans::No, Trans::No, false},
                      GemmCase{3, 5, 4, Trans::Yes, Trans::No, true},
                      GemmCase{3, 5, 4, Trans::No, Trans::Yes, false},
                      GemmCase{7, 2, 9, Trans::Yes, Trans::Yes, true},
                      GemmCase{96, 80, 64, Trans::No, Trans::No, false},
                      GemmCase{128, 96, 72, Trans::No, Trans::Yes, true},
                      GemmCase{64, 128, 50, Trans::Yes, Trans::No, false}));

TEST(Gemv, MatchesNaiveAndSerial) {
  std::mt19937_64 rng(5);
  for (auto [rows, cols] : {std::pair<std::size_t, std::size_t>{1, 1}, {4, 6}, {300, 400}}) {
    const auto a = random_values(rows * cols, rng);
    const auto x = random_values(cols, rng);
    const auto y0 = random_values(rows, rng);
    for (bool acc : {false, true}) {
      std::vector<double> expected(rows);
      for (std::size_t i = 0; i < rows; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < cols; ++j) s += a[i * cols + j] * x[j];
        expected[i] = (acc ? y0[i] : 0.0) + s;
      }
      auto serial = y0;
      kernels::ref::gemv(rows, cols, a, x, serial, acc);
      for (std::size_t i = 0; i < rows; ++i) EXPECT_NEAR(serial[i], expected[i], 1e-12);
      for (int threads : {1, 3}) {
        omp_set_num_threads(threads);
        auto parallel = y0;
        kernels::gemv(rows, cols, a, x, parallel, acc);
        EXPECT_EQ(parallel, serial);
      }
    }
  }
  omp_set_num_threads(1);
}

TEST(Gemm, EmptyInnerDimensionGivesZeroOrKeepsAccumulator) {
  std::vector<double> c = {1.0, 2.0};
  kernels::ref::gemm({1, 2, 0, Trans::No, Trans::No, true}, {}, {}, c);
  EXPECT_EQ(c, (std::vector<double>{1.0, 2.0}));
  kernels::ref::gemm({1, 2, 0, Trans::No, Trans::No, false}, {}, {}, c);
  EXPECT_EQ(c, (std::vector<double>{0.0, 0.0}));
}

}  // namespace
}  // namespace aair
