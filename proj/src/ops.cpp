#include "aair/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "aair/kernels.hpp"

namespace aair {
namespace {

using kernels::GemmArgs;
using kernels::Trans;

void require_rank(const Var& v, std::size_t rank, const char* op) {
  require(v.shape().size() == rank, ErrorKind::Dimension,
          std::string(op) + ": expected rank " + std::to_string(rank) + ", got shape " +
              shape_string(v.shape()));
}

[[noreturn]] void shape_mismatch(const char* op, const Shape& a, const Shape& b) {
  fail(ErrorKind::Dimension,
       std::string(op) + ": incompatible shapes " + shape_string(a) + " and " + shape_string(b));
}

double sigmoid_scalar(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

enum class Broadcast { Same, ScalarA, ScalarB };

Broadcast broadcast_kind(const char* op, const Var& a, const Var& b) {
  if (a.shape() == b.shape()) return Broadcast::Same;
  if (a.size() == 1) return Broadcast::ScalarA;
  if (b.size() == 1) return Broadcast::ScalarB;
  shape_mismatch(op, a.shape(), b.shape());
}

// Accumulate `src` into `dst`, reducing to one element when dst is the broadcast scalar.
void accumulate(std::vector<double>& dst, const std::vector<double>& src, double factor = 1.0) {
  if (dst.size() == src.size()) {
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] += factor * src[i];
  } else {
    double s = 0.0;
    for (double x : src) s += x;
    dst[0] += factor * s;
  }
}

}  // namespace

Var matmul(const Var& a, const Var& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.cols() != bv.rows()) shape_mismatch("matmul", av.shape, bv.shape);
  const std::size_t m = av.rows(), k = av.cols(), n = bv.cols();
  Tensor out({m, n});
  kernels::gemm({m, n, k}, av.data, bv.data, out.data);
  return a.graph().record("matmul", std::move(out), {a, b},
                          [a, b, m, n, k](Graph& g, const std::vector<double>& go, const Tensor&) {
                            if (g.requires_grad(a)) {
                              // dA += dC * B^T
                              kernels::gemm({m, k, n, Trans::No, Trans::Yes, true}, go,
                                            g.value(b).data, g.grad_buffer(a));
                            }
                            if (g.requires_grad(b)) {
                              // dB += A^T * dC
                              kernels::gemm({k, n, m, Trans::Yes, Trans::No, true},
                                            g.value(a).data, go, g.grad_buffer(b));
                            }
                          });
}

Var matvec(const Var& a, const Var& x) {
  require_rank(a, 2, "matvec");
  require_rank(x, 1, "matvec");
  const Tensor& av = a.value();
  if (av.cols() != x.size()) shape_mismatch("matvec", av.shape, x.shape());
  const std::size_t m = av.rows(), n = av.cols();
  Tensor out({m});
  kernels::gemv(m, n, av.data, x.value().data, out.data, false);
  return a.graph().record("matvec", std::move(out), {a, x},
                          [a, x, m, n](Graph& g, const std::vector<double>& go, const Tensor&) {
                            if (g.requires_grad(a)) {
                              // dA += go x^T
                              auto& ga = g.grad_buffer(a);
                              const auto& xv = g.value(x).data;
                              for (std::size_t i = 0; i < m; ++i) {
                                const double gi = go[i];
                                double* r = ga.data() + i * n;
                                for (std::size_t j = 0; j < n; ++j) r[j] += gi * xv[j];
                              }
                            }
                            if (g.requires_grad(x)) {
                              // dx += A^T go
                              kernels::gemm({n, 1, m, Trans::Yes, Trans::No, true},
                                            g.value(a).data, go, g.grad_buffer(x));
                            }
                          });
}

Var transpose(const Var& a) {
  require_rank(a, 2, "transpose");
  const Tensor& av = a.value();
  const std::size_t r = av.rows(), c = av.cols();
  Tensor out({c, r});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out.data[j * r + i] = av.data[i * c + j];
  return a.graph().record("transpose", std::move(out), {a},
                          [a, r, c](Graph& g, const std::vector<double>& go, const Tensor&) {
                            auto& ga = g.grad_buffer(a);
                            for (std::size_t i = 0; i < r; ++i)
                              for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += go[j * r + i];
                          });
}

Var add(const Var& a, const Var& b) {
  const auto kind = broadcast_kind("add", a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  Tensor out = kind == Broadcast::ScalarA ? bv : av;
  if (kind == Broadcast::Same) {
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] += bv.data[i];
  } else {
    const double s = kind == Broadcast::ScalarA ? av.data[0] : bv.data[0];
    for (double& x : out.data) x += s;
  }
  return a.graph().record("add", std::move(out), {a, b},
                          [a, b](Graph& g, const std::vector<double>& go, const Tensor&) {
                            if (g.requires_grad(a)) accumulate(g.grad_buffer(a), go);
                            if (g.requires_grad(b)) accumulate(g.grad_buffer(b), go);
                          });
}

Var sub(const Var& a, const Var& b) {
  if (a.shape() != b.shape()) shape_mismatch("sub", a.shape(), b.shape());
  Tensor out = a.value();
  const auto& bv = b.value().data;
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] -= bv[i];
  return a.graph().record("sub", std::move(out), {a, b},
                          [a, b](Graph& g, const std::vector<double>& go, const Tensor&) {
                            if (g.requires_grad(a)) accumulate(g.grad_buffer(a), go);
                            if (g.requires_grad(b)) accumulate(g.grad_buffer(b), go, -1.0);
                          });
}

Var mul(const Var& a, const Var& b) {
  const auto kind = broadcast_kind("mul", a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  Tensor out = kind == Broadcast::ScalarA ? bv : av;
  if (kind == Broadcast::Same) {
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] *= bv.data[i];
  } else {
    const double s = kind == Broadcast::ScalarA ? av.data[0] : bv.data[0];
    for (double& x : out.data) x *= s;
  }
  return a.graph().record(
      "mul", std::move(out), {a, b}, [a, b, kind](Graph& g, const std::vector<double>& go, const Tensor&) {
        const auto& av = g.value(a).data;
        const auto& bv = g.value(b).data;
        const std::size_t n = go.size();
        auto other = [&](const std::vector<double>& v, std::size_t i) {
          return v.size() == 1 ? v[0] : v[i];
        };
        if (g.requires_grad(a)) {
          auto& ga = g.grad_buffer(a);
          if (kind == Broadcast::ScalarA) {
            double s = 0.0;
            for (std::size_t i = 0; i < n; ++i) s += go[i] * bv[i];
            ga[0] += s;
          } else {
            for (std::size_t i = 0; i < n; ++i) ga[i] += go[i] * other(bv, i);
          }
        }
        if (g.requires_grad(b)) {
          auto& gb = g.grad_buffer(b);
          if (kind == Broadcast::ScalarB) {
            double s = 0.0;
            for (std::size_t i = 0; i < n; ++i) s += go[i] * av[i];
            gb[0] += s;
          } else {
            for (std::size_t i = 0; i < n; ++i) gb[i] += go[i] * other(av, i);
          }
        }
      });
}

Var scale(const Var& a, double factor) {
  Tensor out = a.value();
  for (double& x : out.data) x *= factor;
  return a.graph().record("scale", std::move(out), {a},
                          [a, factor](Graph& g, const std::vector<double>& go, const Tensor&) {
                            accumulate(g.grad_buffer(a), go, factor);
                          });
}

Var sigmoid(const Var& a) {
  Tensor out = a.value();
  for (double& x : out.data) x = sigmoid_scalar(x);
  return a.graph().record("sigmoid", std::move(out), {a},
                          [a](Graph& g, const std::vector<double>& go, const Tensor& y) {
                            auto& ga = g.grad_buffer(a);
                            for (std::size_t i = 0; i < go.size(); ++i)
                              ga[i] += go[i] * y.data[i] * (1.0 - y.data[i]);
                          });
}

Var tanh(const Var& a) {
  Tensor out = a.value();
  for (double& x : out.data) x = std::tanh(x);
  return a.graph().record("tanh", std::move(out), {a},
                          [a](Graph& g, const std::vector<double>& go, const Tensor& y) {
                            auto& ga = g.grad_buffer(a);
                            for (std::size_t i = 0; i < go.size(); ++i)
                              ga[i] += go[i] * (1.0 - y.data[i] * y.data[i]);
                          });
}

Var one_minus(const Var& a) {
  Tensor out = a.value();
  for (double& x : out.data) x = 1.0 - x;
  return a.graph().record("one_minus", std::move(out), {a},
                          [a](Graph& g, const std::vector<double>& go, const Tensor&) {
                            accumulate(g.grad_buffer(a), go, -1.0);
                          });
}

Var elementwise(Elementwise tag, const Var& a, const Var* b, double factor) {
  auto second = [&]() -> const Var& {
    require(b != nullptr, ErrorKind::Contract, "binary elementwise op needs two operands");
    return *b;
  };
  switch (tag) {
    case Elementwise::Add: return add(a, second());
    case Elementwise::Mul: return mul(a, second());
    case Elementwise::Sigmoid: return sigmoid(a);
    case Elementwise::Tanh: return tanh(a);
    case Elementwise::OneMinus: return one_minus(a);
    case Elementwise::Scale: return scale(a, factor);
  }
  fail(ErrorKind::Contract, "unknown elementwise tag");
}

Var concat(std::initializer_list<Var> parts) {
  return concat(std::span<const Var>(parts.begin(), parts.size()));
}

Var concat(std::span<const Var> parts) {
  require(!parts.empty(), ErrorKind::Contract, "concat: no parts");
  const Shape& first = parts[0].shape();
  require(first.size() == 1 || first.size() == 2, ErrorKind::Dimension,
          "concat: parts must be rank 1 or 2, got " + shape_string(first));
  const std::size_t rows = first.size() == 2 ? first[0] : 1;
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    if (s.size() != first.size() || (s.size() == 2 && s[0] != rows))
      shape_mismatch("concat", first, s);
    widths.push_back(s.back());
    total += s.back();
  }
  Tensor out(first.size() == 2 ? Shape{rows, total} : Shape{total});
  std::size_t offset = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const auto& src = parts[p].value().data;
    for (std::size_t r = 0; r < rows; ++r)
      std::copy_n(src.begin() + r * widths[p], widths[p], out.data.begin() + r * total + offset);
    offset += widths[p];
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return parts[0].graph().record(
      "concat", std::move(out), inputs,
      [inputs, widths, rows, total](Graph& g, const std::vector<double>& go, const Tensor&) {
        std::size_t offset = 0;
        for (std::size_t p = 0; p < inputs.size(); ++p) {
          if (g.requires_grad(inputs[p])) {
            auto& gp = g.grad_buffer(inputs[p]);
            for (std::size_t r = 0; r < rows; ++r)
              for (std::size_t j = 0; j < widths[p]; ++j)
                gp[r * widths[p] + j] += go[r * total + offset + j];
          }
          offset += widths[p];
        }
      });
}

Var slice(const Var& v, std::size_t offset, std::size_t length) {
  require_rank(v, 1, "slice");
  require(offset + length <= v.size(), ErrorKind::Bounds,
          "slice [" + std::to_string(offset) + ", " + std::to_string(offset + length) +
              ") outside " + shape_string(v.shape()));
  const auto& src = v.value().data;
  Tensor out({length}, std::vector<double>(src.begin() + offset, src.begin() + offset + length));
  return v.graph().record("slice", std::move(out), {v},
                          [v, offset](Graph& g, const std::vector<double>& go, const Tensor&) {
                            auto& gv = g.grad_buffer(v);
                            for (std::size_t i = 0; i < go.size(); ++i) gv[offset + i] += go[i];
                          });
}

std::vector<Var> split(const Var& v, std::span<const std::size_t> sizes) {
  std::vector<Var> out;
  std::size_t offset = 0;
  for (auto n : sizes) {
    out.push_back(slice(v, offset, n));
    offset += n;
  }
  require(offset == v.size(), ErrorKind::Dimension,
          "split sizes cover " + std::to_string(offset) + " of " + std::to_string(v.size()));
  return out;
}

Var row(const Var& m, std::size_t index) {
  require_rank(m, 2, "row");
  const Tensor& mv = m.value();
  require(index < mv.rows(), ErrorKind::Bounds,
          "row " + std::to_string(index) + " outside " + shape_string(mv.shape));
  const std::size_t c = mv.cols();
  Tensor out({c}, std::vector<double>(mv.data.begin() + index * c, mv.data.begin() + (index + 1) * c));
  return m.graph().record("row", std::move(out), {m},
                          [m, index, c](Graph& g, const std::vector<double>& go, const Tensor&) {
                            auto& gm = g.grad_buffer(m);
                            for (std::size_t j = 0; j < c; ++j) gm[index * c + j] += go[j];
                          });
}

Var stack_rows(std::span<const Var> rows) {
  require(!rows.empty(), ErrorKind::Contract, "stack_rows: no rows");
  const std::size_t c = rows[0].size();
  Tensor out({rows.size(), c});
  for (std::size_t r = 0; r < rows.size(); ++r) {
    require(rows[r].shape() == Shape{c}, ErrorKind::Dimension,
            "stack_rows: row " + std::to_string(r) + " has shape " + shape_string(rows[r].shape()) +
                ", expected " + shape_string({c}));
    std::copy(rows[r].value().data.begin(), rows[r].value().data.end(), out.data.begin() + r * c);
  }
  std::vector<Var> inputs(rows.begin(), rows.end());
  return rows[0].graph().record(
      "stack_rows", std::move(out), inputs,
      [inputs, c](Graph& g, const std::vector<double>& go, const Tensor&) {
        for (std::size_t r = 0; r < inputs.size(); ++r) {
          if (!g.requires_grad(inputs[r])) continue;
          auto& gr = g.grad_buffer(inputs[r]);
          for (std::size_t j = 0; j < c; ++j) gr[j] += go[r * c + j];
        }
      });
}

Var masked_softmax(const Var& logits, std::span<const std::uint8_t> mask) {
  require_rank(logits, 1, "masked_softmax");
  const auto& z = logits.value().data;
  require(mask.size() == z.size(), ErrorKind::Dimension,
          "masked_softmax: mask length " + std::to_string(mask.size()) + " vs logits " +
              shape_string(logits.shape()));
  double max = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < z.size(); ++i)
    if (mask[i]) max = std::max(max, z[i]);
  require(max != -std::numeric_limits<double>::infinity(), ErrorKind::EmptySupport,
          "masked_softmax: every position is masked");
  Tensor out({z.size()}, 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    if (!mask[i]) continue;
    out.data[i] = std::exp(z[i] - max);
    total += out.data[i];
  }
  for (double& w : out.data) w /= total;
  return logits.graph().record(
      "masked_softmax", std::move(out), {logits},
      [logits](Graph& g, const std::vector<double>& go, const Tensor& y) {
        // dz_i = y_i (go_i - sum_j y_j go_j); masked y_i are 0.
        double dot = 0.0;
        for (std::size_t i = 0; i < go.size(); ++i) dot += y.data[i] * go[i];
        auto& gz = g.grad_buffer(logits);
        for (std::size_t i = 0; i < go.size(); ++i) gz[i] += y.data[i] * (go[i] - dot);
      });
}

Var gather_rows(const Var& table, std::span<const std::int32_t> ids) {
  require_rank(table, 2, "gather_rows");
  const Tensor& tv = table.value();
  const std::size_t c = tv.cols();
  require(!ids.empty(), ErrorKind::Contract, "gather_rows: no ids");
  Tensor out({ids.size(), c});
  for (std::size_t r = 0; r < ids.size(); ++r) {
    const auto id = ids[r];
    require(id >= 0 && static_cast<std::size_t>(id) < tv.rows(), ErrorKind::Vocabulary,
            "token id " + std::to_string(id) + " outside vocabulary of size " +
                std::to_string(tv.rows()));
    std::copy_n(tv.data.begin() + id * c, c, out.data.begin() + r * c);
  }
  std::vector<std::int32_t> saved(ids.begin(), ids.end());
  return table.graph().record(
      "gather_rows", std::move(out), {table},
      [table, saved, c](Graph& g, const std::vector<double>& go, const Tensor&) {
        auto& gt = g.grad_buffer(table);
        for (std::size_t r = 0; r < saved.size(); ++r)
          for (std::size_t j = 0; j < c; ++j)
            gt[static_cast<std::size_t>(saved[r]) * c + j] += go[r * c + j];
      });
}

Var sum(const Var& a) {
  double s = 0.0;
  for (double x : a.value().data) s += x;
  return a.graph().record("sum", Tensor::scalar(s), {a},
                          [a](Graph& g, const std::vector<double>& go, const Tensor&) {
                            for (double& x : g.grad_buffer(a)) x += go[0];
                          });
}

Var sum_at(const Var& v, std::span<const std::size_t> positions) {
  require_rank(v, 1, "sum_at");
  const auto& vv = v.value().data;
  double s = 0.0;
  for (auto p : positions) {
    require(p < vv.size(), ErrorKind::Bounds,
            "position " + std::to_string(p) + " outside vector of length " + std::to_string(vv.size()));
    s += vv[p];
  }
  std::vector<std::size_t> saved(positions.begin(), positions.end());
  return v.graph().record("sum_at", Tensor::scalar(s), {v},
                          [v, saved](Graph& g, const std::vector<double>& go, const Tensor&) {
                            auto& gv = g.grad_buffer(v);
                            for (auto p : saved) gv[p] += go[0];
                          });
}

Var neg_log(const Var& x, double eps) {
  require(x.size() == 1, ErrorKind::Contract, "neg_log expects a scalar");
  const double arg = x.value().data[0] + eps;
  require(arg > 0.0, ErrorKind::NumericFault,
          "neg_log of non-positive probability " + std::to_string(x.value().data[0]));
  return x.graph().record("neg_log", Tensor(x.shape(), std::vector<double>{-std::log(arg)}), {x},
                          [x, arg](Graph& g, const std::vector<double>& go, const Tensor&) {
                            g.grad_buffer(x)[0] -= go[0] / arg;
                          });
}

Var dropout(const Var& a, double rate, std::mt19937_64& rng) { return dropout(a, rate, rng, a.size()); }

Var dropout(const Var& a, double rate, std::mt19937_64& rng, std::size_t draws) {
  require(rate >= 0.0 && rate < 1.0, ErrorKind::Contract, "dropout rate must be in [0, 1)");
  require(draws <= a.size(), ErrorKind::Contract, "dropout draw count exceeds tensor size");
  if (rate == 0.0) return a;
  const double keep_scale = 1.0 / (1.0 - rate);
  Tensor mask(a.shape(), 1.0);
  for (std::size_t i = 0; i < draws; ++i) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    mask.data[i] = u < rate ? 0.0 : keep_scale;
  }
  return mul(a, a.graph().constant(std::move(mask)));
}

}  // namespace aair
