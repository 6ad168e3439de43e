#include "convdysat/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>

#include <Eigen/Core>

#include "convdysat/error.hpp"
#include "convdysat/parallel.hpp"

namespace convdysat {
namespace {

std::mutex g_fault_mutex;
std::string g_fault_op;
double g_fault_factor = 1.0;

double fault_factor(const std::string& op) {
  std::lock_guard lock(g_fault_mutex);
  return (!g_fault_op.empty() && g_fault_op == op) ? g_fault_factor : 1.0;
}

Tape& tape_of(const Var& v) {
  if (!v.valid()) throw Error("unbound Var passed to an operation");
  return *v.tape();
}

[[noreturn]] void shape_error(const std::string& op, const Shape& a, const Shape& b) {
  throw DimensionError(op + ": incompatible shapes " + shape_string(a) + " and " + shape_string(b));
}

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;
using MatrixMap = Eigen::Map<RowMatrix>;

// C[m x n] += op(A) * op(B) on row-major buffers; op transposes when the flag is set.
// Always one single-threaded call, so results never depend on the worker count.
void gemm(const double* a, bool trans_a, const double* b, bool trans_b, double* c, std::size_t m, std::size_t n,
          std::size_t k) {
  const auto em = static_cast<Eigen::Index>(m), en = static_cast<Eigen::Index>(n), ek = static_cast<Eigen::Index>(k);
  MatrixMap cm(c, em, en);
  const ConstMatrixMap am(a, trans_a ? ek : em, trans_a ? em : ek);
  const ConstMatrixMap bm(b, trans_b ? en : ek, trans_b ? ek : en);
  if (!trans_a && !trans_b) {
    cm.noalias() += am * bm;
  } else if (trans_a && !trans_b) {
    cm.noalias() += am.transpose() * bm;
  } else if (!trans_a) {
    cm.noalias() += am * bm.transpose();
  } else {
    cm.noalias() += am.transpose() * bm.transpose();
  }
}

// Row (s, t) of the result holds input rows t-(k-1) .. t side by side, zeros before the start.
std::vector<double> im2col(const double* x, std::size_t batch, std::size_t steps, std::size_t in_dim,
                           std::size_t width) {
  std::vector<double> col(batch * steps * width * in_dim, 0.0);
  for (std::size_t s = 0; s < batch; ++s) {
    for (std::size_t t = 0; t < steps; ++t) {
      double* row = col.data() + (s * steps + t) * width * in_dim;
      for (std::size_t p = 0; p < width; ++p) {
        if (t + p + 1 < width) continue;
        std::copy_n(x + (s * steps + t + p + 1 - width) * in_dim, in_dim, row + p * in_dim);
      }
    }
  }
  return col;
}

std::string unary_name(UnaryKind kind) {
  switch (kind) {
    case UnaryKind::LeakyRelu: return "leaky_relu";
    case UnaryKind::Elu: return "elu";
    case UnaryKind::Sigmoid: return "sigmoid";
    case UnaryKind::Exp: return "exp";
    case UnaryKind::Log: return "log";
    case UnaryKind::Negate: return "negate";
    case UnaryKind::Scale: return "scale";
    case UnaryKind::ClampMin: return "clamp_min";
  }
  return "unary";
}

std::string binary_name(BinaryKind kind) {
  switch (kind) {
    case BinaryKind::Add: return "add";
    case BinaryKind::Subtract: return "subtract";
    case BinaryKind::Multiply: return "multiply";
  }
  return "binary";
}

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Var matmul(const Var& a, const Var& b) {
  Tape& tape = tape_of(a);
  const auto& as = a.shape();
  const auto& bs = b.shape();
  if (as.size() != 2 || bs.size() != 2 || as[1] != bs[0]) shape_error("matmul", as, bs);
  const std::size_t m = as[0], k = as[1], n = bs[1];
  Tensor out(Shape{m, n});
  const double* ad = a.value().data().data();
  const double* bd = b.value().data().data();
  double* cd = out.data().data();
  gemm(ad, false, bd, false, cd, m, n, k);

  const std::size_t ia = a.index(), ib = b.index();
  return tape.record(std::move(out), {a, b}, "matmul",
                     [ia, ib, m, k, n](Tape& t, std::span<const double> g) {
                       const double f = fault_factor("matmul");
                       std::vector<double> scaled;
                       if (f != 1.0) {
                         scaled.assign(g.begin(), g.end());
                         for (auto& v : scaled) v *= f;
                         g = scaled;
                       }
                       if (auto da = t.grad_buffer(ia); !da.empty()) {
                         gemm(g.data(), false, t.value(ib).data().data(), true, da.data(), m, k, n);
                       }
                       if (auto db = t.grad_buffer(ib); !db.empty()) {
                         gemm(t.value(ia).data().data(), true, g.data(), false, db.data(), k, n, m);
                       }
                     });
}

Var batched_matmul(const Var& a, const Var& b) {
  Tape& tape = tape_of(a);
  const auto& as = a.shape();
  const auto& bs = b.shape();
  if (as.size() != 3 || bs.size() != 3 || as[0] != bs[0] || as[2] != bs[1]) {
    shape_error("batched_matmul", as, bs);
  }
  const std::size_t batch = as[0], m = as[1], k = as[2], n = bs[2];
  Tensor out(Shape{batch, m, n});
  const double* ad = a.value().data().data();
  const double* bd = b.value().data().data();
  double* cd = out.data().data();
  parallel_for(batch, m * k * n, [&](std::size_t begin, std::size_t end) {
    for (std::size_t s = begin; s < end; ++s) {
      gemm(ad + s * m * k, false, bd + s * k * n, false, cd + s * m * n, m, n, k);
    }
  });

  const std::size_t ia = a.index(), ib = b.index();
  return tape.record(std::move(out), {a, b}, "batched_matmul",
                     [ia, ib, batch, m, k, n](Tape& t, std::span<const double> g) {
                       const double f = fault_factor("batched_matmul");
                       auto da = t.grad_buffer(ia);
                       auto db = t.grad_buffer(ib);
                       const double* av = t.value(ia).data().data();
                       const double* bv = t.value(ib).data().data();
                       std::vector<double> gs(g.begin(), g.end());
                       if (f != 1.0) {
                         for (auto& v : gs) v *= f;
                       }
                       parallel_for(batch, m * k * n, [&](std::size_t begin, std::size_t end) {
                         for (std::size_t s = begin; s < end; ++s) {
                           const double* gsp = gs.data() + s * m * n;
                           if (!da.empty()) gemm(gsp, false, bv + s * k * n, true, da.data() + s * m * k, m, k, n);
                           if (!db.empty()) gemm(av + s * m * k, true, gsp, false, db.data() + s * k * n, k, n, m);
                         }
                       });
                     });
}

Var transpose(const Var& x) {
  Tape& tape = tape_of(x);
  const auto& xs = x.shape();
  if (xs.size() != 2 && xs.size() != 3) throw DimensionError("transpose: rank must be 2 or 3, got " + shape_string(xs));
  const std::size_t batch = xs.size() == 3 ? xs[0] : 1;
  const std::size_t rows = xs[xs.size() - 2], cols = xs[xs.size() - 1];
  Shape shape = xs;
  std::swap(shape[shape.size() - 2], shape[shape.size() - 1]);
  Tensor out(shape);
  const auto& in = x.value();
  for (std::size_t s = 0; s < batch; ++s)
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < cols; ++j) out[s * rows * cols + j * rows + i] = in[s * rows * cols + i * cols + j];

  const std::size_t ix = x.index();
  return tape.record(std::move(out), {x}, "transpose", [ix, batch, rows, cols](Tape& t, std::span<const double> g) {
    auto dx = t.grad_buffer(ix);
    for (std::size_t s = 0; s < batch; ++s)
      for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j) dx[s * rows * cols + i * cols + j] += g[s * rows * cols + j * rows + i];
  });
}

Var masked_softmax(const Var& logits, const Tensor& mask) {
  Tape& tape = tape_of(logits);
  const auto& ls = logits.shape();
  if (mask.shape() != ls) shape_error("masked_softmax", ls, mask.shape());
  const double neg_inf = -std::numeric_limits<double>::infinity();
  for (double m : mask.data()) {
    if (m != 0.0 && m != neg_inf) throw DomainError("masked_softmax: mask entries must be 0 or -inf");
  }
  const std::size_t n = ls.back();
  const std::size_t rows = logits.value().size() / n;
  const auto& in = logits.value();
  Tensor out(ls);
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t base = r * n;
    double peak = neg_inf;
    bool open = false;
    for (std::size_t j = 0; j < n; ++j) {
      if (mask[base + j] == 0.0) {
        open = true;
        peak = std::max(peak, in[base + j]);
      }
    }
    if (!open) throw DomainError("masked_softmax: row " + std::to_string(r) + " is fully masked");
    // Overflowed logits: let NaN reach the caller instead of inventing a distribution.
    if (peak == neg_inf) peak = std::numeric_limits<double>::quiet_NaN();
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (mask[base + j] == 0.0) {
        const double e = std::exp(in[base + j] - peak);
        out[base + j] = e;
        total += e;
      }
    }
    for (std::size_t j = 0; j < n; ++j) out[base + j] /= total;
  }

  const std::size_t il = logits.index();
  const std::size_t iy = tape.size();
  return tape.record(std::move(out), {logits}, "masked_softmax", [il, iy, rows, n](Tape& t, std::span<const double> g) {
    const double f = fault_factor("masked_softmax");
    auto dx = t.grad_buffer(il);
    const auto& y = t.value(iy);
    for (std::size_t r = 0; r < rows; ++r) {
      const std::size_t base = r * n;
      double dot = 0.0;
      for (std::size_t j = 0; j < n; ++j) dot += y[base + j] * g[base + j];
      for (std::size_t j = 0; j < n; ++j) dx[base + j] += f * y[base + j] * (g[base + j] - dot);
    }
  });
}

Var causal_conv1d(const Var& x, const Var& kernel, const Var& bias) {
  Tape& tape = tape_of(x);
  const auto& xs = x.shape();
  const auto& ks = kernel.shape();
  const auto& bs = bias.shape();
  if (xs.size() != 2 && xs.size() != 3) throw DimensionError("causal_conv1d: input must be [T x D] or [B x T x D], got " + shape_string(xs));
  if (ks.size() != 3) throw DimensionError("causal_conv1d: kernel must be [k x D x F], got " + shape_string(ks));
  const std::size_t batch = xs.size() == 3 ? xs[0] : 1;
  const std::size_t steps = xs[xs.size() - 2], in_dim = xs.back();
  const std::size_t width = ks[0], out_dim = ks[2];
  if (ks[1] != in_dim) shape_error("causal_conv1d", xs, ks);
  if (bs.size() != 1 || bs[0] != out_dim) shape_error("causal_conv1d (bias)", ks, bs);

  Shape shape = xs;
  shape.back() = out_dim;
  Tensor out(shape);
  const std::size_t rows = batch * steps;
  const double* bd = bias.value().data().data();
  double* od = out.data().data();
  for (std::size_t r = 0; r < rows; ++r) std::copy_n(bd, out_dim, od + r * out_dim);
  {
    const auto col = im2col(x.value().data().data(), batch, steps, in_dim, width);
    gemm(col.data(), false, kernel.value().data().data(), false, od, rows, out_dim, width * in_dim);
  }

  const std::size_t ix = x.index(), ik = kernel.index(), ib = bias.index();
  return tape.record(std::move(out), {x, kernel, bias}, "causal_conv1d",
                     [ix, ik, ib, batch, steps, in_dim, width, out_dim](Tape& t, std::span<const double> g) {
                       const double f = fault_factor("causal_conv1d");
                       std::vector<double> gs(g.begin(), g.end());
                       if (f != 1.0) {
                         for (auto& v : gs) v *= f;
                       }
                       const std::size_t rows = batch * steps, cols = width * in_dim;
                       if (auto dx = t.grad_buffer(ix); !dx.empty()) {
                         std::vector<double> dcol(rows * cols, 0.0);
                         gemm(gs.data(), false, t.value(ik).data().data(), true, dcol.data(), rows, cols, out_dim);
                         for (std::size_t s = 0; s < batch; ++s) {
                           for (std::size_t tt = 0; tt < steps; ++tt) {
                             const double* row = dcol.data() + (s * steps + tt) * cols;
                             for (std::size_t p = 0; p < width; ++p) {
                               if (tt + p + 1 < width) continue;
                               double* dxrow = dx.data() + (s * steps + tt + p + 1 - width) * in_dim;
                               for (std::size_t d = 0; d < in_dim; ++d) dxrow[d] += row[p * in_dim + d];
                             }
                           }
                         }
                       }
                       if (auto dk = t.grad_buffer(ik); !dk.empty()) {
                         const auto col = im2col(t.value(ix).data().data(), batch, steps, in_dim, width);
                         gemm(col.data(), true, gs.data(), false, dk.data(), cols, out_dim, rows);
                       }
                       if (auto dbias = t.grad_buffer(ib); !dbias.empty()) {
                         for (std::size_t r = 0; r < rows; ++r)
                           for (std::size_t o = 0; o < out_dim; ++o) dbias[o] += gs[r * out_dim + o];
                       }
                     });
}

Var elementwise(const Var& x, UnaryKind kind, double param) {
  Tape& tape = tape_of(x);
  const auto& in = x.value();
  Tensor out(in.shape());
  for (std::size_t i = 0; i < in.size(); ++i) {
    const double v = in[i];
    double y = 0.0;
    switch (kind) {
      case UnaryKind::LeakyRelu: y = v > 0.0 ? v : param * v; break;
      case UnaryKind::Elu: y = v > 0.0 ? v : std::expm1(v); break;
      case UnaryKind::Sigmoid: y = stable_sigmoid(v); break;
      case UnaryKind::Exp: y = std::exp(v); break;
      case UnaryKind::Log:
        if (v <= 0.0) throw DomainError("log: non-positive argument " + std::to_string(v) + " at index " + std::to_string(i));
        y = std::log(v);
        break;
      case UnaryKind::Negate: y = -v; break;
      case UnaryKind::Scale: y = param * v; break;
      case UnaryKind::ClampMin: y = v < param ? param : v; break;
    }
    out[i] = y;
  }

  const std::size_t ix = x.index();
  const std::size_t iy = tape.size();
  const std::string name = unary_name(kind);
  return tape.record(std::move(out), {x}, name, [ix, iy, kind, param, name](Tape& t, std::span<const double> g) {
    const double f = fault_factor(name);
    auto dx = t.grad_buffer(ix);
    const auto& in = t.value(ix);
    const auto& y = t.value(iy);
    for (std::size_t i = 0; i < dx.size(); ++i) {
      const double v = in[i];
      double d = 0.0;
      switch (kind) {
        case UnaryKind::LeakyRelu: d = v > 0.0 ? 1.0 : param; break;
        case UnaryKind::Elu: d = v > 0.0 ? 1.0 : y[i] + 1.0; break;
        case UnaryKind::Sigmoid: d = y[i] * (1.0 - y[i]); break;
        case UnaryKind::Exp: d = y[i]; break;
        case UnaryKind::Log: d = 1.0 / v; break;
        case UnaryKind::Negate: d = -1.0; break;
        case UnaryKind::Scale: d = param; break;
        case UnaryKind::ClampMin: d = v < param ? 0.0 : 1.0; break;
      }
      dx[i] += f * d * g[i];
    }
  });
}

Var elementwise(const Var& a, const Var& b, BinaryKind kind) {
  Tape& tape = tape_of(a);
  const std::string name = binary_name(kind);
  if (a.shape() != b.shape()) shape_error(name, a.shape(), b.shape());
  const auto& av = a.value();
  const auto& bv = b.value();
  Tensor out(av.shape());
  for (std::size_t i = 0; i < av.size(); ++i) {
    switch (kind) {
      case BinaryKind::Add: out[i] = av[i] + bv[i]; break;
      case BinaryKind::Subtract: out[i] = av[i] - bv[i]; break;
      case BinaryKind::Multiply: out[i] = av[i] * bv[i]; break;
    }
  }

  const std::size_t ia = a.index(), ib = b.index();
  return tape.record(std::move(out), {a, b}, name, [ia, ib, kind, name](Tape& t, std::span<const double> g) {
    const double f = fault_factor(name);
    auto da = t.grad_buffer(ia);
    auto db = t.grad_buffer(ib);
    const auto& av = t.value(ia);
    const auto& bv = t.value(ib);
    for (std::size_t i = 0; i < g.size(); ++i) {
      switch (kind) {
        case BinaryKind::Add:
          if (!da.empty()) da[i] += f * g[i];
          if (!db.empty()) db[i] += f * g[i];
          break;
        case BinaryKind::Subtract:
          if (!da.empty()) da[i] += f * g[i];
          if (!db.empty()) db[i] -= f * g[i];
          break;
        case BinaryKind::Multiply:
          if (!da.empty()) da[i] += f * g[i] * bv[i];
          if (!db.empty()) db[i] += f * g[i] * av[i];
          break;
      }
    }
  });
}

Var concat(const std::vector<Var>& parts, std::size_t axis) {
  if (parts.empty()) throw DimensionError("concat: empty sequence of parts");
  Tape& tape = tape_of(parts.front());
  const Shape& first = parts.front().shape();
  if (axis >= first.size()) throw DimensionError("concat: axis " + std::to_string(axis) + " out of range for " + shape_string(first));
  Shape shape = first;
  shape[axis] = 0;
  for (const auto& p : parts) {
    const auto& ps = p.shape();
    if (ps.size() != first.size()) shape_error("concat", first, ps);
    for (std::size_t d = 0; d < ps.size(); ++d) {
      if (d != axis && ps[d] != first[d]) shape_error("concat", first, ps);
    }
    shape[axis] += ps[axis];
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t d = 0; d < axis; ++d) outer *= first[d];
  for (std::size_t d = axis + 1; d < first.size(); ++d) inner *= first[d];

  Tensor out(shape);
  const std::size_t out_stride = shape[axis] * inner;
  std::vector<std::size_t> offsets, widths, indices;
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const std::size_t w = p.shape()[axis] * inner;
    const auto& pv = p.value();
    for (std::size_t o = 0; o < outer; ++o) {
      std::copy_n(pv.data().data() + o * w, w, out.data().data() + o * out_stride + offset);
    }
    offsets.push_back(offset);
    widths.push_back(w);
    indices.push_back(p.index());
    offset += w;
  }

  return tape.record(std::move(out), parts, "concat",
                     [indices, offsets, widths, outer, out_stride](Tape& t, std::span<const double> g) {
                       for (std::size_t k = 0; k < indices.size(); ++k) {
                         auto dp = t.grad_buffer(indices[k]);
                         if (dp.empty()) continue;
                         const std::size_t w = widths[k];
                         for (std::size_t o = 0; o < outer; ++o)
                           for (std::size_t i = 0; i < w; ++i) dp[o * w + i] += g[o * out_stride + offsets[k] + i];
                       }
                     });
}

Var slice(const Var& x, std::size_t axis, std::size_t start, std::size_t length) {
  Tape& tape = tape_of(x);
  const auto& xs = x.shape();
  if (axis >= xs.size() || length == 0 || start + length > xs[axis]) {
    throw DimensionError("slice: range [" + std::to_string(start) + ", " + std::to_string(start + length) +
                         ") on axis " + std::to_string(axis) + " out of bounds for " + shape_string(xs));
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t d = 0; d < axis; ++d) outer *= xs[d];
  for (std::size_t d = axis + 1; d < xs.size(); ++d) inner *= xs[d];
  Shape shape = xs;
  shape[axis] = length;
  Tensor out(shape);
  const std::size_t in_stride = xs[axis] * inner, w = length * inner, off = start * inner;
  const auto& in = x.value();
  for (std::size_t o = 0; o < outer; ++o) std::copy_n(in.data().data() + o * in_stride + off, w, out.data().data() + o * w);

  const std::size_t ix = x.index();
  return tape.record(std::move(out), {x}, "slice", [ix, outer, in_stride, w, off](Tape& t, std::span<const double> g) {
    auto dx = t.grad_buffer(ix);
    for (std::size_t o = 0; o < outer; ++o)
      for (std::size_t i = 0; i < w; ++i) dx[o * in_stride + off + i] += g[o * w + i];
  });
}

Var reshape(const Var& x, Shape shape) {
  Tape& tape = tape_of(x);
  Tensor out = x.value().reshaped(std::move(shape));
  const std::size_t ix = x.index();
  return tape.record(std::move(out), {x}, "reshape", [ix](Tape& t, std::span<const double> g) {
    auto dx = t.grad_buffer(ix);
    for (std::size_t i = 0; i < g.size(); ++i) dx[i] += g[i];
  });
}

Var sum(const Var& x) {
  Tape& tape = tape_of(x);
  double total = 0.0;
  for (double v : x.value().data()) total += v;
  const std::size_t ix = x.index();
  return tape.record(Tensor::scalar(total), {x}, "sum", [ix](Tape& t, std::span<const double> g) {
    const double f = fault_factor("sum");
    auto dx = t.grad_buffer(ix);
    for (auto& d : dx) d += f * g[0];
  });
}

Var row_sum(const Var& x) {
  Tape& tape = tape_of(x);
  const auto& xs = x.shape();
  const std::size_t n = xs.back();
  const std::size_t rows = x.value().size() / n;
  Shape shape(xs.begin(), xs.end() - 1);
  if (shape.empty()) shape = {1};
  Tensor out(shape);
  const auto& in = x.value();
  for (std::size_t r = 0; r < rows; ++r) {
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) acc += in[r * n + j];
    out[r] = acc;
  }
  const std::size_t ix = x.index();
  return tape.record(std::move(out), {x}, "row_sum", [ix, rows, n](Tape& t, std::span<const double> g) {
    auto dx = t.grad_buffer(ix);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t j = 0; j < n; ++j) dx[r * n + j] += g[r];
  });
}

Var pairwise_sum(const Var& a, const Var& b) {
  Tape& tape = tape_of(a);
  if (a.shape().size() != 1 || b.shape().size() != 1) shape_error("pairwise_sum", a.shape(), b.shape());
  const std::size_t n = a.shape()[0], m = b.shape()[0];
  Tensor out(Shape{n, m});
  const auto& av = a.value();
  const auto& bv = b.value();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) out[i * m + j] = av[i] + bv[j];
  const std::size_t ia = a.index(), ib = b.index();
  return tape.record(std::move(out), {a, b}, "pairwise_sum", [ia, ib, n, m](Tape& t, std::span<const double> g) {
    auto da = t.grad_buffer(ia);
    auto db = t.grad_buffer(ib);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < m; ++j) {
        if (!da.empty()) da[i] += g[i * m + j];
        if (!db.empty()) db[j] += g[i * m + j];
      }
    }
  });
}

Var repeat(const Var& x, std::size_t count) {
  Tape& tape = tape_of(x);
  if (count == 0) throw DimensionError("repeat: count must be positive");
  Shape shape{count};
  shape.insert(shape.end(), x.shape().begin(), x.shape().end());
  Tensor out(shape);
  const auto& in = x.value();
  const std::size_t w = in.size();
  for (std::size_t c = 0; c < count; ++c) std::copy_n(in.data().data(), w, out.data().data() + c * w);
  const std::size_t ix = x.index();
  return tape.record(std::move(out), {x}, "repeat", [ix, count, w](Tape& t, std::span<const double> g) {
    const double f = fault_factor("repeat");
    auto dx = t.grad_buffer(ix);
    for (std::size_t c = 0; c < count; ++c)
      for (std::size_t i = 0; i < w; ++i) dx[i] += f * g[c * w + i];
  });
}

Var gather_rows(const Var& x, std::span<const std::size_t> indices) {
  Tape& tape = tape_of(x);
  const auto& xs = x.shape();
  if (xs.size() != 2) throw DimensionError("gather_rows: input must be rank 2, got " + shape_string(xs));
  if (indices.empty()) throw DimensionError("gather_rows: empty index list");
  const std::size_t rows = xs[0], cols = xs[1];
  Tensor out(Shape{indices.size(), cols});
  const auto& in = x.value();
  for (std::size_t r = 0; r < indices.size(); ++r) {
    if (indices[r] >= rows) throw DimensionError("gather_rows: index " + std::to_string(indices[r]) + " out of range for " + shape_string(xs));
    std::copy_n(in.data().data() + indices[r] * cols, cols, out.data().data() + r * cols);
  }
  const std::size_t ix = x.index();
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  return tape.record(std::move(out), {x}, "gather_rows", [ix, idx = std::move(idx), cols](Tape& t, std::span<const double> g) {
    auto dx = t.grad_buffer(ix);
    for (std::size_t r = 0; r < idx.size(); ++r)
      for (std::size_t c = 0; c < cols; ++c) dx[idx[r] * cols + c] += g[r * cols + c];
  });
}

namespace testing {

void inject_backward_fault(const std::string& op, double factor) {
  std::lock_guard lock(g_fault_mutex);
  g_fault_op = op;
  g_fault_factor = factor;
}

}  // namespace testing

}  // namespace convdysat
