#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "convdysat/tape.hpp"

// Differentiable tensor operations. Every op validates shapes up front and throws
// DimensionError naming the offending shapes. There is no implicit broadcasting: the
// only mixed-shape operations are `scale` (tensor times scalar) and the explicit
// `repeat` / `pairwise_sum` expansions.
namespace convdysat {

// [m x k] * [k x n] -> [m x n]
Var matmul(const Var& a, const Var& b);
// [B x m x k] * [B x k x n] -> [B x m x n]
Var batched_matmul(const Var& a, const Var& b);
// Swaps the last two axes of a rank-2 or rank-3 tensor.
Var transpose(const Var& x);

/// Softmax over the last axis with an additive {0, -inf} mask of the same shape.
///
/// Rows are stabilised by subtracting the maximum over unmasked entries. Masked
/// positions come out as exactly 0 and receive no gradient. A row without any
/// unmasked entry raises DomainError.
Var masked_softmax(const Var& logits, const Tensor& mask);

/// Causal 1-D convolution along the time axis.
///
/// `x` is [T x D] or a batch of independent sequences [B x T x D]; `kernel` is
/// [k x D x F]; `bias` is [F]. Output row t reads input rows t-k+1 .. t, rows before 0
/// being zero padding, so the output keeps length T.
Var causal_conv1d(const Var& x, const Var& kernel, const Var& bias);

enum class UnaryKind { LeakyRelu, Elu, Sigmoid, Exp, Log, Negate, Scale, ClampMin };
enum class BinaryKind { Add, Subtract, Multiply };

// `param` is the slope for LeakyRelu, the factor for Scale and the floor for ClampMin.
Var elementwise(const Var& x, UnaryKind kind, double param = 0.0);
Var elementwise(const Var& a, const Var& b, BinaryKind kind);

inline Var leaky_relu(const Var& x, double slope = 0.2) { return elementwise(x, UnaryKind::LeakyRelu, slope); }
inline Var elu(const Var& x) { return elementwise(x, UnaryKind::Elu); }
inline Var sigmoid(const Var& x) { return elementwise(x, UnaryKind::Sigmoid); }
inline Var exp(const Var& x) { return elementwise(x, UnaryKind::Exp); }
inline Var log(const Var& x) { return elementwise(x, UnaryKind::Log); }
inline Var negate(const Var& x) { return elementwise(x, UnaryKind::Negate); }
inline Var scale(const Var& x, double factor) { return elementwise(x, UnaryKind::Scale, factor); }
inline Var clamp_min(const Var& x, double floor) { return elementwise(x, UnaryKind::ClampMin, floor); }
inline Var add(const Var& a, const Var& b) { return elementwise(a, b, BinaryKind::Add); }
inline Var subtract(const Var& a, const Var& b) { return elementwise(a, b, BinaryKind::Subtract); }
inline Var multiply(const Var& a, const Var& b) { return elementwise(a, b, BinaryKind::Multiply); }

// Joins parts along `axis`; all other extents must agree.
Var concat(const std::vector<Var>& parts, std::size_t axis);
// `length` consecutive entries starting at `start` along `axis`.
Var slice(const Var& x, std::size_t axis, std::size_t start, std::size_t length);
Var reshape(const Var& x, Shape shape);

// Sum of all entries -> [1].
Var sum(const Var& x);
// Sum over the last axis; the last axis is dropped (a rank-1 input yields [1]).
Var row_sum(const Var& x);
// a: [n], b: [m] -> [n x m] with out[i][j] = a[i] + b[j].
Var pairwise_sum(const Var& a, const Var& b);
// Stacks `count` copies of x along a new leading axis.
Var repeat(const Var& x, std::size_t count);
// Rows of a rank-2 tensor selected by index; indices may repeat.
Var gather_rows(const Var& x, std::span<const std::size_t> indices);

namespace testing {

// Multiplies the backward rule of the named op by `factor`. Used only to verify that the
// gradient checker detects a broken rule. An empty name disables the fault.
void inject_backward_fault(const std::string& op, double factor);

}  // namespace testing

}  // namespace convdysat
