#pragma once

#include "laft/tensor.hpp"

#include <cstdint>
#include <span>
#include <vector>

// Differentiable operations over Tensor. Every function records itself on the
// tape passed as first argument.
//
// Broadcasting rule for binary elementwise ops: the operand with fewer
// elements must have a shape equal to the trailing dimensions of the other
// (a single-element tensor broadcasts to anything). The result takes the
// larger shape; the smaller operand is repeated, never modified.

namespace laft {

enum class Unary { neg, exp, log, sigmoid, relu, tanh };
enum class Binary { add, sub, mul, div };

Tensor unary(Tape& tape, Unary kind, const Tensor& a);
Tensor binary(Tape& tape, Binary kind, const Tensor& a, const Tensor& b);

inline Tensor neg(Tape& t, const Tensor& a) { return unary(t, Unary::neg, a); }
inline Tensor exp(Tape& t, const Tensor& a) { return unary(t, Unary::exp, a); }
inline Tensor log(Tape& t, const Tensor& a) { return unary(t, Unary::log, a); }
inline Tensor sigmoid(Tape& t, const Tensor& a) { return unary(t, Unary::sigmoid, a); }
inline Tensor relu(Tape& t, const Tensor& a) { return unary(t, Unary::relu, a); }
inline Tensor tanh(Tape& t, const Tensor& a) { return unary(t, Unary::tanh, a); }

inline Tensor add(Tape& t, const Tensor& a, const Tensor& b) { return binary(t, Binary::add, a, b); }
inline Tensor sub(Tape& t, const Tensor& a, const Tensor& b) { return binary(t, Binary::sub, a, b); }
inline Tensor mul(Tape& t, const Tensor& a, const Tensor& b) { return binary(t, Binary::mul, a, b); }
/// Throws NumericError if `b` contains an exact zero.
inline Tensor div(Tape& t, const Tensor& a, const Tensor& b) { return binary(t, Binary::div, a, b); }

Tensor scale(Tape& tape, const Tensor& a, double factor);

/// a: [..., k] (leading dims flattened), b: [k, p] -> [..., p].
Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b);
/// x·w + bias with w: [in, out], bias: [out].
Tensor linear(Tape& tape, const Tensor& x, const Tensor& w, const Tensor& bias);

enum class Reduce { sum, mean, max };

struct ReduceResult {
  Tensor values;
  std::vector<Index> argmax;  // filled for Reduce::max only, one per output element
};

ReduceResult reduce(Tape& tape, Reduce kind, const Tensor& a, Index axis, bool keepdim = false);
inline Tensor sum(Tape& t, const Tensor& a, Index axis, bool keepdim = false) {
  return reduce(t, Reduce::sum, a, axis, keepdim).values;
}
inline Tensor mean(Tape& t, const Tensor& a, Index axis, bool keepdim = false) {
  return reduce(t, Reduce::mean, a, axis, keepdim).values;
}
/// Sum of all elements as a shape-[1] tensor.
Tensor sum_all(Tape& tape, const Tensor& a);

/// Normalizes over the last dimension: (x - mean) / sqrt(var + eps) * gain + bias.
Tensor layer_norm(Tape& tape, const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = 1e-5);

/// Log-softmax over the last dimension.
Tensor log_softmax(Tape& tape, const Tensor& x);

Tensor reshape(Tape& tape, const Tensor& x, Shape shape);
/// Swaps the last two axes.
Tensor transpose_last(Tape& tape, const Tensor& x);

/// Row lookup: out[j] = table[ids[j]]. Output shape is `lead` + [D]. Rows equal
/// to `frozen_row` never receive gradient.
Tensor embedding(Tape& tape, const Tensor& table, std::span<const std::int64_t> ids, Shape lead,
                 std::int64_t frozen_row = -1);

/// Selects entries along axis 0: out[j] = x[indices[j]].
Tensor index_select(Tape& tape, const Tensor& x, std::span<const Index> indices);

/// Top-left rows x cols window of a rank-2 `src`; entries where keep == 0 are
/// replaced by the constant in `fill` and pass no gradient. `keep` and `fill`
/// are row-major rows*cols.
Tensor masked_slice(Tape& tape, const Tensor& src, Index rows, Index cols,
                    std::span<const std::uint8_t> keep, std::span<const double> fill);

/// Attention-free mixing with a pair-wise position bias:
///
///   out[b,n,d] = sum_i exp(bias[n,i] + key[b,i,d]) * value[b,i,d]
///              / sum_i exp(bias[n,i] + key[b,i,d])
///
/// bias: [N, S]; key, value: [B, S, D]; out: [B, N, D]. `key_valid` (B*S, may
/// be empty for all-valid) removes key positions from both sums. Exponents are
/// shifted by their per-(b,n,d) maximum, which leaves the ratio unchanged.
Tensor aft_mix(Tape& tape, const Tensor& bias, const Tensor& key, const Tensor& value,
               std::span<const std::uint8_t> key_valid = {});

/// The normalized weights used by aft_mix, shape [B, N, S, D]. Inspection
/// only; not differentiable.
Tensor aft_weights(const Tensor& bias, const Tensor& key, std::span<const std::uint8_t> key_valid = {});

/// Additive bias used for masked positions. exp(kMaskBias - finite) == 0.
inline constexpr double kMaskBias = -1e30;

}  // namespace laft
