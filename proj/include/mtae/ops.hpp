#pragma once

#include <cstdint>
#include <vector>

#include "mtae/tape.hpp"

namespace mtae::ops {

inline constexpr double kLayerNormEps = 1e-6;

Var matmul(const Var& a, const Var& b);              // [m,k] x [k,n]
Var add(const Var& a, const Var& b);                 // same shape
Var add_row(const Var& a, const Var& bias);          // [.., n] + [n]
Var mul(const Var& a, const Var& b);                 // elementwise
Var scale(const Var& a, double s);
Var sum(const Var& a);                               // -> shape {}
Var relu(const Var& a);
Var softmax(const Var& a, std::size_t axis);
Var layer_norm(const Var& x);                        // over last axis, no affine
Var layer_norm(const Var& x, const Var& gain, const Var& bias);
Var embed(const Var& table, const std::vector<int>& ids);  // [V,d] -> [n,d]

/// Inverted dropout; identity when p == 0. The mask depends only on `seed`.
Var dropout(const Var& x, double p, std::uint64_t seed);

/// Mean negative log-likelihood (nats) of `targets` under row-wise softmax
/// of `logits` [n, V]. Targets < 0 are ignored.
Var cross_entropy(const Var& logits, const std::vector<int>& targets);

/// Rows grouped in segments of `stride`; the first lengths[b] rows of each
/// segment are averaged. [B*stride, d] -> [B, d].
Var segment_mean(const Var& x, const std::vector<std::size_t>& lengths, std::size_t stride);

/// Repeats row b of [B, d] `stride` times -> [B*stride, d].
Var repeat_rows(const Var& z, std::size_t stride);

Var concat_cols(const Var& a, const Var& b);
Var concat_rows(const std::vector<Var>& parts);

/// Row r of the output is row index[r] of x, or zeros when index[r] < 0.
Var gather_rows(const Var& x, const std::vector<long>& index);

}  // namespace mtae::ops
