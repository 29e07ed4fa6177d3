#pragma once

#include <vector>

#include "mtae/tape.hpp"

namespace mtae::attention {

/// How relative position embeddings enter the attention logits.
///  none:          plain scaled dot-product (used for attention over memory)
///  causal:        distances -R..0, future keys masked
///  bidirectional: distances -R..R
enum class RelativeMode { none, causal, bidirectional };

/// Rows of the learned relative table: R+1 (causal) or 2R+1 (bidirectional).
std::size_t relative_rows(RelativeMode mode, std::size_t max_rel);

/// Table row for distance `key - query`, clipped to the covered range.
std::size_t relative_index(long delta, RelativeMode mode, std::size_t max_rel);

/// Per-distance table expanded to every distance a length-L sequence can
/// produce: L rows (causal, distance m-(L-1)) or 2L-1 rows (bidirectional).
Tensor expand_relative(const Tensor& table, std::size_t length, RelativeMode mode, std::size_t max_rel);

/// Skewing: rearranges Q * E^T, indexed by (query, distance), into logits
/// indexed by (query, key) with pad / reshape / slice steps only.
///  causal:        [L, L]    -> [L, L], entries above the diagonal are junk
///  bidirectional: [L, 2L-1] -> [L, L]
Tensor skew(const Tensor& q_er, RelativeMode mode);

/// Single-head attention on plain tensors (no gradients).
/// q [Lq, dk], k [Lk, dk], v [Lk, dv]; `table` is the per-distance relative
/// table [relative_rows, dk] (ignored for mode none). Keys at index >=
/// key_length are masked.
Tensor relative_attention(const Tensor& q, const Tensor& k, const Tensor& v, const Tensor& table,
                          RelativeMode mode, std::size_t max_rel, std::size_t key_length);

struct Spec {
  std::size_t batch = 1;
  std::size_t q_len = 0;  // padded query rows per batch item
  std::size_t k_len = 0;  // padded key rows per batch item
  std::size_t heads = 1;
  std::vector<std::size_t> key_lengths;  // valid keys per batch item
  RelativeMode mode = RelativeMode::none;
  std::size_t max_rel = 0;
};

/// Multi-head attention on the tape. q [B*Lq, H*dk], k [B*Lk, H*dk],
/// v [B*Lk, H*dv]; `table` [relative_rows, H*dk] unless mode is none, in
/// which case pass an empty Var. Output [B*Lq, H*dv].
Var multihead(const Var& q, const Var& k, const Var& v, const Var& table, const Spec& spec);

}  // namespace mtae::attention
