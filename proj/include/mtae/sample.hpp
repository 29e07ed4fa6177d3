#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "mtae/metrics.hpp"
#include "mtae/model.hpp"
#include "mtae/notes.hpp"

namespace mtae {

struct SampleConfig {
  std::size_t max_len = 128;
  double temperature = 1.0;  // <= 0 means greedy
  std::size_t top_k = 0;     // 0 disables the cut
  std::uint64_t seed = 1;
};

/// Autoregressive decoding from the start token. Stops before EOS or after
/// max_len tokens; EOS itself is not returned.
TokenSeq sample(const TransformerAutoencoder& model, const Tensor* memory, const SampleConfig& cfg);

/// Index drawn from softmax(logits / temperature) restricted to the top_k
/// largest logits. Greedy when temperature <= 0 or top_k == 1.
int pick_token(const std::vector<double>& logits, double temperature, std::size_t top_k, double uniform01);

/// Decoder memory for a conditioning request. `performance` may be absent
/// for melody-only generation (zero latent); `melody` is required by
/// melody-conditioned models. Unconditional models return nullopt.
std::optional<Tensor> conditioning_memory(const TransformerAutoencoder& model, const TokenSeq* performance,
                                          const TokenSeq* melody);

/// alpha * a + (1 - alpha) * b.
LatentVector interpolate(const LatentVector& a, const LatentVector& b, double alpha);

/// 0, 0.125, ..., 1.
std::vector<double> default_alpha_grid();

struct SweepPoint {
  double alpha = 0.0;
  TokenSeq tokens;
  NoteSequence notes;
  double oa_a = 0.0, oa_b = 0.0;
  metrics::RelDistance rel;
};

/// One sample per alpha from the interpolated latent. When `melody` is given
/// it stays fixed across the sweep (melody-conditioned models only). Each
/// sample is scored against the note content of A and B.
std::vector<SweepPoint> interpolation_sweep(const TransformerAutoencoder& model, const TokenSeq& perf_a,
                                            const TokenSeq& perf_b, const std::vector<double>& alphas,
                                            const TokenSeq* melody, const SampleConfig& cfg,
                                            const metrics::MetricConfig& mcfg = {});

}  // namespace mtae
