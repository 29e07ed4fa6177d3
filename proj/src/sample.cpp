#include "mtae/sample.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "mtae/error.hpp"
#include "mtae/perf_codec.hpp"

namespace mtae {

int pick_token(const std::vector<double>& logits, double temperature, std::size_t top_k, double uniform01) {
  if (logits.empty()) throw Error(ErrorCategory::shape, "no logits to sample from");
  const auto argmax = static_cast<int>(std::max_element(logits.begin(), logits.end()) - logits.begin());
  if (temperature <= 0.0 || top_k == 1) return argmax;

  std::vector<int> ids(logits.size());
  std::iota(ids.begin(), ids.end(), 0);
  if (top_k > 0 && top_k < ids.size()) {
    std::partial_sort(ids.begin(), ids.begin() + static_cast<long>(top_k), ids.end(),
                      [&](int a, int b) { return logits[a] > logits[b] || (logits[a] == logits[b] && a < b); });
    ids.resize(top_k);
    std::sort(ids.begin(), ids.end());
  }
  const double top = logits[static_cast<std::size_t>(argmax)];
  std::vector<double> w(ids.size());
  double total = 0.0;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    w[i] = std::exp((logits[static_cast<std::size_t>(ids[i])] - top) / temperature);
    total += w[i];
  }
  double u = uniform01 * total;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (u < w[i]) return ids[i];
    u -= w[i];
  }
  // Rounding left u past the end; fall back to the last positive weight.
  for (std::size_t i = ids.size(); i-- > 0;) {
    if (w[i] > 0.0) return ids[i];
  }
  return argmax;
}

TokenSeq sample(const TransformerAutoencoder& model, const Tensor* memory, const SampleConfig& cfg) {
  if (cfg.max_len > model.config().max_len) throw Error(ErrorCategory::range, "sample length exceeds the model maximum");
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  TokenSeq out;
  while (out.size() < cfg.max_len) {
    const Tensor logits = model.decode_logits(memory, out);
    const std::size_t last = logits.rows() - 1;
    std::vector<double> row(logits.cols());
    for (std::size_t c = 0; c < row.size(); ++c) row[c] = logits.at(last, c);
    const int tok = pick_token(row, cfg.temperature, cfg.top_k, unif(rng));
    if (tok == perf::kEos) break;
    out.push_back(tok);
  }
  return out;
}

std::optional<Tensor> conditioning_memory(const TransformerAutoencoder& model, const TokenSeq* performance,
                                          const TokenSeq* melody) {
  const auto& cfg = model.config();
  switch (cfg.conditioning) {
    case Conditioning::none:
      return std::nullopt;
    case Conditioning::performance:
      if (!performance) throw Error(ErrorCategory::state, "this model needs a conditioning performance");
      if (cfg.aggregation == Aggregation::none) return model.encode_performance_sequence(*performance);
      return model.latent_memory(model.encode_performance_latent(*performance));
    case Conditioning::melody_performance: {
      if (!melody) throw Error(ErrorCategory::state, "this model needs a conditioning melody");
      const LatentVector z = performance ? model.encode_performance_latent(*performance)
                                         : LatentVector{std::vector<double>(cfg.hidden, 0.0)};
      return model.combine(model.encode_melody(*melody), z);
    }
  }
  return std::nullopt;
}

LatentVector interpolate(const LatentVector& a, const LatentVector& b, double alpha) {
  if (a.values.size() != b.values.size()) throw Error(ErrorCategory::shape, "latents differ in dimension");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw Error(ErrorCategory::range, "alpha must lie in [0, 1]");
  LatentVector out{std::vector<double>(a.values.size())};
  for (std::size_t i = 0; i < a.values.size(); ++i) out.values[i] = alpha * a.values[i] + (1.0 - alpha) * b.values[i];
  return out;
}

std::vector<double> default_alpha_grid() {
  std::vector<double> g;
  for (int i = 0; i <= 8; ++i) g.push_back(i / 8.0);
  return g;
}

std::vector<SweepPoint> interpolation_sweep(const TransformerAutoencoder& model, const TokenSeq& perf_a,
                                            const TokenSeq& perf_b, const std::vector<double>& alphas,
                                            const TokenSeq* melody, const SampleConfig& cfg,
                                            const metrics::MetricConfig& mcfg) {
  const auto& mc = model.config();
  if (mc.conditioning == Conditioning::none || mc.aggregation != Aggregation::mean) {
    throw Error(ErrorCategory::state, "interpolation needs a model with a mean latent");
  }
  if (melody && mc.conditioning != Conditioning::melody_performance) {
    throw Error(ErrorCategory::state, "a fixed melody needs a melody-conditioned model");
  }
  if (!melody && mc.conditioning == Conditioning::melody_performance) {
    throw Error(ErrorCategory::state, "melody-conditioned sweeps need a melody");
  }
  const LatentVector za = model.encode_performance_latent(perf_a);
  const LatentVector zb = model.encode_performance_latent(perf_b);
  const NoteSequence notes_a = perf::decode(perf_a).sequence, notes_b = perf::decode(perf_b).sequence;
  const auto fa = metrics::compute_features(notes_a, mcfg), fb = metrics::compute_features(notes_b, mcfg);
  std::optional<Tensor> mel_enc;
  if (melody) mel_enc = model.encode_melody(*melody);

  std::vector<SweepPoint> out;
  for (double alpha : alphas) {
    SweepPoint p;
    p.alpha = alpha;
    const LatentVector z = interpolate(za, zb, alpha);
    const Tensor mem = melody ? model.combine(*mel_enc, z) : model.latent_memory(z);
    p.tokens = sample(model, &mem, cfg);
    p.notes = perf::decode(p.tokens).sequence;
    if (!p.notes.empty()) {
      const auto fs = metrics::compute_features(p.notes, mcfg);
      p.oa_a = metrics::oa_similarity(fs, fa).average;
      p.oa_b = metrics::oa_similarity(fs, fb).average;
    }
    p.rel = metrics::rel_distance(p.oa_a, p.oa_b);
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace mtae
