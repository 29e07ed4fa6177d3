#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "mtae/model.hpp"
#include "mtae/notes.hpp"
#include "mtae/optim.hpp"

namespace mtae {

struct TrainConfig {
  std::size_t steps = 2000;
  std::size_t batch_size = 8;
  double lr_base = 1.0;
  double warmup = 200.0;
  double clip_norm = 1.0;  // <= 0 disables clipping
  std::uint64_t seed = 1;
  std::size_t log_every = 50;
  bool perturb = true;  // encoder-side perturbation, melody conditioning only

  bool operator==(const TrainConfig&) const = default;
};

/// One training pair. `target` is what the decoder predicts; `clean` is the
/// note content it covers, from which the melody and the (possibly
/// perturbed) encoder input are derived.
struct Example {
  NoteSequence clean;
  TokenSeq target;
  TokenSeq melody;
};

/// Target = first `max_len` performance tokens; clean notes = decoded target.
Example make_example(const NoteSequence& seq, std::size_t max_len, bool with_melody);
/// Token-level example (no notes, no melody), for performance/unconditional runs.
Example make_token_example(TokenSeq tokens);

/// Encoder input for `ex`: the clean target, or a perturbed re-encoding of
/// the clean notes drawn from the 48-cell grid.
TokenSeq encoder_input(const Example& ex, std::size_t max_len, bool perturb, std::mt19937_64& rng);

struct LossPoint {
  std::int64_t step;
  double nll;
};

/// Mini-batch maximum-likelihood training of a TransformerAutoencoder.
class Trainer {
 public:
  Trainer(ModelConfig model_cfg, TrainConfig train_cfg, std::vector<Example> examples);

  /// Runs until `steps` total steps have been taken.
  const std::vector<LossPoint>& run();
  /// One optimizer step; returns the batch NLL before the update.
  double step();

  const TransformerAutoencoder& model() const noexcept { return model_; }
  TransformerAutoencoder& model() noexcept { return model_; }
  const Adam& optimizer() const noexcept { return adam_; }
  Adam& optimizer() noexcept { return adam_; }
  const std::vector<LossPoint>& curve() const noexcept { return curve_; }
  std::int64_t steps_taken() const noexcept { return adam_.steps_taken(); }
  const TrainConfig& config() const noexcept { return cfg_; }

 private:
  std::vector<std::size_t> next_batch();

  TrainConfig cfg_;
  TransformerAutoencoder model_;
  Adam adam_;
  RsqrtSchedule schedule_;
  std::vector<Example> examples_;
  std::mt19937_64 rng_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
  std::vector<LossPoint> curve_;
};

enum class MemoryControl {
  matched,   // each example's own conditioning
  shuffled,  // conditioning of a different example
};

/// Token-weighted mean NLL (nats/token) with dropout off and clean encoder
/// inputs. Padding is excluded.
double evaluate_nll(const TransformerAutoencoder& model, const std::vector<Example>& examples,
                    MemoryControl control = MemoryControl::matched, std::size_t batch_size = 8);

}  // namespace mtae
