#include "mtae/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mtae/augment.hpp"
#include "mtae/error.hpp"
#include "mtae/melody.hpp"
#include "mtae/ops.hpp"
#include "mtae/perf_codec.hpp"

namespace mtae {

namespace {

TokenSeq crop(TokenSeq t, std::size_t max_len) {
  if (t.size() > max_len) t.resize(max_len);
  return t;
}

}  // namespace

Example make_example(const NoteSequence& seq, std::size_t max_len, bool with_melody) {
  Example ex;
  ex.target = crop(perf::encode(seq), max_len);
  if (ex.target.empty()) throw Error(ErrorCategory::range, "performance encodes to zero tokens");
  ex.clean = perf::decode(ex.target).sequence;
  if (with_melody) {
    ex.melody = crop(melody::encode(melody::extract(ex.clean)).tokens, max_len);
    if (ex.melody.empty()) ex.melody.push_back(melody::kNoEvent);
  }
  return ex;
}

Example make_token_example(TokenSeq tokens) {
  if (tokens.empty()) throw Error(ErrorCategory::range, "empty token example");
  Example ex;
  ex.target = std::move(tokens);
  return ex;
}

TokenSeq encoder_input(const Example& ex, std::size_t max_len, bool perturb, std::mt19937_64& rng) {
  if (!perturb) return ex.target;
  const auto p = augment::sample_perturbation(rng);
  TokenSeq t = crop(perf::encode(augment::apply(ex.clean, p)), max_len);
  if (t.empty()) return ex.target;
  return t;
}

Trainer::Trainer(ModelConfig model_cfg, TrainConfig train_cfg, std::vector<Example> examples)
    : cfg_(train_cfg),
      model_(model_cfg, train_cfg.seed),
      adam_(model_.parameters()),
      examples_(std::move(examples)),
      rng_(train_cfg.seed ^ 0x9e3779b97f4a7c15ULL) {
  if (examples_.empty()) throw Error(ErrorCategory::range, "training corpus is empty");
  if (cfg_.batch_size == 0) throw Error(ErrorCategory::config, "batch size must be positive");
  const auto& mc = model_.config();
  for (const auto& ex : examples_) {
    if (ex.target.empty() || ex.target.size() > mc.max_len) {
      throw Error(ErrorCategory::range, "target length must lie in 1..max_len");
    }
    for (int t : ex.target) {
      if (t < 0 || static_cast<std::size_t>(t) >= mc.perf_vocab) {
        throw Error(ErrorCategory::range, "corpus token outside the performance vocabulary");
      }
    }
    if (mc.conditioning == Conditioning::melody_performance) {
      if (ex.melody.empty()) throw Error(ErrorCategory::range, "melody conditioning needs melody tokens");
      for (int t : ex.melody) {
        if (t < 0 || static_cast<std::size_t>(t) >= mc.melody_vocab) {
          throw Error(ErrorCategory::range, "melody token outside the melody vocabulary");
        }
      }
    }
  }
  schedule_.base = cfg_.lr_base;
  schedule_.warmup = cfg_.warmup;
  schedule_.scale = 1.0 / std::sqrt(static_cast<double>(mc.hidden));
  order_.resize(examples_.size());
  std::iota(order_.begin(), order_.end(), 0);
  std::shuffle(order_.begin(), order_.end(), rng_);
}

std::vector<std::size_t> Trainer::next_batch() {
  std::vector<std::size_t> batch;
  const std::size_t n = std::min(cfg_.batch_size, examples_.size());
  while (batch.size() < n) {
    if (cursor_ == order_.size()) {
      std::shuffle(order_.begin(), order_.end(), rng_);
      cursor_ = 0;
    }
    batch.push_back(order_[cursor_++]);
  }
  return batch;
}

namespace {

struct DecoderBatch {
  std::vector<TokenSeq> inputs;
  std::vector<int> targets;  // flattened, padded with -1
};

DecoderBatch decoder_batch(const std::vector<const TokenSeq*>& targets) {
  DecoderBatch b;
  std::size_t stride = 0;
  for (const auto* t : targets) stride = std::max(stride, t->size());
  for (const auto* t : targets) {
    TokenSeq in{TransformerAutoencoder::kStartToken};
    in.insert(in.end(), t->begin(), t->end() - 1);
    b.inputs.push_back(std::move(in));
    b.targets.insert(b.targets.end(), t->begin(), t->end());
    b.targets.insert(b.targets.end(), stride - t->size(), -1);
  }
  return b;
}

}  // namespace

double Trainer::step() {
  const auto& mc = model_.config();
  const auto idx = next_batch();

  std::vector<const TokenSeq*> targets;
  std::vector<TokenSeq> perf_inputs, melodies;
  const bool melody_mode = mc.conditioning == Conditioning::melody_performance;
  for (auto i : idx) {
    const Example& ex = examples_[i];
    targets.push_back(&ex.target);
    if (mc.conditioning != Conditioning::none) {
      perf_inputs.push_back(encoder_input(ex, mc.max_len, melody_mode && cfg_.perturb, rng_));
    }
    if (melody_mode) melodies.push_back(ex.melody);
  }
  DecoderBatch db = decoder_batch(targets);
  // Perturbation only ever reaches the encoder input.
  for (std::size_t k = 0; k < idx.size(); ++k) {
    if (targets[k] != &examples_[idx[k]].target || db.inputs[k].size() != examples_[idx[k]].target.size()) {
      throw Error(ErrorCategory::state, "decoder target diverged from the clean example");
    }
  }

  Tape tape;
  ForwardContext ctx{&rng_};
  std::optional<Encoded> perf_enc, mel_enc;
  if (mc.conditioning != Conditioning::none) {
    perf_enc = model_.encode(tape, TransformerAutoencoder::Stack::performance, perf_inputs, ctx);
  }
  if (melody_mode) mel_enc = model_.encode(tape, TransformerAutoencoder::Stack::melody, melodies, ctx);
  const Memory mem = model_.memory(tape, perf_enc ? &*perf_enc : nullptr, mel_enc ? &*mel_enc : nullptr, idx.size());
  const Var logits = model_.decode(tape, mc.conditioning == Conditioning::none ? nullptr : &mem, db.inputs, ctx);
  const Var loss = ops::cross_entropy(logits, db.targets);
  const double value = loss.value()[0];

  auto params = model_.parameters();
  zero_grads(params);
  tape.backward(loss);
  if (cfg_.clip_norm > 0.0) clip_grad_norm(params, cfg_.clip_norm);
  const std::int64_t before = adam_.steps_taken();
  adam_.step(schedule_);
  if (cfg_.log_every && before % static_cast<std::int64_t>(cfg_.log_every) == 0) curve_.push_back({before, value});
  return value;
}

const std::vector<LossPoint>& Trainer::run() {
  while (static_cast<std::size_t>(adam_.steps_taken()) < cfg_.steps) step();
  return curve_;
}

double evaluate_nll(const TransformerAutoencoder& model, const std::vector<Example>& examples, MemoryControl control,
                    std::size_t batch_size) {
  if (examples.empty()) throw Error(ErrorCategory::range, "evaluation set is empty");
  const auto& mc = model.config();
  const bool melody_mode = mc.conditioning == Conditioning::melody_performance;
  const std::size_t n = examples.size();
  if (control == MemoryControl::shuffled && n < 2) throw Error(ErrorCategory::range, "shuffled control needs two examples");

  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t end = std::min(n, start + batch_size);
    std::vector<const TokenSeq*> targets;
    std::vector<TokenSeq> perf_inputs, melodies;
    for (std::size_t i = start; i < end; ++i) {
      targets.push_back(&examples[i].target);
      // The shuffled control swaps the performance conditioning only.
      const std::size_t src = control == MemoryControl::shuffled ? (i + n / 2) % n : i;
      perf_inputs.push_back(examples[src].target);
      if (melody_mode) melodies.push_back(examples[i].melody);
    }
    const DecoderBatch db = decoder_batch(targets);
    Tape tape(Tape::Mode::inference);
    std::optional<Encoded> perf_enc, mel_enc;
    if (mc.conditioning != Conditioning::none) {
      perf_enc = model.encode(tape, TransformerAutoencoder::Stack::performance, perf_inputs, {});
    }
    if (melody_mode) mel_enc = model.encode(tape, TransformerAutoencoder::Stack::melody, melodies, {});
    const Memory mem = model.memory(tape, perf_enc ? &*perf_enc : nullptr, mel_enc ? &*mel_enc : nullptr, end - start);
    const Var logits = model.decode(tape, mc.conditioning == Conditioning::none ? nullptr : &mem, db.inputs, {});
    std::size_t valid = 0;
    for (int t : db.targets) valid += t >= 0;
    total += ops::cross_entropy(logits, db.targets).value()[0] * static_cast<double>(valid);
    count += valid;
  }
  return total / static_cast<double>(count);
}

}  // namespace mtae
