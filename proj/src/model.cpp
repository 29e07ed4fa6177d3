#include "mtae/model.hpp"

#include <algorithm>
#include <cmath>

#include "mtae/error.hpp"
#include "mtae/ops.hpp"
#include "mtae/perf_codec.hpp"

namespace mtae {

using attention::RelativeMode;

std::string to_string(Combiner c) {
  switch (c) {
    case Combiner::sum: return "sum";
    case Combiner::concat: return "concat";
    case Combiner::tile: return "tile";
  }
  return "?";
}

std::string to_string(Conditioning c) {
  switch (c) {
    case Conditioning::none: return "none";
    case Conditioning::performance: return "performance";
    case Conditioning::melody_performance: return "melody_performance";
  }
  return "?";
}

std::string to_string(Aggregation a) { return a == Aggregation::mean ? "mean" : "none"; }

Combiner parse_combiner(const std::string& s) {
  if (s == "sum") return Combiner::sum;
  if (s == "concat") return Combiner::concat;
  if (s == "tile") return Combiner::tile;
  throw Error(ErrorCategory::config, "invalid combiner '" + s + "' (expected sum, concat or tile)");
}

Conditioning parse_conditioning(const std::string& s) {
  if (s == "none" || s == "unconditional") return Conditioning::none;
  if (s == "performance") return Conditioning::performance;
  if (s == "melody_performance") return Conditioning::melody_performance;
  throw Error(ErrorCategory::config, "invalid conditioning '" + s + "'");
}

Aggregation parse_aggregation(const std::string& s) {
  if (s == "mean") return Aggregation::mean;
  if (s == "none") return Aggregation::none;
  throw Error(ErrorCategory::config, "invalid aggregation '" + s + "'");
}

void ModelConfig::validate() const {
  auto fail = [](const std::string& m) { throw Error(ErrorCategory::config, m); };
  if (n_layers == 0 || hidden == 0 || filter == 0 || heads == 0 || max_len == 0) fail("model sizes must be positive");
  if (hidden % heads) fail("hidden size must be divisible by the number of heads");
  if (key_size() % heads || key_size() == 0) fail("half the hidden size must be divisible by the number of heads");
  if (dropout < 0.0 || dropout >= 1.0) fail("dropout must lie in [0, 1)");
  if (perf_vocab != static_cast<std::size_t>(perf::kVocabSize)) fail("performance vocabulary must have 391 ids");
  if (melody_vocab != 92) fail("melody vocabulary must have 92 ids");
  if (conditioning == Conditioning::melody_performance && aggregation == Aggregation::none) {
    fail("melody conditioning requires the mean-aggregated performance latent");
  }
}

ModelConfig ModelConfig::reference_maestro() {
  ModelConfig c;
  c.n_layers = 6;
  c.hidden = 384;
  c.filter = 1024;
  c.heads = 8;
  c.max_len = 2048;
  c.max_rel = c.max_len / 2;
  c.dropout = 0.1;
  return c;
}

ModelConfig ModelConfig::reference_youtube() {
  ModelConfig c = reference_maestro();
  c.n_layers = 8;
  c.dropout = 0.15;
  return c;
}

ModelConfig ModelConfig::desk() {
  ModelConfig c;
  c.n_layers = 2;
  c.hidden = 64;
  c.filter = 256;
  c.heads = 4;
  c.max_len = 128;
  c.max_rel = c.max_len / 2;
  c.dropout = 0.1;
  return c;
}

// ---------------------------------------------------------------------------

std::size_t TransformerAutoencoder::add_param(const std::string& name, Shape shape, double bound, std::mt19937_64& rng) {
  Tensor t(std::move(shape));
  std::uniform_real_distribution<double> u(-bound, bound);
  for (auto& v : t.storage()) v = u(rng);
  params_.emplace_back(name, std::move(t));
  return params_.size() - 1;
}

std::size_t TransformerAutoencoder::add_const_param(const std::string& name, Shape shape, double value) {
  params_.emplace_back(name, Tensor(std::move(shape), value));
  return params_.size() - 1;
}

TransformerAutoencoder::AttentionIds TransformerAutoencoder::build_attention(const std::string& prefix, bool relative,
                                                                              RelativeMode mode, std::mt19937_64& rng) {
  const std::size_t d = cfg_.hidden, dk = cfg_.key_size();
  const double b = 1.0 / std::sqrt(static_cast<double>(d));
  AttentionIds ids{};
  ids.wq = add_param(prefix + "/q", {d, dk}, b, rng);
  ids.wk = add_param(prefix + "/k", {d, dk}, b, rng);
  ids.wv = add_param(prefix + "/v", {d, d}, b, rng);
  ids.wo = add_param(prefix + "/out", {d, d}, b, rng);
  if (relative) {
    const double rb = 1.0 / std::sqrt(static_cast<double>(dk / cfg_.heads));
    ids.rel = add_param(prefix + "/relative", {attention::relative_rows(mode, cfg_.max_rel), dk}, rb, rng);
  }
  return ids;
}

TransformerAutoencoder::StackIds TransformerAutoencoder::build_stack(const std::string& prefix, std::size_t vocab,
                                                                     RelativeMode mode, bool cross, std::mt19937_64& rng) {
  const std::size_t d = cfg_.hidden, f = cfg_.filter;
  StackIds s;
  s.present = true;
  s.embedding = add_param(prefix + "/embedding", {vocab, d}, 1.0 / std::sqrt(static_cast<double>(d)), rng);
  for (std::size_t l = 0; l < cfg_.n_layers; ++l) {
    const std::string lp = prefix + "/layer" + std::to_string(l);
    LayerIds L{};
    L.ln1_g = add_const_param(lp + "/self_norm/gain", {d}, 1.0);
    L.ln1_b = add_const_param(lp + "/self_norm/bias", {d}, 0.0);
    L.self = build_attention(lp + "/self_attention", true, mode, rng);
    if (cross) {
      L.ln_x_g = add_const_param(lp + "/memory_norm/gain", {d}, 1.0);
      L.ln_x_b = add_const_param(lp + "/memory_norm/bias", {d}, 0.0);
      L.cross = build_attention(lp + "/memory_attention", false, RelativeMode::none, rng);
    }
    L.ln2_g = add_const_param(lp + "/ffn_norm/gain", {d}, 1.0);
    L.ln2_b = add_const_param(lp + "/ffn_norm/bias", {d}, 0.0);
    L.w1 = add_param(lp + "/ffn/w1", {d, f}, 1.0 / std::sqrt(static_cast<double>(d)), rng);
    L.b1 = add_const_param(lp + "/ffn/b1", {f}, 0.0);
    L.w2 = add_param(lp + "/ffn/w2", {f, d}, 1.0 / std::sqrt(static_cast<double>(f)), rng);
    L.b2 = add_const_param(lp + "/ffn/b2", {d}, 0.0);
    s.layers.push_back(L);
  }
  s.ln_g = add_const_param(prefix + "/final_norm/gain", {d}, 1.0);
  s.ln_b = add_const_param(prefix + "/final_norm/bias", {d}, 0.0);
  return s;
}

TransformerAutoencoder::TransformerAutoencoder(ModelConfig cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  std::mt19937_64 rng(seed);
  const bool conditioned = cfg_.conditioning != Conditioning::none;
  if (conditioned) perf_ = build_stack("performance_encoder", cfg_.perf_vocab, RelativeMode::bidirectional, false, rng);
  if (cfg_.conditioning == Conditioning::melody_performance) {
    melody_ = build_stack("melody_encoder", cfg_.melody_vocab, RelativeMode::bidirectional, false, rng);
    if (cfg_.combiner == Combiner::tile) {
      tile_w_ = add_param("tile_projection", {2 * cfg_.hidden, cfg_.hidden},
                          1.0 / std::sqrt(static_cast<double>(2 * cfg_.hidden)), rng);
    }
  }
  decoder_ = build_stack("decoder", cfg_.perf_vocab, RelativeMode::causal, conditioned, rng);
  // Small output weights so the initial prediction is close to uniform.
  out_w_ = add_param("decoder/logits/w", {cfg_.hidden, cfg_.perf_vocab}, 0.1 / std::sqrt(static_cast<double>(cfg_.hidden)),
                     rng);
  out_b_ = add_const_param("decoder/logits/b", {cfg_.perf_vocab}, 0.0);
}

std::vector<Parameter*> TransformerAutoencoder::parameters() {
  std::vector<Parameter*> out;
  for (auto& p : params_) out.push_back(&p);
  return out;
}

std::vector<const Parameter*> TransformerAutoencoder::parameters() const {
  std::vector<const Parameter*> out;
  for (const auto& p : params_) out.push_back(&p);
  return out;
}

Parameter& TransformerAutoencoder::parameter(const std::string& name) {
  for (auto& p : params_)
    if (p.name == name) return p;
  throw Error(ErrorCategory::state, "no parameter named " + name);
}

const Parameter& TransformerAutoencoder::parameter(const std::string& name) const {
  for (const auto& p : params_)
    if (p.name == name) return p;
  throw Error(ErrorCategory::state, "no parameter named " + name);
}

std::size_t TransformerAutoencoder::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

const TransformerAutoencoder::StackIds& TransformerAutoencoder::stack_ids(Stack s) const {
  const StackIds& ids = s == Stack::performance ? perf_ : s == Stack::melody ? melody_ : decoder_;
  if (!ids.present) throw Error(ErrorCategory::state, "this model configuration has no such encoder");
  return ids;
}

// ---------------------------------------------------------------------------

Var TransformerAutoencoder::attend(Tape& tape, const AttentionIds& ids, const Var& x, const Var& mem,
                                   const attention::Spec& spec) const {
  const Var q = ops::matmul(x, tape.parameter(params_[ids.wq]));
  const Var k = ops::matmul(mem, tape.parameter(params_[ids.wk]));
  const Var v = ops::matmul(mem, tape.parameter(params_[ids.wv]));
  const Var rel = ids.rel ? tape.parameter(params_[*ids.rel]) : Var{};
  const Var ctx = attention::multihead(q, k, v, rel, spec);
  return ops::matmul(ctx, tape.parameter(params_[ids.wo]));
}

Var TransformerAutoencoder::run_stack(Tape& tape, const StackIds& s, const std::vector<TokenSeq>& seqs, std::size_t stride,
                                      const std::vector<std::size_t>& lengths, RelativeMode mode, const Memory* memory,
                                      int pad_id, const ForwardContext& ctx) const {
  std::vector<int> ids;
  ids.reserve(seqs.size() * stride);
  for (const auto& seq : seqs) {
    ids.insert(ids.end(), seq.begin(), seq.end());
    ids.insert(ids.end(), stride - seq.size(), pad_id);
  }
  auto drop = [&](const Var& v) {
    if (!ctx.rng || cfg_.dropout <= 0.0) return v;
    return ops::dropout(v, cfg_.dropout, (*ctx.rng)());
  };
  auto param = [&](std::size_t i) { return tape.parameter(params_[i]); };

  Var x = ops::scale(ops::embed(param(s.embedding), ids), std::sqrt(static_cast<double>(cfg_.hidden)));

  attention::Spec self_spec;
  self_spec.batch = seqs.size();
  self_spec.q_len = stride;
  self_spec.k_len = stride;
  self_spec.heads = cfg_.heads;
  self_spec.key_lengths = lengths;
  self_spec.mode = mode;
  self_spec.max_rel = cfg_.max_rel;

  for (const auto& L : s.layers) {
    Var h = ops::layer_norm(x, param(L.ln1_g), param(L.ln1_b));
    x = ops::add(x, drop(attend(tape, L.self, h, h, self_spec)));
    if (L.cross && memory) {
      attention::Spec mem_spec;
      mem_spec.batch = seqs.size();
      mem_spec.q_len = stride;
      mem_spec.k_len = memory->stride;
      mem_spec.heads = cfg_.heads;
      mem_spec.key_lengths = memory->lengths;
      mem_spec.mode = RelativeMode::none;
      h = ops::layer_norm(x, param(*L.ln_x_g), param(*L.ln_x_b));
      x = ops::add(x, drop(attend(tape, *L.cross, h, memory->rows, mem_spec)));
    }
    h = ops::layer_norm(x, param(L.ln2_g), param(L.ln2_b));
    Var f = ops::relu(ops::add_row(ops::matmul(h, param(L.w1)), param(L.b1)));
    f = ops::add_row(ops::matmul(f, param(L.w2)), param(L.b2));
    x = ops::add(x, drop(f));
  }
  return ops::layer_norm(x, param(s.ln_g), param(s.ln_b));
}

namespace {

std::pair<std::size_t, std::vector<std::size_t>> batch_layout(const std::vector<TokenSeq>& seqs, std::size_t max_len) {
  if (seqs.empty()) throw Error(ErrorCategory::shape, "empty batch");
  std::vector<std::size_t> lengths;
  std::size_t stride = 0;
  for (const auto& s : seqs) {
    if (s.empty()) throw Error(ErrorCategory::range, "empty token sequence");
    if (s.size() > max_len) {
      throw Error(ErrorCategory::range, "length overflow: " + std::to_string(s.size()) + " > max_len " +
                                            std::to_string(max_len));
    }
    lengths.push_back(s.size());
    stride = std::max(stride, s.size());
  }
  return {stride, lengths};
}

}  // namespace

Encoded TransformerAutoencoder::encode(Tape& tape, Stack stack, const std::vector<TokenSeq>& seqs,
                                       const ForwardContext& ctx) const {
  if (stack == Stack::decoder) throw Error(ErrorCategory::state, "encode: the decoder is not an encoder");
  const StackIds& ids = stack_ids(stack);
  auto [stride, lengths] = batch_layout(seqs, cfg_.max_len);
  const int pad = stack == Stack::performance ? perf::kPad : 0;
  Encoded e;
  e.rows = run_stack(tape, ids, seqs, stride, lengths, RelativeMode::bidirectional, nullptr, pad, ctx);
  e.stride = stride;
  e.lengths = std::move(lengths);
  return e;
}

Var TransformerAutoencoder::aggregate(const Encoded& enc) const { return ops::segment_mean(enc.rows, enc.lengths, enc.stride); }

Memory TransformerAutoencoder::combine(Tape& tape, const Encoded& melody, const Var& latents) const {
  const std::size_t batch = melody.lengths.size(), d = cfg_.hidden;
  if (latents.value().rows() != batch || latents.value().cols() != d) {
    throw Error(ErrorCategory::shape, "combine: latents must be [batch, hidden]");
  }
  Memory m;
  switch (cfg_.combiner) {
    case Combiner::sum:
      m.rows = ops::add(melody.rows, ops::repeat_rows(latents, melody.stride));
      m.stride = melody.stride;
      m.lengths = melody.lengths;
      break;
    case Combiner::tile: {
      const Var wide = ops::concat_cols(melody.rows, ops::repeat_rows(latents, melody.stride));
      m.rows = ops::matmul(wide, tape.parameter(params_[*tile_w_]));
      m.stride = melody.stride;
      m.lengths = melody.lengths;
      break;
    }
    case Combiner::concat: {
      const Var stop = ops::scale(ops::embed(tape.parameter(params_[perf_.embedding]), {perf::kStop}),
                                  std::sqrt(static_cast<double>(d)));
      const Var pool = ops::concat_rows({melody.rows, stop, latents});
      const long stop_row = static_cast<long>(batch * melody.stride);
      m.stride = melody.stride + 2;
      std::vector<long> index(batch * m.stride, -1);
      for (std::size_t b = 0; b < batch; ++b) {
        const std::size_t len = melody.lengths[b];
        for (std::size_t i = 0; i < len; ++i) index[b * m.stride + i] = static_cast<long>(b * melody.stride + i);
        index[b * m.stride + len] = stop_row;
        index[b * m.stride + len + 1] = stop_row + 1 + static_cast<long>(b);
        m.lengths.push_back(len + 2);
      }
      m.rows = ops::gather_rows(pool, index);
      break;
    }
  }
  return m;
}

Memory TransformerAutoencoder::memory(Tape& tape, const Encoded* perf, const Encoded* melody, std::size_t batch) const {
  switch (cfg_.conditioning) {
    case Conditioning::none:
      return {};
    case Conditioning::performance: {
      if (!perf) throw Error(ErrorCategory::state, "performance conditioning needs an encoded performance");
      if (cfg_.aggregation == Aggregation::none) return Memory{perf->rows, perf->stride, perf->lengths};
      return Memory{aggregate(*perf), 1, std::vector<std::size_t>(perf->lengths.size(), 1)};
    }
    case Conditioning::melody_performance: {
      if (!melody) throw Error(ErrorCategory::state, "melody conditioning needs an encoded melody");
      const Var latents = perf ? aggregate(*perf) : tape.constant(Tensor({batch, cfg_.hidden}));
      return combine(tape, *melody, latents);
    }
  }
  return {};
}

Var TransformerAutoencoder::decode(Tape& tape, const Memory* memory, const std::vector<TokenSeq>& inputs,
                                   const ForwardContext& ctx) const {
  auto [stride, lengths] = batch_layout(inputs, cfg_.max_len);
  if (cfg_.conditioning != Conditioning::none && (!memory || !memory->rows.valid())) {
    throw Error(ErrorCategory::state, "conditioned decoder requires a memory");
  }
  if (memory && memory->rows.valid() && memory->lengths.size() != inputs.size()) {
    throw Error(ErrorCategory::shape, "memory batch does not match decoder batch");
  }
  const Memory* mem = memory && memory->rows.valid() ? memory : nullptr;
  const Var h = run_stack(tape, decoder_, inputs, stride, lengths, RelativeMode::causal, mem, perf::kPad, ctx);
  return ops::add_row(ops::matmul(h, tape.parameter(params_[out_w_])), tape.parameter(params_[out_b_]));
}

// ---------------------------------------------------------------------------

LatentVector TransformerAutoencoder::encode_performance_latent(const TokenSeq& tokens) const {
  Tape tape(Tape::Mode::inference);
  const Encoded e = encode(tape, Stack::performance, {tokens}, {});
  const Tensor& z = aggregate(e).value();
  return LatentVector{std::vector<double>(z.values().begin(), z.values().end())};
}

Tensor TransformerAutoencoder::encode_melody(const TokenSeq& tokens) const {
  Tape tape(Tape::Mode::inference);
  return encode(tape, Stack::melody, {tokens}, {}).rows.value();
}

Tensor TransformerAutoencoder::encode_performance_sequence(const TokenSeq& tokens) const {
  Tape tape(Tape::Mode::inference);
  return encode(tape, Stack::performance, {tokens}, {}).rows.value();
}

Tensor TransformerAutoencoder::combine(const Tensor& melody_enc, const LatentVector& latent) const {
  if (melody_enc.cols() != cfg_.hidden || latent.values.size() != cfg_.hidden) {
    throw Error(ErrorCategory::shape, "combine: melody encoding and latent must have the hidden width");
  }
  if (cfg_.conditioning != Conditioning::melody_performance) {
    throw Error(ErrorCategory::state, "combine requires a melody-conditioned model");
  }
  Tape tape(Tape::Mode::inference);
  Encoded mel{tape.constant(melody_enc), melody_enc.rows(), {melody_enc.rows()}};
  const Var z = tape.constant(Tensor({1, cfg_.hidden}, latent.values));
  return combine(tape, mel, z).rows.value();
}

Tensor TransformerAutoencoder::latent_memory(const LatentVector& latent) const {
  if (latent.values.size() != cfg_.hidden) throw Error(ErrorCategory::shape, "latent width differs from hidden size");
  return Tensor({1, cfg_.hidden}, latent.values);
}

Memory TransformerAutoencoder::memory_from_tensor(Tape& tape, const Tensor* memory) const {
  if (!memory) return {};
  if (memory->rank() != 2 || memory->cols() != cfg_.hidden || memory->rows() == 0) {
    throw Error(ErrorCategory::shape, "memory must be [rows, hidden]");
  }
  return Memory{tape.constant(*memory), memory->rows(), {memory->rows()}};
}

Tensor TransformerAutoencoder::decode_logits(const Tensor* memory, const TokenSeq& prefix) const {
  Tape tape(Tape::Mode::inference);
  TokenSeq input{kStartToken};
  input.insert(input.end(), prefix.begin(), prefix.end());
  const Memory mem = memory_from_tensor(tape, memory);
  return decode(tape, memory ? &mem : nullptr, {input}, {}).value();
}

double TransformerAutoencoder::nll(const TokenSeq& tokens, const Tensor* memory) const {
  if (tokens.empty()) return 0.0;
  Tape tape(Tape::Mode::inference);
  TokenSeq input{kStartToken};
  input.insert(input.end(), tokens.begin(), tokens.end() - 1);
  const Memory mem = memory_from_tensor(tape, memory);
  const Var logits = decode(tape, memory ? &mem : nullptr, {input}, {});
  return ops::cross_entropy(logits, tokens).value()[0];
}

}  // namespace mtae
