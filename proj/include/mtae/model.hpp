#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "mtae/attention.hpp"
#include "mtae/tape.hpp"

namespace mtae {

enum class Combiner { sum, concat, tile };
enum class Conditioning { none, performance, melody_performance };
/// `none` hands the whole encoder sequence to the decoder (no bottleneck).
enum class Aggregation { mean, none };

std::string to_string(Combiner c);
std::string to_string(Conditioning c);
std::string to_string(Aggregation a);
Combiner parse_combiner(const std::string& s);
Conditioning parse_conditioning(const std::string& s);
Aggregation parse_aggregation(const std::string& s);

struct ModelConfig {
  std::size_t n_layers = 2;
  std::size_t hidden = 64;
  std::size_t filter = 256;
  std::size_t heads = 4;
  std::size_t max_len = 128;
  std::size_t max_rel = 64;
  double dropout = 0.1;
  std::size_t perf_vocab = 391;
  std::size_t melody_vocab = 92;
  Combiner combiner = Combiner::sum;
  Conditioning conditioning = Conditioning::performance;
  Aggregation aggregation = Aggregation::mean;

  /// Total query/key width: half the hidden size.
  std::size_t key_size() const { return hidden / 2; }

  /// Throws a config error when the shape rules are violated.
  void validate() const;

  /// 6 layers, 384 hidden, 1024 filter, 8 heads, L = 2048, dropout 0.1.
  static ModelConfig reference_maestro();
  /// As above with 8 layers and dropout 0.15.
  static ModelConfig reference_youtube();
  /// 2 layers, 64 hidden, 4 heads, L = 128.
  static ModelConfig desk();

  bool operator==(const ModelConfig&) const = default;
};

/// Mean-aggregated encoder output.
struct LatentVector {
  std::vector<double> values;
};

using TokenSeq = std::vector<int>;

/// Decoder memory in the batched layout: `stride` rows per batch item, the
/// first lengths[b] of which are valid.
struct Memory {
  Var rows;
  std::size_t stride = 0;
  std::vector<std::size_t> lengths;
};

/// Encoder output for a batch, same layout as Memory.
struct Encoded {
  Var rows;
  std::size_t stride = 0;
  std::vector<std::size_t> lengths;
};

/// Dropout source; `rng == nullptr` disables dropout.
struct ForwardContext {
  std::mt19937_64* rng = nullptr;
};

/// Relative-attention encoder/decoder with a mean-aggregation style
/// bottleneck and melody conditioning.
class TransformerAutoencoder {
 public:
  enum class Stack { performance, melody, decoder };

  TransformerAutoencoder(ModelConfig cfg, std::uint64_t seed);

  const ModelConfig& config() const noexcept { return cfg_; }

  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;
  Parameter& parameter(const std::string& name);
  const Parameter& parameter(const std::string& name) const;
  std::size_t parameter_count() const;

  // ---- batched, tape-level building blocks ----

  Encoded encode(Tape& tape, Stack stack, const std::vector<TokenSeq>& seqs, const ForwardContext& ctx) const;
  /// [B, d] mean over the valid rows of each batch item.
  Var aggregate(const Encoded& enc) const;
  /// Decoder memory for the configured conditioning. `perf` must be given for
  /// performance conditioning; `melody` for melody conditioning. A missing
  /// `perf` under melody conditioning uses a zero latent (melody-only).
  Memory memory(Tape& tape, const Encoded* perf, const Encoded* melody, std::size_t batch) const;
  /// Combines melody encodings with per-item latents [B, d].
  Memory combine(Tape& tape, const Encoded& melody, const Var& latents) const;
  /// Logits [B*L, V] for decoder inputs (start token already prepended).
  Var decode(Tape& tape, const Memory* memory, const std::vector<TokenSeq>& inputs, const ForwardContext& ctx) const;

  // ---- single-sequence inference API ----

  LatentVector encode_performance_latent(const TokenSeq& tokens) const;
  /// Length-preserving melody encoding [L_mel, d].
  Tensor encode_melody(const TokenSeq& tokens) const;
  /// Full performance-encoder output [L, d] (memory of the no-bottleneck model).
  Tensor encode_performance_sequence(const TokenSeq& tokens) const;
  /// Memory from a melody encoding and a latent using the configured combiner.
  Tensor combine(const Tensor& melody_enc, const LatentVector& latent) const;
  /// Memory of a performance-only model: the single latent row [1, d].
  Tensor latent_memory(const LatentVector& latent) const;
  /// Logits [prefix.size() + 1, V]; row i predicts token i given the start
  /// token and prefix[0..i). `memory` may be null for unconditional models.
  Tensor decode_logits(const Tensor* memory, const TokenSeq& prefix) const;
  /// Mean -log p(x_i | x_<i, memory) in nats per token.
  double nll(const TokenSeq& tokens, const Tensor* memory) const;

  static constexpr int kStartToken = 389;  // EOS reused as start of sequence

 private:
  struct AttentionIds {
    std::size_t wq, wk, wv, wo;
    std::optional<std::size_t> rel;
  };
  struct LayerIds {
    std::size_t ln1_g, ln1_b;
    AttentionIds self;
    std::optional<std::size_t> ln_x_g, ln_x_b;
    std::optional<AttentionIds> cross;
    std::size_t ln2_g, ln2_b;
    std::size_t w1, b1, w2, b2;
  };
  struct StackIds {
    bool present = false;
    std::size_t embedding;
    std::vector<LayerIds> layers;
    std::size_t ln_g, ln_b;
  };

  std::size_t add_param(const std::string& name, Shape shape, double bound, std::mt19937_64& rng);
  std::size_t add_const_param(const std::string& name, Shape shape, double value);
  AttentionIds build_attention(const std::string& prefix, bool relative, attention::RelativeMode mode, std::mt19937_64& rng);
  StackIds build_stack(const std::string& prefix, std::size_t vocab, attention::RelativeMode mode, bool cross,
                       std::mt19937_64& rng);

  Var attend(Tape& tape, const AttentionIds& ids, const Var& x, const Var& mem, const attention::Spec& spec) const;
  Var run_stack(Tape& tape, const StackIds& s, const std::vector<TokenSeq>& seqs, std::size_t stride,
                const std::vector<std::size_t>& lengths, attention::RelativeMode mode, const Memory* memory,
                int pad_id, const ForwardContext& ctx) const;
  const StackIds& stack_ids(Stack s) const;
  Memory memory_from_tensor(Tape& tape, const Tensor* memory) const;

  ModelConfig cfg_;
  std::vector<Parameter> params_;
  StackIds perf_, melody_, decoder_;
  std::size_t out_w_ = 0, out_b_ = 0;
  std::optional<std::size_t> tile_w_;
};

}  // namespace mtae
