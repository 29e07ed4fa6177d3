#include <doctest.h>

#include <cmath>
#include <random>

#include "mtae/error.hpp"
#include "mtae/model.hpp"
#include "mtae/ops.hpp"
#include "mtae/perf_codec.hpp"
#include "mtae/sample.hpp"
#include "oracles.hpp"

using namespace mtae;

namespace {

ModelConfig tiny(Conditioning c = Conditioning::performance, Combiner comb = Combiner::sum) {
  ModelConfig m = ModelConfig::desk();
  m.hidden = 8;
  m.filter = 12;
  m.heads = 2;
  m.max_len = 16;
  m.max_rel = 4;
  m.dropout = 0.0;
  m.conditioning = c;
  m.combiner = comb;
  return m;
}

TokenSeq random_tokens(std::size_t n, int vocab, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> u(0, vocab - 1);
  TokenSeq t(n);
  for (auto& x : t) x = u(rng);
  return t;
}

}  // namespace

TEST_CASE("config validation") {
  CHECK_NOTHROW(ModelConfig::desk().validate());
  CHECK_NOTHROW(ModelConfig::reference_maestro().validate());
  CHECK(ModelConfig::reference_maestro().hidden == 384);
  CHECK(ModelConfig::reference_youtube().n_layers == 8);
  CHECK(ModelConfig::reference_youtube().dropout == 0.15);
  ModelConfig c = tiny();
  c.heads = 3;
  CHECK_THROWS_AS(c.validate(), Error);
  c = tiny();
  c.dropout = 1.0;
  CHECK_THROWS_AS(c.validate(), Error);
  c = tiny(Conditioning::melody_performance);
  c.aggregation = Aggregation::none;
  CHECK_THROWS_AS(TransformerAutoencoder(c, 1), Error);
  CHECK_THROWS_AS(parse_combiner("max"), Error);
  CHECK(parse_conditioning(to_string(Conditioning::melody_performance)) == Conditioning::melody_performance);
}

TEST_CASE("shapes and determinism") {
  std::mt19937_64 rng(1);
  const TransformerAutoencoder m(tiny(), 7);
  const TransformerAutoencoder same(tiny(), 7);
  for (std::size_t i = 0; i < m.parameters().size(); ++i)
    CHECK(m.parameters()[i]->value == same.parameters()[i]->value);
  const TokenSeq perf = random_tokens(10, 388, rng);
  const auto z = m.encode_performance_latent(perf);
  CHECK(z.values.size() == 8);
  CHECK(m.encode_performance_sequence(perf).shape() == Shape{10, 8});
  const Tensor mem = m.latent_memory(z);
  const Tensor logits = m.decode_logits(&mem, {1, 2, 3});
  CHECK(logits.shape() == Shape{4, 391});
  CHECK(m.nll(perf, &mem) > 0.0);
  CHECK_THROWS_AS(m.encode_performance_latent(random_tokens(17, 388, rng)), Error);
  CHECK_THROWS_AS(m.encode_performance_latent({}), Error);
  CHECK_THROWS_AS(m.decode_logits(nullptr, {1}), Error);
  CHECK_THROWS_AS(m.encode_melody({1, 2}), Error);
}

TEST_CASE("the decoder is causal") {
  std::mt19937_64 rng(2);
  for (auto cond : {Conditioning::none, Conditioning::performance}) {
    const TransformerAutoencoder m(tiny(cond), 3);
    const TokenSeq perf = random_tokens(6, 388, rng);
    const auto mem = conditioning_memory(m, &perf, nullptr);
    const Tensor* mp = mem ? &*mem : nullptr;
    TokenSeq prefix = random_tokens(9, 388, rng);
    const Tensor a = m.decode_logits(mp, prefix);
    prefix[6] = (prefix[6] + 17) % 388;
    prefix[8] = (prefix[8] + 5) % 388;
    const Tensor b = m.decode_logits(mp, prefix);
    for (std::size_t i = 0; i <= 6; ++i)
      for (std::size_t v = 0; v < 391; ++v) REQUIRE(a.at(i, v) == doctest::Approx(b.at(i, v)).epsilon(1e-12));
    double diff = 0.0;
    for (std::size_t v = 0; v < 391; ++v) diff += std::abs(a.at(7, v) - b.at(7, v));
    CHECK(diff > 0.0);
  }
}

TEST_CASE("padding does not change results") {
  std::mt19937_64 rng(3);
  const TransformerAutoencoder m(tiny(), 4);
  const TokenSeq a = random_tokens(5, 388, rng), b = random_tokens(11, 388, rng);
  const auto za = m.encode_performance_latent(a);
  Tape tape(Tape::Mode::inference);
  const Encoded e = m.encode(tape, TransformerAutoencoder::Stack::performance, {a, b}, {});
  const Tensor z = m.aggregate(e).value();
  for (std::size_t c = 0; c < 8; ++c) CHECK(z.at(0, c) == doctest::Approx(za.values[c]).epsilon(1e-12));

  const Memory mem = m.memory(tape, &e, nullptr, 2);
  const Tensor logits = m.decode(tape, &mem, {{389, 1, 2}, {389, 4, 5, 6, 7, 8}}, {}).value();
  const Tensor ma = m.latent_memory(za);
  const Tensor single = m.decode_logits(&ma, {1, 2});
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t v = 0; v < 391; v += 13) CHECK(logits.at(i, v) == doctest::Approx(single.at(i, v)).epsilon(1e-10));
}

TEST_CASE("combiners") {
  std::mt19937_64 rng(4);
  for (auto comb : {Combiner::sum, Combiner::concat, Combiner::tile}) {
    CAPTURE(to_string(comb));
    const TransformerAutoencoder m(tiny(Conditioning::melody_performance, comb), 5);
    const TokenSeq mel = random_tokens(7, 92, rng);
    const Tensor enc = m.encode_melody(mel);
    CHECK(enc.shape() == Shape{7, 8});
    const auto z = m.encode_performance_latent(random_tokens(9, 388, rng));
    const Tensor mem = m.combine(enc, z);
    if (comb == Combiner::concat) {
      CHECK(mem.shape() == Shape{9, 8});
      for (std::size_t c = 0; c < 8; ++c) {
        CHECK(mem.at(0, c) == enc.at(0, c));
        CHECK(mem.at(8, c) == z.values[c]);
      }
    } else {
      CHECK(mem.shape() == Shape{7, 8});
      if (comb == Combiner::sum)
        for (std::size_t c = 0; c < 8; ++c) CHECK(mem.at(3, c) == doctest::Approx(enc.at(3, c) + z.values[c]));
    }
    CHECK(m.decode_logits(&mem, {5, 6}).shape() == Shape{3, 391});
  }
}

TEST_CASE("no-bottleneck model keeps the whole encoder sequence") {
  ModelConfig c = tiny();
  c.aggregation = Aggregation::none;
  const TransformerAutoencoder m(c, 6);
  Tape tape(Tape::Mode::inference);
  const Encoded e = m.encode(tape, TransformerAutoencoder::Stack::performance, {{1, 2, 3}, {4, 5}}, {});
  const Memory mem = m.memory(tape, &e, nullptr, 2);
  CHECK(mem.stride == 3);
  CHECK(mem.lengths == std::vector<std::size_t>{3, 2});
}

TEST_CASE("end-to-end gradients of a two-layer model") {
  std::mt19937_64 rng(7);
  for (auto comb : {Combiner::sum, Combiner::concat, Combiner::tile}) {
    CAPTURE(to_string(comb));
    ModelConfig c = tiny(Conditioning::melody_performance, comb);
    c.hidden = 4;
    c.filter = 6;
    c.max_rel = 2;
    TransformerAutoencoder m(c, 8);
    const std::vector<TokenSeq> perf{random_tokens(4, 388, rng), random_tokens(3, 388, rng)};
    const std::vector<TokenSeq> mel{random_tokens(3, 92, rng), random_tokens(2, 92, rng)};
    const std::vector<TokenSeq> dec{{389, 4, 9, 1}, {389, 7}};
    const std::vector<int> targets{4, 9, 1, 2, 7, 3, -1, -1};
    auto loss = [&](Tape& tape) {
      const Encoded ep = m.encode(tape, TransformerAutoencoder::Stack::performance, perf, {});
      const Encoded em = m.encode(tape, TransformerAutoencoder::Stack::melody, mel, {});
      const Memory mem = m.memory(tape, &ep, &em, 2);
      return ops::cross_entropy(m.decode(tape, &mem, dec, {}), targets);
    };
    auto params = m.parameters();
    for (auto* p : params) p->zero_grad();
    {
      Tape tape;
      tape.backward(loss(tape));
    }
    std::vector<std::vector<double>> analytic;
    for (auto* p : params) analytic.push_back(p->grad.storage());
    const auto r = oracle::finite_difference(params, [&] {
      Tape tape(Tape::Mode::inference);
      return loss(tape).value()[0];
    }, analytic, 1e-5, 6);
    CHECK(r.checked > 100);
    CHECK(r.max_rel_error < 1e-4);
  }
}
