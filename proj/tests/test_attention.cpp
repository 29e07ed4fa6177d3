#include <doctest.h>

#include <random>

#include "mtae/attention.hpp"
#include "mtae/ops.hpp"
#include "oracles.hpp"

using namespace mtae;
using namespace mtae::attention;

namespace {

Tensor random_tensor(Shape shape, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Tensor t(shape);
  for (auto& v : t.storage()) v = u(rng);
  return t;
}

int mode_code(RelativeMode m) { return m == RelativeMode::none ? 0 : m == RelativeMode::causal ? 1 : 2; }

double max_abs_diff(const oracle::Matrix& a, const Tensor& b) {
  double d = 0.0;
  for (std::size_t r = 0; r < a.size(); ++r)
    for (std::size_t c = 0; c < a[r].size(); ++c) d = std::max(d, std::abs(a[r][c] - b.at(r, c)));
  return d;
}

}  // namespace

TEST_CASE("relative table geometry") {
  CHECK(relative_rows(RelativeMode::causal, 4) == 5);
  CHECK(relative_rows(RelativeMode::bidirectional, 4) == 9);
  CHECK(relative_index(0, RelativeMode::causal, 4) == 4);
  CHECK(relative_index(-9, RelativeMode::causal, 4) == 0);
  CHECK(relative_index(3, RelativeMode::causal, 4) == 4);
  CHECK(relative_index(9, RelativeMode::bidirectional, 4) == 8);
}

TEST_CASE("skew matches direct indexing") {
  std::mt19937_64 rng(1);
  for (std::size_t L : {1u, 2u, 5u, 9u}) {
    const Tensor causal = random_tensor({L, L}, rng);
    const Tensor sc = skew(causal, RelativeMode::causal);
    for (std::size_t i = 0; i < L; ++i)
      for (std::size_t j = 0; j <= i; ++j) CHECK(sc.at(i, j) == causal.at(i, j - i + L - 1));
    const Tensor bi = random_tensor({L, 2 * L - 1}, rng);
    const Tensor sb = skew(bi, RelativeMode::bidirectional);
    for (std::size_t i = 0; i < L; ++i)
      for (std::size_t j = 0; j < L; ++j) CHECK(sb.at(i, j) == bi.at(i, j + L - 1 - i));
  }
}

TEST_CASE("skewed relative attention equals the naive reference") {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<std::size_t> len(1, 32), dim(1, 16), rel(1, 40);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t L = len(rng), dk = dim(rng), dv = dim(rng), R = rel(rng);
    const auto mode = trial % 2 ? RelativeMode::causal : RelativeMode::bidirectional;
    const Tensor q = random_tensor({L, dk}, rng), k = random_tensor({L, dk}, rng), v = random_tensor({L, dv}, rng);
    const Tensor table = random_tensor({relative_rows(mode, R), dk}, rng);
    const std::size_t key_len = trial % 5 == 0 ? std::max<std::size_t>(1, L / 2) : L;
    const Tensor got = relative_attention(q, k, v, table, mode, R, key_len);
    const auto want = oracle::naive_relative_attention(oracle::to_matrix(q), oracle::to_matrix(k), oracle::to_matrix(v),
                                                       oracle::to_matrix(table), mode_code(mode),
                                                       static_cast<long>(R), key_len);
    worst = std::max(worst, max_abs_diff(want, got));
  }
  CHECK(worst < 1e-10);
}

TEST_CASE("multi-head batched attention equals per-head naive reference") {
  std::mt19937_64 rng(3);
  for (auto mode : {RelativeMode::none, RelativeMode::causal, RelativeMode::bidirectional}) {
    const std::size_t B = 2, L = 7, H = 3, dk = 4, dv = 2, R = 3;
    Spec spec{B, L, L, H, {7, 4}, mode, R};
    Tape tape(Tape::Mode::inference);
    const Tensor q = random_tensor({B * L, H * dk}, rng), k = random_tensor({B * L, H * dk}, rng),
                 v = random_tensor({B * L, H * dv}, rng);
    const Tensor table = mode == RelativeMode::none ? Tensor() : random_tensor({relative_rows(mode, R), H * dk}, rng);
    const Tensor out = multihead(tape.constant(q), tape.constant(k), tape.constant(v),
                                 mode == RelativeMode::none ? Var() : tape.constant(table), spec)
                           .value();
    for (std::size_t b = 0; b < B; ++b) {
      for (std::size_t h = 0; h < H; ++h) {
        auto slice = [&](const Tensor& t, std::size_t width, std::size_t rows, std::size_t row0) {
          oracle::Matrix m(rows, std::vector<double>(width));
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < width; ++c) m[r][c] = t.at(row0 + r, h * width + c);
          return m;
        };
        const auto want = oracle::naive_relative_attention(
            slice(q, dk, L, b * L), slice(k, dk, L, b * L), slice(v, dv, L, b * L),
            mode == RelativeMode::none ? oracle::Matrix{} : slice(table, dk, table.rows(), 0), mode_code(mode),
            static_cast<long>(R), spec.key_lengths[b]);
        for (std::size_t i = 0; i < L; ++i)
          for (std::size_t c = 0; c < dv; ++c) CHECK(std::abs(want[i][c] - out.at(b * L + i, h * dv + c)) < 1e-10);
      }
    }
  }
}

TEST_CASE("multi-head attention gradients") {
  std::mt19937_64 rng(4);
  for (auto mode : {RelativeMode::none, RelativeMode::causal, RelativeMode::bidirectional}) {
    const std::size_t B = 2, L = 5, H = 2, dk = 3, dv = 2, R = 2;  // R < L exercises clipping
    Spec spec{B, L, L, H, {5, 3}, mode, R};
    std::vector<Parameter> ps{Parameter("q", random_tensor({B * L, H * dk}, rng)),
                              Parameter("k", random_tensor({B * L, H * dk}, rng)),
                              Parameter("v", random_tensor({B * L, H * dv}, rng))};
    if (mode != RelativeMode::none) ps.emplace_back("w", random_tensor({relative_rows(mode, R), H * dk}, rng));
    const Tensor weights = random_tensor({B * L, H * dv}, rng);
    auto loss = [&](Tape& tape) {
      const Var w = mode == RelativeMode::none ? Var() : tape.parameter(ps[3]);
      const Var out = multihead(tape.parameter(ps[0]), tape.parameter(ps[1]), tape.parameter(ps[2]), w, spec);
      return ops::sum(ops::mul(out, tape.constant(weights)));
    };
    for (auto& p : ps) p.zero_grad();
    {
      Tape tape;
      tape.backward(loss(tape));
    }
    std::vector<Parameter*> ptrs;
    std::vector<std::vector<double>> analytic;
    for (auto& p : ps) {
      ptrs.push_back(&p);
      analytic.push_back(p.grad.storage());
    }
    const auto r = oracle::finite_difference(ptrs, [&] {
      Tape tape(Tape::Mode::inference);
      return loss(tape).value()[0];
    }, analytic);
    CHECK(r.max_rel_error < 1e-4);
  }
}

TEST_CASE("causal attention ignores future keys") {
  std::mt19937_64 rng(5);
  const std::size_t L = 6, d = 4;
  Tensor q = random_tensor({L, d}, rng), k = random_tensor({L, d}, rng), v = random_tensor({L, d}, rng);
  const Tensor table = random_tensor({relative_rows(RelativeMode::causal, 8), d}, rng);
  const Tensor a = relative_attention(q, k, v, table, RelativeMode::causal, 8, L);
  k.at(5, 0) += 3.0;
  v.at(5, 1) -= 2.0;
  const Tensor b = relative_attention(q, k, v, table, RelativeMode::causal, 8, L);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t c = 0; c < d; ++c) CHECK(a.at(i, c) == b.at(i, c));
}
