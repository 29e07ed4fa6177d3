#include <doctest.h>

#include <cmath>

#include "mtae/error.hpp"
#include "mtae/optim.hpp"

using namespace mtae;

TEST_CASE("rsqrt schedule") {
  const RsqrtSchedule s{2.0, 100.0, 0.5};
  CHECK(s(1) == doctest::Approx(2.0 * 0.5 * 1.0 / 1000.0));
  CHECK(s(50) == doctest::Approx(2.0 * 0.5 * 50.0 / 1000.0));
  CHECK(s(100) == doctest::Approx(2.0 * 0.5 * 0.1));
  CHECK(s(400) == doctest::Approx(2.0 * 0.5 * 0.05));
  for (int k = 1; k < 100; ++k) CHECK(s(k) < s(k + 1));
  for (int k = 100; k < 300; ++k) CHECK(s(k) > s(k + 1));
  CHECK_THROWS_AS(s(0), Error);
}

TEST_CASE("adam matches a hand computation") {
  Parameter p("w", Tensor::vector({1.0, -2.0}));
  Adam adam({&p});
  const RsqrtSchedule lr{0.1, 1.0, 1.0};  // lr(step) = 0.1 / sqrt(step)
  p.grad = Tensor::vector({0.5, -4.0});
  adam.step(lr);
  // First step: m_hat = g, v_hat = g^2, update = lr * sign(g).
  CHECK(p.value[0] == doctest::Approx(1.0 - 0.1 * 0.5 / (0.5 + 1e-9)));
  CHECK(p.value[1] == doctest::Approx(-2.0 + 0.1));
  p.grad = Tensor::vector({1.0, 0.0});
  adam.step(lr);
  const double m = 0.9 * 0.1 * 0.5 + 0.1 * 1.0, v = 0.98 * 0.02 * 0.25 + 0.02 * 1.0;
  const double mh = m / (1 - 0.81), vh = v / (1 - 0.98 * 0.98);
  CHECK(p.value[0] == doctest::Approx(0.9 - 0.1 / std::sqrt(2.0) * mh / (std::sqrt(vh) + 1e-9)));
  CHECK(adam.steps_taken() == 2);
  CHECK(adam.first_moments()[0][0] == doctest::Approx(m));
  CHECK(adam.second_moments()[0][0] == doctest::Approx(v));
}

TEST_CASE("gradient clipping") {
  Parameter a("a", Tensor::vector({0, 0})), b("b", Tensor::vector({0}));
  a.grad = Tensor::vector({3.0, 0.0});
  b.grad = Tensor::vector({4.0});
  CHECK(clip_grad_norm({&a, &b}, 10.0) == doctest::Approx(5.0));
  CHECK(a.grad[0] == 3.0);
  CHECK(clip_grad_norm({&a, &b}, 1.0) == doctest::Approx(5.0));
  CHECK(a.grad[0] == doctest::Approx(0.6));
  CHECK(b.grad[0] == doctest::Approx(0.8));
  zero_grads({&a, &b});
  CHECK(a.grad[0] == 0.0);
}
