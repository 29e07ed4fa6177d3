#pragma once

// Reference implementations used only by the tests. Each one is written from
// the definition, independently of the library code it checks.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <vector>

#include "mtae/melody.hpp"
#include "mtae/tape.hpp"

namespace oracle {

using Matrix = std::vector<std::vector<double>>;

inline Matrix to_matrix(const mtae::Tensor& t) {
  Matrix m(t.rows(), std::vector<double>(t.cols()));
  for (std::size_t r = 0; r < t.rows(); ++r)
    for (std::size_t c = 0; c < t.cols(); ++c) m[r][c] = t.at(r, c);
  return m;
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// O(L^2) relative attention straight from the definition:
//   logit(i, j) = (q_i . k_j + q_i . w[clip(j - i)]) / sqrt(dk)
// with w indexed from distance -R. Causal mode covers -R..0 and masks j > i.
// `mode`: 0 none, 1 causal, 2 bidirectional.
inline Matrix naive_relative_attention(const Matrix& q, const Matrix& k, const Matrix& v, const Matrix& w, int mode,
                                       long max_rel, std::size_t key_length) {
  const std::size_t lq = q.size(), lk = k.size(), dv = v[0].size();
  const double scale = 1.0 / std::sqrt(static_cast<double>(q[0].size()));
  Matrix out(lq, std::vector<double>(dv, 0.0));
  for (std::size_t i = 0; i < lq; ++i) {
    std::vector<double> logit;
    std::vector<std::size_t> keys;
    for (std::size_t j = 0; j < lk && j < key_length; ++j) {
      if (mode == 1 && j > i) continue;
      double l = dot(q[i], k[j]);
      if (mode != 0) {
        long d = static_cast<long>(j) - static_cast<long>(i);
        const long hi = mode == 1 ? 0 : max_rel;
        d = std::max(-max_rel, std::min(hi, d));
        l += dot(q[i], w[static_cast<std::size_t>(d + max_rel)]);
      }
      logit.push_back(l * scale);
      keys.push_back(j);
    }
    if (keys.empty()) continue;
    const double mx = *std::max_element(logit.begin(), logit.end());
    double z = 0.0;
    for (double& l : logit) z += (l = std::exp(l - mx));
    for (std::size_t n = 0; n < keys.size(); ++n)
      for (std::size_t c = 0; c < dv; ++c) out[i][c] += logit[n] / z * v[keys[n]][c];
  }
  return out;
}

// Central finite differences. `loss` recomputes the scalar objective from
// the current parameter values; `params` are perturbed in place.
struct GradCheck {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
};

// |a - n| / max(|a|, |n|, floor). The floor keeps entries that are
// zero analytically from dividing rounding noise by nothing.
inline double relative_error(double a, double n, double floor = 1e-5) {
  return std::abs(a - n) / std::max({std::abs(a), std::abs(n), floor});
}

inline GradCheck finite_difference(const std::vector<mtae::Parameter*>& params,
                                   const std::function<double()>& loss, const std::vector<std::vector<double>>& analytic,
                                   double h = 1e-5, std::size_t max_entries_per_param = 0) {
  GradCheck r;
  for (std::size_t p = 0; p < params.size(); ++p) {
    auto& w = params[p]->value.storage();
    std::size_t stride = 1;
    if (max_entries_per_param && w.size() > max_entries_per_param) stride = w.size() / max_entries_per_param;
    for (std::size_t i = 0; i < w.size(); i += stride) {
      const double saved = w[i];
      w[i] = saved + h;
      const double up = loss();
      w[i] = saved - h;
      const double down = loss();
      w[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      r.max_rel_error = std::max(r.max_rel_error, relative_error(analytic[p][i], numeric));
      ++r.checked;
    }
  }
  return r;
}

// Exhaustive search over every path of the candidate lattice. Scores use
// the model's initial, transition and emission probabilities directly.
struct PathScore {
  std::vector<int> states;
  double log_prob = -std::numeric_limits<double>::infinity();
  bool unique = true;  // no other path within 1e-9 of the best log probability
};

inline PathScore exhaustive_viterbi(const mtae::melody::MelodyHmm& hmm,
                                    const std::vector<mtae::melody::MelodyHmm::Frame>& frames) {
  PathScore best;
  std::vector<std::size_t> choice(frames.size(), 0);
  while (true) {
    double lp = 0.0;
    std::vector<int> states;
    for (std::size_t t = 0; t < frames.size(); ++t) {
      const int s = frames[t].states[choice[t]];
      lp += std::log(frames[t].emission[choice[t]]);
      lp += t == 0 ? std::log(hmm.initial(s)) : std::log(hmm.transition(states.back(), s));
      states.push_back(s);
    }
    if (lp > best.log_prob + 1e-9) {
      best = {states, lp, true};
    } else if (lp >= best.log_prob - 1e-9) {
      best.unique = false;
      if (lp > best.log_prob) best.log_prob = lp, best.states = states;
    }
    std::size_t t = 0;
    while (t < frames.size() && ++choice[t] == frames[t].states.size()) choice[t++] = 0;
    if (t == frames.size()) break;
  }
  return best;
}

// Highest sounding pitch per 100 ms frame (-1 for silence), from the notes
// directly: a note sounds in frame f when round(onset*10) <= f < round(offset*10).
inline std::vector<int> skyline_frames(const mtae::NoteSequence& seq) {
  long frames = 0;
  for (const auto& n : seq.notes()) frames = std::max(frames, std::lround(n.offset * 10.0));
  std::vector<int> top(static_cast<std::size_t>(frames), -1);
  for (const auto& n : seq.notes()) {
    for (long f = std::lround(n.onset * 10.0); f < std::lround(n.offset * 10.0); ++f) {
      top[static_cast<std::size_t>(f)] = std::max(top[static_cast<std::size_t>(f)], n.pitch);
    }
  }
  return top;
}

inline double gauss_pdf(double x, double mu, double sigma) {
  const double z = (x - mu) / sigma;
  return std::exp(-0.5 * z * z) / (sigma * std::sqrt(2.0 * 3.14159265358979323846));
}

// Composite trapezoid rule for f over [a, b] with step at most h.
inline double trapezoid(const std::function<double(double)>& f, double a, double b, double h) {
  const auto n = static_cast<std::size_t>(std::ceil((b - a) / h));
  const double step = (b - a) / static_cast<double>(n);
  double s = 0.5 * (f(a) + f(b));
  for (std::size_t i = 1; i < n; ++i) s += f(a + step * static_cast<double>(i));
  return s * step;
}

// Integration range covering both densities to 10 standard deviations.
inline double overlap_numeric(double mu1, double s1, double mu2, double s2, double rel_step = 1e-3) {
  const double lo = std::min(mu1 - 10 * s1, mu2 - 10 * s2), hi = std::max(mu1 + 10 * s1, mu2 + 10 * s2);
  return trapezoid([&](double x) { return std::min(gauss_pdf(x, mu1, s1), gauss_pdf(x, mu2, s2)); }, lo, hi,
                   rel_step * std::min(s1, s2));
}

inline double kl_numeric(double mu1, double s1, double mu2, double s2, double rel_step = 1e-3) {
  const double lo = std::min(mu1, mu2) - 12 * std::max(s1, s2), hi = std::max(mu1, mu2) + 12 * std::max(s1, s2);
  return trapezoid(
      [&](double x) {
        const double p = gauss_pdf(x, mu1, s1);
        if (p <= 0.0) return 0.0;
        // log p - log q without forming q, which underflows far out.
        const double zp = (x - mu1) / s1, zq = (x - mu2) / s2;
        return p * (std::log(s2 / s1) - 0.5 * zp * zp + 0.5 * zq * zq);
      },
      lo, hi, rel_step * std::min(s1, s2));
}

// Pearson chi-square statistic against a uniform expectation.
inline double chi_square_uniform(const std::vector<std::size_t>& counts) {
  std::size_t total = 0;
  for (auto c : counts) total += c;
  const double expected = static_cast<double>(total) / static_cast<double>(counts.size());
  double x2 = 0.0;
  for (auto c : counts) x2 += (static_cast<double>(c) - expected) * (static_cast<double>(c) - expected) / expected;
  return x2;
}

// Upper 1% point of chi-square with 47 degrees of freedom (48 cells).
inline constexpr double kChi2Crit47 = 72.4433;

}  // namespace oracle
