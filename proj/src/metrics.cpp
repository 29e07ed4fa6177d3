#include "mtae/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mtae/error.hpp"

namespace mtae::metrics {

std::string to_string(Feature f) {
  static const char* names[] = {"ND", "PR", "MP", "VP", "MV", "VV", "MD", "VD"};
  return names[static_cast<int>(f)];
}

void MetricConfig::validate() const {
  if (!(window > 0.0) || !(hop > 0.0)) throw Error(ErrorCategory::config, "metric window and hop must be positive");
  if (!(imq_c > 0.0)) throw Error(ErrorCategory::config, "IMQ constant must be positive");
  if (!(sigma_floor > 0.0)) throw Error(ErrorCategory::config, "sigma floor must be positive");
}

namespace {

struct Moments {
  double mean = 0.0, var = 0.0;
};

template <class F>
Moments population(const std::vector<const Note*>& notes, F value) {
  Moments m;
  for (const Note* n : notes) m.mean += value(*n);
  m.mean /= static_cast<double>(notes.size());
  for (const Note* n : notes) m.var += (value(*n) - m.mean) * (value(*n) - m.mean);
  m.var /= static_cast<double>(notes.size());
  return m;
}

}  // namespace

std::vector<std::array<double, kFeatureCount>> window_values(const NoteSequence& seq, const MetricConfig& cfg) {
  cfg.validate();
  if (seq.empty()) throw Error(ErrorCategory::range, "features need at least one note");
  std::vector<std::array<double, kFeatureCount>> rows;
  const auto& notes = seq.notes();
  const double last_onset = notes.back().onset;
  for (long k = 0;; ++k) {
    const double start = static_cast<double>(k) * cfg.hop;
    if (start > last_onset) break;
    const double end = start + cfg.window;
    std::vector<const Note*> in;
    for (const Note& n : notes) {
      if (n.onset >= start && n.onset < end) in.push_back(&n);
    }
    if (in.empty()) continue;
    int lo = 127, hi = 0;
    for (const Note* n : in) {
      lo = std::min(lo, n->pitch);
      hi = std::max(hi, n->pitch);
    }
    const auto p = population(in, [](const Note& n) { return static_cast<double>(n.pitch); });
    const auto v = population(in, [](const Note& n) { return static_cast<double>(n.velocity); });
    const auto d = population(in, [](const Note& n) { return n.offset - n.onset; });
    rows.push_back({static_cast<double>(in.size()) / cfg.window, static_cast<double>(hi - lo), p.mean, p.var, v.mean,
                    v.var, d.mean, d.var});
  }
  return rows;
}

FeatureSet compute_features(const NoteSequence& seq, const MetricConfig& cfg) {
  const auto rows = window_values(seq, cfg);
  FeatureSet out;
  const double n = static_cast<double>(rows.size());
  for (std::size_t f = 0; f < kFeatureCount; ++f) {
    double mean = 0.0;
    for (const auto& r : rows) mean += r[f];
    mean /= n;
    double ss = 0.0;
    for (const auto& r : rows) ss += (r[f] - mean) * (r[f] - mean);
    const double sd = rows.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
    out[f] = {kFeatures[f], mean, std::max(sd, cfg.sigma_floor), rows.size()};
  }
  return out;
}

double normal_cdf(double x, double mu, double sigma) { return 0.5 * std::erfc(-(x - mu) / (sigma * std::sqrt(2.0))); }

double normal_pdf(double x, double mu, double sigma) {
  const double z = (x - mu) / sigma;
  return std::exp(-0.5 * z * z) / (sigma * std::sqrt(2.0 * M_PI));
}

double overlap_area(const FeatureGaussian& a, const FeatureGaussian& b) {
  const FeatureGaussian& n = a.sigma <= b.sigma ? a : b;  // narrow
  const FeatureGaussian& w = a.sigma <= b.sigma ? b : a;  // wide
  if (w.sigma - n.sigma <= 1e-12 * w.sigma) {
    const double s = 0.5 * (a.sigma + b.sigma);
    return std::clamp(2.0 * normal_cdf(-std::abs(a.mu - b.mu) / (2.0 * s), 0.0, 1.0), 0.0, 1.0);
  }
  // log pdf_n(x) - log pdf_w(x) = A x^2 + B x + C; roots are the crossings.
  const double vn = n.sigma * n.sigma, vw = w.sigma * w.sigma;
  const double qa = 0.5 / vw - 0.5 / vn;
  const double qb = n.mu / vn - w.mu / vw;
  const double qc = 0.5 * w.mu * w.mu / vw - 0.5 * n.mu * n.mu / vn + std::log(w.sigma / n.sigma);
  const double disc = std::sqrt(std::max(0.0, qb * qb - 4.0 * qa * qc));
  const double q = -0.5 * (qb + std::copysign(disc, qb == 0.0 ? 1.0 : qb));
  double x1 = q / qa, x2 = q != 0.0 ? qc / q : -x1;
  if (x1 > x2) std::swap(x1, x2);
  // The narrow density is the smaller one outside [x1, x2].
  const double outside = normal_cdf(x1, n.mu, n.sigma) + (1.0 - normal_cdf(x2, n.mu, n.sigma));
  const double inside = normal_cdf(x2, w.mu, w.sigma) - normal_cdf(x1, w.mu, w.sigma);
  return std::clamp(outside + inside, 0.0, 1.0);
}

SimilarityReport oa_similarity(const FeatureSet& a, const FeatureSet& b) {
  SimilarityReport r;
  for (std::size_t f = 0; f < kFeatureCount; ++f) r.oa[f] = overlap_area(a[f], b[f]);
  r.average = std::accumulate(r.oa.begin(), r.oa.end(), 0.0) / static_cast<double>(kFeatureCount);
  return r;
}

SimilarityReport oa_similarity(const NoteSequence& a, const NoteSequence& b, const MetricConfig& cfg) {
  return oa_similarity(compute_features(a, cfg), compute_features(b, cfg));
}

RelDistance rel_distance(double oa_to_a, double oa_to_b) {
  if (oa_to_a < 0.0 || oa_to_b < 0.0) throw Error(ErrorCategory::range, "overlap areas must be non-negative");
  if (oa_to_a + oa_to_b <= 0.0) return {0.5, true};
  return {1.0 - oa_to_a / (oa_to_a + oa_to_b), false};
}

double kl_divergence(const FeatureGaussian& p, const FeatureGaussian& q) {
  const double d = p.mu - q.mu;
  return std::log(q.sigma / p.sigma) + (p.sigma * p.sigma + d * d) / (2.0 * q.sigma * q.sigma) - 0.5;
}

double symmetric_kl(const FeatureGaussian& p, const FeatureGaussian& q) {
  return 0.5 * kl_divergence(p, q) + 0.5 * kl_divergence(q, p);
}

double averaged_kl(const FeatureSet& a, const FeatureSet& b) {
  const auto mp = static_cast<std::size_t>(Feature::MP), nd = static_cast<std::size_t>(Feature::ND);
  return 0.5 * (symmetric_kl(a[mp], b[mp]) + symmetric_kl(a[nd], b[nd]));
}

SummaryVector summary_vector(const NoteSequence& seq) {
  if (seq.empty()) throw Error(ErrorCategory::range, "summary vector needs at least one note");
  std::vector<const Note*> all;
  for (const Note& n : seq.notes()) all.push_back(&n);
  const auto p = population(all, [](const Note& n) { return static_cast<double>(n.pitch); });
  const auto v = population(all, [](const Note& n) { return static_cast<double>(n.velocity); });
  const auto d = population(all, [](const Note& n) { return n.offset - n.onset; });
  const double span = seq.total_seconds() > 0.0 ? seq.total_seconds() : 1.0;
  return {static_cast<double>(all.size()) / span, p.mean, v.mean, d.mean, p.var, v.var, d.var};
}

double imq_kernel(const std::vector<double>& x, const std::vector<double>& y, double c) {
  if (x.size() != y.size()) throw Error(ErrorCategory::shape, "IMQ kernel needs vectors of equal dimension");
  double d2 = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) d2 += (x[i] - y[i]) * (x[i] - y[i]);
  return 1.0 / std::sqrt(d2 + c * c);
}

double imq_kernel(const SummaryVector& x, const SummaryVector& y, double c) {
  return imq_kernel(std::vector<double>(x.begin(), x.end()), std::vector<double>(y.begin(), y.end()), c);
}

double imq_mmd_score(const SummaryVector& x, const std::vector<SummaryVector>& ys, double c) {
  if (ys.empty()) throw Error(ErrorCategory::range, "MMD score needs at least one sample");
  const double n = static_cast<double>(ys.size());
  double cross = 0.0, within = 0.0;
  for (const auto& y : ys) {
    cross += imq_kernel(x, y, c);
    for (const auto& y2 : ys) within += imq_kernel(y, y2, c);
  }
  return -cross / n + within / (n * n);
}

FeatureSet blend_features(const FeatureSet& a, const FeatureSet& b, double alpha) {
  FeatureSet out;
  for (std::size_t f = 0; f < kFeatureCount; ++f) {
    out[f] = {kFeatures[f], alpha * a[f].mu + (1.0 - alpha) * b[f].mu,
              alpha * a[f].sigma + (1.0 - alpha) * b[f].sigma, 0};
  }
  return out;
}

std::vector<RelDistance> surrogate_sweep(const FeatureSet& a, const FeatureSet& b, const std::vector<double>& alphas) {
  std::vector<RelDistance> out;
  for (double alpha : alphas) {
    const FeatureSet s = blend_features(a, b, alpha);
    out.push_back(rel_distance(oa_similarity(s, a).average, oa_similarity(s, b).average));
  }
  return out;
}

namespace {

std::vector<double> ranks(const std::vector<double>& x) {
  std::vector<std::size_t> idx(x.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](auto i, auto j) { return x[i] < x[j]; });
  std::vector<double> r(x.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && x[idx[j + 1]] == x[idx[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
    i = j + 1;
  }
  return r;
}

}  // namespace

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw Error(ErrorCategory::shape, "spearman needs two equal series of length >= 2");
  const auto rx = ranks(x), ry = ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n, my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace mtae::metrics
