#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "mtae/notes.hpp"

namespace mtae::metrics {

enum class Feature { ND, PR, MP, VP, MV, VV, MD, VD };
inline constexpr std::size_t kFeatureCount = 8;
inline constexpr std::array<Feature, kFeatureCount> kFeatures = {Feature::ND, Feature::PR, Feature::MP, Feature::VP,
                                                                 Feature::MV, Feature::VV, Feature::MD, Feature::VD};
std::string to_string(Feature f);

struct FeatureGaussian {
  Feature feature = Feature::ND;
  double mu = 0.0;
  double sigma = 1.0;
  std::size_t n_windows = 0;
};

using FeatureSet = std::array<FeatureGaussian, kFeatureCount>;

struct MetricConfig {
  double window = 2.0;  // seconds
  double hop = 1.0;     // seconds
  double imq_c = 10.0;
  double sigma_floor = 1e-6;

  void validate() const;
};

/// Per-window feature values (onset-keyed windows), one row per non-empty
/// window, columns in Feature order.
std::vector<std::array<double, kFeatureCount>> window_values(const NoteSequence& seq, const MetricConfig& cfg = {});

FeatureSet compute_features(const NoteSequence& seq, const MetricConfig& cfg = {});

double normal_cdf(double x, double mu, double sigma);
double normal_pdf(double x, double mu, double sigma);

/// Closed-form integral of min(pdf1, pdf2).
double overlap_area(const FeatureGaussian& a, const FeatureGaussian& b);

struct SimilarityReport {
  std::array<double, kFeatureCount> oa{};
  double average = 0.0;
  std::optional<double> kl;
  std::optional<double> mmd;
};

SimilarityReport oa_similarity(const FeatureSet& a, const FeatureSet& b);
SimilarityReport oa_similarity(const NoteSequence& a, const NoteSequence& b, const MetricConfig& cfg = {});

struct RelDistance {
  double value = 0.5;
  bool indeterminate = false;  // both overlaps were zero
};

/// 1 - oa_a / (oa_a + oa_b).
RelDistance rel_distance(double oa_to_a, double oa_to_b);

/// D(p || q) for univariate Gaussians.
double kl_divergence(const FeatureGaussian& p, const FeatureGaussian& q);
double symmetric_kl(const FeatureGaussian& p, const FeatureGaussian& q);
/// Mean of the symmetric KL over mean pitch and note density.
double averaged_kl(const FeatureSet& a, const FeatureSet& b);

/// Whole-performance summary: density, mean pitch, mean velocity, mean
/// duration, pitch variance, velocity variance, duration variance.
using SummaryVector = std::array<double, 7>;
SummaryVector summary_vector(const NoteSequence& seq);

double imq_kernel(const std::vector<double>& x, const std::vector<double>& y, double c = 10.0);
double imq_kernel(const SummaryVector& x, const SummaryVector& y, double c = 10.0);
/// -(1/n) sum_i k(x, y_i) + (1/n^2) sum_ij k(y_i, y_j). Lower is more similar.
double imq_mmd_score(const SummaryVector& x, const std::vector<SummaryVector>& ys, double c = 10.0);

/// Interpolates each Gaussian's mean and standard deviation linearly:
/// alpha = 1 gives `a`, alpha = 0 gives `b`.
FeatureSet blend_features(const FeatureSet& a, const FeatureSet& b, double alpha);

/// rel_distance to A per alpha, with decoding replaced by blend_features.
std::vector<RelDistance> surrogate_sweep(const FeatureSet& a, const FeatureSet& b, const std::vector<double>& alphas);

/// Spearman rank correlation with average ranks for ties.
double spearman(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace mtae::metrics
