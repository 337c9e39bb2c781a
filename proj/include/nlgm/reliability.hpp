#pragma once

#include <optional>
#include <string>
#include <vector>

#include "nlgm/data_ingest.hpp"
#include "nlgm/stats.hpp"

namespace nlgm {

enum class ReliabilityMethod { TestRetest, SplitHalf, Alpha };

std::string to_string(ReliabilityMethod method);

struct ReliabilityEstimate {
  ReliabilityMethod method = ReliabilityMethod::Alpha;
  double estimate_raw = 0.0;
  double estimate_clamped = 0.0;  // min(1, max(0, estimate_raw))
  double sem = 0.0;               // sd(X) * sqrt(1 - estimate_clamped), units of the total score
  std::size_t n_candidates = 0;
  std::size_t n_items = 0;
  std::optional<BootstrapCI> ci;
  std::vector<std::string> warnings;
};

struct SplitHalfResult {
  double half_correlation = 0.0;  // mean over splits when n_random_splits > 1
  double stepped_up = 0.0;
  SplitScheme scheme;
  std::size_t n_random_splits = 1;
  std::vector<double> split_half_correlations;  // one per split
  std::vector<double> split_stepped_up;
};

struct SplitHalfReport {
  SplitHalfResult split;
  ReliabilityEstimate estimate;
};

// Spearman-Brown step-up of a half-test correlation: 2r / (1 + r).
double spearman_brown(double half_correlation);

// Standard error of measurement: sd_total * sqrt(1 - reliability).
double sem(double sd_total, double reliability);

// Correlation of total scores across two administrations. admin2 is
// reordered to admin1's candidate and item order before comparison.
ReliabilityEstimate test_retest(const ScoreMatrix& admin1, const ScoreMatrix& admin2);

SplitHalfReport split_half(const ScoreMatrix& m, const SplitScheme& scheme = SplitScheme::odd_even(),
                           std::size_t n_random_splits = 1);

// Coefficient alpha. May be negative; the raw value is kept and a warning
// added when clamping changes it.
ReliabilityEstimate cronbach_alpha(const ScoreMatrix& m);

// Alpha straight from an item covariance matrix.
double alpha_from_covariance(const Eigen::MatrixXd& item_cov);

// Bootstrap helpers (resampling candidates). Test-retest resamples both
// administrations jointly.
BootstrapCI bootstrap_alpha(const ScoreMatrix& m, const BootstrapOptions& options);
BootstrapCI bootstrap_split_half(const ScoreMatrix& m, const SplitScheme& scheme,
                                 std::size_t n_random_splits, const BootstrapOptions& options);
BootstrapCI bootstrap_test_retest(const ScoreMatrix& admin1, const ScoreMatrix& admin2,
                                  const BootstrapOptions& options);

}  // namespace nlgm
