#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "nlgm/data_ingest.hpp"

namespace nlgm {

// All variances use the unbiased n-1 divisor.
double mean(const Eigen::Ref<const Eigen::VectorXd>& x);
double variance(const Eigen::Ref<const Eigen::VectorXd>& x);
double stddev(const Eigen::Ref<const Eigen::VectorXd>& x);
double covariance(const Eigen::Ref<const Eigen::VectorXd>& x, const Eigen::Ref<const Eigen::VectorXd>& y);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  double level = 0.95;
};

struct CorrelationResult {
  double r = 0.0;
  std::size_t n = 0;
  std::optional<Interval> fisher_ci;  // present when n >= 4 and |r| < 1
};

// Sample Pearson correlation. Throws DegenerateError when either series is
// constant and DomainError on length mismatch or n < 3.
CorrelationResult pearson(const Eigen::Ref<const Eigen::VectorXd>& x,
                          const Eigen::Ref<const Eigen::VectorXd>& y, double level = 0.95);

enum class Orientation { Columns, Rows };

Eigen::MatrixXd correlation_matrix(const ScoreMatrix& m, Orientation orientation = Orientation::Columns);

// Two-sided standard normal quantile z such that P(|Z| <= z) = level.
double normal_two_sided_quantile(double level);

Interval fisher_z_interval(double r, std::size_t n, double level);

// Percentile-bootstrap interval. `replicate_statistics` holds the statistic
// of every successful replicate, in replicate order.
struct BootstrapCI {
  double lo = 0.0;
  double hi = 0.0;
  double level = 0.95;
  std::size_t replicates = 0;
  std::uint64_t seed = 0;
  std::size_t failed = 0;
  std::vector<double> replicate_statistics;
};

struct BootstrapOptions {
  std::size_t replicates = 1000;
  std::uint64_t seed = 0;
  double level = 0.95;
  unsigned threads = 1;  // 0 = hardware concurrency
};

using MatrixStatistic = std::function<double(const ScoreMatrix&)>;

// Resamples candidates (rows) with replacement. Replicate b draws its row
// indices from Rng::stream(seed, b) only. A replicate whose statistic throws
// nlgm::Error counts as failed; more than half failing is an error.
BootstrapCI bootstrap(const MatrixStatistic& statistic, const ScoreMatrix& m,
                      const BootstrapOptions& options);

// Same, evaluating replicates in the given order; used to check that the
// result does not depend on evaluation order.
BootstrapCI bootstrap_in_order(const MatrixStatistic& statistic, const ScoreMatrix& m,
                               const BootstrapOptions& options,
                               const std::vector<std::size_t>& evaluation_order);

// Linear-interpolated quantile (Hyndman-Fan type 7) of sorted data.
double quantile_sorted(const std::vector<double>& sorted, double p);

// Column z-scores with sample sd. Throws DegenerateError on a constant column.
Eigen::MatrixXd standardize_columns(const Eigen::MatrixXd& values);

}  // namespace nlgm
