#include "nlgm/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <thread>

#include <boost/math/distributions/normal.hpp>

#include "nlgm/error.hpp"
#include "nlgm/rng.hpp"

namespace nlgm {

namespace {

void require_length(Eigen::Index n, Eigen::Index min, const char* what) {
  if (n < min) {
    throw DomainError(std::string(what) + " requires at least " + std::to_string(min) +
                      " observations, got " + std::to_string(n));
  }
}

// Centered sum of squares / cross products, two-pass.
double centered_cross(const Eigen::Ref<const Eigen::VectorXd>& x, double mx,
                      const Eigen::Ref<const Eigen::VectorXd>& y, double my) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) s += (x(i) - mx) * (y(i) - my);
  return s;
}

}  // namespace

double mean(const Eigen::Ref<const Eigen::VectorXd>& x) {
  require_length(x.size(), 1, "mean");
  return x.sum() / static_cast<double>(x.size());
}

double variance(const Eigen::Ref<const Eigen::VectorXd>& x) {
  require_length(x.size(), 2, "variance");
  const double m = mean(x);
  return centered_cross(x, m, x, m) / static_cast<double>(x.size() - 1);
}

double stddev(const Eigen::Ref<const Eigen::VectorXd>& x) { return std::sqrt(variance(x)); }

double covariance(const Eigen::Ref<const Eigen::VectorXd>& x, const Eigen::Ref<const Eigen::VectorXd>& y) {
  if (x.size() != y.size()) throw DomainError("covariance: length mismatch");
  require_length(x.size(), 2, "covariance");
  return centered_cross(x, mean(x), y, mean(y)) / static_cast<double>(x.size() - 1);
}

CorrelationResult pearson(const Eigen::Ref<const Eigen::VectorXd>& x,
                          const Eigen::Ref<const Eigen::VectorXd>& y, double level) {
  if (x.size() != y.size()) {
    throw DomainError("pearson: length mismatch (" + std::to_string(x.size()) + " vs " +
                      std::to_string(y.size()) + ")");
  }
  require_length(x.size(), 3, "pearson");
  const double mx = mean(x);
  const double my = mean(y);
  const double sxx = centered_cross(x, mx, x, mx);
  const double syy = centered_cross(y, my, y, my);
  if (!(sxx > 0.0)) throw DegenerateError("pearson: first series is constant");
  if (!(syy > 0.0)) throw DegenerateError("pearson: second series is constant");
  const double sxy = centered_cross(x, mx, y, my);
  CorrelationResult res;
  res.r = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
  res.n = static_cast<std::size_t>(x.size());
  if (res.n >= 4 && std::abs(res.r) < 1.0) res.fisher_ci = fisher_z_interval(res.r, res.n, level);
  return res;
}

Eigen::MatrixXd correlation_matrix(const ScoreMatrix& m, Orientation orientation) {
  const Eigen::MatrixXd data = orientation == Orientation::Columns ? m.values : m.values.transpose();
  const auto& names = orientation == Orientation::Columns ? m.items : m.candidates;
  const char* kind = orientation == Orientation::Columns ? "item" : "candidate";
  require_length(data.rows(), 3, "correlation_matrix");
  const Eigen::Index p = data.cols();
  for (Eigen::Index j = 0; j < p; ++j) {
    if ((data.col(j).array() == data(0, j)).all()) {
      const std::string name =
          static_cast<std::size_t>(j) < names.size() ? names[static_cast<std::size_t>(j)] : std::to_string(j);
      throw DegenerateError(std::string("constant series for ") + kind + " '" + name + "'");
    }
  }
  Eigen::MatrixXd r = Eigen::MatrixXd::Identity(p, p);
  for (Eigen::Index i = 0; i < p; ++i) {
    for (Eigen::Index j = i + 1; j < p; ++j) {
      r(i, j) = r(j, i) = pearson(data.col(i), data.col(j)).r;
    }
  }
  return r;
}

double normal_two_sided_quantile(double level) {
  if (!(level > 0.0 && level < 1.0)) throw DomainError("confidence level must be in (0, 1)");
  return boost::math::quantile(boost::math::normal(), 0.5 + level / 2.0);
}

Interval fisher_z_interval(double r, std::size_t n, double level) {
  if (!(std::abs(r) < 1.0)) throw DegenerateError("fisher_z_interval: |r| = 1 has no interval");
  if (n < 4) throw DomainError("fisher_z_interval requires n >= 4");
  const double z = std::atanh(r);
  const double half = normal_two_sided_quantile(level) / std::sqrt(static_cast<double>(n) - 3.0);
  return {std::tanh(z - half), std::tanh(z + half), level};
}

double quantile_sorted(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) throw DomainError("quantile of empty sample");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

BootstrapCI bootstrap_in_order(const MatrixStatistic& statistic, const ScoreMatrix& m,
                               const BootstrapOptions& options,
                               const std::vector<std::size_t>& evaluation_order) {
  if (options.replicates < 100) throw DomainError("bootstrap requires at least 100 replicates");
  if (!(options.level > 0.0 && options.level < 1.0)) throw DomainError("confidence level must be in (0, 1)");
  if (evaluation_order.size() != options.replicates) {
    throw DomainError("bootstrap evaluation order must cover every replicate");
  }
  const Eigen::Index n = m.n_candidates();
  if (n < 2) throw DomainError("bootstrap requires at least 2 candidates");

  std::vector<std::optional<double>> stats(options.replicates);
  auto run_replicate = [&](std::size_t b) {
    Rng rng = Rng::stream(options.seed, b);
    ScoreMatrix sample;
    sample.items = m.items;
    sample.label = m.label;
    sample.candidates.resize(static_cast<std::size_t>(n));
    sample.values.resize(n, m.n_items());
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto src = static_cast<Eigen::Index>(rng.uniform_index(static_cast<std::uint64_t>(n)));
      sample.values.row(i) = m.values.row(src);
      sample.candidates[static_cast<std::size_t>(i)] = m.candidates[static_cast<std::size_t>(src)];
    }
    try {
      const double s = statistic(sample);
      if (std::isfinite(s)) stats[b] = s;
    } catch (const Error&) {
    }
  };

  unsigned threads = options.threads == 0 ? std::max(1u, std::thread::hardware_concurrency())
                                          : options.threads;
  threads = std::min<unsigned>(threads, static_cast<unsigned>(options.replicates));
  if (threads <= 1) {
    for (std::size_t b : evaluation_order) run_replicate(b);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) {
      pool.emplace_back([&, t] {
        for (std::size_t k = t; k < evaluation_order.size(); k += threads) run_replicate(evaluation_order[k]);
      });
    }
  }

  BootstrapCI ci;
  ci.level = options.level;
  ci.replicates = options.replicates;
  ci.seed = options.seed;
  for (const auto& s : stats) {
    if (s) ci.replicate_statistics.push_back(*s);
    else ++ci.failed;
  }
  if (2 * ci.failed > options.replicates) {
    throw DegenerateError("bootstrap statistic failed on " + std::to_string(ci.failed) + " of " +
                          std::to_string(options.replicates) + " replicates");
  }
  std::vector<double> sorted = ci.replicate_statistics;
  std::sort(sorted.begin(), sorted.end());
  const double tail = (1.0 - options.level) / 2.0;
  ci.lo = quantile_sorted(sorted, tail);
  ci.hi = quantile_sorted(sorted, 1.0 - tail);
  return ci;
}

BootstrapCI bootstrap(const MatrixStatistic& statistic, const ScoreMatrix& m,
                      const BootstrapOptions& options) {
  std::vector<std::size_t> order(options.replicates);
  std::iota(order.begin(), order.end(), std::size_t{0});
  return bootstrap_in_order(statistic, m, options, order);
}

Eigen::MatrixXd standardize_columns(const Eigen::MatrixXd& values) {
  require_length(values.rows(), 2, "standardize");
  Eigen::MatrixXd z(values.rows(), values.cols());
  for (Eigen::Index j = 0; j < values.cols(); ++j) {
    const double mu = mean(values.col(j));
    const double sd = stddev(values.col(j));
    if (!(sd > 0.0)) throw DegenerateError("cannot standardize constant column " + std::to_string(j));
    z.col(j) = (values.col(j).array() - mu) / sd;
  }
  return z;
}

}  // namespace nlgm
