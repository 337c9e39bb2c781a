#include "nlgm/reliability.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "nlgm/error.hpp"

namespace nlgm {

namespace {

void require_shape(const ScoreMatrix& m, Eigen::Index min_items, const char* what) {
  if (m.n_items() < min_items) {
    throw DomainError(std::string(what) + " requires at least " + std::to_string(min_items) +
                      " items, got " + std::to_string(m.n_items()));
  }
  if (m.n_candidates() < 3) {
    throw DomainError(std::string(what) + " requires at least 3 candidates, got " +
                      std::to_string(m.n_candidates()));
  }
}

void finish(ReliabilityEstimate& est, double sd_total) {
  est.estimate_clamped = std::clamp(est.estimate_raw, 0.0, 1.0);
  if (est.estimate_clamped != est.estimate_raw) {
    std::ostringstream msg;
    msg.precision(10);
    msg << to_string(est.method) << " estimate " << est.estimate_raw << " clamped to "
        << est.estimate_clamped;
    est.warnings.push_back(msg.str());
  }
  est.sem = sem(sd_total, est.estimate_clamped);
}

// Reorders `m` to the given candidate and item order; throws if the sets differ.
ScoreMatrix align(const ScoreMatrix& m, const std::vector<std::string>& candidates,
                  const std::vector<std::string>& items) {
  auto index = [](const std::vector<std::string>& v) {
    std::map<std::string, Eigen::Index> idx;
    for (std::size_t i = 0; i < v.size(); ++i) idx[v[i]] = static_cast<Eigen::Index>(i);
    return idx;
  };
  const auto rows = index(m.candidates);
  const auto cols = index(m.items);
  if (rows.size() != candidates.size() || cols.size() != items.size()) {
    throw DomainError("test-retest administrations differ in candidate or item sets");
  }
  ScoreMatrix out;
  out.candidates = candidates;
  out.items = items;
  out.label = m.label;
  out.values.resize(static_cast<Eigen::Index>(candidates.size()), static_cast<Eigen::Index>(items.size()));
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    auto r = rows.find(candidates[i]);
    if (r == rows.end()) throw DomainError("candidate '" + candidates[i] + "' missing from second administration");
    for (std::size_t j = 0; j < items.size(); ++j) {
      auto c = cols.find(items[j]);
      if (c == cols.end()) throw DomainError("item '" + items[j] + "' missing from second administration");
      out.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = m.values(r->second, c->second);
    }
  }
  return out;
}

double stepped_up_of_split(const ScoreMatrix& m, const SplitScheme& scheme, std::size_t split,
                           double* half_corr) {
  const auto [a, b] = split_indices(m.n_items(), scheme, split);
  Eigen::VectorXd y1 = Eigen::VectorXd::Zero(m.n_candidates());
  Eigen::VectorXd y2 = Eigen::VectorXd::Zero(m.n_candidates());
  for (auto j : a) y1 += m.values.col(j);
  for (auto j : b) y2 += m.values.col(j);
  double r = 0.0;
  try {
    r = pearson(y1, y2).r;
  } catch (const DegenerateError&) {
    throw DegenerateError("split-half: a half-total score is constant across candidates");
  }
  if (half_corr) *half_corr = r;
  return spearman_brown(r);
}

}  // namespace

std::string to_string(ReliabilityMethod method) {
  switch (method) {
    case ReliabilityMethod::TestRetest:
      return "test-retest";
    case ReliabilityMethod::SplitHalf:
      return "split-half";
    case ReliabilityMethod::Alpha:
      return "alpha";
  }
  return "";
}

double spearman_brown(double half_correlation) {
  if (!(half_correlation > -1.0 && half_correlation <= 1.0)) {
    throw DomainError("spearman_brown requires a half correlation in (-1, 1]");
  }
  return 2.0 * half_correlation / (1.0 + half_correlation);
}

double sem(double sd_total, double reliability) {
  if (!(sd_total >= 0.0) || !std::isfinite(sd_total)) throw DomainError("sem: sd_total must be >= 0");
  if (!(reliability >= 0.0 && reliability <= 1.0)) throw DomainError("sem: reliability must be in [0, 1]");
  return sd_total * std::sqrt(1.0 - reliability);
}

ReliabilityEstimate test_retest(const ScoreMatrix& admin1, const ScoreMatrix& admin2) {
  require_shape(admin1, 1, "test-retest");
  const ScoreMatrix second = align(admin2, admin1.candidates, admin1.items);
  const Eigen::VectorXd x1 = admin1.totals();
  const Eigen::VectorXd x2 = second.totals();

  ReliabilityEstimate est;
  est.method = ReliabilityMethod::TestRetest;
  est.n_candidates = static_cast<std::size_t>(admin1.n_candidates());
  est.n_items = static_cast<std::size_t>(admin1.n_items());
  try {
    est.estimate_raw = pearson(x1, x2).r;
  } catch (const DegenerateError&) {
    throw DegenerateError("test-retest: total scores are constant across candidates");
  }
  finish(est, std::sqrt((variance(x1) + variance(x2)) / 2.0));
  return est;
}

SplitHalfReport split_half(const ScoreMatrix& m, const SplitScheme& scheme, std::size_t n_random_splits) {
  require_shape(m, 2, "split-half");
  if (n_random_splits == 0) throw DomainError("split-half requires at least one split");
  if (scheme.kind != SplitScheme::Kind::Random && n_random_splits != 1) {
    throw DomainError("multiple splits are only meaningful with the random scheme");
  }

  SplitHalfReport out;
  out.split.scheme = scheme;
  out.split.n_random_splits = n_random_splits;
  for (std::size_t s = 0; s < n_random_splits; ++s) {
    double r = 0.0;
    const double up = stepped_up_of_split(m, scheme, s, &r);
    out.split.split_half_correlations.push_back(r);
    out.split.split_stepped_up.push_back(up);
  }
  const double k = static_cast<double>(n_random_splits);
  double sum_r = 0.0;
  double sum_up = 0.0;
  for (std::size_t s = 0; s < n_random_splits; ++s) {
    sum_r += out.split.split_half_correlations[s];
    sum_up += out.split.split_stepped_up[s];
  }
  out.split.half_correlation = sum_r / k;
  out.split.stepped_up = n_random_splits == 1 ? out.split.split_stepped_up[0] : sum_up / k;

  auto& est = out.estimate;
  est.method = ReliabilityMethod::SplitHalf;
  est.estimate_raw = out.split.stepped_up;
  est.n_candidates = static_cast<std::size_t>(m.n_candidates());
  est.n_items = static_cast<std::size_t>(m.n_items());
  finish(est, stddev(m.totals()));
  return out;
}

double alpha_from_covariance(const Eigen::MatrixXd& item_cov) {
  const Eigen::Index j = item_cov.rows();
  if (j < 2) throw DomainError("alpha requires at least 2 items");
  const double total = item_cov.sum();
  if (!(total > 0.0)) throw DegenerateError("alpha: total-score variance is zero");
  const double jj = static_cast<double>(j);
  return jj / (jj - 1.0) * (total - item_cov.trace()) / total;
}

ReliabilityEstimate cronbach_alpha(const ScoreMatrix& m) {
  require_shape(m, 2, "alpha");
  const Eigen::VectorXd x = m.totals();
  const double var_total = variance(x);
  if (!(var_total > 0.0)) throw DegenerateError("alpha: total-score variance is zero");
  double sum_item = 0.0;
  for (Eigen::Index j = 0; j < m.n_items(); ++j) sum_item += variance(m.values.col(j));
  const double jj = static_cast<double>(m.n_items());

  ReliabilityEstimate est;
  est.method = ReliabilityMethod::Alpha;
  est.estimate_raw = jj / (jj - 1.0) * (var_total - sum_item) / var_total;
  est.n_candidates = static_cast<std::size_t>(m.n_candidates());
  est.n_items = static_cast<std::size_t>(m.n_items());
  finish(est, std::sqrt(var_total));
  return est;
}

BootstrapCI bootstrap_alpha(const ScoreMatrix& m, const BootstrapOptions& options) {
  return bootstrap([](const ScoreMatrix& s) { return cronbach_alpha(s).estimate_raw; }, m, options);
}

BootstrapCI bootstrap_split_half(const ScoreMatrix& m, const SplitScheme& scheme,
                                 std::size_t n_random_splits, const BootstrapOptions& options) {
  return bootstrap(
      [&](const ScoreMatrix& s) { return split_half(s, scheme, n_random_splits).split.stepped_up; }, m,
      options);
}

BootstrapCI bootstrap_test_retest(const ScoreMatrix& admin1, const ScoreMatrix& admin2,
                                  const BootstrapOptions& options) {
  const ScoreMatrix second = align(admin2, admin1.candidates, admin1.items);
  const Eigen::Index j = admin1.n_items();
  ScoreMatrix joint;
  joint.candidates = admin1.candidates;
  joint.label = admin1.label;
  joint.values.resize(admin1.n_candidates(), 2 * j);
  joint.values << admin1.values, second.values;
  joint.items = admin1.items;
  joint.items.insert(joint.items.end(), second.items.begin(), second.items.end());
  return bootstrap(
      [j](const ScoreMatrix& s) {
        const Eigen::VectorXd x1 = s.values.leftCols(j).rowwise().sum();
        const Eigen::VectorXd x2 = s.values.rightCols(j).rowwise().sum();
        return pearson(x1, x2).r;
      },
      joint, options);
}

}  // namespace nlgm
