#include "nlgm/simulation.hpp"

#include <cmath>
#include <numeric>

#include "nlgm/error.hpp"
#include "nlgm/rng.hpp"

namespace nlgm {

namespace {

std::vector<std::string> make_ids(char prefix, std::size_t n) {
  const std::size_t width = std::to_string(n > 0 ? n - 1 : 0).size();
  std::vector<std::string> ids(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::string num = std::to_string(i);
    ids[i] = std::string(1, prefix) + std::string(width - num.size(), '0') + num;
  }
  return ids;
}

struct ItemParams {
  Eigen::VectorXd slope;
  Eigen::VectorXd intercept;
  Eigen::VectorXd error_sd;
};

ItemParams resolve(const CttSpec& spec) {
  if (spec.n_candidates < 2) throw DomainError("ctt spec: n_candidates must be >= 2");
  if (spec.n_items < 1) throw DomainError("ctt spec: n_items must be >= 1");
  if (!(spec.true_sd >= 0.0) || !std::isfinite(spec.true_sd)) throw DomainError("ctt spec: true_sd must be >= 0");
  const auto j = static_cast<Eigen::Index>(spec.n_items);
  ItemParams p;
  p.slope = Eigen::VectorXd::Ones(j);
  p.intercept = Eigen::VectorXd::Zero(j);

  if (spec.error_sd.size() == 1) {
    p.error_sd = Eigen::VectorXd::Constant(j, spec.error_sd[0]);
  } else if (spec.error_sd.size() == spec.n_items) {
    p.error_sd = Eigen::Map<const Eigen::VectorXd>(spec.error_sd.data(), j);
  } else {
    throw DomainError("ctt spec: error_sd must have length 1 or n_items");
  }
  for (Eigen::Index k = 0; k < j; ++k) {
    if (!(p.error_sd(k) > 0.0) || !std::isfinite(p.error_sd(k))) {
      throw DomainError("ctt spec: every error_sd must be > 0");
    }
  }
  if (!spec.intercepts.empty()) {
    if (spec.intercepts.size() != spec.n_items) throw DomainError("ctt spec: intercepts must have length n_items");
    p.intercept = Eigen::Map<const Eigen::VectorXd>(spec.intercepts.data(), j);
  }

  switch (spec.structure) {
    case CttStructure::Parallel:
      if ((p.error_sd.array() != p.error_sd(0)).any()) {
        throw DomainError("ctt spec: parallel items require equal error_sd");
      }
      if (!spec.intercepts.empty() || !spec.loadings.empty()) {
        throw DomainError("ctt spec: parallel items take no loadings or intercepts");
      }
      break;
    case CttStructure::TauEquivalent:
      if (!spec.loadings.empty()) throw DomainError("ctt spec: tau-equivalent items take no loadings");
      break;
    case CttStructure::Congeneric:
      if (spec.loadings.size() != spec.n_items) throw DomainError("ctt spec: congeneric loadings must have length n_items");
      p.slope = Eigen::Map<const Eigen::VectorXd>(spec.loadings.data(), j);
      if (!p.slope.allFinite()) throw DomainError("ctt spec: loadings must be finite");
      break;
  }
  return p;
}

SimulatedDataset observe(const CttSpec& spec, const ItemParams& p, const Eigen::VectorXd& t, std::uint64_t stream) {
  const auto n = static_cast<Eigen::Index>(spec.n_candidates);
  const auto j = static_cast<Eigen::Index>(spec.n_items);
  SimulatedDataset d;
  d.seed = spec.seed;
  d.observed.label = spec.metric;
  d.observed.candidates = make_ids('c', spec.n_candidates);
  d.observed.items = make_ids('i', spec.n_items);
  d.observed.values.resize(n, j);
  Rng rng = Rng::stream(spec.seed, stream);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index k = 0; k < j; ++k) {
      d.observed.values(i, k) = p.slope(k) * t(i) + p.intercept(k) + p.error_sd(k) * rng.standard_normal();
    }
  }
  const double slope_sum = p.slope.sum();
  d.true_scores = (slope_sum * t.array() + p.intercept.sum()).matrix();
  d.true_score_mean = p.intercept.sum();
  d.true_score_sd = std::abs(slope_sum) * spec.true_sd;
  d.true_reliability_total = ctt_total_reliability(spec);
  d.latent_trait = t;
  return d;
}

Eigen::VectorXd draw_true(const CttSpec& spec) {
  Rng rng = Rng::stream(spec.seed, 0);
  Eigen::VectorXd t(static_cast<Eigen::Index>(spec.n_candidates));
  for (Eigen::Index i = 0; i < t.size(); ++i) t(i) = spec.true_sd * rng.standard_normal();
  return t;
}

}  // namespace

std::string to_string(CttStructure structure) {
  switch (structure) {
    case CttStructure::Parallel:
      return "parallel";
    case CttStructure::TauEquivalent:
      return "tau-equivalent";
    case CttStructure::Congeneric:
      return "congeneric";
  }
  return "";
}

double ctt_total_reliability(const CttSpec& spec) {
  const ItemParams p = resolve(spec);
  const double signal = std::pow(p.slope.sum() * spec.true_sd, 2);
  const double noise = p.error_sd.squaredNorm();
  return signal / (signal + noise);
}

double parallel_error_sd_for(double reliability, std::size_t n_items, double true_sd) {
  if (!(reliability > 0.0 && reliability < 1.0)) throw DomainError("target reliability must be in (0, 1)");
  const double j = static_cast<double>(n_items);
  // rel = J sd_T^2 / (J sd_T^2 + sd_E^2)
  return std::sqrt(j * true_sd * true_sd * (1.0 - reliability) / reliability);
}

SimulatedDataset generate_ctt(const CttSpec& spec) {
  const ItemParams p = resolve(spec);
  return observe(spec, p, draw_true(spec), 1);
}

std::pair<SimulatedDataset, SimulatedDataset> generate_retest(const CttSpec& spec) {
  const ItemParams p = resolve(spec);
  const Eigen::VectorXd t = draw_true(spec);
  return {observe(spec, p, t, 1), observe(spec, p, t, 2)};
}

SimulatedDataset generate_factor(const FactorSimSpec& spec) {
  const Eigen::Index j = spec.loadings.rows();
  const Eigen::Index k = spec.loadings.cols();
  if (spec.n_candidates < 2) throw DomainError("factor spec: n_candidates must be >= 2");
  if (j < 1 || k < 1) throw DomainError("factor spec: loadings must be a non-empty J x K matrix");
  if (spec.uniquenesses.size() != j) throw DomainError("factor spec: uniquenesses must have length J");
  if (!spec.loadings.allFinite() || !spec.uniquenesses.allFinite() || (spec.uniquenesses.array() < 0.0).any()) {
    throw DomainError("factor spec: loadings must be finite and uniquenesses >= 0");
  }
  Eigen::MatrixXd implied = spec.loadings * spec.loadings.transpose();
  implied.diagonal() += spec.uniquenesses;
  Eigen::LLT<Eigen::MatrixXd> llt(implied);
  if (llt.info() != Eigen::Success) throw DomainError("factor spec: implied covariance is not positive definite");

  const auto n = static_cast<Eigen::Index>(spec.n_candidates);
  Eigen::MatrixXd f(n, k);
  Rng frng = Rng::stream(spec.seed, 0);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index c = 0; c < k; ++c) f(i, c) = frng.standard_normal();
  }
  const Eigen::VectorXd u_sd = spec.uniquenesses.cwiseSqrt();
  Eigen::MatrixXd x = f * spec.loadings.transpose();
  const Eigen::MatrixXd common = x;
  Rng urng = Rng::stream(spec.seed, 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index c = 0; c < j; ++c) x(i, c) += u_sd(c) * urng.standard_normal();
  }

  SimulatedDataset d;
  d.seed = spec.seed;
  d.observed.label = spec.metric;
  d.observed.candidates = make_ids('c', spec.n_candidates);
  d.observed.items = make_ids('i', static_cast<std::size_t>(j));
  d.observed.values = x;
  d.true_scores = common.rowwise().sum();
  const double signal = (spec.loadings.transpose() * Eigen::VectorXd::Ones(j)).squaredNorm();
  d.true_score_mean = 0.0;
  d.true_score_sd = std::sqrt(signal);
  d.true_reliability_total = signal / (signal + spec.uniquenesses.sum());
  d.latent_factors = f;
  return d;
}

Eigen::VectorXd generate_criterion(const SimulatedDataset& dataset, double criterion_reliability,
                                   double latent_corr, std::uint64_t seed) {
  if (!(criterion_reliability > 0.0 && criterion_reliability <= 1.0)) {
    throw DomainError("criterion reliability must be in (0, 1]");
  }
  if (!(latent_corr >= -1.0 && latent_corr <= 1.0)) throw DomainError("latent correlation must be in [-1, 1]");
  if (!(dataset.true_score_sd > 0.0)) {
    throw DegenerateError("criterion generation needs a dataset with nonzero true-score variance");
  }
  const Eigen::Index n = dataset.true_scores.size();
  const double unique_weight = std::sqrt(1.0 - latent_corr * latent_corr);
  const double noise_sd = std::sqrt((1.0 - criterion_reliability) / criterion_reliability);
  Rng wrng = Rng::stream(seed, 0);
  Rng erng = Rng::stream(seed, 1);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double z = (dataset.true_scores(i) - dataset.true_score_mean) / dataset.true_score_sd;
    y(i) = latent_corr * z + unique_weight * wrng.standard_normal();
  }
  for (Eigen::Index i = 0; i < n; ++i) y(i) += noise_sd * erng.standard_normal();
  return y;
}

std::vector<ScoreRecord> to_records(const ScoreMatrix& m, const std::optional<std::string>& run_id) {
  std::vector<ScoreRecord> out;
  out.reserve(static_cast<std::size_t>(m.values.size()));
  for (std::size_t i = 0; i < m.candidates.size(); ++i) {
    for (std::size_t j = 0; j < m.items.size(); ++j) {
      out.push_back({m.candidates[i], m.items[j], m.label, run_id, std::nullopt,
                     m.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))});
    }
  }
  return out;
}

std::vector<ScoreRecord> criterion_records(const std::vector<std::string>& candidates,
                                           const Eigen::VectorXd& criterion, const std::string& metric) {
  if (static_cast<Eigen::Index>(candidates.size()) != criterion.size()) {
    throw DomainError("criterion length does not match candidates");
  }
  std::vector<ScoreRecord> out;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    out.push_back({candidates[i], metric, metric, std::nullopt, std::nullopt, criterion(static_cast<Eigen::Index>(i))});
  }
  return out;
}

}  // namespace nlgm
