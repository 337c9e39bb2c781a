#include "nlgm/serialize.hpp"

#include <cstdio>
#include <cstdlib>

#include "nlgm/error.hpp"

namespace nlgm {

namespace {

template <typename T>
Json opt(const std::optional<T>& v) {
  return v ? Json(*v) : Json(nullptr);
}

template <typename T>
std::optional<T> get_opt(const Json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return it->get<T>();
}

template <typename T>
T get_or(const Json& j, const char* key, T fallback) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return fallback;
  return it->get<T>();
}

const Json& require(const Json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) throw ParseError(std::string("missing field '") + key + "'");
  return *it;
}

}  // namespace

Json to_json_matrix(const Eigen::MatrixXd& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(i, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const Json& j) {
  if (!j.is_array()) throw ParseError("expected a matrix (array of rows)");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = rows ? static_cast<Eigen::Index>(j[0].size()) : 0;
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) throw ParseError("ragged matrix");
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = row[static_cast<std::size_t>(c)].get<double>();
  }
  return m;
}

Json to_json_vector(const Eigen::VectorXd& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

Eigen::VectorXd vector_from_json(const Json& j) {
  if (!j.is_array()) throw ParseError("expected an array of numbers");
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  return v;
}

ReliabilityMethod reliability_method_from_string(const std::string& s) {
  if (s == "test-retest") return ReliabilityMethod::TestRetest;
  if (s == "split-half") return ReliabilityMethod::SplitHalf;
  if (s == "alpha") return ReliabilityMethod::Alpha;
  throw ParseError("unknown reliability method '" + s + "'");
}

CriterionMode criterion_mode_from_string(const std::string& s) {
  if (s == "concurrent") return CriterionMode::Concurrent;
  if (s == "predictive") return CriterionMode::Predictive;
  throw ParseError("unknown criterion mode '" + s + "'");
}

Rotation rotation_from_string(const std::string& s) {
  if (s == "none") return Rotation::None;
  if (s == "varimax") return Rotation::Varimax;
  throw ParseError("unknown rotation '" + s + "'");
}

CttStructure ctt_structure_from_string(const std::string& s) {
  if (s == "parallel") return CttStructure::Parallel;
  if (s == "tau-equivalent") return CttStructure::TauEquivalent;
  if (s == "congeneric") return CttStructure::Congeneric;
  throw ParseError("unknown CTT structure '" + s + "'");
}

SplitScheme::Kind split_kind_from_string(const std::string& s) {
  if (s == "odd-even") return SplitScheme::Kind::OddEven;
  if (s == "first-second") return SplitScheme::Kind::FirstSecond;
  if (s == "random") return SplitScheme::Kind::Random;
  throw ParseError("unknown split scheme '" + s + "'");
}

void to_json(Json& j, const Interval& v) { j = {{"lo", v.lo}, {"hi", v.hi}, {"level", v.level}}; }
void from_json(const Json& j, Interval& v) {
  v.lo = require(j, "lo").get<double>();
  v.hi = require(j, "hi").get<double>();
  v.level = require(j, "level").get<double>();
}

void to_json(Json& j, const BootstrapCI& v) {
  j = {{"lo", v.lo},
       {"hi", v.hi},
       {"level", v.level},
       {"replicates", v.replicates},
       {"seed", v.seed},
       {"failed", v.failed},
       {"method", "percentile"},
       {"replicate_statistics", v.replicate_statistics}};
}
void from_json(const Json& j, BootstrapCI& v) {
  v.lo = require(j, "lo").get<double>();
  v.hi = require(j, "hi").get<double>();
  v.level = require(j, "level").get<double>();
  v.replicates = require(j, "replicates").get<std::size_t>();
  v.seed = require(j, "seed").get<std::uint64_t>();
  v.failed = get_or<std::size_t>(j, "failed", 0);
  v.replicate_statistics = get_or<std::vector<double>>(j, "replicate_statistics", {});
}

void to_json(Json& j, const SplitScheme& v) {
  j = {{"kind", to_string(v.kind)}};
  if (v.kind == SplitScheme::Kind::Random) j["seed"] = v.seed;
}
void from_json(const Json& j, SplitScheme& v) {
  v.kind = split_kind_from_string(require(j, "kind").get<std::string>());
  v.seed = get_or<std::uint64_t>(j, "seed", 0);
}

void to_json(Json& j, const ReliabilityEstimate& v) {
  j = {{"method", to_string(v.method)},
       {"estimate_raw", v.estimate_raw},
       {"estimate_clamped", v.estimate_clamped},
       {"sem", v.sem},
       {"n_candidates", v.n_candidates},
       {"n_items", v.n_items},
       {"ci", opt(v.ci)},
       {"warnings", v.warnings}};
}
void from_json(const Json& j, ReliabilityEstimate& v) {
  v.method = reliability_method_from_string(require(j, "method").get<std::string>());
  v.estimate_raw = require(j, "estimate_raw").get<double>();
  v.estimate_clamped = require(j, "estimate_clamped").get<double>();
  v.sem = require(j, "sem").get<double>();
  v.n_candidates = require(j, "n_candidates").get<std::size_t>();
  v.n_items = require(j, "n_items").get<std::size_t>();
  v.ci = get_opt<BootstrapCI>(j, "ci");
  v.warnings = get_or<std::vector<std::string>>(j, "warnings", {});
}

void to_json(Json& j, const SplitHalfResult& v) {
  j = {{"half_correlation", v.half_correlation},
       {"stepped_up", v.stepped_up},
       {"scheme", v.scheme},
       {"n_random_splits", v.n_random_splits},
       {"split_half_correlations", v.split_half_correlations},
       {"split_stepped_up", v.split_stepped_up}};
}
void from_json(const Json& j, SplitHalfResult& v) {
  v.half_correlation = require(j, "half_correlation").get<double>();
  v.stepped_up = require(j, "stepped_up").get<double>();
  v.scheme = require(j, "scheme").get<SplitScheme>();
  v.n_random_splits = require(j, "n_random_splits").get<std::size_t>();
  v.split_half_correlations = get_or<std::vector<double>>(j, "split_half_correlations", {});
  v.split_stepped_up = get_or<std::vector<double>>(j, "split_stepped_up", {});
}

void to_json(Json& j, const CriterionValidityReport& v) {
  j = {{"r_xy", v.r_xy},
       {"n", v.n},
       {"fisher_ci", opt(v.fisher_ci)},
       {"rel_x", opt(v.rel_x)},
       {"rel_y", opt(v.rel_y)},
       {"rel_x_source", v.rel_x_source},
       {"rel_y_source", v.rel_y_source},
       {"attenuation_bound", opt(v.attenuation_bound)},
       {"bound_satisfied", opt(v.bound_satisfied)},
       {"bound_margin", opt(v.bound_margin)},
       {"r_disattenuated", opt(v.r_disattenuated)},
       {"slack", v.slack},
       {"mode", to_string(v.mode)},
       {"ci", opt(v.ci)},
       {"warnings", v.warnings}};
}
void from_json(const Json& j, CriterionValidityReport& v) {
  v.r_xy = require(j, "r_xy").get<double>();
  v.n = require(j, "n").get<std::size_t>();
  v.fisher_ci = get_opt<Interval>(j, "fisher_ci");
  v.rel_x = get_opt<double>(j, "rel_x");
  v.rel_y = get_opt<double>(j, "rel_y");
  v.rel_x_source = get_or<std::string>(j, "rel_x_source", "");
  v.rel_y_source = get_or<std::string>(j, "rel_y_source", "");
  v.attenuation_bound = get_opt<double>(j, "attenuation_bound");
  v.bound_satisfied = get_opt<bool>(j, "bound_satisfied");
  v.bound_margin = get_opt<double>(j, "bound_margin");
  v.r_disattenuated = get_opt<double>(j, "r_disattenuated");
  v.slack = require(j, "slack").get<double>();
  v.mode = criterion_mode_from_string(require(j, "mode").get<std::string>());
  v.ci = get_opt<BootstrapCI>(j, "ci");
  v.warnings = get_or<std::vector<std::string>>(j, "warnings", {});
}

void to_json(Json& j, const MtmmTable& v) {
  Json names = Json::array();
  Json blocks = Json::array();
  Json rel = Json::array();
  for (std::size_t a = 0; a < v.size(); ++a) {
    names.push_back(v.variable_name(a));
    Json row = Json::array();
    for (std::size_t b = 0; b < v.size(); ++b) row.push_back(to_string(v.block_of(a, b)));
    blocks.push_back(std::move(row));
    rel.push_back(a < v.reliabilities.size() ? opt(v.reliabilities[a]) : Json(nullptr));
  }
  j = {{"traits", v.traits},
       {"methods", v.methods},
       {"layout", "method-major"},
       {"variables", names},
       {"n_candidates", v.candidates.size()},
       {"candidates", v.candidates},
       {"corr", to_json_matrix(v.corr)},
       {"blocks", blocks},
       {"reliabilities", rel}};
}
void from_json(const Json& j, MtmmTable& v) {
  v.traits = require(j, "traits").get<std::vector<std::string>>();
  v.methods = require(j, "methods").get<std::vector<std::string>>();
  v.candidates = get_or<std::vector<std::string>>(j, "candidates", {});
  v.corr = matrix_from_json(require(j, "corr"));
  v.reliabilities.clear();
  for (const auto& r : require(j, "reliabilities")) {
    v.reliabilities.push_back(r.is_null() ? std::nullopt : std::optional<double>(r.get<double>()));
  }
  if (static_cast<std::size_t>(v.corr.rows()) != v.size()) throw ParseError("MTMM corr size mismatch");
}

void to_json(Json& j, const MtmmViolation& v) {
  j = {{"convergent", {v.convergent.first, v.convergent.second}},
       {"competitor", {v.competitor.first, v.competitor.second}},
       {"convergent_value", v.convergent_value},
       {"competitor_value", v.competitor_value},
       {"description", v.description}};
}
void from_json(const Json& j, MtmmViolation& v) {
  const auto c = require(j, "convergent").get<std::vector<std::size_t>>();
  const auto k = require(j, "competitor").get<std::vector<std::size_t>>();
  if (c.size() != 2 || k.size() != 2) throw ParseError("MTMM violation cells must be index pairs");
  v.convergent = {c[0], c[1]};
  v.competitor = {k[0], k[1]};
  v.convergent_value = require(j, "convergent_value").get<double>();
  v.competitor_value = require(j, "competitor_value").get<double>();
  v.description = require(j, "description").get<std::string>();
}

void to_json(Json& j, const MtmmSummary& v) {
  j = {{"convergent_mean", v.convergent_mean},
       {"discriminant_mono_mean", v.discriminant_mono_mean},
       {"discriminant_hetero_mean", v.discriminant_hetero_mean},
       {"convergent_pass", v.convergent_pass},
       {"discriminant_pass", v.discriminant_pass},
       {"violations", v.violations},
       {"convergent_failures", v.convergent_failures}};
}
void from_json(const Json& j, MtmmSummary& v) {
  v.convergent_mean = require(j, "convergent_mean").get<double>();
  v.discriminant_mono_mean = require(j, "discriminant_mono_mean").get<double>();
  v.discriminant_hetero_mean = require(j, "discriminant_hetero_mean").get<double>();
  v.convergent_pass = require(j, "convergent_pass").get<bool>();
  v.discriminant_pass = require(j, "discriminant_pass").get<bool>();
  v.violations = require(j, "violations").get<std::vector<MtmmViolation>>();
  v.convergent_failures = get_or<std::vector<std::string>>(j, "convergent_failures", {});
}

// Communalities are derived from the loadings as printed, so a parsed report
// renders back to the same text.
static Eigen::VectorXd printed_communalities(const Eigen::MatrixXd& loadings) {
  Eigen::MatrixXd l = loadings;
  char buf[32];
  for (Eigen::Index i = 0; i < l.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.9e", l.data()[i]);
    l.data()[i] = std::strtod(buf, nullptr);
  }
  return l.rowwise().squaredNorm();
}

void to_json(Json& j, const FactorModel& v) {
  j = {{"indicators", v.indicators},
       {"loadings", to_json_matrix(v.loadings)},
       {"uniquenesses", to_json_vector(v.uniquenesses)},
       {"communalities", to_json_vector(printed_communalities(v.loadings))},
       {"n_factors", v.n_factors},
       {"converged", v.converged},
       {"iterations", v.iterations},
       {"rotation", to_string(v.rotation)},
       {"heywood_flags", v.heywood_flags},
       {"estimator", v.estimator}};
}
void from_json(const Json& j, FactorModel& v) {
  v.indicators = get_or<std::vector<std::string>>(j, "indicators", {});
  v.loadings = matrix_from_json(require(j, "loadings"));
  v.uniquenesses = vector_from_json(require(j, "uniquenesses"));
  v.n_factors = get_or<std::size_t>(j, "n_factors", static_cast<std::size_t>(v.loadings.cols()));
  v.converged = get_or<bool>(j, "converged", true);
  v.iterations = get_or<std::size_t>(j, "iterations", 0);
  v.rotation = rotation_from_string(get_or<std::string>(j, "rotation", "none"));
  v.heywood_flags = get_or<std::vector<std::size_t>>(j, "heywood_flags", {});
  v.estimator = get_or<std::string>(j, "estimator", "");
  if (v.uniquenesses.size() != v.loadings.rows()) throw ParseError("factor model: uniquenesses/loadings mismatch");
  if (!v.indicators.empty() && static_cast<Eigen::Index>(v.indicators.size()) != v.loadings.rows()) {
    throw ParseError("factor model: indicators/loadings mismatch");
  }
  if (v.n_factors != static_cast<std::size_t>(v.loadings.cols())) {
    throw ParseError("factor model: n_factors does not match loadings");
  }
}

void to_json(Json& j, const CfaFit& v) {
  Json pattern = Json::array();
  for (Eigen::Index r = 0; r < v.pattern.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < v.pattern.cols(); ++c) row.push_back(static_cast<bool>(v.pattern(r, c)));
    pattern.push_back(std::move(row));
  }
  j = {{"model", v.model},
       {"pattern", pattern},
       {"factor_names", v.factor_names},
       {"discrepancy", v.discrepancy},
       {"gradient_norm", v.gradient_norm},
       {"converged", v.converged},
       {"implied_corr", to_json_matrix(v.implied_corr)}};
}
void from_json(const Json& j, CfaFit& v) {
  v.model = require(j, "model").get<FactorModel>();
  const auto& p = require(j, "pattern");
  const auto rows = static_cast<Eigen::Index>(p.size());
  const auto cols = rows ? static_cast<Eigen::Index>(p[0].size()) : 0;
  v.pattern.resize(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      v.pattern(r, c) = p[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)].get<bool>();
    }
  }
  v.factor_names = get_or<std::vector<std::string>>(j, "factor_names", {});
  v.discrepancy = require(j, "discrepancy").get<double>();
  v.gradient_norm = require(j, "gradient_norm").get<double>();
  v.converged = require(j, "converged").get<bool>();
  v.implied_corr = matrix_from_json(require(j, "implied_corr"));
}

void to_json(Json& j, const FactorScores& v) {
  j = {{"candidates", v.candidates}, {"scores", to_json_matrix(v.scores)}, {"method", v.method}};
}
void from_json(const Json& j, FactorScores& v) {
  v.candidates = require(j, "candidates").get<std::vector<std::string>>();
  v.scores = matrix_from_json(require(j, "scores"));
  v.method = get_or<std::string>(j, "method", "regression");
}

void to_json(Json& j, const CttSpec& v) {
  j = {{"n_candidates", v.n_candidates},
       {"n_items", v.n_items},
       {"structure", to_string(v.structure)},
       {"true_sd", v.true_sd},
       {"error_sd", v.error_sd},
       {"seed", v.seed},
       {"metric", v.metric}};
  if (!v.loadings.empty()) j["loadings"] = v.loadings;
  if (!v.intercepts.empty()) j["intercepts"] = v.intercepts;
}
void from_json(const Json& j, CttSpec& v) {
  if (!j.is_object()) throw ParseError("CTT spec must be a JSON object");
  if (!j.contains("seed")) throw ParseError("CTT spec: 'seed' is required");
  v.n_candidates = require(j, "n_candidates").get<std::size_t>();
  v.n_items = require(j, "n_items").get<std::size_t>();
  v.structure = ctt_structure_from_string(get_or<std::string>(j, "structure", "parallel"));
  v.true_sd = get_or<double>(j, "true_sd", 1.0);
  const auto& e = require(j, "error_sd");
  v.error_sd = e.is_array() ? e.get<std::vector<double>>() : std::vector<double>{e.get<double>()};
  v.loadings = get_or<std::vector<double>>(j, "loadings", {});
  v.intercepts = get_or<std::vector<double>>(j, "intercepts", {});
  v.seed = j.at("seed").get<std::uint64_t>();
  v.metric = get_or<std::string>(j, "metric", "sim");
}

void to_json(Json& j, const FactorSimSpec& v) {
  j = {{"n_candidates", v.n_candidates},
       {"loadings", to_json_matrix(v.loadings)},
       {"uniquenesses", to_json_vector(v.uniquenesses)},
       {"seed", v.seed},
       {"metric", v.metric}};
}
void from_json(const Json& j, FactorSimSpec& v) {
  if (!j.is_object()) throw ParseError("factor spec must be a JSON object");
  if (!j.contains("seed")) throw ParseError("factor spec: 'seed' is required");
  v.n_candidates = require(j, "n_candidates").get<std::size_t>();
  v.loadings = matrix_from_json(require(j, "loadings"));
  v.uniquenesses = vector_from_json(require(j, "uniquenesses"));
  v.seed = j.at("seed").get<std::uint64_t>();
  v.metric = get_or<std::string>(j, "metric", "sim");
}

}  // namespace nlgm
