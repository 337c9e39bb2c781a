#include "nlgm/report.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <sstream>

#include <openssl/evp.h>

#include "nlgm/error.hpp"

namespace nlgm {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

Json analysis_to_json(const Analysis& analysis) {
  return std::visit(
      overloaded{
          [](const ReliabilityAnalysis& a) {
            Json j = {{"estimate", a.estimate}};
            j["split"] = a.split ? Json(*a.split) : Json(nullptr);
            return j;
          },
          [](const CriterionValidityReport& a) { return Json(a); },
          [](const MtmmAnalysis& a) {
            Json j = {{"table", a.table}};
            j["summary"] = a.summary ? Json(*a.summary) : Json(nullptr);
            return j;
          },
          [](const EfaAnalysis& a) {
            return Json{{"model", a.model}, {"eigenvalues", to_json_vector(a.eigenvalues)}};
          },
          [](const CfaFit& a) { return Json(a); },
          [](const FactorScores& a) { return Json(a); },
          [](const SuggestKAnalysis& a) {
            return Json{{"eigenvalues", to_json_vector(a.eigenvalues)},
                        {"suggested_k", a.suggested_k},
                        {"rule", "kaiser"}};
          },
          [](const SimulationSummary& a) {
            Json j = {{"kind", a.kind},
                      {"spec", a.spec},
                      {"seed", a.seed},
                      {"n_candidates", a.n_candidates},
                      {"n_items", a.n_items},
                      {"true_reliability_total", a.true_reliability_total},
                      {"output_csv", a.output_csv},
                      {"output_digest", a.output_digest}};
            j["population_validity"] = a.population_validity ? Json(*a.population_validity) : Json(nullptr);
            return j;
          },
      },
      analysis);
}

Analysis analysis_from_json(const std::string& type, const Json& j) {
  if (type == "reliability") {
    ReliabilityAnalysis a;
    a.estimate = j.at("estimate").get<ReliabilityEstimate>();
    if (j.contains("split") && !j["split"].is_null()) a.split = j["split"].get<SplitHalfResult>();
    return a;
  }
  if (type == "criterion-validity") return j.get<CriterionValidityReport>();
  if (type == "mtmm") {
    MtmmAnalysis a;
    a.table = j.at("table").get<MtmmTable>();
    if (j.contains("summary") && !j["summary"].is_null()) a.summary = j["summary"].get<MtmmSummary>();
    return a;
  }
  if (type == "efa") return EfaAnalysis{j.at("model").get<FactorModel>(), vector_from_json(j.at("eigenvalues"))};
  if (type == "cfa") return j.get<CfaFit>();
  if (type == "factor-scores") return j.get<FactorScores>();
  if (type == "suggest-k") {
    return SuggestKAnalysis{vector_from_json(j.at("eigenvalues")), j.at("suggested_k").get<std::size_t>()};
  }
  if (type == "simulation") {
    SimulationSummary s;
    s.kind = j.at("kind").get<std::string>();
    s.spec = j.at("spec");
    s.seed = j.at("seed").get<std::uint64_t>();
    s.n_candidates = j.at("n_candidates").get<std::size_t>();
    s.n_items = j.at("n_items").get<std::size_t>();
    s.true_reliability_total = j.at("true_reliability_total").get<double>();
    if (j.contains("population_validity") && !j["population_validity"].is_null()) {
      s.population_validity = j["population_validity"].get<double>();
    }
    s.output_csv = j.at("output_csv").get<std::string>();
    s.output_digest = j.at("output_digest").get<std::string>();
    return s;
  }
  throw ParseError("unknown analysis_type '" + type + "'");
}

void write_canonical(std::string& out, const Json& j, int indent) {
  const std::string pad(static_cast<std::size_t>(indent) * 2, ' ');
  const std::string inner(static_cast<std::size_t>(indent + 1) * 2, ' ');
  switch (j.type()) {
    case Json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out += "{\n";
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) out += ",\n";
        first = false;
        out += inner + Json(it.key()).dump() + ": ";
        write_canonical(out, it.value(), indent + 1);
      }
      out += "\n" + pad + "}";
      return;
    }
    case Json::value_t::array: {
      if (j.empty()) {
        out += "[]";
        return;
      }
      const bool scalars = std::all_of(j.begin(), j.end(), [](const Json& e) { return e.is_primitive(); });
      if (scalars) {
        out += "[";
        for (std::size_t i = 0; i < j.size(); ++i) {
          if (i) out += ", ";
          write_canonical(out, j[i], indent + 1);
        }
        out += "]";
        return;
      }
      out += "[\n";
      for (std::size_t i = 0; i < j.size(); ++i) {
        if (i) out += ",\n";
        out += inner;
        write_canonical(out, j[i], indent + 1);
      }
      out += "\n" + pad + "]";
      return;
    }
    case Json::value_t::number_float:
      out += format_number(j.get<double>());
      return;
    default:
      out += j.dump();
      return;
  }
}

std::string f4(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  std::string s = buf;
  if (s == "-0.0000") s = "0.0000";
  return s;
}

std::string f4(const std::optional<double>& v) { return v ? f4(*v) : "n/a"; }

std::string md_matrix(const Eigen::MatrixXd& m, const std::vector<std::string>& row_names,
                      const std::vector<std::string>& col_names) {
  std::string out = "|  |";
  for (const auto& c : col_names) out += " " + c + " |";
  out += "\n|---|";
  for (std::size_t c = 0; c < col_names.size(); ++c) out += "---:|";
  out += "\n";
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    out += "| " + row_names[static_cast<std::size_t>(r)] + " |";
    for (Eigen::Index c = 0; c < m.cols(); ++c) out += " " + f4(m(r, c)) + " |";
    out += "\n";
  }
  return out;
}

std::vector<std::string> numbered(const char* prefix, Eigen::Index n) {
  std::vector<std::string> v;
  for (Eigen::Index i = 0; i < n; ++i) v.push_back(prefix + std::to_string(i + 1));
  return v;
}

std::vector<std::string> indicator_names(const FactorModel& m) {
  return m.indicators.empty() ? numbered("x", m.loadings.rows()) : m.indicators;
}

std::string md_ci(const std::optional<BootstrapCI>& ci) {
  if (!ci) return "";
  char level[32];
  std::snprintf(level, sizeof level, "%g", ci->level * 100.0);
  std::ostringstream s;
  s << "- bootstrap " << level << "% percentile CI: [" << f4(ci->lo) << ", "
    << f4(ci->hi) << "] (" << ci->replicates << " replicates, seed " << ci->seed << ", " << ci->failed
    << " failed)\n";
  return s.str();
}

std::string md_factor_model(const FactorModel& m) {
  std::ostringstream s;
  s << "- estimator: " << m.estimator << "\n- factors: " << m.n_factors << "\n- rotation: " << to_string(m.rotation)
    << "\n- converged: " << (m.converged ? "yes" : "no") << " (" << m.iterations << " iterations)\n";
  if (!m.heywood_flags.empty()) {
    s << "- Heywood items:";
    for (auto j : m.heywood_flags) s << " " << indicator_names(m)[j];
    s << "\n";
  }
  Eigen::MatrixXd table(m.loadings.rows(), m.loadings.cols() + 2);
  table << m.loadings, m.communalities(), m.uniquenesses;
  auto cols = numbered("F", m.loadings.cols());
  cols.push_back("communality");
  cols.push_back("uniqueness");
  s << "\n" << md_matrix(table, indicator_names(m), cols);
  return s.str();
}

std::string markdown_body(const Analysis& analysis) {
  std::ostringstream s;
  std::visit(
      overloaded{
          [&](const ReliabilityAnalysis& a) {
            const auto& e = a.estimate;
            s << "## Reliability (" << to_string(e.method) << ")\n\n"
              << "- estimate (raw): " << f4(e.estimate_raw) << "\n- estimate (clamped): " << f4(e.estimate_clamped)
              << "\n- standard error of measurement: " << f4(e.sem) << "\n- candidates: " << e.n_candidates
              << "\n- items: " << e.n_items << "\n"
              << md_ci(e.ci);
            if (a.split) {
              s << "\n### Split-half\n\n- scheme: " << to_string(a.split->scheme.kind)
                << "\n- splits: " << a.split->n_random_splits << "\n- half correlation: "
                << f4(a.split->half_correlation) << "\n- stepped up: " << f4(a.split->stepped_up) << "\n";
            }
          },
          [&](const CriterionValidityReport& a) {
            s << "## Criterion validity (" << to_string(a.mode) << ")\n\n"
              << "- r_xy: " << f4(a.r_xy) << " (n = " << a.n << ")\n";
            if (a.fisher_ci) {
              s << "- Fisher-z interval: [" << f4(a.fisher_ci->lo) << ", " << f4(a.fisher_ci->hi) << "]\n";
            }
            s << "- rel_x: " << f4(a.rel_x) << (a.rel_x ? " (" + a.rel_x_source + ")" : "") << "\n"
              << "- rel_y: " << f4(a.rel_y) << (a.rel_y ? " (" + a.rel_y_source + ")" : "") << "\n"
              << "- attenuation bound: " << f4(a.attenuation_bound) << "\n";
            if (a.bound_satisfied) {
              s << "- bound satisfied: " << (*a.bound_satisfied ? "yes" : "no") << " (margin "
                << f4(a.bound_margin) << ", slack " << f4(a.slack) << ")\n";
            }
            s << "- disattenuated r: " << f4(a.r_disattenuated) << "\n" << md_ci(a.ci);
          },
          [&](const MtmmAnalysis& a) {
            std::vector<std::string> names;
            for (std::size_t i = 0; i < a.table.size(); ++i) names.push_back(a.table.variable_name(i));
            s << "## Multitrait-multimethod table\n\n- traits: " << a.table.traits.size()
              << "\n- methods: " << a.table.methods.size() << "\n- candidates: " << a.table.candidates.size()
              << "\n\n"
              << md_matrix(a.table.corr, names, names);
            if (a.summary) {
              const auto& m = *a.summary;
              s << "\n### Campbell-Fiske checks\n\n- convergent mean: " << f4(m.convergent_mean)
                << "\n- heterotrait-monomethod mean: " << f4(m.discriminant_mono_mean)
                << "\n- heterotrait-heteromethod mean: " << f4(m.discriminant_hetero_mean)
                << "\n- convergent: " << (m.convergent_pass ? "pass" : "fail")
                << "\n- discriminant: " << (m.discriminant_pass ? "pass" : "fail") << "\n";
              for (const auto& f : m.convergent_failures) s << "  - " << f << "\n";
              for (const auto& v : m.violations) s << "  - " << v.description << "\n";
            }
          },
          [&](const EfaAnalysis& a) {
            s << "## Exploratory factor analysis\n\n" << md_factor_model(a.model) << "\n### Eigenvalues\n\n";
            for (Eigen::Index i = 0; i < a.eigenvalues.size(); ++i) s << i + 1 << ". " << f4(a.eigenvalues(i)) << "\n";
          },
          [&](const CfaFit& a) {
            s << "## Confirmatory factor analysis\n\n- ML discrepancy: " << f4(a.discrepancy)
              << "\n- gradient norm: " << a.gradient_norm << "\n"
              << md_factor_model(a.model);
          },
          [&](const FactorScores& a) {
            s << "## Factor scores (" << a.method << ")\n\n"
              << md_matrix(a.scores, a.candidates, numbered("F", a.scores.cols()));
          },
          [&](const SuggestKAnalysis& a) {
            s << "## Number of factors (Kaiser rule)\n\n- suggested: " << a.suggested_k << "\n\n";
            for (Eigen::Index i = 0; i < a.eigenvalues.size(); ++i) s << i + 1 << ". " << f4(a.eigenvalues(i)) << "\n";
          },
          [&](const SimulationSummary& a) {
            s << "## Simulation (" << a.kind << ")\n\n- seed: " << a.seed << "\n- candidates: " << a.n_candidates
              << "\n- items: " << a.n_items << "\n- analytic total reliability: " << f4(a.true_reliability_total)
              << "\n";
            if (a.population_validity) s << "- population validity coefficient: " << f4(*a.population_validity) << "\n";
            s << "- output: " << a.output_csv << " (" << a.output_digest << ")\n";
          },
      },
      analysis);
  return s.str();
}

void add_csv_row(std::string& out, std::initializer_list<std::string> fields) {
  bool first = true;
  for (const auto& f : fields) {
    if (!first) out += ',';
    first = false;
    out += f;
  }
  out += '\n';
}

std::string replicate_series(const BootstrapCI& ci) {
  std::string out = "replicate,statistic\n";
  for (std::size_t i = 0; i < ci.replicate_statistics.size(); ++i) {
    add_csv_row(out, {std::to_string(i), format_number(ci.replicate_statistics[i])});
  }
  return out;
}

std::string scree_series(const Eigen::VectorXd& eig) {
  std::string out = "factor,eigenvalue\n";
  for (Eigen::Index i = 0; i < eig.size(); ++i) add_csv_row(out, {std::to_string(i + 1), format_number(eig(i))});
  return out;
}

}  // namespace

std::string analysis_type(const Analysis& analysis) {
  static const char* names[] = {"reliability", "criterion-validity", "mtmm", "efa", "cfa",
                                "factor-scores", "suggest-k", "simulation"};
  return names[analysis.index()];
}

std::string format_number(double v) {
  if (!std::isfinite(v)) return "null";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9e", v);
  double rounded = std::strtod(buf, nullptr);
  if (rounded == 0.0) rounded = 0.0;  // drops the sign of -0
  const auto res = std::to_chars(buf, buf + sizeof buf, rounded);
  std::string s(buf, res.ptr);
  if (s.find_first_of(".e") == std::string::npos) s += ".0";
  return s;
}

std::string canonical_json(const Json& j) {
  std::string out;
  write_canonical(out, j, 0);
  out += "\n";
  return out;
}

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("SHA-256 computation failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 0xF];
  }
  return out;
}

AnalysisReport make_report(Analysis analysis, Json options, std::string input_digest,
                           std::vector<std::string> extra_warnings, std::optional<std::string> created_at) {
  AnalysisReport r;
  r.created_at = std::move(created_at);
  r.input_digest = std::move(input_digest);
  r.options = std::move(options);
  std::visit(overloaded{
                 [&](const ReliabilityAnalysis& a) {
                   r.warnings.insert(r.warnings.end(), a.estimate.warnings.begin(), a.estimate.warnings.end());
                   if (a.estimate.ci && a.estimate.ci->failed) {
                     r.warnings.push_back("bootstrap: " + std::to_string(a.estimate.ci->failed) +
                                          " degenerate replicates excluded");
                   }
                 },
                 [&](const CriterionValidityReport& a) {
                   r.warnings.insert(r.warnings.end(), a.warnings.begin(), a.warnings.end());
                 },
                 [&](const MtmmAnalysis& a) {
                   if (!a.summary) return;
                   for (const auto& f : a.summary->convergent_failures) r.warnings.push_back("convergent: " + f);
                   for (const auto& v : a.summary->violations) r.warnings.push_back("discriminant: " + v.description);
                 },
                 [&](const EfaAnalysis& a) {
                   const auto names = indicator_names(a.model);
                   for (auto j : a.model.heywood_flags) {
                     r.warnings.push_back("Heywood case: communality of '" + names[j] + "' capped");
                   }
                   if (!a.model.converged) r.warnings.push_back("principal-axis iteration did not converge");
                 },
                 [&](const CfaFit& a) {
                   const auto names = indicator_names(a.model);
                   for (auto j : a.model.heywood_flags) {
                     r.warnings.push_back("Heywood case: uniqueness of '" + names[j] + "' near zero");
                   }
                   if (!a.converged) r.warnings.push_back("CFA optimizer did not converge");
                 },
                 [](const auto&) {},
             },
             analysis);
  r.warnings.insert(r.warnings.end(), extra_warnings.begin(), extra_warnings.end());
  r.analysis = std::move(analysis);
  return r;
}

std::string render(const AnalysisReport& report, ReportFormat format) {
  if (format == ReportFormat::Json) {
    Json j = {{"schema_version", report.schema_version},
              {"input_digest", report.input_digest},
              {"analysis_type", analysis_type(report.analysis)},
              {"analysis", analysis_to_json(report.analysis)},
              {"options", report.options},
              {"warnings", report.warnings}};
    j["created_at"] = report.created_at ? Json(*report.created_at) : Json(nullptr);
    return canonical_json(j);
  }
  std::ostringstream s;
  s << "# " << analysis_type(report.analysis) << " report\n\n"
    << "- schema version: " << report.schema_version << "\n"
    << "- input digest: " << report.input_digest << "\n";
  if (report.created_at) s << "- created at: " << *report.created_at << "\n";
  if (!report.options.empty()) {
    s << "- options:";
    for (auto it = report.options.begin(); it != report.options.end(); ++it) {
      s << " " << it.key() << "=" << (it.value().is_string() ? it.value().get<std::string>() : it.value().dump());
    }
    s << "\n";
  }
  s << "\n" << markdown_body(report.analysis);
  if (!report.warnings.empty()) {
    s << "\n## Warnings\n\n";
    for (const auto& w : report.warnings) s << "- " << w << "\n";
  }
  return s.str();
}

AnalysisReport parse_report(std::string_view json) {
  Json j;
  try {
    j = Json::parse(json);
  } catch (const Json::parse_error& e) {
    throw ParseError(std::string("invalid report JSON: ") + e.what());
  }
  try {
    AnalysisReport r;
    r.schema_version = j.at("schema_version").get<std::string>();
    if (r.schema_version != kSchemaVersion) throw ParseError("unsupported schema_version '" + r.schema_version + "'");
    if (!j.at("created_at").is_null()) r.created_at = j["created_at"].get<std::string>();
    r.input_digest = j.at("input_digest").get<std::string>();
    r.analysis = analysis_from_json(j.at("analysis_type").get<std::string>(), j.at("analysis"));
    r.options = j.at("options");
    r.warnings = j.at("warnings").get<std::vector<std::string>>();
    return r;
  } catch (const Json::exception& e) {
    throw ParseError(std::string("malformed report: ") + e.what());
  }
}

std::string plot_data(const AnalysisReport& report) {
  return std::visit(
      overloaded{
          [](const ReliabilityAnalysis& a) -> std::string {
            if (!a.estimate.ci) throw DomainError("reliability report has no bootstrap replicates to plot");
            return replicate_series(*a.estimate.ci);
          },
          [](const CriterionValidityReport& a) -> std::string {
            if (!a.ci) throw DomainError("criterion validity report has no bootstrap replicates to plot");
            return replicate_series(*a.ci);
          },
          [](const MtmmAnalysis& a) {
            std::string out = "row,column,block,value\n";
            for (std::size_t i = 0; i < a.table.size(); ++i) {
              for (std::size_t c = 0; c < a.table.size(); ++c) {
                add_csv_row(out, {a.table.variable_name(i), a.table.variable_name(c),
                                  to_string(a.table.block_of(i, c)),
                                  format_number(a.table.corr(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)))});
              }
            }
            return out;
          },
          [](const EfaAnalysis& a) { return scree_series(a.eigenvalues); },
          [](const SuggestKAnalysis& a) { return scree_series(a.eigenvalues); },
          [](const CfaFit& a) {
            std::string out = "indicator,factor,loading\n";
            const auto names = indicator_names(a.model);
            for (Eigen::Index j = 0; j < a.model.loadings.rows(); ++j) {
              for (Eigen::Index k = 0; k < a.model.loadings.cols(); ++k) {
                const std::string factor = static_cast<std::size_t>(k) < a.factor_names.size()
                                               ? a.factor_names[static_cast<std::size_t>(k)]
                                               : "F" + std::to_string(k + 1);
                add_csv_row(out, {names[static_cast<std::size_t>(j)], factor, format_number(a.model.loadings(j, k))});
              }
            }
            return out;
          },
          [](const FactorScores& a) {
            std::string out = "candidate";
            for (Eigen::Index k = 0; k < a.scores.cols(); ++k) out += ",F" + std::to_string(k + 1);
            out += "\n";
            for (Eigen::Index i = 0; i < a.scores.rows(); ++i) {
              out += a.candidates[static_cast<std::size_t>(i)];
              for (Eigen::Index k = 0; k < a.scores.cols(); ++k) out += "," + format_number(a.scores(i, k));
              out += "\n";
            }
            return out;
          },
          [](const SimulationSummary&) -> std::string {
            throw DomainError("simulation summary has no plottable series");
          },
      },
      report.analysis);
}

}  // namespace nlgm
