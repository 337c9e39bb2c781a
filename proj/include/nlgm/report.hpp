#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "nlgm/serialize.hpp"

namespace nlgm {

inline constexpr const char* kSchemaVersion = "1";

struct ReliabilityAnalysis {
  ReliabilityEstimate estimate;
  std::optional<SplitHalfResult> split;
};

struct MtmmAnalysis {
  MtmmTable table;
  std::optional<MtmmSummary> summary;
};

struct EfaAnalysis {
  FactorModel model;
  Eigen::VectorXd eigenvalues;  // of the input correlation matrix, descending
};

struct SuggestKAnalysis {
  Eigen::VectorXd eigenvalues;
  std::size_t suggested_k = 0;
};

struct SimulationSummary {
  std::string kind;  // ctt, retest, factor, criterion
  Json spec;
  std::uint64_t seed = 0;
  std::size_t n_candidates = 0;
  std::size_t n_items = 0;
  double true_reliability_total = 0.0;
  std::optional<double> population_validity;  // criterion only
  std::string output_csv;
  std::string output_digest;
};

using Analysis = std::variant<ReliabilityAnalysis, CriterionValidityReport, MtmmAnalysis, EfaAnalysis, CfaFit,
                              FactorScores, SuggestKAnalysis, SimulationSummary>;

// Stable type tag used in JSON: reliability, criterion-validity, mtmm, efa,
// cfa, factor-scores, suggest-k, simulation.
std::string analysis_type(const Analysis& analysis);

struct AnalysisReport {
  std::string schema_version = kSchemaVersion;
  std::optional<std::string> created_at;
  std::string input_digest;
  Analysis analysis;
  Json options = Json::object();
  std::vector<std::string> warnings;
};

// Fills warnings from the analysis (clamping, Heywood items, bound
// violations, MTMM failures) followed by `extra`.
AnalysisReport make_report(Analysis analysis, Json options, std::string input_digest,
                           std::vector<std::string> extra_warnings = {},
                           std::optional<std::string> created_at = std::nullopt);

enum class ReportFormat { Json, Markdown };

// JSON output is canonical: sorted keys, 2-space indent, floats rounded to
// 10 significant digits and printed in shortest round-trip form.
std::string render(const AnalysisReport& report, ReportFormat format);

AnalysisReport parse_report(std::string_view json);

// CSV series for external plotting. Throws DomainError when the analysis has
// nothing to plot.
std::string plot_data(const AnalysisReport& report);

std::string canonical_json(const Json& j);
// Float formatting used by canonical JSON and plot data.
std::string format_number(double v);

std::string sha256_hex(std::string_view bytes);

}  // namespace nlgm
