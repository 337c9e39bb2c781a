#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace nlgm {

// One observed metric score. run_id and rater_id carry the repeatable
// fluctuation sources (sampling run, human rater, reference choice).
struct ScoreRecord {
  std::string candidate_id;
  std::string item_id;
  std::string metric_id;
  std::optional<std::string> run_id;
  std::optional<std::string> rater_id;
  double score = 0.0;

  bool operator==(const ScoreRecord&) const = default;
};

// Candidates x items. Rows and columns are kept in lexicographic order by
// pivot(); other producers (simulation, resampling) document their order.
struct ScoreMatrix {
  std::vector<std::string> candidates;
  std::vector<std::string> items;
  Eigen::MatrixXd values;
  std::string label;

  Eigen::Index n_candidates() const { return values.rows(); }
  Eigen::Index n_items() const { return values.cols(); }
  // Per-candidate total score X = sum_j Y_j.
  Eigen::VectorXd totals() const { return values.rowwise().sum(); }
  // Sub-matrix over the given column indices, in the given order.
  ScoreMatrix select_items(const std::vector<Eigen::Index>& cols) const;

  bool operator==(const ScoreMatrix& o) const {
    return candidates == o.candidates && items == o.items && label == o.label &&
           values.rows() == o.values.rows() && values.cols() == o.values.cols() &&
           values == o.values;
  }
};

enum class RecordFormat { CsvLong, Json };

std::vector<ScoreRecord> parse_records(std::string_view bytes, RecordFormat format);

// Serializes in the long CSV schema with round-trip float formatting.
std::string write_records_csv(const std::vector<ScoreRecord>& records);

struct Aggregation {
  enum class Kind { MeanOverRuns, MeanOverRaters, SingleRun, SingleRater };
  Kind kind = Kind::MeanOverRuns;
  std::string id;  // run or rater id for the Single* kinds

  static Aggregation mean_over_runs() { return {Kind::MeanOverRuns, {}}; }
  static Aggregation mean_over_raters() { return {Kind::MeanOverRaters, {}}; }
  static Aggregation single_run(std::string id) { return {Kind::SingleRun, std::move(id)}; }
  static Aggregation single_rater(std::string id) { return {Kind::SingleRater, std::move(id)}; }
};

enum class MissingPolicy { Error, DropCandidate, DropItem };

// Pivots one metric to candidates x items.
//
// Cell value under each aggregation:
//   mean-over-runs    mean over runs within each rater, then mean over raters
//   mean-over-raters  mean over raters within each run, then mean over runs
//   single-run(R)     records with run_id == R, mean over raters
//   single-rater(R)   records with rater_id == R, mean over runs
// Absent run/rater ids form their own group. Balanced data gives the grand
// mean of the cell under both mean-over-* kinds.
ScoreMatrix pivot(const std::vector<ScoreRecord>& records, const std::string& metric,
                  const Aggregation& aggregation = {}, MissingPolicy missing = MissingPolicy::Error);

// Candidates x metrics, where each cell is the candidate's mean item score
// for that metric (items pivoted with the same aggregation/policy). Used
// when metrics are the indicators, as in factor analysis over metrics.
ScoreMatrix pivot_by_metric(const std::vector<ScoreRecord>& records,
                            const Aggregation& aggregation = {},
                            MissingPolicy missing = MissingPolicy::Error);

std::vector<std::string> metric_ids(const std::vector<ScoreRecord>& records);

struct SplitScheme {
  enum class Kind { OddEven, FirstSecond, Random };
  Kind kind = Kind::OddEven;
  std::uint64_t seed = 0;  // Random only

  static SplitScheme odd_even() { return {Kind::OddEven, 0}; }
  static SplitScheme first_second() { return {Kind::FirstSecond, 0}; }
  static SplitScheme random(std::uint64_t seed) { return {Kind::Random, seed}; }
};

std::string to_string(SplitScheme::Kind kind);

// Column index sets of the two halves. Random permutes columns with stream
// (seed, stream_index) and then alternates.
std::pair<std::vector<Eigen::Index>, std::vector<Eigen::Index>> split_indices(
    Eigen::Index n_items, const SplitScheme& scheme, std::uint64_t stream_index = 0);

std::pair<ScoreMatrix, ScoreMatrix> split_matrix(const ScoreMatrix& m, const SplitScheme& scheme,
                                                 std::uint64_t stream_index = 0);

}  // namespace nlgm
