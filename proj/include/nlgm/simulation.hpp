#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "nlgm/data_ingest.hpp"

namespace nlgm {

enum class CttStructure { Parallel, TauEquivalent, Congeneric };

std::string to_string(CttStructure structure);

// Item score Y_ij = a_j * T_i + c_j + E_ij with T_i ~ N(0, true_sd^2) and
// E_ij ~ N(0, error_sd_j^2), all independent.
//   parallel       a_j = 1, c_j = 0, one common error sd
//   tau-equivalent a_j = 1, c_j from `intercepts` (default 0), error sds may differ
//   congeneric     a_j from `loadings`, c_j from `intercepts`
struct CttSpec {
  std::size_t n_candidates = 0;
  std::size_t n_items = 0;
  CttStructure structure = CttStructure::Parallel;
  double true_sd = 1.0;
  std::vector<double> error_sd;  // length 1 (broadcast) or n_items
  std::vector<double> loadings;  // congeneric only, length n_items
  std::vector<double> intercepts;  // empty or length n_items
  std::uint64_t seed = 0;
  std::string metric = "sim";
};

struct FactorSimSpec {
  std::size_t n_candidates = 0;
  Eigen::MatrixXd loadings;      // J x K
  Eigen::VectorXd uniquenesses;  // length J
  std::uint64_t seed = 0;
  std::string metric = "sim";
};

struct SimulatedDataset {
  ScoreMatrix observed;
  // True score of each candidate's total: sum_j (a_j T_i + c_j) for CTT
  // data, sum_j (Lambda f_i)_j for factor data.
  Eigen::VectorXd true_scores;
  // Analytic population mean/sd of true_scores and reliability of the total.
  double true_score_mean = 0.0;
  double true_score_sd = 0.0;
  double true_reliability_total = 0.0;
  std::optional<Eigen::VectorXd> latent_trait;     // T (CTT)
  std::optional<Eigen::MatrixXd> latent_factors;   // f, N x K (factor)
  std::uint64_t seed = 0;
};

// Analytic reliability of the total score: (sum a)^2 sd_T^2 / ((sum a)^2 sd_T^2 + sum sd_j^2).
double ctt_total_reliability(const CttSpec& spec);

// Error sd per item of a parallel test with J items and true_sd 1 whose
// total score has the requested reliability.
double parallel_error_sd_for(double reliability, std::size_t n_items, double true_sd = 1.0);

// Random streams: T from (seed, 0), administration a's errors from (seed, 1 + a).
SimulatedDataset generate_ctt(const CttSpec& spec);
std::pair<SimulatedDataset, SimulatedDataset> generate_retest(const CttSpec& spec);

// f ~ N(0, I_K) from stream (seed, 0); u ~ N(0, diag(uniquenesses)) from (seed, 1).
SimulatedDataset generate_factor(const FactorSimSpec& spec);

// Criterion Y = c z + sqrt(1 - c^2) w + e, with z the standardized true
// score, w ~ N(0, 1) from (seed, 0) and e ~ N(0, (1 - rel_y) / rel_y) from
// (seed, 1). Population corr(X, Y) = c * sqrt(rel_X * rel_y).
Eigen::VectorXd generate_criterion(const SimulatedDataset& dataset, double criterion_reliability,
                                   double latent_corr, std::uint64_t seed);

// Long-format export compatible with parse_records.
std::vector<ScoreRecord> to_records(const ScoreMatrix& m, const std::optional<std::string>& run_id = std::nullopt);
std::vector<ScoreRecord> criterion_records(const std::vector<std::string>& candidates,
                                           const Eigen::VectorXd& criterion,
                                           const std::string& metric = "criterion");

}  // namespace nlgm
