#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nlgm/data_ingest.hpp"

namespace nlgm {

enum class Rotation { None, Varimax };

std::string to_string(Rotation rotation);

// Linear factor model x = Lambda f + u with unit-variance, uncorrelated
// factors. For standardized indicators communality_j + uniqueness_j = 1.
struct FactorModel {
  std::vector<std::string> indicators;  // column names; may be empty
  Eigen::MatrixXd loadings;             // J x K
  Eigen::VectorXd uniquenesses;         // length J, variance of u_j
  std::size_t n_factors = 0;
  bool converged = false;
  std::size_t iterations = 0;
  Rotation rotation = Rotation::None;
  std::vector<std::size_t> heywood_flags;
  std::string estimator;  // "principal-axis" or "ml-cfa"

  Eigen::VectorXd communalities() const { return loadings.rowwise().squaredNorm(); }
  Eigen::MatrixXd implied_covariance() const;
};

struct EfaOptions {
  std::size_t max_iter = 1000;
  double tol = 1e-6;
  double heywood_cap = 0.995;
  double psd_tolerance = 1e-6;
};

// Per-iteration residual of the off-diagonal fit, corr - Lambda Lambda^T.
struct EfaTrace {
  std::vector<double> offdiag_max_abs;
  std::vector<double> offdiag_sum_squares;
};

// Eigenvalues in descending order.
Eigen::VectorXd eigenvalues_descending(const Eigen::MatrixXd& symmetric);

// Iterated principal-axis factoring. Starts from squared multiple
// correlations (max |r| per row when corr is singular). Communalities above
// the Heywood cap are capped and flagged. Each factor's largest-magnitude
// loading is made positive. Not converging is reported in the model, not
// thrown.
FactorModel efa(const Eigen::MatrixXd& corr, std::size_t n_factors, const EfaOptions& options = {},
                EfaTrace* trace = nullptr);

// Kaiser rule: number of eigenvalues strictly greater than 1.
std::size_t suggest_n_factors(const Eigen::MatrixXd& corr);

// Orthogonal varimax rotation with Kaiser row normalization.
Eigen::MatrixXd varimax(const Eigen::MatrixXd& loadings, std::size_t max_iter = 1000, double tol = 1e-10);

FactorModel rotate_varimax(const FactorModel& model);

// Makes the largest-magnitude loading of each factor positive.
void normalize_signs(Eigen::MatrixXd& loadings);

// ---------------------------------------------------------------------------
// Maximum-likelihood confirmatory factor analysis

using LoadingPattern = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;

struct CfaOptions {
  std::size_t max_iter = 500;
  double tol = 1e-6;
};

struct CfaFit {
  FactorModel model;
  LoadingPattern pattern;
  std::vector<std::string> factor_names;
  double discrepancy = 0.0;
  double gradient_norm = 0.0;
  bool converged = false;
  Eigen::MatrixXd implied_corr;
};

CfaFit cfa_fit(const Eigen::MatrixXd& sample_corr, const LoadingPattern& pattern, const CfaOptions& options = {});

namespace cfa {

// Parameter vector: free loadings in column-major pattern order, then
// log-uniquenesses (length J).
std::size_t n_params(const LoadingPattern& pattern);
Eigen::VectorXd pack(const Eigen::MatrixXd& loadings, const Eigen::VectorXd& uniquenesses,
                     const LoadingPattern& pattern);
void unpack(const Eigen::VectorXd& theta, const LoadingPattern& pattern, Eigen::MatrixXd& loadings,
            Eigen::VectorXd& uniquenesses);

// F = ln|Sigma| + tr(S Sigma^-1) - ln|S| - J.
double ml_discrepancy(const Eigen::MatrixXd& sample, const Eigen::MatrixXd& implied);

double objective(const Eigen::MatrixXd& sample, const LoadingPattern& pattern, const Eigen::VectorXd& theta);
Eigen::VectorXd gradient(const Eigen::MatrixXd& sample, const LoadingPattern& pattern, const Eigen::VectorXd& theta);

}  // namespace cfa

// ---------------------------------------------------------------------------

struct FactorScores {
  std::vector<std::string> candidates;
  Eigen::MatrixXd scores;  // N x K
  std::string method = "regression";
};

// Regression (Thurstone) scores f = z^T Sigma^-1 Lambda for each candidate,
// with z the column-standardized scores. Columns are matched to the model's
// indicator names when it has them.
FactorScores factor_scores(const ScoreMatrix& m, const FactorModel& model);

}  // namespace nlgm
