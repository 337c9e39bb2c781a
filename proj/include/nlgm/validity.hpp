#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "nlgm/stats.hpp"

namespace nlgm {

enum class CriterionMode { Concurrent, Predictive };

std::string to_string(CriterionMode mode);

struct CriterionValidityOptions {
  std::optional<double> rel_x;
  std::optional<double> rel_y;
  std::string rel_x_source;  // which estimator produced rel_x, e.g. "alpha" or "user"
  std::string rel_y_source;
  CriterionMode mode = CriterionMode::Concurrent;
  double slack = 0.05;
  double level = 0.95;
};

struct CriterionValidityReport {
  double r_xy = 0.0;
  std::size_t n = 0;
  std::optional<Interval> fisher_ci;
  std::optional<double> rel_x;
  std::optional<double> rel_y;
  std::string rel_x_source;
  std::string rel_y_source;
  // Filled only when both reliabilities are known.
  std::optional<double> attenuation_bound;  // sqrt(rel_x * rel_y)
  std::optional<bool> bound_satisfied;      // |r_xy| <= bound + slack
  std::optional<double> bound_margin;       // bound - |r_xy|
  std::optional<double> r_disattenuated;    // r_xy / bound, when bound > 0
  double slack = 0.05;
  CriterionMode mode = CriterionMode::Concurrent;
  std::optional<BootstrapCI> ci;
  std::vector<std::string> warnings;
};

double attenuation_bound(double rel_x, double rel_y);
double disattenuate(double r_xy, double rel_x, double rel_y);

CriterionValidityReport criterion_validity(const Eigen::Ref<const Eigen::VectorXd>& x_scores,
                                           const Eigen::Ref<const Eigen::VectorXd>& y_criterion,
                                           const CriterionValidityOptions& options = {});

// ---------------------------------------------------------------------------
// Multitrait-multimethod

struct MtmmCell {
  std::string trait;
  std::string method;
  std::vector<std::string> candidates;
  Eigen::VectorXd scores;  // candidate-level total scores, aligned with `candidates`
  std::optional<double> reliability;
};

enum class MtmmBlock { ReliabilityDiagonal, MonotraitHeteromethod, HeterotraitMonomethod, HeterotraitHeteromethod };

std::string to_string(MtmmBlock block);

// Traits and methods are sorted lexicographically. Variables are laid out
// method-major: index(t, m) = m * n_traits + t.
struct MtmmTable {
  std::vector<std::string> traits;
  std::vector<std::string> methods;
  std::vector<std::string> candidates;
  Eigen::MatrixXd corr;
  std::vector<std::optional<double>> reliabilities;  // per variable index

  std::size_t size() const { return traits.size() * methods.size(); }
  std::size_t index(std::size_t trait, std::size_t method) const { return method * traits.size() + trait; }
  std::size_t trait_of(std::size_t index) const { return index % traits.size(); }
  std::size_t method_of(std::size_t index) const { return index / traits.size(); }
  std::string variable_name(std::size_t index) const;
  MtmmBlock block_of(std::size_t i, std::size_t j) const;
};

MtmmTable build_mtmm(const std::vector<MtmmCell>& cells);

struct MtmmThresholds {
  double convergent_min_mean = 0.5;
};

struct MtmmViolation {
  std::pair<std::size_t, std::size_t> convergent;  // monotrait-heteromethod cell
  std::pair<std::size_t, std::size_t> competitor;  // heterotrait cell that is >= it
  double convergent_value = 0.0;
  double competitor_value = 0.0;
  std::string description;
};

struct MtmmSummary {
  double convergent_mean = 0.0;
  double discriminant_mono_mean = 0.0;
  double discriminant_hetero_mean = 0.0;
  bool convergent_pass = false;
  bool discriminant_pass = false;
  std::vector<MtmmViolation> violations;
  std::vector<std::string> convergent_failures;  // nonpositive convergent cells, or a low mean
};

// Convergent: every monotrait-heteromethod cell > 0 and their mean >= the
// threshold. Discriminant: every monotrait-heteromethod cell strictly exceeds
// each heterotrait cell in the rows of either of its two variables.
MtmmSummary campbell_fiske(const MtmmTable& table, const MtmmThresholds& thresholds = {});

}  // namespace nlgm
