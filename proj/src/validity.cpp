#include "nlgm/validity.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "nlgm/error.hpp"

namespace nlgm {

namespace {

void check_reliability(const std::optional<double>& rel, const char* name) {
  if (rel && !(*rel >= 0.0 && *rel <= 1.0)) {
    throw DomainError(std::string(name) + " must be in [0, 1]");
  }
}

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(6);
  s << v;
  return s.str();
}

}  // namespace

std::string to_string(CriterionMode mode) {
  return mode == CriterionMode::Concurrent ? "concurrent" : "predictive";
}

double attenuation_bound(double rel_x, double rel_y) {
  check_reliability(rel_x, "rel_x");
  check_reliability(rel_y, "rel_y");
  return std::sqrt(rel_x * rel_y);
}

double disattenuate(double r_xy, double rel_x, double rel_y) {
  const double bound = attenuation_bound(rel_x, rel_y);
  if (!(bound > 0.0)) throw DegenerateError("disattenuation undefined when a reliability is 0");
  return r_xy / bound;
}

CriterionValidityReport criterion_validity(const Eigen::Ref<const Eigen::VectorXd>& x_scores,
                                           const Eigen::Ref<const Eigen::VectorXd>& y_criterion,
                                           const CriterionValidityOptions& options) {
  check_reliability(options.rel_x, "rel_x");
  check_reliability(options.rel_y, "rel_y");
  const CorrelationResult corr = pearson(x_scores, y_criterion, options.level);

  CriterionValidityReport rep;
  rep.r_xy = corr.r;
  rep.n = corr.n;
  rep.fisher_ci = corr.fisher_ci;
  rep.rel_x = options.rel_x;
  rep.rel_y = options.rel_y;
  if (options.rel_x) rep.rel_x_source = options.rel_x_source.empty() ? "user" : options.rel_x_source;
  if (options.rel_y) rep.rel_y_source = options.rel_y_source.empty() ? "user" : options.rel_y_source;
  rep.slack = options.slack;
  rep.mode = options.mode;

  if (options.rel_x && options.rel_y) {
    const double bound = attenuation_bound(*options.rel_x, *options.rel_y);
    rep.attenuation_bound = bound;
    rep.bound_margin = bound - std::abs(rep.r_xy);
    rep.bound_satisfied = std::abs(rep.r_xy) <= bound + options.slack;
    if (!*rep.bound_satisfied) {
      rep.warnings.push_back("|r_xy| = " + fmt(std::abs(rep.r_xy)) + " exceeds attenuation bound " +
                             fmt(bound) + " + slack " + fmt(options.slack));
    }
    if (bound > 0.0) {
      rep.r_disattenuated = rep.r_xy / bound;
      if (std::abs(*rep.r_disattenuated) > 1.0) {
        rep.warnings.push_back("disattenuated correlation " + fmt(*rep.r_disattenuated) +
                               " exceeds 1 in magnitude");
      }
    } else {
      rep.warnings.push_back("disattenuation undefined: a reliability is 0");
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------

std::string to_string(MtmmBlock block) {
  switch (block) {
    case MtmmBlock::ReliabilityDiagonal:
      return "reliability-diagonal";
    case MtmmBlock::MonotraitHeteromethod:
      return "monotrait-heteromethod";
    case MtmmBlock::HeterotraitMonomethod:
      return "heterotrait-monomethod";
    case MtmmBlock::HeterotraitHeteromethod:
      return "heterotrait-heteromethod";
  }
  return "";
}

std::string MtmmTable::variable_name(std::size_t index) const {
  return traits[trait_of(index)] + "@" + methods[method_of(index)];
}

MtmmBlock MtmmTable::block_of(std::size_t i, std::size_t j) const {
  if (i == j) return MtmmBlock::ReliabilityDiagonal;
  const bool same_trait = trait_of(i) == trait_of(j);
  const bool same_method = method_of(i) == method_of(j);
  if (same_trait) return MtmmBlock::MonotraitHeteromethod;
  return same_method ? MtmmBlock::HeterotraitMonomethod : MtmmBlock::HeterotraitHeteromethod;
}

MtmmTable build_mtmm(const std::vector<MtmmCell>& cells) {
  std::set<std::string> traits;
  std::set<std::string> methods;
  for (const auto& c : cells) {
    traits.insert(c.trait);
    methods.insert(c.method);
  }
  if (traits.size() < 2) throw DomainError("MTMM requires at least 2 traits");
  if (methods.size() < 2) throw DomainError("MTMM requires at least 2 methods");

  MtmmTable t;
  t.traits.assign(traits.begin(), traits.end());
  t.methods.assign(methods.begin(), methods.end());
  std::vector<const MtmmCell*> by_index(t.size(), nullptr);
  for (const auto& c : cells) {
    const auto ti = static_cast<std::size_t>(std::lower_bound(t.traits.begin(), t.traits.end(), c.trait) - t.traits.begin());
    const auto mi = static_cast<std::size_t>(std::lower_bound(t.methods.begin(), t.methods.end(), c.method) - t.methods.begin());
    auto& slot = by_index[t.index(ti, mi)];
    if (slot) throw DomainError("duplicate MTMM cell " + c.trait + "@" + c.method);
    if (static_cast<std::size_t>(c.scores.size()) != c.candidates.size()) {
      throw DomainError("MTMM cell " + c.trait + "@" + c.method + ": scores and candidates differ in length");
    }
    if (c.reliability && !(*c.reliability >= 0.0 && *c.reliability <= 1.0)) {
      throw DomainError("MTMM cell " + c.trait + "@" + c.method + ": reliability outside [0, 1]");
    }
    slot = &c;
  }
  for (std::size_t i = 0; i < by_index.size(); ++i) {
    if (!by_index[i]) throw DomainError("missing MTMM cell " + t.variable_name(i));
  }

  // Common candidate order: sorted ids of the first cell; all cells must match as sets.
  t.candidates = by_index[0]->candidates;
  std::sort(t.candidates.begin(), t.candidates.end());
  if (std::adjacent_find(t.candidates.begin(), t.candidates.end()) != t.candidates.end()) {
    throw DomainError("duplicate candidate id in MTMM cell " + t.variable_name(0));
  }
  if (t.candidates.size() < 4) throw DomainError("MTMM requires at least 4 common candidates");
  const auto n = static_cast<Eigen::Index>(t.candidates.size());

  Eigen::MatrixXd data(n, static_cast<Eigen::Index>(t.size()));
  for (std::size_t v = 0; v < t.size(); ++v) {
    const MtmmCell& c = *by_index[v];
    std::vector<std::size_t> order(c.candidates.size());
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return c.candidates[a] < c.candidates[b]; });
    if (order.size() != t.candidates.size()) {
      throw DomainError("candidate set mismatch in MTMM cell " + t.variable_name(v));
    }
    for (std::size_t k = 0; k < order.size(); ++k) {
      if (c.candidates[order[k]] != t.candidates[k]) {
        throw DomainError("candidate set mismatch in MTMM cell " + t.variable_name(v));
      }
      data(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(v)) = c.scores(static_cast<Eigen::Index>(order[k]));
    }
    t.reliabilities.push_back(c.reliability);
  }

  t.corr = Eigen::MatrixXd::Identity(data.cols(), data.cols());
  for (Eigen::Index i = 0; i < data.cols(); ++i) {
    for (Eigen::Index j = i + 1; j < data.cols(); ++j) {
      try {
        t.corr(i, j) = t.corr(j, i) = pearson(data.col(i), data.col(j)).r;
      } catch (const DegenerateError&) {
        const auto bad = (data.col(i).array() == data(0, i)).all() ? i : j;
        throw DegenerateError("constant scores in MTMM cell " + t.variable_name(static_cast<std::size_t>(bad)));
      }
    }
  }
  return t;
}

MtmmSummary campbell_fiske(const MtmmTable& table, const MtmmThresholds& thresholds) {
  if (table.traits.size() < 2 || table.methods.size() < 2) {
    throw DomainError("MTMM table requires at least 2 traits and 2 methods");
  }
  MtmmSummary s;
  const std::size_t p = table.size();
  double sum[3] = {0, 0, 0};
  std::size_t count[3] = {0, 0, 0};
  std::vector<std::pair<std::size_t, std::size_t>> convergent;
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t j = i + 1; j < p; ++j) {
      const double v = table.corr(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      switch (table.block_of(i, j)) {
        case MtmmBlock::MonotraitHeteromethod:
          sum[0] += v, ++count[0];
          convergent.emplace_back(i, j);
          break;
        case MtmmBlock::HeterotraitMonomethod:
          sum[1] += v, ++count[1];
          break;
        case MtmmBlock::HeterotraitHeteromethod:
          sum[2] += v, ++count[2];
          break;
        case MtmmBlock::ReliabilityDiagonal:
          break;
      }
    }
  }
  s.convergent_mean = sum[0] / static_cast<double>(count[0]);
  s.discriminant_mono_mean = sum[1] / static_cast<double>(count[1]);
  s.discriminant_hetero_mean = sum[2] / static_cast<double>(count[2]);

  auto cell = [&](std::size_t a, std::size_t b) {
    return table.corr(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
  };
  auto pair_name = [&](std::size_t a, std::size_t b) {
    return "r[" + table.variable_name(a) + ", " + table.variable_name(b) + "]";
  };

  s.convergent_pass = s.convergent_mean >= thresholds.convergent_min_mean;
  if (!s.convergent_pass) {
    s.convergent_failures.push_back("convergent mean " + fmt(s.convergent_mean) + " < " +
                                    fmt(thresholds.convergent_min_mean));
  }
  for (const auto& [i, j] : convergent) {
    if (!(cell(i, j) > 0.0)) {
      s.convergent_pass = false;
      s.convergent_failures.push_back(pair_name(i, j) + " = " + fmt(cell(i, j)) + " is not positive");
    }
  }

  for (const auto& [i, j] : convergent) {
    const double v = cell(i, j);
    for (std::size_t anchor : {i, j}) {
      for (std::size_t k = 0; k < p; ++k) {
        if (table.trait_of(k) == table.trait_of(anchor)) continue;
        const double w = cell(anchor, k);
        if (w >= v) {
          MtmmViolation viol;
          viol.convergent = {i, j};
          viol.competitor = {std::min(anchor, k), std::max(anchor, k)};
          viol.convergent_value = v;
          viol.competitor_value = w;
          viol.description = pair_name(i, j) + " = " + fmt(v) + " does not exceed " +
                             to_string(table.block_of(anchor, k)) + " " +
                             pair_name(viol.competitor.first, viol.competitor.second) + " = " + fmt(w);
          s.violations.push_back(std::move(viol));
        }
      }
    }
  }
  s.discriminant_pass = s.violations.empty();
  return s;
}

}  // namespace nlgm
