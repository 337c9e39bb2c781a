#include "nlgm/factor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "nlgm/error.hpp"
#include "nlgm/stats.hpp"

namespace nlgm {

namespace {

void require_correlation(const Eigen::MatrixXd& corr, const char* what) {
  if (corr.rows() != corr.cols() || corr.rows() < 2) {
    throw DomainError(std::string(what) + ": expected a square matrix of size >= 2");
  }
  if (!corr.allFinite()) throw DomainError(std::string(what) + ": matrix has non-finite entries");
  if ((corr - corr.transpose()).cwiseAbs().maxCoeff() > 1e-8) {
    throw DomainError(std::string(what) + ": matrix is not symmetric");
  }
  if ((corr.diagonal().array() - 1.0).abs().maxCoeff() > 1e-6) {
    throw DomainError(std::string(what) + ": matrix does not have a unit diagonal");
  }
}

// Descending eigenpairs of a symmetric matrix.
void eigen_descending(const Eigen::MatrixXd& a, Eigen::VectorXd& values, Eigen::MatrixXd& vectors) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a);
  if (es.info() != Eigen::Success) throw DegenerateError("eigendecomposition failed");
  values = es.eigenvalues().reverse();
  vectors = es.eigenvectors().rowwise().reverse();
}

Eigen::VectorXd initial_communalities(const Eigen::MatrixXd& corr, double cap) {
  const Eigen::Index p = corr.rows();
  Eigen::VectorXd h2(p);
  Eigen::LLT<Eigen::MatrixXd> llt(corr);
  Eigen::VectorXd eig = eigenvalues_descending(corr);
  if (llt.info() == Eigen::Success && eig(p - 1) > 1e-10 * eig(0)) {
    const Eigen::MatrixXd inv = llt.solve(Eigen::MatrixXd::Identity(p, p));
    h2 = (1.0 - inv.diagonal().array().inverse()).matrix();
  } else {
    for (Eigen::Index j = 0; j < p; ++j) {
      double m = 0.0;
      for (Eigen::Index k = 0; k < p; ++k) {
        if (k != j) m = std::max(m, std::abs(corr(j, k)));
      }
      h2(j) = m;
    }
  }
  return h2.cwiseMax(0.0).cwiseMin(cap);
}

void offdiag_residual(const Eigen::MatrixXd& corr, const Eigen::MatrixXd& loadings, double& max_abs,
                      double& sum_sq) {
  Eigen::MatrixXd res = corr - loadings * loadings.transpose();
  res.diagonal().setZero();
  max_abs = res.cwiseAbs().maxCoeff();
  sum_sq = res.squaredNorm();
}

}  // namespace

std::string to_string(Rotation rotation) { return rotation == Rotation::Varimax ? "varimax" : "none"; }

Eigen::MatrixXd FactorModel::implied_covariance() const {
  Eigen::MatrixXd s = loadings * loadings.transpose();
  s.diagonal() += uniquenesses;
  return s;
}

Eigen::VectorXd eigenvalues_descending(const Eigen::MatrixXd& symmetric) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(symmetric, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw DegenerateError("eigendecomposition failed");
  return es.eigenvalues().reverse();
}

void normalize_signs(Eigen::MatrixXd& loadings) {
  for (Eigen::Index k = 0; k < loadings.cols(); ++k) {
    Eigen::Index best = 0;
    double best_abs = -1.0;
    for (Eigen::Index j = 0; j < loadings.rows(); ++j) {
      const double a = std::abs(loadings(j, k));
      if (a > best_abs) {
        best_abs = a;
        best = j;
      }
    }
    if (loadings(best, k) < 0.0) loadings.col(k) = -loadings.col(k);
  }
}

FactorModel efa(const Eigen::MatrixXd& corr, std::size_t n_factors, const EfaOptions& options, EfaTrace* trace) {
  require_correlation(corr, "efa");
  const Eigen::Index p = corr.rows();
  if (n_factors < 1 || static_cast<Eigen::Index>(n_factors) > p - 1) {
    throw DomainError("n_factors out of range: " + std::to_string(n_factors) + " requested, valid range is 1.." +
                      std::to_string(p - 1));
  }
  const Eigen::VectorXd full_eig = eigenvalues_descending(corr);
  if (full_eig(p - 1) < -options.psd_tolerance) {
    throw DomainError("efa: correlation matrix is not positive semidefinite (min eigenvalue " +
                      std::to_string(full_eig(p - 1)) + ")");
  }
  const auto k = static_cast<Eigen::Index>(n_factors);

  FactorModel model;
  model.n_factors = n_factors;
  model.estimator = "principal-axis";
  std::vector<bool> heywood(static_cast<std::size_t>(p), false);

  Eigen::VectorXd h2 = initial_communalities(corr, options.heywood_cap);
  Eigen::MatrixXd loadings = Eigen::MatrixXd::Zero(p, k);
  Eigen::VectorXd values;
  Eigen::MatrixXd vectors;
  for (std::size_t it = 1; it <= options.max_iter; ++it) {
    Eigen::MatrixXd reduced = corr;
    reduced.diagonal() = h2;
    eigen_descending(reduced, values, vectors);
    for (Eigen::Index f = 0; f < k; ++f) {
      loadings.col(f) = vectors.col(f) * std::sqrt(std::max(values(f), 0.0));
    }
    Eigen::VectorXd next = loadings.rowwise().squaredNorm();
    for (Eigen::Index j = 0; j < p; ++j) {
      if (next(j) > options.heywood_cap) {
        next(j) = options.heywood_cap;
        heywood[static_cast<std::size_t>(j)] = true;
      }
    }
    const double change = (next - h2).cwiseAbs().maxCoeff();
    h2 = next;
    model.iterations = it;
    if (trace) {
      double mx = 0.0;
      double ss = 0.0;
      offdiag_residual(corr, loadings, mx, ss);
      trace->offdiag_max_abs.push_back(mx);
      trace->offdiag_sum_squares.push_back(ss);
    }
    if (change < options.tol) {
      model.converged = true;
      break;
    }
  }

  // Rows beyond the cap are shrunk onto it so communality + uniqueness = 1.
  for (Eigen::Index j = 0; j < p; ++j) {
    const double ss = loadings.row(j).squaredNorm();
    if (ss > options.heywood_cap) {
      loadings.row(j) *= std::sqrt(options.heywood_cap / ss);
      heywood[static_cast<std::size_t>(j)] = true;
    }
  }
  normalize_signs(loadings);
  model.loadings = loadings;
  model.uniquenesses = (1.0 - loadings.rowwise().squaredNorm().array()).matrix();
  for (std::size_t j = 0; j < heywood.size(); ++j) {
    if (heywood[j]) model.heywood_flags.push_back(j);
  }
  return model;
}

std::size_t suggest_n_factors(const Eigen::MatrixXd& corr) {
  require_correlation(corr, "suggest_n_factors");
  const Eigen::VectorXd eig = eigenvalues_descending(corr);
  constexpr double kEps = 1e-9;
  return static_cast<std::size_t>((eig.array() > 1.0 + kEps).count());
}

namespace {

// Varimax criterion written as a quantity to minimize, with its gradient in L.
double varimax_q(const Eigen::MatrixXd& l, Eigen::MatrixXd& grad) {
  const Eigen::ArrayXXd sq = l.array().square();
  const Eigen::ArrayXXd centered = sq.rowwise() - sq.colwise().mean();
  grad = -(l.array() * centered).matrix();
  return -0.25 * centered.square().sum();
}

}  // namespace

// Gradient projection on the orthogonal group with step halving. The
// plain SVD fixed-point update can cycle between two rotations of equal
// criterion on perfectly clustered loadings; this form is monotone.
Eigen::MatrixXd varimax(const Eigen::MatrixXd& loadings, std::size_t max_iter, double tol) {
  const Eigen::Index p = loadings.rows();
  const Eigen::Index k = loadings.cols();
  if (k < 2) throw DomainError("varimax requires at least 2 factors");

  Eigen::VectorXd scale = loadings.rowwise().norm();
  Eigen::MatrixXd x = loadings;
  for (Eigen::Index j = 0; j < p; ++j) {
    if (scale(j) > 0.0) x.row(j) /= scale(j);
  }
  Eigen::MatrixXd rot = Eigen::MatrixXd::Identity(k, k);
  Eigen::MatrixXd gq;
  double f = varimax_q(x, gq);
  Eigen::MatrixXd g = x.transpose() * gq;
  double step = 1.0;
  for (std::size_t it = 0; it < max_iter; ++it) {
    const Eigen::MatrixXd m = rot.transpose() * g;
    const Eigen::MatrixXd gp = g - rot * (0.5 * (m + m.transpose()));
    const double s = gp.norm();
    if (s < tol) break;
    step *= 2.0;
    Eigen::MatrixXd trial = rot;
    Eigen::MatrixXd trial_gq;
    double trial_f = f;
    for (int half = 0; half <= 20; ++half) {
      Eigen::JacobiSVD<Eigen::MatrixXd> svd(rot - step * gp, Eigen::ComputeFullU | Eigen::ComputeFullV);
      trial = svd.matrixU() * svd.matrixV().transpose();
      trial_f = varimax_q(x * trial, trial_gq);
      if (trial_f < f - 0.5 * s * s * step) break;
      step *= 0.5;
    }
    rot = trial;
    f = trial_f;
    g = x.transpose() * trial_gq;
  }
  Eigen::MatrixXd out = x * rot;
  for (Eigen::Index j = 0; j < p; ++j) out.row(j) *= scale(j);
  normalize_signs(out);
  return out;
}

FactorModel rotate_varimax(const FactorModel& model) {
  FactorModel out = model;
  out.loadings = varimax(model.loadings);
  out.rotation = Rotation::Varimax;
  return out;
}

// ---------------------------------------------------------------------------

namespace cfa {

std::size_t n_params(const LoadingPattern& pattern) {
  return static_cast<std::size_t>(pattern.count() + pattern.rows());
}

Eigen::VectorXd pack(const Eigen::MatrixXd& loadings, const Eigen::VectorXd& uniquenesses,
                     const LoadingPattern& pattern) {
  Eigen::VectorXd theta(static_cast<Eigen::Index>(n_params(pattern)));
  Eigen::Index at = 0;
  for (Eigen::Index c = 0; c < pattern.cols(); ++c) {
    for (Eigen::Index r = 0; r < pattern.rows(); ++r) {
      if (pattern(r, c)) theta(at++) = loadings(r, c);
    }
  }
  for (Eigen::Index j = 0; j < pattern.rows(); ++j) theta(at++) = std::log(uniquenesses(j));
  return theta;
}

void unpack(const Eigen::VectorXd& theta, const LoadingPattern& pattern, Eigen::MatrixXd& loadings,
            Eigen::VectorXd& uniquenesses) {
  loadings = Eigen::MatrixXd::Zero(pattern.rows(), pattern.cols());
  uniquenesses.resize(pattern.rows());
  Eigen::Index at = 0;
  for (Eigen::Index c = 0; c < pattern.cols(); ++c) {
    for (Eigen::Index r = 0; r < pattern.rows(); ++r) {
      if (pattern(r, c)) loadings(r, c) = theta(at++);
    }
  }
  for (Eigen::Index j = 0; j < pattern.rows(); ++j) uniquenesses(j) = std::exp(theta(at++));
}

double ml_discrepancy(const Eigen::MatrixXd& sample, const Eigen::MatrixXd& implied) {
  Eigen::LLT<Eigen::MatrixXd> ls(sample);
  Eigen::LLT<Eigen::MatrixXd> li(implied);
  if (ls.info() != Eigen::Success) throw DomainError("sample matrix is not positive definite");
  if (li.info() != Eigen::Success) return std::numeric_limits<double>::infinity();
  const double logdet_s = 2.0 * ls.matrixLLT().diagonal().array().log().sum();
  const double logdet_i = 2.0 * li.matrixLLT().diagonal().array().log().sum();
  const double trace = li.solve(sample).trace();
  return logdet_i + trace - logdet_s - static_cast<double>(sample.rows());
}

double objective(const Eigen::MatrixXd& sample, const LoadingPattern& pattern, const Eigen::VectorXd& theta) {
  Eigen::MatrixXd lambda;
  Eigen::VectorXd psi;
  unpack(theta, pattern, lambda, psi);
  Eigen::MatrixXd sigma = lambda * lambda.transpose();
  sigma.diagonal() += psi;
  return ml_discrepancy(sample, sigma);
}

Eigen::VectorXd gradient(const Eigen::MatrixXd& sample, const LoadingPattern& pattern, const Eigen::VectorXd& theta) {
  Eigen::MatrixXd lambda;
  Eigen::VectorXd psi;
  unpack(theta, pattern, lambda, psi);
  const Eigen::Index p = sample.rows();
  Eigen::MatrixXd sigma = lambda * lambda.transpose();
  sigma.diagonal() += psi;
  Eigen::LLT<Eigen::MatrixXd> llt(sigma);
  if (llt.info() != Eigen::Success) throw DegenerateError("implied covariance is not positive definite");
  const Eigen::MatrixXd inv = llt.solve(Eigen::MatrixXd::Identity(p, p));
  // dF/dSigma = Sigma^-1 - Sigma^-1 S Sigma^-1
  const Eigen::MatrixXd w = inv - inv * sample * inv;
  const Eigen::MatrixXd d_lambda = 2.0 * w * lambda;

  Eigen::VectorXd g(theta.size());
  Eigen::Index at = 0;
  for (Eigen::Index c = 0; c < pattern.cols(); ++c) {
    for (Eigen::Index r = 0; r < pattern.rows(); ++r) {
      if (pattern(r, c)) g(at++) = d_lambda(r, c);
    }
  }
  for (Eigen::Index j = 0; j < p; ++j) g(at++) = w(j, j) * psi(j);
  return g;
}

}  // namespace cfa

CfaFit cfa_fit(const Eigen::MatrixXd& sample_corr, const LoadingPattern& pattern, const CfaOptions& options) {
  if (sample_corr.rows() != sample_corr.cols()) throw DomainError("cfa: sample matrix must be square");
  if (pattern.rows() != sample_corr.rows()) {
    throw DomainError("cfa: pattern has " + std::to_string(pattern.rows()) + " rows but the sample matrix has " +
                      std::to_string(sample_corr.rows()) + " indicators");
  }
  if (pattern.cols() < 1) throw DomainError("cfa: pattern has no factors");
  for (Eigen::Index c = 0; c < pattern.cols(); ++c) {
    const auto free = pattern.col(c).count();
    if (free == 0) throw DomainError("cfa: factor " + std::to_string(c) + " has no free loadings");
    if (free < 2) throw DomainError("cfa: factor " + std::to_string(c) + " needs at least 2 free loadings");
  }
  if ((sample_corr - sample_corr.transpose()).cwiseAbs().maxCoeff() > 1e-8) {
    throw DomainError("cfa: sample matrix is not symmetric");
  }
  Eigen::LLT<Eigen::MatrixXd> llt(sample_corr);
  if (llt.info() != Eigen::Success || eigenvalues_descending(sample_corr).minCoeff() <= 0.0) {
    throw DomainError("cfa: sample matrix is not positive definite");
  }

  const Eigen::Index p = pattern.rows();
  Eigen::MatrixXd lambda0 = Eigen::MatrixXd::Zero(p, pattern.cols());
  for (Eigen::Index r = 0; r < p; ++r) {
    for (Eigen::Index c = 0; c < pattern.cols(); ++c) {
      if (pattern(r, c)) lambda0(r, c) = 0.7;
    }
  }
  Eigen::VectorXd psi0(p);
  for (Eigen::Index j = 0; j < p; ++j) {
    psi0(j) = std::max(0.1 * sample_corr(j, j), sample_corr(j, j) - lambda0.row(j).squaredNorm());
  }

  auto f = [&](const Eigen::VectorXd& t) { return cfa::objective(sample_corr, pattern, t); };
  auto grad = [&](const Eigen::VectorXd& t) { return cfa::gradient(sample_corr, pattern, t); };

  // BFGS on the inverse Hessian with Armijo backtracking.
  Eigen::VectorXd x = cfa::pack(lambda0, psi0, pattern);
  const Eigen::Index n = x.size();
  double fx = f(x);
  Eigen::VectorXd g = grad(x);
  Eigen::MatrixXd h = Eigen::MatrixXd::Identity(n, n);
  bool first_step = true;
  CfaFit fit;
  std::size_t it = 0;
  for (; it < options.max_iter; ++it) {
    if (g.norm() < options.tol) {
      fit.converged = true;
      break;
    }
    Eigen::VectorXd dir = -h * g;
    if (g.dot(dir) >= 0.0) {
      h.setIdentity();
      dir = -g;
    }
    double step = 1.0;
    const double max_move = dir.cwiseAbs().maxCoeff();
    if (max_move > 1.0) step = 1.0 / max_move;
    const double slope = g.dot(dir);
    Eigen::VectorXd xn;
    double fn = 0.0;
    bool accepted = false;
    while (step > 1e-20) {
      xn = x + step * dir;
      fn = f(xn);
      if (std::isfinite(fn) && fn <= fx + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
    const Eigen::VectorXd gn = grad(xn);
    const Eigen::VectorXd s = xn - x;
    const Eigen::VectorXd y = gn - g;
    const double sy = s.dot(y);
    if (sy > 1e-14) {
      if (first_step) {
        h *= sy / y.squaredNorm();
        first_step = false;
      }
      const double rho = 1.0 / sy;
      const Eigen::MatrixXd i_n = Eigen::MatrixXd::Identity(n, n);
      h = (i_n - rho * s * y.transpose()) * h * (i_n - rho * y * s.transpose()) + rho * s * s.transpose();
    }
    x = xn;
    fx = fn;
    g = gn;
  }
  if (!fit.converged && g.norm() < options.tol) fit.converged = true;

  Eigen::MatrixXd lambda;
  Eigen::VectorXd psi;
  cfa::unpack(x, pattern, lambda, psi);
  normalize_signs(lambda);

  fit.pattern = pattern;
  fit.discrepancy = std::max(0.0, fx);
  fit.gradient_norm = g.norm();
  fit.model.loadings = lambda;
  fit.model.uniquenesses = psi;
  fit.model.n_factors = static_cast<std::size_t>(pattern.cols());
  fit.model.converged = fit.converged;
  fit.model.iterations = it;
  fit.model.rotation = Rotation::None;
  fit.model.estimator = "ml-cfa";
  for (Eigen::Index j = 0; j < p; ++j) {
    if (psi(j) < 1e-4) fit.model.heywood_flags.push_back(static_cast<std::size_t>(j));
  }
  fit.implied_corr = fit.model.implied_covariance();
  return fit;
}

// ---------------------------------------------------------------------------

FactorScores factor_scores(const ScoreMatrix& m, const FactorModel& model) {
  const Eigen::Index p = model.loadings.rows();
  if (model.uniquenesses.size() != p) throw DomainError("factor model: uniquenesses do not match loadings");
  if (m.n_items() != p) {
    throw DomainError("factor scores: model has " + std::to_string(p) + " indicators but data has " +
                      std::to_string(m.n_items()) + " columns");
  }
  Eigen::MatrixXd values = m.values;
  if (!model.indicators.empty()) {
    std::map<std::string, Eigen::Index> col;
    for (std::size_t j = 0; j < m.items.size(); ++j) col[m.items[j]] = static_cast<Eigen::Index>(j);
    for (Eigen::Index j = 0; j < p; ++j) {
      auto it = col.find(model.indicators[static_cast<std::size_t>(j)]);
      if (it == col.end()) {
        throw DomainError("factor scores: indicator '" + model.indicators[static_cast<std::size_t>(j)] +
                          "' not found in data");
      }
      values.col(j) = m.values.col(it->second);
    }
  }
  const Eigen::MatrixXd z = standardize_columns(values);
  const Eigen::MatrixXd sigma = model.implied_covariance();
  Eigen::LLT<Eigen::MatrixXd> llt(sigma);
  if (llt.info() != Eigen::Success || eigenvalues_descending(sigma).minCoeff() <= 1e-12) {
    throw DegenerateError("factor scores: implied covariance is singular");
  }
  FactorScores out;
  out.candidates = m.candidates;
  out.scores = z * llt.solve(model.loadings);
  return out;
}

}  // namespace nlgm
