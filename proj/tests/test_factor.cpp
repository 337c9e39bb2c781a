#include <algorithm>

#include "doctest.h"
#include "nlgm/error.hpp"
#include "nlgm/factor.hpp"
#include "nlgm/rng.hpp"
#include "nlgm/simulation.hpp"
#include "nlgm/stats.hpp"
#include "oracle.hpp"
#include "util.hpp"

using namespace nlgm;

namespace {

Eigen::MatrixXd population(const Eigen::MatrixXd& lambda) {
  Eigen::MatrixXd s = lambda * lambda.transpose();
  s.diagonal().setOnes();
  return s;
}

Eigen::MatrixXd compound_symmetry(Eigen::Index J, double r) {
  Eigen::MatrixXd c = Eigen::MatrixXd::Constant(J, J, r);
  c.diagonal().setOnes();
  return c;
}

Eigen::MatrixXd random_orthogonal(Rng& rng, Eigen::Index k) {
  Eigen::MatrixXd a(k, k);
  for (Eigen::Index i = 0; i < k; ++i)
    for (Eigen::Index j = 0; j < k; ++j) a(i, j) = rng.standard_normal();
  return Eigen::HouseholderQR<Eigen::MatrixXd>(a).householderQ();
}

// Random correlation matrix from a random factor structure plus noise.
Eigen::MatrixXd random_corr(Rng& rng, Eigen::Index J, Eigen::Index K) {
  Eigen::MatrixXd lambda(J, K);
  for (Eigen::Index j = 0; j < J; ++j)
    for (Eigen::Index k = 0; k < K; ++k) lambda(j, k) = 0.7 * rng.uniform01() - 0.1;
  for (Eigen::Index j = 0; j < J; ++j)
    if (lambda.row(j).squaredNorm() > 0.9) lambda.row(j) *= std::sqrt(0.9 / lambda.row(j).squaredNorm());
  Eigen::MatrixXd s = population(lambda);
  for (Eigen::Index i = 0; i < J; ++i)
    for (Eigen::Index j = i + 1; j < J; ++j) s(i, j) = s(j, i) = s(i, j) + 0.02 * (rng.uniform01() - 0.5);
  return s;
}

// Varimax criterion: sum over factors of the variance of squared loadings.
double varimax_criterion(const Eigen::MatrixXd& l) {
  double total = 0;
  for (Eigen::Index k = 0; k < l.cols(); ++k) {
    const Eigen::ArrayXd sq = l.col(k).array().square();
    total += (sq - sq.mean()).square().mean();
  }
  return total;
}

}  // namespace

TEST_CASE("eigenvalues match the jacobi oracle and reconstruct the matrix") {
  Rng rng(1);
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::MatrixXd c = random_corr(rng, 6, 2);
    const Eigen::VectorXd ev = eigenvalues_descending(c);
    auto ref = oracle::jacobi_eigenvalues(testutil::to_rows(c));
    std::sort(ref.rbegin(), ref.rend());
    for (Eigen::Index i = 0; i < 6; ++i) CHECK(ev(i) == doctest::Approx(ref[i]).epsilon(1e-10));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(c);
    const Eigen::MatrixXd back = es.eigenvectors() * es.eigenvalues().asDiagonal() * es.eigenvectors().transpose();
    CHECK((back - c).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("compound symmetry") {
  const Eigen::MatrixXd c = compound_symmetry(3, 0.5);
  const Eigen::VectorXd ev = eigenvalues_descending(c);
  CHECK(ev(0) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(ev(1) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(suggest_n_factors(c) == 1);
  const FactorModel m = efa(c, 1);
  CHECK(m.converged);
  CHECK(m.loadings(0, 0) == doctest::Approx(m.loadings(1, 0)).epsilon(1e-6));
  CHECK(m.loadings(0, 0) == doctest::Approx(m.loadings(2, 0)).epsilon(1e-6));
  // one-factor population with equal loadings sqrt(0.5)
  CHECK(m.loadings(0, 0) == doctest::Approx(std::sqrt(0.5)).epsilon(1e-4));
}

TEST_CASE("planted loadings and the spearman triad") {
  Eigen::MatrixXd lambda(3, 1);
  lambda << 0.8, 0.7, 0.6;
  const Eigen::MatrixXd c = population(lambda);
  CHECK(c(0, 1) == doctest::Approx(0.56).epsilon(1e-15));
  CHECK(c(0, 2) == doctest::Approx(0.48).epsilon(1e-15));
  CHECK(c(1, 2) == doctest::Approx(0.42).epsilon(1e-15));
  CHECK(std::abs(std::sqrt(0.56 * 0.48 / 0.42) - 0.8) < 1e-10);
  const FactorModel m = efa(c, 1);
  for (Eigen::Index j = 0; j < 3; ++j) {
    CHECK(std::abs(std::abs(m.loadings(j, 0)) - lambda(j, 0)) < 0.01);
    // triad closed form for every indicator
    const Eigen::Index a = (j + 1) % 3, b = (j + 2) % 3;
    CHECK(std::abs(std::sqrt(c(j, a) * c(j, b) / c(a, b)) - lambda(j, 0)) < 1e-10);
  }
  CHECK((m.communalities().array() + m.uniquenesses.array() - 1.0).abs().maxCoeff() < 1e-8);
}

TEST_CASE("identity matrix has no common factor") {
  const Eigen::MatrixXd c = Eigen::MatrixXd::Identity(4, 4);
  CHECK(suggest_n_factors(c) == 0);
  const FactorModel m = efa(c, 1);
  CHECK(m.loadings.cwiseAbs().maxCoeff() < 1e-6);
  CHECK((m.uniquenesses.array() - 1.0).abs().maxCoeff() < 1e-6);
}

TEST_CASE("kaiser rule on a two-block structure") {
  Eigen::MatrixXd c = Eigen::MatrixXd::Identity(6, 6);
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j)
      if (i != j && (i < 3) == (j < 3)) c(i, j) = 0.7;
  auto ev = oracle::jacobi_eigenvalues(testutil::to_rows(c));
  const auto above = std::count_if(ev.begin(), ev.end(), [](double v) { return v > 1.0 + 1e-9; });
  CHECK(above == 2);
  CHECK(suggest_n_factors(c) == 2);
}

TEST_CASE("efa input validation") {
  CHECK_THROWS_WITH_AS(efa(compound_symmetry(3, 0.5), 5), doctest::Contains("n_factors out of range"), DomainError);
  CHECK_THROWS_AS(efa(compound_symmetry(3, 0.5), 0), DomainError);
  Eigen::MatrixXd bad = compound_symmetry(3, 0.5);
  bad(0, 1) = bad(1, 0) = -0.9;
  bad(0, 2) = bad(2, 0) = 0.9;
  bad(1, 2) = bad(2, 1) = 0.9;
  CHECK_THROWS_AS(efa(bad, 1), DomainError);
  Eigen::MatrixXd asym = compound_symmetry(3, 0.5);
  asym(0, 1) = 0.4;
  CHECK_THROWS_AS(efa(asym, 1), DomainError);
}

TEST_CASE("efa invariants on random inputs") {
  Rng rng(77);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Index J = 5 + static_cast<Eigen::Index>(rng.uniform_index(5));
    const Eigen::MatrixXd c = random_corr(rng, J, 2);
    EfaTrace trace;
    const FactorModel a = efa(c, 2, {}, &trace);
    const FactorModel b = efa(c, 2);
    CHECK(a.loadings == b.loadings);
    CHECK((a.communalities().array() + a.uniquenesses.array() - 1.0).abs().maxCoeff() < 1e-8);
    CHECK(a.uniquenesses.minCoeff() >= 0.0);
    for (Eigen::Index k = 0; k < 2; ++k) {
      Eigen::Index arg;
      a.loadings.col(k).cwiseAbs().maxCoeff(&arg);
      CHECK(a.loadings(arg, k) > 0);
    }
    // off-diagonal reproduction error does not grow over iterations. The
    // largest single residual can grow; the sum of squares cannot.
    for (std::size_t i = 1; i < trace.offdiag_sum_squares.size(); ++i)
      CHECK(trace.offdiag_sum_squares[i] <= trace.offdiag_sum_squares[i - 1] + 1e-12);
  }
}

TEST_CASE("heywood case is capped and flagged") {
  Eigen::MatrixXd lambda(4, 1);
  lambda << 0.999, 0.98, 0.6, 0.5;
  const Eigen::MatrixXd c = population(lambda);
  const FactorModel m = efa(c, 1);
  CHECK(m.communalities().maxCoeff() <= 0.995 + 1e-12);
  CHECK(m.uniquenesses.minCoeff() >= 0.0);
  CHECK_FALSE(m.heywood_flags.empty());
}

TEST_CASE("varimax") {
  Eigen::MatrixXd simple(6, 2);
  simple << 0.8, 0, 0.7, 0, 0.75, 0, 0, 0.8, 0, 0.6, 0, 0.7;
  SUBCASE("needs at least two factors") { CHECK_THROWS_AS(varimax(simple.leftCols(1)), DomainError); }
  SUBCASE("simple structure is a fixed point") {
    Eigen::MatrixXd r = varimax(simple);
    normalize_signs(r);
    CHECK((r - simple).cwiseAbs().maxCoeff() < 1e-6);
  }
  SUBCASE("recovers simple structure after a random rotation") {
    Rng rng(5);
    for (int trial = 0; trial < 10; ++trial) {
      const Eigen::MatrixXd q = random_orthogonal(rng, 2);
      const Eigen::MatrixXd mixed = simple * q;
      const Eigen::MatrixXd r = varimax(mixed);
      CHECK(((r * r.transpose()) - (simple * simple.transpose())).cwiseAbs().maxCoeff() < 1e-8);
      CHECK((r.rowwise().squaredNorm() - simple.rowwise().squaredNorm()).cwiseAbs().maxCoeff() < 1e-8);
      CHECK(varimax_criterion(r) >= varimax_criterion(mixed) - 1e-12);
      // match up to column permutation and sign
      Eigen::MatrixXd absr = r.cwiseAbs();
      if (absr(0, 0) < absr(0, 1)) absr.col(0).swap(absr.col(1));
      CHECK((absr - simple).cwiseAbs().maxCoeff() < 1e-6);
    }
  }
  SUBCASE("preserves the reproduced matrix on random loadings") {
    Rng rng(6);
    for (int trial = 0; trial < 10; ++trial) {
      Eigen::MatrixXd l(8, 3);
      for (Eigen::Index i = 0; i < 8; ++i)
        for (Eigen::Index j = 0; j < 3; ++j) l(i, j) = rng.normal(0, 0.4);
      const Eigen::MatrixXd r = varimax(l);
      CHECK(((r * r.transpose()) - (l * l.transpose())).cwiseAbs().maxCoeff() < 1e-8);
    }
  }
}

TEST_CASE("cfa self-fit recovers planted loadings") {
  Eigen::MatrixXd lambda = Eigen::MatrixXd::Zero(6, 2);
  lambda.col(0).head(3) << 0.8, 0.7, 0.6;
  lambda.col(1).tail(3) << 0.75, 0.65, 0.55;
  const Eigen::MatrixXd s = population(lambda);
  LoadingPattern pattern = (lambda.array() != 0.0);
  const CfaFit fit = cfa_fit(s, pattern);
  CHECK(fit.converged);
  CHECK(fit.discrepancy < 1e-6);
  CHECK(fit.discrepancy >= 0.0);
  CHECK((fit.model.loadings.cwiseAbs() - lambda).cwiseAbs().maxCoeff() < 0.01);
  CHECK((fit.implied_corr - s).cwiseAbs().maxCoeff() < 1e-3);
  CHECK(fit.gradient_norm < 1e-5);
}

TEST_CASE("cfa discrepancy identities") {
  Eigen::MatrixXd lambda(4, 1);
  lambda << 0.8, 0.7, 0.6, 0.5;
  const Eigen::MatrixXd s = population(lambda);
  CHECK(std::abs(cfa::ml_discrepancy(s, s)) < 1e-12);
  Eigen::MatrixXd other = s;
  other(0, 1) = other(1, 0) = 0.3;
  CHECK(cfa::ml_discrepancy(s, other) > 0.0);
}

TEST_CASE("misspecified cfa has a positive discrepancy") {
  Eigen::MatrixXd lambda = Eigen::MatrixXd::Zero(6, 2);
  lambda.col(0).head(3).setConstant(0.8);
  lambda.col(1).tail(3).setConstant(0.8);
  const Eigen::MatrixXd s = population(lambda);
  const LoadingPattern one = LoadingPattern::Constant(6, 1, true);
  const CfaFit fit = cfa_fit(s, one);
  // direct evaluation at the returned parameters agrees with the reported value
  const Eigen::MatrixXd implied = fit.model.loadings * fit.model.loadings.transpose() +
                                  Eigen::MatrixXd(fit.model.uniquenesses.asDiagonal());
  CHECK(cfa::ml_discrepancy(s, implied) == doctest::Approx(fit.discrepancy).epsilon(1e-9));
  CHECK(fit.discrepancy > 0.01);
}

TEST_CASE("cfa gradient matches central differences") {
  Eigen::MatrixXd lambda = Eigen::MatrixXd::Zero(6, 2);
  lambda.col(0).head(4) << 0.8, 0.7, 0.6, 0.3;
  lambda.col(1).tail(3) << 0.4, 0.65, 0.55;
  const Eigen::MatrixXd s = population(lambda);
  const LoadingPattern pattern = (lambda.array() != 0.0);
  Rng rng(99);
  const std::size_t n = cfa::n_params(pattern);
  for (int point = 0; point < 20; ++point) {
    Eigen::VectorXd theta(static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < theta.size(); ++i) theta(i) = rng.normal(0.3, 0.5);
    const Eigen::VectorXd g = cfa::gradient(s, pattern, theta);
    Eigen::VectorXd fd(theta.size());
    const double h = 1e-5;
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
      Eigen::VectorXd up = theta, down = theta;
      up(i) += h;
      down(i) -= h;
      fd(i) = (cfa::objective(s, pattern, up) - cfa::objective(s, pattern, down)) / (2 * h);
    }
    CHECK((g - fd).norm() / std::max(fd.norm(), 1e-12) < 1e-4);
  }
}

TEST_CASE("cfa pack and unpack are inverse") {
  Eigen::MatrixXd lambda(3, 2);
  lambda << 0.5, 0, 0.4, 0.3, 0, 0.7;
  const LoadingPattern pattern = (lambda.array() != 0.0);
  Eigen::VectorXd psi(3);
  psi << 0.2, 0.5, 0.9;
  const Eigen::VectorXd theta = cfa::pack(lambda, psi, pattern);
  CHECK(theta.size() == 4 + 3);
  Eigen::MatrixXd l2;
  Eigen::VectorXd p2;
  cfa::unpack(theta, pattern, l2, p2);
  CHECK((l2 - lambda).cwiseAbs().maxCoeff() < 1e-15);
  CHECK((p2 - psi).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("cfa input validation") {
  const Eigen::MatrixXd s = compound_symmetry(4, 0.4);
  LoadingPattern p = LoadingPattern::Constant(4, 2, false);
  p(0, 0) = p(1, 0) = p(2, 0) = p(3, 0) = true;
  CHECK_THROWS_AS(cfa_fit(s, p), DomainError);  // empty second factor
  p(3, 1) = true;
  CHECK_THROWS_AS(cfa_fit(s, p), DomainError);  // one free loading only
  Eigen::MatrixXd singular = Eigen::MatrixXd::Ones(4, 4);
  CHECK_THROWS_AS(cfa_fit(singular, LoadingPattern::Constant(4, 1, true)), DomainError);
  CHECK_THROWS_AS(cfa_fit(s, LoadingPattern::Constant(3, 1, true)), DomainError);
}

TEST_CASE("factor scores") {
  SUBCASE("mirrored profiles give mirrored scores") {
    FactorModel model;
    model.loadings = Eigen::MatrixXd::Constant(3, 1, 0.7);
    model.uniquenesses = Eigen::VectorXd::Constant(3, 0.51);
    model.n_factors = 1;
    const ScoreMatrix m = testutil::to_matrix({{1, 2, 3}, {-1, -2, -3}});
    const FactorScores s = factor_scores(m, model);
    CHECK(s.scores(0, 0) == doctest::Approx(-s.scores(1, 0)).epsilon(1e-12));
    CHECK(s.method == "regression");
  }
  SUBCASE("zero loadings give zero scores") {
    FactorModel model;
    model.loadings = Eigen::MatrixXd::Zero(3, 1);
    model.uniquenesses = Eigen::VectorXd::Ones(3);
    model.n_factors = 1;
    const ScoreMatrix m = testutil::to_matrix({{1, 2, 3}, {4, 0, 1}, {2, 2, 9}});
    CHECK(factor_scores(m, model).scores.cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("regression weights match the oracle and columns center") {
    Eigen::MatrixXd lambda(4, 1);
    lambda << 0.8, 0.7, 0.6, 0.5;
    FactorSimSpec spec;
    spec.n_candidates = 300;
    spec.loadings = lambda;
    spec.uniquenesses = (1.0 - lambda.array().square()).matrix();
    spec.seed = 3;
    const SimulatedDataset d = generate_factor(spec);
    FactorModel model;
    model.loadings = lambda;
    model.uniquenesses = spec.uniquenesses;
    model.n_factors = 1;
    const FactorScores s = factor_scores(d.observed, model);
    CHECK(std::abs(s.scores.col(0).mean()) < 1e-8);
    const Eigen::MatrixXd z = standardize_columns(d.observed.values);
    const Eigen::MatrixXd sigma = lambda * lambda.transpose() + Eigen::MatrixXd(spec.uniquenesses.asDiagonal());
    const Eigen::VectorXd w = sigma.inverse() * lambda;
    CHECK((s.scores - z * w).cwiseAbs().maxCoeff() < 1e-10);
  }
  SUBCASE("dimension mismatch") {
    FactorModel model;
    model.loadings = Eigen::MatrixXd::Constant(2, 1, 0.5);
    model.uniquenesses = Eigen::VectorXd::Constant(2, 0.75);
    CHECK_THROWS_AS(factor_scores(testutil::to_matrix({{1, 2, 3}, {3, 1, 2}, {0, 0, 1}}), model), DomainError);
  }
}
