#include "doctest.h"
#include "nlgm/error.hpp"
#include "nlgm/reliability.hpp"
#include "nlgm/simulation.hpp"
#include "nlgm/stats.hpp"
#include "oracle.hpp"
#include "util.hpp"

using namespace nlgm;

namespace {

CttSpec parallel_spec(std::size_t n, std::size_t J, double error_sd, std::uint64_t seed) {
  CttSpec s;
  s.n_candidates = n;
  s.n_items = J;
  s.error_sd = {error_sd};
  s.seed = seed;
  return s;
}

}  // namespace

TEST_CASE("analytic reliability of parallel items") {
  // Var(J T) / (Var(J T) + J) with true_sd = error_sd = 1 reduces to J / (J + 1).
  CHECK(ctt_total_reliability(parallel_spec(10, 20, 1.0, 0)) == doctest::Approx(20.0 / 21.0).epsilon(1e-14));
  CHECK(ctt_total_reliability(parallel_spec(10, 20, 1.0, 0)) == doctest::Approx(0.9524).epsilon(1e-4));
  for (double rel : {0.3, 0.5, 0.8, 0.95}) {
    CttSpec s = parallel_spec(10, 7, parallel_error_sd_for(rel, 7, 2.0), 0);
    s.true_sd = 2.0;
    CHECK(ctt_total_reliability(s) == doctest::Approx(rel).epsilon(1e-12));
  }
}

TEST_CASE("analytic reliability of congeneric items") {
  CttSpec s;
  s.n_candidates = 10;
  s.n_items = 3;
  s.structure = CttStructure::Congeneric;
  s.loadings = {0.5, 1.0, 2.0};
  s.error_sd = {1.0, 2.0, 0.5};
  s.true_sd = 1.5;
  // (sum a)^2 var(T) / ((sum a)^2 var(T) + sum e^2)
  const double signal = 3.5 * 3.5 * 2.25;
  CHECK(ctt_total_reliability(s) == doctest::Approx(signal / (signal + 1 + 4 + 0.25)).epsilon(1e-14));
}

TEST_CASE("spec validation") {
  CttSpec s = parallel_spec(10, 3, 1.0, 0);
  s.error_sd = {1.0, 2.0, 1.0};
  CHECK_THROWS_AS(generate_ctt(s), DomainError);
  s = parallel_spec(10, 3, 0.0, 0);
  CHECK_THROWS_AS(generate_ctt(s), DomainError);
  s = parallel_spec(10, 3, 1.0, 0);
  s.structure = CttStructure::Congeneric;
  s.loadings = {1.0, 1.0};
  CHECK_THROWS_AS(generate_ctt(s), DomainError);
  s = parallel_spec(10, 3, 1.0, 0);
  s.true_sd = -1.0;
  CHECK_THROWS_AS(generate_ctt(s), DomainError);
  FactorSimSpec f;
  f.n_candidates = 10;
  f.loadings = Eigen::MatrixXd::Constant(2, 1, 1.0);
  f.uniquenesses = Eigen::VectorXd::Zero(2);
  CHECK_THROWS_AS(generate_factor(f), DomainError);
}

TEST_CASE("generators are pure functions of the spec") {
  const CttSpec s = parallel_spec(50, 6, 1.0, 42);
  CHECK(generate_ctt(s).observed == generate_ctt(s).observed);
  CttSpec other = s;
  other.seed = 43;
  CHECK_FALSE(generate_ctt(other).observed == generate_ctt(s).observed);
  const auto [a1, b1] = generate_retest(s);
  const auto [a2, b2] = generate_retest(s);
  CHECK(a1.observed == a2.observed);
  CHECK(b1.observed == b2.observed);
  CHECK(a1.true_scores == b1.true_scores);
  CHECK(a1.true_reliability_total == b1.true_reliability_total);
  CHECK_FALSE(a1.observed == b1.observed);
}

TEST_CASE("noiseless limit") {
  const SimulatedDataset d = generate_ctt(parallel_spec(500, 5, 1e-9, 3));
  CHECK(cronbach_alpha(d.observed).estimate_raw > 0.999);
  const auto [a, b] = generate_retest(parallel_spec(500, 5, 1e-9, 3));
  CHECK(test_retest(a.observed, b.observed).estimate_raw > 0.999);
}

TEST_CASE("parallel items J=20, alpha near J/(J+1)") {
  const SimulatedDataset d = generate_ctt(parallel_spec(10000, 20, 1.0, 8));
  CHECK(std::abs(cronbach_alpha(d.observed).estimate_raw - 20.0 / 21.0) < 0.01);
}

TEST_CASE("analytic reliability equals squared true-observed correlation") {
  for (auto structure : {CttStructure::Parallel, CttStructure::TauEquivalent, CttStructure::Congeneric}) {
    CttSpec s = parallel_spec(10000, 8, 1.5, 5);
    s.structure = structure;
    if (structure != CttStructure::Parallel) s.error_sd = {1.0, 1.2, 1.4, 1.6, 1.8, 2.0, 2.2, 2.4};
    if (structure == CttStructure::Congeneric) s.loadings = {0.3, 0.5, 0.7, 0.9, 1.1, 1.3, 1.5, 1.7};
    if (structure == CttStructure::TauEquivalent) s.intercepts = {0, 1, 2, 3, 4, 5, 6, 7};
    const SimulatedDataset d = generate_ctt(s);
    const double r = oracle::pearson(testutil::to_vec(d.true_scores), testutil::to_vec(d.observed.totals()));
    CHECK(std::abs(r * r - d.true_reliability_total) < 0.01);
  }
}

TEST_CASE("factor generator") {
  SUBCASE("zero loadings give independent columns") {
    FactorSimSpec f;
    f.n_candidates = 2000;
    f.loadings = Eigen::MatrixXd::Zero(4, 1);
    f.uniquenesses = Eigen::VectorXd::Ones(4);
    f.seed = 1;
    const Eigen::MatrixXd c = correlation_matrix(generate_factor(f).observed);
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j)
        if (i != j) CHECK(std::abs(c(i, j)) < 0.1);
  }
  SUBCASE("planted one-factor correlations") {
    FactorSimSpec f;
    f.n_candidates = 5000;
    f.loadings = Eigen::MatrixXd(3, 1);
    f.loadings << 0.8, 0.7, 0.6;
    f.uniquenesses = (1.0 - f.loadings.array().square()).matrix();
    f.seed = 2;
    const SimulatedDataset d = generate_factor(f);
    const Eigen::MatrixXd c = correlation_matrix(d.observed);
    CHECK(std::abs(c(0, 1) - 0.56) < 0.05);
    CHECK(std::abs(c(0, 2) - 0.48) < 0.05);
    CHECK(std::abs(c(1, 2) - 0.42) < 0.05);
    REQUIRE(d.latent_factors.has_value());
    CHECK(d.latent_factors->rows() == 5000);
  }
  SUBCASE("one factor with equal loadings agrees with tau-equivalent ctt") {
    FactorSimSpec f;
    f.n_candidates = 10000;
    f.loadings = Eigen::MatrixXd::Constant(10, 1, 0.7);
    f.uniquenesses = Eigen::VectorXd::Constant(10, 0.51);
    f.seed = 3;
    CttSpec s;
    s.n_candidates = 10000;
    s.n_items = 10;
    s.structure = CttStructure::TauEquivalent;
    s.true_sd = 0.7;
    s.error_sd = {std::sqrt(0.51)};
    s.seed = 4;
    const SimulatedDataset fd = generate_factor(f), cd = generate_ctt(s);
    CHECK(fd.true_reliability_total == doctest::Approx(cd.true_reliability_total).epsilon(1e-12));
    CHECK(std::abs(cronbach_alpha(fd.observed).estimate_raw - cronbach_alpha(cd.observed).estimate_raw) < 0.02);
  }
}

TEST_CASE("criterion generator") {
  const auto base = [](double rel_x, std::uint64_t seed) {
    CttSpec s = parallel_spec(2000, 10, parallel_error_sd_for(rel_x, 10), seed);
    return generate_ctt(s);
  };
  SUBCASE("independent criterion") {
    const SimulatedDataset d = base(0.8, 1);
    const Eigen::VectorXd y = generate_criterion(d, 0.7, 0.0, 2);
    CHECK(std::abs(pearson(d.observed.totals(), y).r) < 0.05);
  }
  SUBCASE("attenuated criterion") {
    const SimulatedDataset d = base(0.64, 3);
    const Eigen::VectorXd y = generate_criterion(d, 0.64, 1.0, 4);
    CHECK(std::abs(pearson(d.observed.totals(), y).r - 0.64) < 0.04);
  }
  SUBCASE("no attenuation") {
    CttSpec s = parallel_spec(2000, 10, 1e-9, 5);
    const SimulatedDataset d = generate_ctt(s);
    const Eigen::VectorXd y = generate_criterion(d, 1.0, 0.5, 6);
    CHECK(std::abs(pearson(d.observed.totals(), y).r - 0.5) < 0.05);
  }
  SUBCASE("criterion reliability is realized") {
    const SimulatedDataset d = base(0.8, 7);
    const Eigen::VectorXd y1 = generate_criterion(d, 0.6, 1.0, 8);
    // true part of y is the standardized true score, so corr(T, y)^2 is the criterion reliability
    const double r = pearson(d.true_scores, y1).r;
    CHECK(std::abs(r * r - 0.6) < 0.05);
  }
  SUBCASE("errors") {
    const SimulatedDataset d = base(0.8, 9);
    CHECK_THROWS_AS(generate_criterion(d, 0.0, 0.5, 1), DomainError);
    CHECK_THROWS_AS(generate_criterion(d, 0.5, 1.5, 1), DomainError);
    CttSpec flat = parallel_spec(100, 3, 1.0, 1);
    flat.true_sd = 0.0;
    CHECK_THROWS_AS(generate_criterion(generate_ctt(flat), 0.5, 0.5, 1), DegenerateError);
  }
}

TEST_CASE("records round-trip through the ingest schema") {
  const SimulatedDataset d = generate_ctt(parallel_spec(20, 4, 1.0, 11));
  const auto csv = write_records_csv(to_records(d.observed));
  const ScoreMatrix back = pivot(parse_records(csv, RecordFormat::CsvLong), "sim");
  CHECK(back == d.observed);
}
