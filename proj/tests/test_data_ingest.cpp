#include <algorithm>
#include <map>
#include <set>

#include "doctest.h"
#include "nlgm/data_ingest.hpp"
#include "nlgm/error.hpp"
#include "oracle.hpp"

using namespace nlgm;

namespace {

std::string header() { return "candidate_id,item_id,metric_id,run_id,rater_id,score\n"; }

}  // namespace

TEST_CASE("single valid row maps fields") {
  const auto recs = parse_records("candidate_id,item_id,metric_id,score\nm1,t1,bertscore,0.42\n", RecordFormat::CsvLong);
  REQUIRE(recs.size() == 1);
  CHECK(recs[0].candidate_id == "m1");
  CHECK(recs[0].item_id == "t1");
  CHECK(recs[0].metric_id == "bertscore");
  CHECK(recs[0].score == 0.42);
  CHECK_FALSE(recs[0].run_id.has_value());
  CHECK_FALSE(recs[0].rater_id.has_value());
}

TEST_CASE("non-numeric score names the row") {
  try {
    parse_records("candidate_id,item_id,metric_id,score\nm1,t1,b,abc\n", RecordFormat::CsvLong);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.row() == 2);
    CHECK(std::string(e.what()).find("row 2") != std::string::npos);
  }
}

TEST_CASE("non-finite and empty scores are rejected") {
  CHECK_THROWS_AS(parse_records("candidate_id,item_id,metric_id,score\nm1,t1,b,nan\n", RecordFormat::CsvLong), ParseError);
  CHECK_THROWS_AS(parse_records("candidate_id,item_id,metric_id,score\nm1,t1,b,inf\n", RecordFormat::CsvLong), ParseError);
  CHECK_THROWS_AS(parse_records("candidate_id,item_id,metric_id,score\nm1,t1,b,\n", RecordFormat::CsvLong), ParseError);
}

TEST_CASE("duplicate key is rejected, distinct runs are not") {
  CHECK_THROWS_AS(parse_records(header() + "m1,t1,b,,,1\nm1,t1,b,,,2\n", RecordFormat::CsvLong), ParseError);
  CHECK(parse_records(header() + "m1,t1,b,r1,,1\nm1,t1,b,r2,,2\n", RecordFormat::CsvLong).size() == 2);
}

TEST_CASE("missing required column") {
  try {
    parse_records("candidate_id,item_id,score\nm1,t1,1\n", RecordFormat::CsvLong);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("metric_id") != std::string::npos);
  }
}

TEST_CASE("csv quoting, bom, blank lines and scientific notation") {
  const std::string text = "\xEF\xBB\xBF" + header() + "\"m,1\",t1,b,,,1e-2\n\n\"m\"\"2\",t1,b,,,-3.5E1\n";
  const auto recs = parse_records(text, RecordFormat::CsvLong);
  REQUIRE(recs.size() == 2);
  CHECK(recs[0].candidate_id == "m,1");
  CHECK(recs[0].score == doctest::Approx(0.01));
  CHECK(recs[1].candidate_id == "m\"2");
  CHECK(recs[1].score == -35.0);
}

TEST_CASE("json records") {
  const auto recs = parse_records(
      R"([{"candidate_id":"m1","item_id":"t1","metric_id":"b","score":0.5,"run_id":"r1"},
          {"candidate_id":"m2","item_id":"t1","metric_id":"b","score":1}])",
      RecordFormat::Json);
  REQUIRE(recs.size() == 2);
  CHECK(recs[0].run_id == std::optional<std::string>("r1"));
  CHECK(recs[1].score == 1.0);
  try {
    parse_records(R"([{"candidate_id":"m1","item_id":"t1","metric_id":"b","score":"x"}])", RecordFormat::Json);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("record 1") != std::string::npos);
  }
}

TEST_CASE("csv writer round-trips") {
  const std::string text = header() + "b,t2,m,1,,0.1\na,t1,m,,r,2.5e-07\n";
  const auto recs = parse_records(text, RecordFormat::CsvLong);
  CHECK(parse_records(write_records_csv(recs), RecordFormat::CsvLong) == recs);
}

TEST_CASE("pivot is lexicographic") {
  const auto recs = parse_records(header() + "m2,t2,b,,,4\nm1,t2,b,,,2\nm2,t1,b,,,3\nm1,t1,b,,,1\n", RecordFormat::CsvLong);
  const ScoreMatrix m = pivot(recs, "b");
  CHECK(m.candidates == std::vector<std::string>{"m1", "m2"});
  CHECK(m.items == std::vector<std::string>{"t1", "t2"});
  CHECK(m.values(0, 0) == 1);
  CHECK(m.values(0, 1) == 2);
  CHECK(m.values(1, 0) == 3);
  CHECK(m.values(1, 1) == 4);
}

TEST_CASE("missing cell policies") {
  const auto recs = parse_records(header() +
                                      "m1,t1,b,,,1\nm1,t2,b,,,2\nm1,t3,b,,,3\n"
                                      "m2,t1,b,,,1\nm2,t2,b,,,2\n"
                                      "m3,t1,b,,,5\nm3,t2,b,,,6\nm3,t3,b,,,7\n",
                                  RecordFormat::CsvLong);
  CHECK_THROWS_AS(pivot(recs, "b"), DomainError);
  const ScoreMatrix di = pivot(recs, "b", {}, MissingPolicy::DropItem);
  CHECK(di.items == std::vector<std::string>{"t1", "t2"});
  CHECK(di.n_candidates() == 3);
  const ScoreMatrix dc = pivot(recs, "b", {}, MissingPolicy::DropCandidate);
  CHECK(dc.candidates == std::vector<std::string>{"m1", "m3"});
  CHECK(dc.n_items() == 3);
}

TEST_CASE("empty result after filtering is an error") {
  const auto recs = parse_records(header() + "m1,t1,b,,,1\nm1,t2,b,,,2\nm2,t1,b,,,1\n", RecordFormat::CsvLong);
  CHECK_THROWS_AS(pivot(recs, "b", {}, MissingPolicy::DropCandidate), DomainError);
  CHECK_THROWS_AS(pivot(recs, "nope"), DomainError);
}

TEST_CASE("aggregation over runs and raters") {
  const auto recs = parse_records(header() +
                                      "m1,t1,b,1,,0.4\nm1,t1,b,2,,0.6\n"
                                      "m2,t1,b,1,,0.1\nm2,t1,b,2,,0.3\n",
                                  RecordFormat::CsvLong);
  const ScoreMatrix m = pivot(recs, "b", Aggregation::mean_over_runs());
  CHECK(m.values(0, 0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(m.values(1, 0) == doctest::Approx(0.2).epsilon(1e-15));
  CHECK(pivot(recs, "b", Aggregation::single_run("2")).values(0, 0) == 0.6);
  CHECK_THROWS_AS(pivot(recs, "b", Aggregation::single_run("9")), DomainError);
  CHECK_THROWS_AS(pivot(recs, "b", Aggregation::single_rater("x")), DomainError);

  const auto raters = parse_records(header() + "m1,t1,b,,a,1\nm1,t1,b,,b,3\nm2,t1,b,,a,2\nm2,t1,b,,b,2\n",
                                    RecordFormat::CsvLong);
  CHECK(pivot(raters, "b", Aggregation::mean_over_raters()).values(0, 0) == 2.0);
  CHECK(pivot(raters, "b", Aggregation::single_rater("b")).values(0, 0) == 3.0);
}

TEST_CASE("mean-over-runs equals the direct arithmetic mean") {
  // Deterministic irregular scores, three runs per cell.
  std::string text = header();
  std::map<std::pair<int, int>, std::vector<double>> direct;
  for (int c = 0; c < 4; ++c)
    for (int t = 0; t < 3; ++t)
      for (int r = 0; r < 3; ++r) {
        const double s = std::sin(1.7 * c + 0.3 * t + 2.9 * r) * 10;
        direct[{c, t}].push_back(s);
        text += "c" + std::to_string(c) + ",t" + std::to_string(t) + ",b," + std::to_string(r) + ",," +
                std::to_string(s) + "\n";
      }
  const auto recs = parse_records(text, RecordFormat::CsvLong);
  const ScoreMatrix m = pivot(recs, "b");
  for (const auto& [key, scores] : direct) {
    double expect = 0;
    for (double s : scores) expect += std::stod(std::to_string(s));
    expect /= static_cast<double>(scores.size());
    CHECK(m.values(key.first, key.second) == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("pivot of parse is deterministic under row reordering") {
  std::vector<std::string> rows;
  for (int c = 0; c < 5; ++c)
    for (int t = 0; t < 4; ++t) rows.push_back("c" + std::to_string(c) + ",t" + std::to_string(t) + ",b,,," + std::to_string(c * 10 + t) + "\n");
  std::string a = header(), b = header();
  for (const auto& r : rows) a += r;
  std::reverse(rows.begin(), rows.end());
  for (const auto& r : rows) b += r;
  CHECK(pivot(parse_records(a, RecordFormat::CsvLong), "b") == pivot(parse_records(b, RecordFormat::CsvLong), "b"));
}

TEST_CASE("split schemes") {
  auto [a, b] = split_indices(4, SplitScheme::odd_even());
  CHECK(a == std::vector<Eigen::Index>{0, 2});
  CHECK(b == std::vector<Eigen::Index>{1, 3});
  auto [c, d] = split_indices(5, SplitScheme::first_second());
  CHECK(c.size() == 3);
  CHECK(d.size() == 2);
  CHECK(split_indices(9, SplitScheme::random(7)) == split_indices(9, SplitScheme::random(7)));
  CHECK(split_indices(40, SplitScheme::random(7)) != split_indices(40, SplitScheme::random(8)));
  CHECK_THROWS_AS(split_indices(1, SplitScheme::odd_even()), DomainError);
}

TEST_CASE("split_matrix partitions columns exactly") {
  for (Eigen::Index J = 2; J <= 13; ++J) {
    for (auto scheme : {SplitScheme::odd_even(), SplitScheme::first_second(), SplitScheme::random(J * 31)}) {
      ScoreMatrix m;
      m.values = Eigen::MatrixXd::Random(3, J);
      m.candidates = {"a", "b", "c"};
      for (Eigen::Index j = 0; j < J; ++j) m.items.push_back("i" + std::to_string(100 + j));
      auto [h1, h2] = split_matrix(m, scheme);
      std::set<std::string> s1(h1.items.begin(), h1.items.end()), s2(h2.items.begin(), h2.items.end());
      std::set<std::string> all(m.items.begin(), m.items.end());
      std::set<std::string> uni = s1;
      uni.insert(s2.begin(), s2.end());
      CHECK(uni == all);
      CHECK(s1.size() + s2.size() == all.size());
      CHECK(std::abs(static_cast<long>(s1.size()) - static_cast<long>(s2.size())) <= 1);
      CHECK(h1.values.rowwise().sum().isApprox(
          m.select_items(split_indices(J, scheme).first).values.rowwise().sum()));
    }
  }
}

TEST_CASE("pivot_by_metric uses metrics as columns") {
  const auto recs = parse_records(header() + "m1,t1,a,,,1\nm1,t2,a,,,2\nm1,t1,b,,,5\nm2,t1,a,,,3\nm2,t2,a,,,4\nm2,t1,b,,,6\n",
                                  RecordFormat::CsvLong);
  const ScoreMatrix m = pivot_by_metric(recs);
  CHECK(m.items == std::vector<std::string>{"a", "b"});
  CHECK(m.values(0, 0) == 1.5);  // item mean for metric a
  CHECK(m.values(1, 1) == 6.0);
  CHECK(metric_ids(recs) == std::vector<std::string>{"a", "b"});
}
