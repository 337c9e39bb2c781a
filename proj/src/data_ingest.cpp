#include "nlgm/data_ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <set>
#include <tuple>

#include "json.hpp"
#include "nlgm/error.hpp"
#include "nlgm/rng.hpp"

namespace nlgm {

namespace {

std::string_view trim(std::string_view s) {
  const auto ws = " \t\r";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

// Splits one logical CSV row starting at `pos`. Handles RFC 4180 quoting,
// including embedded newlines. Advances `pos` past the row terminator and
// `line` by the number of physical lines consumed.
std::vector<std::string> next_csv_row(std::string_view text, std::size_t& pos, std::size_t& line) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  bool was_quoted = false;
  while (pos < text.size()) {
    const char c = text[pos++];
    if (quoted) {
      if (c == '"') {
        if (pos < text.size() && text[pos] == '"') {
          field += '"';
          ++pos;
        } else {
          quoted = false;
        }
      } else {
        if (c == '\n') ++line;
        field += c;
      }
      continue;
    }
    if (c == '"' && trim(field).empty()) {
      field.clear();
      quoted = true;
      was_quoted = true;
    } else if (c == ',') {
      fields.push_back(was_quoted ? field : std::string(trim(field)));
      field.clear();
      was_quoted = false;
    } else if (c == '\n') {
      ++line;
      break;
    } else if (!(was_quoted && (c == ' ' || c == '\t' || c == '\r'))) {
      field += c;
    }
  }
  if (quoted) throw ParseError("unterminated quoted field", line);
  fields.push_back(was_quoted ? field : std::string(trim(field)));
  return fields;
}

double parse_score(std::string_view text, std::size_t row, const char* unit) {
  if (text.empty()) throw ParseError("empty score", row, unit);
  double value = 0.0;
  const char* first = text.data();
  const char* last = first + text.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) {
    throw ParseError("non-numeric score '" + std::string(text) + "'", row, unit);
  }
  if (!std::isfinite(value)) {
    throw ParseError("non-finite score '" + std::string(text) + "'", row, unit);
  }
  return value;
}

using RecordKey = std::tuple<std::string, std::string, std::string, std::string, std::string>;

RecordKey key_of(const ScoreRecord& r) {
  return {r.candidate_id, r.item_id, r.metric_id, r.run_id.value_or(""), r.rater_id.value_or("")};
}

std::optional<std::string> optional_id(std::string_view s) {
  if (s.empty()) return std::nullopt;
  return std::string(s);
}

void check_ids(const ScoreRecord& r, std::size_t row, const char* unit) {
  if (r.candidate_id.empty()) throw ParseError("empty candidate_id", row, unit);
  if (r.item_id.empty()) throw ParseError("empty item_id", row, unit);
  if (r.metric_id.empty()) throw ParseError("empty metric_id", row, unit);
}

std::vector<ScoreRecord> parse_csv(std::string_view text) {
  if (text.substr(0, 3) == "\xEF\xBB\xBF") text.remove_prefix(3);
  std::size_t pos = 0;
  std::size_t line = 1;
  if (trim(text).empty()) throw ParseError("empty input: missing header row");

  const auto header = next_csv_row(text, pos, line);
  std::map<std::string, std::size_t> column;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (!column.emplace(header[i], i).second) {
      throw ParseError("duplicate column '" + header[i] + "'", 1);
    }
  }
  for (const char* required : {"candidate_id", "item_id", "metric_id", "score"}) {
    if (!column.contains(required)) {
      throw ParseError(std::string("missing required column '") + required + "'", 1);
    }
  }
  auto index_of = [&](const char* name) -> std::optional<std::size_t> {
    auto it = column.find(name);
    if (it == column.end()) return std::nullopt;
    return it->second;
  };
  const std::size_t c_cand = *index_of("candidate_id");
  const std::size_t c_item = *index_of("item_id");
  const std::size_t c_metric = *index_of("metric_id");
  const std::size_t c_score = *index_of("score");
  const auto c_run = index_of("run_id");
  const auto c_rater = index_of("rater_id");

  std::vector<ScoreRecord> out;
  std::set<RecordKey> seen;
  while (pos < text.size()) {
    const std::size_t row = line;
    const auto fields = next_csv_row(text, pos, line);
    if (fields.size() == 1 && fields[0].empty()) continue;  // blank line
    if (fields.size() != header.size()) {
      throw ParseError("expected " + std::to_string(header.size()) + " fields, found " +
                           std::to_string(fields.size()),
                       row);
    }
    ScoreRecord r;
    r.candidate_id = fields[c_cand];
    r.item_id = fields[c_item];
    r.metric_id = fields[c_metric];
    if (c_run) r.run_id = optional_id(fields[*c_run]);
    if (c_rater) r.rater_id = optional_id(fields[*c_rater]);
    check_ids(r, row, "row");
    r.score = parse_score(fields[c_score], row, "row");
    if (!seen.insert(key_of(r)).second) throw ParseError("duplicate record key", row);
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<ScoreRecord> parse_json(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("invalid JSON: ") + e.what());
  }
  if (!doc.is_array()) throw ParseError("JSON input must be an array of record objects");

  std::vector<ScoreRecord> out;
  std::set<RecordKey> seen;
  std::size_t index = 0;
  for (const auto& obj : doc) {
    const std::size_t row = ++index;
    if (!obj.is_object()) throw ParseError("record is not an object", row, "record");
    auto str_field = [&](const char* key, bool required) -> std::optional<std::string> {
      auto it = obj.find(key);
      if (it == obj.end() || it->is_null()) {
        if (required) throw ParseError(std::string("missing field '") + key + "'", row, "record");
        return std::nullopt;
      }
      if (!it->is_string()) {
        throw ParseError(std::string("field '") + key + "' must be a string", row, "record");
      }
      return optional_id(it->get<std::string>());
    };
    ScoreRecord r;
    r.candidate_id = str_field("candidate_id", true).value_or("");
    r.item_id = str_field("item_id", true).value_or("");
    r.metric_id = str_field("metric_id", true).value_or("");
    r.run_id = str_field("run_id", false);
    r.rater_id = str_field("rater_id", false);
    check_ids(r, row, "record");
    auto score = obj.find("score");
    if (score == obj.end()) throw ParseError("missing field 'score'", row, "record");
    if (score->is_number()) {
      r.score = score->get<double>();
      if (!std::isfinite(r.score)) throw ParseError("non-finite score", row, "record");
    } else {
      throw ParseError("non-numeric score " + score->dump(), row, "record");
    }
    if (!seen.insert(key_of(r)).second) throw ParseError("duplicate record key", row, "record");
    out.push_back(std::move(r));
  }
  return out;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + "\"";
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

// Two-level mean: average within each inner group, then across groups.
double nested_mean(const std::map<std::string, std::vector<double>>& groups) {
  double s = 0.0;
  for (const auto& [_, v] : groups) s += mean_of(v);
  return s / static_cast<double>(groups.size());
}

}  // namespace

ScoreMatrix ScoreMatrix::select_items(const std::vector<Eigen::Index>& cols) const {
  ScoreMatrix out;
  out.candidates = candidates;
  out.label = label;
  out.values.resize(values.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t k = 0; k < cols.size(); ++k) {
    out.values.col(static_cast<Eigen::Index>(k)) = values.col(cols[k]);
    out.items.push_back(items[static_cast<std::size_t>(cols[k])]);
  }
  return out;
}

std::vector<ScoreRecord> parse_records(std::string_view bytes, RecordFormat format) {
  return format == RecordFormat::CsvLong ? parse_csv(bytes) : parse_json(bytes);
}

std::string write_records_csv(const std::vector<ScoreRecord>& records) {
  std::string out = "candidate_id,item_id,metric_id,run_id,rater_id,score\n";
  char buf[64];
  for (const auto& r : records) {
    const auto res = std::to_chars(buf, buf + sizeof buf, r.score);
    out += csv_field(r.candidate_id) + ',' + csv_field(r.item_id) + ',' + csv_field(r.metric_id) +
           ',' + csv_field(r.run_id.value_or("")) + ',' + csv_field(r.rater_id.value_or("")) +
           ',' + std::string(buf, res.ptr) + '\n';
  }
  return out;
}

std::vector<std::string> metric_ids(const std::vector<ScoreRecord>& records) {
  std::set<std::string> ids;
  for (const auto& r : records) ids.insert(r.metric_id);
  return {ids.begin(), ids.end()};
}

ScoreMatrix pivot(const std::vector<ScoreRecord>& records, const std::string& metric,
                  const Aggregation& aggregation, MissingPolicy missing) {
  using Kind = Aggregation::Kind;
  // cell -> outer group -> inner values
  std::map<std::pair<std::string, std::string>, std::map<std::string, std::vector<double>>> cells;
  std::set<std::string> candidates;
  std::set<std::string> items;
  bool metric_seen = false;
  bool id_seen = false;

  for (const auto& r : records) {
    if (r.metric_id != metric) continue;
    metric_seen = true;
    candidates.insert(r.candidate_id);
    items.insert(r.item_id);
    const std::string run = r.run_id.value_or("");
    const std::string rater = r.rater_id.value_or("");
    std::string outer;
    switch (aggregation.kind) {
      case Kind::MeanOverRuns:
        outer = rater;
        break;
      case Kind::MeanOverRaters:
        outer = run;
        break;
      case Kind::SingleRun:
        if (run != aggregation.id) continue;
        outer = "";  // mean over raters directly
        break;
      case Kind::SingleRater:
        if (rater != aggregation.id) continue;
        outer = "";
        break;
    }
    id_seen = true;
    cells[{r.candidate_id, r.item_id}][outer].push_back(r.score);
  }
  if (!metric_seen) throw DomainError("no records for metric '" + metric + "'");
  if (!id_seen) {
    throw DomainError(std::string(aggregation.kind == Kind::SingleRun ? "unknown run_id '"
                                                                      : "unknown rater_id '") +
                      aggregation.id + "' for metric '" + metric + "'");
  }

  std::vector<std::string> rows(candidates.begin(), candidates.end());
  std::vector<std::string> cols(items.begin(), items.end());
  auto has = [&](const std::string& c, const std::string& i) { return cells.contains({c, i}); };

  std::vector<std::string> keep_rows;
  std::vector<std::string> keep_cols;
  switch (missing) {
    case MissingPolicy::Error:
      for (const auto& c : rows) {
        for (const auto& i : cols) {
          if (!has(c, i)) {
            throw DomainError("missing score for candidate '" + c + "' on item '" + i +
                              "' (metric '" + metric + "')");
          }
        }
      }
      keep_rows = rows;
      keep_cols = cols;
      break;
    case MissingPolicy::DropCandidate:
      for (const auto& c : rows) {
        if (std::all_of(cols.begin(), cols.end(), [&](const auto& i) { return has(c, i); })) {
          keep_rows.push_back(c);
        }
      }
      keep_cols = cols;
      break;
    case MissingPolicy::DropItem:
      for (const auto& i : cols) {
        if (std::all_of(rows.begin(), rows.end(), [&](const auto& c) { return has(c, i); })) {
          keep_cols.push_back(i);
        }
      }
      keep_rows = rows;
      break;
  }
  if (keep_rows.size() < 2 || keep_cols.empty()) {
    throw DomainError("metric '" + metric + "': " + std::to_string(keep_rows.size()) +
                      " candidates and " + std::to_string(keep_cols.size()) +
                      " items remain after the missing-data policy; need >= 2 and >= 1");
  }

  ScoreMatrix m;
  m.label = metric;
  m.candidates = keep_rows;
  m.items = keep_cols;
  m.values.resize(static_cast<Eigen::Index>(keep_rows.size()),
                  static_cast<Eigen::Index>(keep_cols.size()));
  for (std::size_t r = 0; r < keep_rows.size(); ++r) {
    for (std::size_t c = 0; c < keep_cols.size(); ++c) {
      m.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          nested_mean(cells.at({keep_rows[r], keep_cols[c]}));
    }
  }
  return m;
}

ScoreMatrix pivot_by_metric(const std::vector<ScoreRecord>& records, const Aggregation& aggregation,
                            MissingPolicy missing) {
  const auto metrics = metric_ids(records);
  if (metrics.empty()) throw DomainError("no records");

  std::map<std::string, std::map<std::string, double>> by_metric;  // metric -> candidate -> mean
  std::set<std::string> candidates;
  for (const auto& metric : metrics) {
    const ScoreMatrix m = pivot(records, metric, aggregation, missing);
    const Eigen::VectorXd means = m.values.rowwise().mean();
    for (std::size_t i = 0; i < m.candidates.size(); ++i) {
      by_metric[metric][m.candidates[i]] = means(static_cast<Eigen::Index>(i));
      candidates.insert(m.candidates[i]);
    }
  }

  std::vector<std::string> rows;
  std::vector<std::string> cols;
  for (const auto& c : candidates) {
    bool complete = true;
    for (const auto& metric : metrics) complete = complete && by_metric[metric].contains(c);
    if (complete || missing == MissingPolicy::DropItem) rows.push_back(c);
    else if (missing == MissingPolicy::Error) {
      throw DomainError("candidate '" + c + "' is missing from at least one metric");
    }
  }
  for (const auto& metric : metrics) {
    const bool complete = std::all_of(rows.begin(), rows.end(),
                                      [&](const auto& c) { return by_metric[metric].contains(c); });
    if (complete) cols.push_back(metric);
  }
  if (rows.size() < 2 || cols.empty()) {
    throw DomainError("fewer than 2 candidates or no metrics remain after the missing-data policy");
  }

  ScoreMatrix out;
  out.label = "metrics";
  out.candidates = rows;
  out.items = cols;
  out.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < cols.size(); ++c) {
      out.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          by_metric[cols[c]][rows[r]];
    }
  }
  return out;
}

std::string to_string(SplitScheme::Kind kind) {
  switch (kind) {
    case SplitScheme::Kind::OddEven:
      return "odd-even";
    case SplitScheme::Kind::FirstSecond:
      return "first-second";
    case SplitScheme::Kind::Random:
      return "random";
  }
  return "";
}

std::pair<std::vector<Eigen::Index>, std::vector<Eigen::Index>> split_indices(
    Eigen::Index n_items, const SplitScheme& scheme, std::uint64_t stream_index) {
  if (n_items < 2) throw DomainError("split requires at least 2 items, got " + std::to_string(n_items));
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n_items));
  for (Eigen::Index j = 0; j < n_items; ++j) order[static_cast<std::size_t>(j)] = j;

  std::vector<Eigen::Index> first;
  std::vector<Eigen::Index> second;
  if (scheme.kind == SplitScheme::Kind::FirstSecond) {
    const auto cut = static_cast<std::size_t>((n_items + 1) / 2);
    first.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(cut));
    second.assign(order.begin() + static_cast<std::ptrdiff_t>(cut), order.end());
    return {first, second};
  }
  if (scheme.kind == SplitScheme::Kind::Random) {
    Rng rng = Rng::stream(scheme.seed, stream_index);
    rng.shuffle(std::span<Eigen::Index>(order));
  }
  for (std::size_t k = 0; k < order.size(); ++k) (k % 2 == 0 ? first : second).push_back(order[k]);
  if (scheme.kind == SplitScheme::Kind::Random) {
    std::sort(first.begin(), first.end());
    std::sort(second.begin(), second.end());
  }
  return {first, second};
}

std::pair<ScoreMatrix, ScoreMatrix> split_matrix(const ScoreMatrix& m, const SplitScheme& scheme,
                                                 std::uint64_t stream_index) {
  const auto [a, b] = split_indices(m.n_items(), scheme, stream_index);
  return {m.select_items(a), m.select_items(b)};
}

}  // namespace nlgm
