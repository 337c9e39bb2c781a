#include "nlgm/cli.hpp"

#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "nlgm/data_ingest.hpp"
#include "nlgm/error.hpp"
#include "nlgm/factor.hpp"
#include "nlgm/reliability.hpp"
#include "nlgm/report.hpp"
#include "nlgm/simulation.hpp"
#include "nlgm/stats.hpp"
#include "nlgm/validity.hpp"

namespace nlgm::cli {

namespace {

namespace fs = std::filesystem;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Config {
  // global
  std::string input;
  std::string input_format = "auto";
  std::string metric;
  std::string format = "json";
  std::string out;
  std::string plot_csv;
  std::optional<std::uint64_t> seed;
  std::size_t bootstrap = 0;
  double level = 0.95;
  std::string aggregation = "mean-over-runs";
  std::string run_id;
  std::string rater_id;
  std::string missing = "error";
  std::string created_at;
  unsigned threads = 0;

  // reliability
  std::string input2;
  std::string run_id2;
  std::string rater_id2;
  std::string split = "odd-even";
  std::optional<std::size_t> n_splits;

  // validity
  std::string criterion;
  std::string criterion_metric;
  std::optional<double> rel_x;
  std::optional<double> rel_y;
  std::string mode = "concurrent";

  // mtmm
  std::string mtmm_spec;
  bool check = false;

  // factor
  std::size_t k = 0;
  std::string rotate = "none";
  std::string pattern;
  std::string model;
  std::string by = "item";

  // simulate
  std::string sim_spec;
  std::string out_csv;
};

// Byte inputs read so far; the report digest covers them in read order.
struct Inputs {
  std::string concatenated;
  Json files = Json::array();

  std::string read(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    std::string bytes = ss.str();
    concatenated += bytes;
    files.push_back({{"path", path}, {"sha256", sha256_hex(bytes)}});
    return bytes;
  }

  std::string digest() const { return "sha256:" + sha256_hex(concatenated); }
};

void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write '" + path + "'");
  out << bytes;
  if (!out) throw Error("failed writing '" + path + "'");
}

RecordFormat record_format(const Config& cfg, const std::string& path) {
  if (cfg.input_format == "csv") return RecordFormat::CsvLong;
  if (cfg.input_format == "json") return RecordFormat::Json;
  return fs::path(path).extension() == ".json" ? RecordFormat::Json : RecordFormat::CsvLong;
}

std::vector<ScoreRecord> load_records(const Config& cfg, Inputs& inputs, const std::string& path) {
  const std::string bytes = inputs.read(path);
  try {
    return parse_records(bytes, record_format(cfg, path));
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what(), e.row());
  }
}

Aggregation make_aggregation(const std::string& kind, const std::string& run_id, const std::string& rater_id) {
  if (!run_id.empty() && !rater_id.empty()) throw UsageError("--run-id and --rater-id are mutually exclusive");
  if (!run_id.empty()) return Aggregation::single_run(run_id);
  if (!rater_id.empty()) return Aggregation::single_rater(rater_id);
  if (kind == "mean-over-runs") return Aggregation::mean_over_runs();
  if (kind == "mean-over-raters") return Aggregation::mean_over_raters();
  throw UsageError("--aggregation must be mean-over-runs or mean-over-raters (use --run-id/--rater-id for single)");
}

MissingPolicy make_missing(const std::string& s) {
  if (s == "error") return MissingPolicy::Error;
  if (s == "drop-candidate") return MissingPolicy::DropCandidate;
  if (s == "drop-item") return MissingPolicy::DropItem;
  throw UsageError("unknown --missing policy '" + s + "'");
}

std::string resolve_metric(const std::vector<ScoreRecord>& records, const std::string& requested, const std::string& path) {
  if (!requested.empty()) return requested;
  const auto ids = metric_ids(records);
  if (ids.size() == 1) return ids[0];
  throw Error(path + ": " + std::to_string(ids.size()) + " metrics present; select one with --metric");
}

std::string aggregation_label(const Aggregation& a) {
  switch (a.kind) {
    case Aggregation::Kind::MeanOverRuns:
      return "mean-over-runs";
    case Aggregation::Kind::MeanOverRaters:
      return "mean-over-raters";
    case Aggregation::Kind::SingleRun:
      return "single-run(" + a.id + ")";
    case Aggregation::Kind::SingleRater:
      return "single-rater(" + a.id + ")";
  }
  return "";
}

struct Session {
  const Config& cfg;
  Inputs inputs;
  Json options = Json::object();
  std::vector<std::string> warnings;

  explicit Session(const Config& c) : cfg(c) {
    options["format"] = cfg.format;
    options["level"] = cfg.level;
    options["bootstrap"] = cfg.bootstrap;
    options["seed"] = cfg.seed ? Json(*cfg.seed) : Json(nullptr);
  }

  ScoreMatrix load_matrix(const std::string& path, const Aggregation& agg, const std::string& metric_flag,
                          const char* key) {
    const auto records = load_records(cfg, inputs, path);
    const MissingPolicy missing = make_missing(cfg.missing);
    Json echo = {{"path", path}, {"aggregation", aggregation_label(agg)}, {"missing", cfg.missing}};
    ScoreMatrix m;
    if (cfg.by == "metric") {
      m = pivot_by_metric(records, agg, missing);
      echo["by"] = "metric";
    } else {
      const std::string metric = resolve_metric(records, metric_flag, path);
      m = pivot(records, metric, agg, missing);
      echo["metric"] = metric;
    }
    echo["n_candidates"] = m.n_candidates();
    echo["n_items"] = m.n_items();
    options[key] = echo;
    return m;
  }

  ScoreMatrix load_primary() {
    if (cfg.input.empty()) throw UsageError("--input is required");
    return load_matrix(cfg.input, make_aggregation(cfg.aggregation, cfg.run_id, cfg.rater_id), cfg.metric, "input");
  }

  BootstrapOptions bootstrap_options() const {
    return {cfg.bootstrap, *cfg.seed, cfg.level, cfg.threads};
  }

  void emit(Analysis analysis, std::ostream& out) {
    std::optional<std::string> created;
    if (!cfg.created_at.empty()) {
      created = cfg.created_at;
    } else if (const char* epoch = std::getenv("SOURCE_DATE_EPOCH")) {
      char* end = nullptr;
      const long long secs = std::strtoll(epoch, &end, 10);
      if (end && *end == '\0' && secs >= 0) {
        std::time_t t = static_cast<std::time_t>(secs);
        std::tm tm{};
        gmtime_r(&t, &tm);
        char buf[32];
        std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
        created = buf;
      }
    }
    options["inputs"] = inputs.files;
    const AnalysisReport report =
        make_report(std::move(analysis), options, inputs.digest(), warnings, created);
    const std::string text = render(report, cfg.format == "markdown" ? ReportFormat::Markdown : ReportFormat::Json);
    if (!cfg.plot_csv.empty()) write_file(cfg.plot_csv, plot_data(report));
    if (cfg.out.empty() || cfg.out == "-") {
      out << text;
    } else {
      write_file(cfg.out, text);
    }
  }
};

void require_no_bootstrap(const Config& cfg, const char* command) {
  if (cfg.bootstrap > 0) throw UsageError(std::string("--bootstrap is not supported by '") + command + "'");
}

void require_seed_for_bootstrap(const Config& cfg) {
  if (cfg.bootstrap > 0 && !cfg.seed) throw UsageError("--bootstrap requires --seed");
  if (cfg.bootstrap > 0 && cfg.bootstrap < 100) throw UsageError("--bootstrap must be 0 or at least 100");
}

// ---------------------------------------------------------------------------

void cmd_reliability(const std::string& sub, const Config& cfg, std::ostream& out) {
  require_seed_for_bootstrap(cfg);
  Session s(cfg);
  s.options["command"] = "reliability " + sub;
  ReliabilityAnalysis result;

  if (sub == "alpha") {
    const ScoreMatrix m = s.load_primary();
    result.estimate = cronbach_alpha(m);
    if (cfg.bootstrap) result.estimate.ci = bootstrap_alpha(m, s.bootstrap_options());
  } else if (sub == "split-half") {
    SplitScheme scheme;
    scheme.kind = split_kind_from_string(cfg.split);
    std::size_t splits = 1;
    if (scheme.kind == SplitScheme::Kind::Random) {
      if (!cfg.seed) throw UsageError("--split random requires --seed");
      scheme.seed = *cfg.seed;
      splits = cfg.n_splits.value_or(20);
    } else if (cfg.n_splits && *cfg.n_splits != 1) {
      throw UsageError("--n-splits applies only to --split random");
    }
    if (splits == 0) throw UsageError("--n-splits must be >= 1");
    s.options["split"] = cfg.split;
    s.options["n_splits"] = splits;
    const ScoreMatrix m = s.load_primary();
    SplitHalfReport rep = split_half(m, scheme, splits);
    if (cfg.bootstrap) rep.estimate.ci = bootstrap_split_half(m, scheme, splits, s.bootstrap_options());
    result.estimate = rep.estimate;
    result.split = rep.split;
  } else {  // test-retest
    const ScoreMatrix first = s.load_primary();
    const std::string path2 = cfg.input2.empty() ? cfg.input : cfg.input2;
    Aggregation agg2 = make_aggregation(cfg.aggregation, cfg.run_id, cfg.rater_id);
    if (!cfg.run_id2.empty() || !cfg.rater_id2.empty()) agg2 = make_aggregation(cfg.aggregation, cfg.run_id2, cfg.rater_id2);
    if (path2 == cfg.input && cfg.input2.empty() && cfg.run_id2.empty() && cfg.rater_id2.empty()) {
      throw UsageError("test-retest needs --input2 or a second administration via --run-id2/--rater-id2");
    }
    const ScoreMatrix second = s.load_matrix(path2, agg2, cfg.metric.empty() ? first.label : cfg.metric, "input2");
    result.estimate = test_retest(first, second);
    if (cfg.bootstrap) result.estimate.ci = bootstrap_test_retest(first, second, s.bootstrap_options());
  }
  s.emit(result, out);
}

void cmd_validity(const Config& cfg, std::ostream& out) {
  require_seed_for_bootstrap(cfg);
  Session s(cfg);
  s.options["command"] = "validity criterion";
  s.options["mode"] = cfg.mode;
  s.options["rel_x"] = cfg.rel_x ? Json(*cfg.rel_x) : Json(nullptr);
  s.options["rel_y"] = cfg.rel_y ? Json(*cfg.rel_y) : Json(nullptr);
  const ScoreMatrix x = s.load_primary();
  const Aggregation agg = make_aggregation(cfg.aggregation, cfg.run_id, cfg.rater_id);
  const ScoreMatrix y = s.load_matrix(cfg.criterion, agg, cfg.criterion_metric, "criterion");

  std::map<std::string, Eigen::Index> y_row;
  for (std::size_t i = 0; i < y.candidates.size(); ++i) y_row[y.candidates[i]] = static_cast<Eigen::Index>(i);
  if (y_row.size() != x.candidates.size()) throw DomainError("score and criterion files cover different candidates");
  ScoreMatrix joint;
  joint.candidates = x.candidates;
  joint.items = {"x", "y"};
  joint.values.resize(x.n_candidates(), 2);
  joint.values.col(0) = x.totals();
  const Eigen::VectorXd y_tot = y.totals();
  for (std::size_t i = 0; i < x.candidates.size(); ++i) {
    auto it = y_row.find(x.candidates[i]);
    if (it == y_row.end()) throw DomainError("candidate '" + x.candidates[i] + "' has no criterion score");
    joint.values(static_cast<Eigen::Index>(i), 1) = y_tot(it->second);
  }

  CriterionValidityOptions opts;
  opts.rel_x = cfg.rel_x;
  opts.rel_y = cfg.rel_y;
  opts.mode = criterion_mode_from_string(cfg.mode);
  opts.level = cfg.level;
  CriterionValidityReport rep = criterion_validity(joint.values.col(0), joint.values.col(1), opts);
  if (cfg.bootstrap) {
    rep.ci = bootstrap([](const ScoreMatrix& m) { return pearson(m.values.col(0), m.values.col(1)).r; }, joint,
                       s.bootstrap_options());
  }
  s.emit(rep, out);
}

void cmd_mtmm(const Config& cfg, std::ostream& out) {
  require_no_bootstrap(cfg, "mtmm");
  if (cfg.mtmm_spec.empty()) throw UsageError("--spec is required");
  Session s(cfg);
  s.options["command"] = "mtmm";
  s.options["check"] = cfg.check;
  const Json spec = [&] {
    const std::string bytes = s.inputs.read(cfg.mtmm_spec);
    try {
      return Json::parse(bytes);
    } catch (const Json::parse_error& e) {
      throw ParseError(cfg.mtmm_spec + ": invalid JSON: " + e.what());
    }
  }();
  const fs::path base = fs::path(cfg.mtmm_spec).parent_path();
  auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() || base.empty() ? p : (base / p).string(); };

  std::vector<Json> cell_specs;
  if (spec.contains("cells")) {
    for (const auto& c : spec.at("cells")) cell_specs.push_back(c);
  } else {
    const auto traits = spec.at("traits").get<std::vector<std::string>>();
    const auto methods = spec.at("methods").get<std::vector<std::string>>();
    const std::string by = spec.value("method_by", "rater");
    if (by != "rater" && by != "run") throw ParseError("mtmm spec: method_by must be 'rater' or 'run'");
    for (const auto& t : traits) {
      for (const auto& m : methods) {
        Json c = {{"trait", t}, {"method", m}, {"metric", t}};
        c[by == "rater" ? "rater_id" : "run_id"] = m;
        if (spec.contains("input")) c["input"] = spec["input"];
        cell_specs.push_back(c);
      }
    }
  }

  std::map<std::string, std::vector<ScoreRecord>> cache;
  std::vector<MtmmCell> cells;
  Json echo = Json::array();
  for (const auto& c : cell_specs) {
    std::string path = c.contains("input") ? resolve(c.at("input").get<std::string>()) : cfg.input;
    if (path.empty()) throw ParseError("mtmm spec: cell without 'input' and no --input given");
    if (!cache.contains(path)) cache[path] = load_records(cfg, s.inputs, path);
    const auto& records = cache[path];
    const Aggregation agg = make_aggregation(c.value("aggregation", cfg.aggregation), c.value("run_id", std::string()),
                                             c.value("rater_id", std::string()));
    MtmmCell cell;
    cell.trait = c.at("trait").get<std::string>();
    cell.method = c.at("method").get<std::string>();
    const std::string metric = c.value("metric", cell.trait);
    const ScoreMatrix m = pivot(records, metric, agg, make_missing(c.value("missing", cfg.missing)));
    cell.candidates = m.candidates;
    cell.scores = m.totals();
    if (c.contains("reliability") && !c["reliability"].is_null()) cell.reliability = c["reliability"].get<double>();
    echo.push_back({{"trait", cell.trait}, {"method", cell.method}, {"metric", metric}, {"aggregation", aggregation_label(agg)}});
    cells.push_back(std::move(cell));
  }
  s.options["cells"] = echo;

  MtmmAnalysis result;
  result.table = build_mtmm(cells);
  if (cfg.check) {
    MtmmThresholds th;
    th.convergent_min_mean = spec.value("convergent_min_mean", th.convergent_min_mean);
    s.options["convergent_min_mean"] = th.convergent_min_mean;
    result.summary = campbell_fiske(result.table, th);
  }
  s.emit(result, out);
}

FactorModel load_model(Session& s, const std::string& path) {
  const std::string bytes = s.inputs.read(path);
  Json j;
  try {
    j = Json::parse(bytes);
  } catch (const Json::parse_error& e) {
    throw ParseError(path + ": invalid JSON: " + e.what());
  }
  try {
    if (j.contains("analysis_type")) {
      const std::string type = j["analysis_type"].get<std::string>();
      if (type == "efa" || type == "cfa") return j.at("analysis").at("model").get<FactorModel>();
      throw ParseError(path + ": report of type '" + type + "' carries no factor model");
    }
    return j.get<FactorModel>();
  } catch (const Json::exception& e) {
    throw ParseError(path + ": malformed factor model: " + e.what());
  }
}

void cmd_factor(const std::string& sub, const Config& cfg, std::ostream& out) {
  require_no_bootstrap(cfg, "factor");
  Session s(cfg);
  s.options["command"] = "factor " + sub;
  s.options["by"] = cfg.by;
  const ScoreMatrix m = s.load_primary();

  if (sub == "efa") {
    s.options["k"] = cfg.k;
    s.options["rotate"] = cfg.rotate;
    const Eigen::MatrixXd corr = correlation_matrix(m);
    EfaAnalysis result;
    result.model = efa(corr, cfg.k);
    if (cfg.rotate == "varimax") {
      if (cfg.k < 2) throw DomainError("varimax rotation requires at least 2 factors");
      result.model = rotate_varimax(result.model);
    }
    result.model.indicators = m.items;
    result.eigenvalues = eigenvalues_descending(corr);
    s.emit(result, out);
  } else if (sub == "cfa") {
    if (cfg.pattern.empty()) throw UsageError("--pattern is required");
    const std::string bytes = s.inputs.read(cfg.pattern);
    Json pj;
    try {
      pj = Json::parse(bytes);
    } catch (const Json::parse_error& e) {
      throw ParseError(cfg.pattern + ": invalid JSON: " + e.what());
    }
    const auto factors = pj.at("factors").get<std::vector<std::string>>();
    const auto loads = pj.at("indicators").get<std::map<std::string, std::vector<std::string>>>();
    std::vector<Eigen::Index> cols;
    std::vector<std::string> names;
    for (std::size_t j = 0; j < m.items.size(); ++j) {
      if (loads.contains(m.items[j])) {
        cols.push_back(static_cast<Eigen::Index>(j));
        names.push_back(m.items[j]);
      } else {
        s.warnings.push_back("column '" + m.items[j] + "' is not in the pattern and was excluded");
      }
    }
    for (const auto& [ind, _] : loads) {
      if (std::find(names.begin(), names.end(), ind) == names.end()) {
        throw DomainError("pattern indicator '" + ind + "' not found in data");
      }
    }
    LoadingPattern pattern = LoadingPattern::Constant(static_cast<Eigen::Index>(names.size()),
                                                      static_cast<Eigen::Index>(factors.size()), false);
    for (std::size_t j = 0; j < names.size(); ++j) {
      for (const auto& f : loads.at(names[j])) {
        auto it = std::find(factors.begin(), factors.end(), f);
        if (it == factors.end()) throw DomainError("pattern: unknown factor '" + f + "' for indicator '" + names[j] + "'");
        pattern(static_cast<Eigen::Index>(j), it - factors.begin()) = true;
      }
    }
    const Eigen::MatrixXd corr = correlation_matrix(m.select_items(cols));
    CfaFit fit = cfa_fit(corr, pattern);
    fit.factor_names = factors;
    fit.model.indicators = names;
    s.emit(fit, out);
  } else if (sub == "scores") {
    if (cfg.model.empty()) throw UsageError("--model is required");
    const FactorModel model = load_model(s, cfg.model);
    s.emit(factor_scores(m, model), out);
  } else {  // suggest-k
    const Eigen::MatrixXd corr = correlation_matrix(m);
    SuggestKAnalysis result;
    result.eigenvalues = eigenvalues_descending(corr);
    result.suggested_k = suggest_n_factors(corr);
    s.emit(result, out);
  }
}

void cmd_simulate(const std::string& sub, const Config& cfg, std::ostream& out) {
  require_no_bootstrap(cfg, "simulate");
  if (cfg.seed) throw UsageError("simulate takes its seed from the spec file; drop --seed");
  if (cfg.sim_spec.empty()) throw UsageError("--spec is required");
  if (cfg.out_csv.empty()) throw UsageError("--out-csv is required");
  Session s(cfg);
  s.options["command"] = "simulate " + sub;
  const std::string bytes = s.inputs.read(cfg.sim_spec);
  Json spec;
  try {
    spec = Json::parse(bytes);
  } catch (const Json::parse_error& e) {
    throw ParseError(cfg.sim_spec + ": invalid JSON: " + e.what());
  }

  SimulationSummary summary;
  summary.kind = sub;
  std::vector<ScoreRecord> records;
  try {
    if (sub == "ctt" || sub == "retest") {
      const CttSpec ctt = spec.get<CttSpec>();
      summary.spec = ctt;
      summary.seed = ctt.seed;
      if (sub == "ctt") {
        const SimulatedDataset d = generate_ctt(ctt);
        records = to_records(d.observed);
        summary.true_reliability_total = d.true_reliability_total;
      } else {
        const auto [a, b] = generate_retest(ctt);
        records = to_records(a.observed, "1");
        const auto second = to_records(b.observed, "2");
        records.insert(records.end(), second.begin(), second.end());
        summary.true_reliability_total = a.true_reliability_total;
      }
      summary.n_candidates = ctt.n_candidates;
      summary.n_items = ctt.n_items;
    } else if (sub == "factor") {
      const FactorSimSpec fs_spec = spec.get<FactorSimSpec>();
      summary.spec = fs_spec;
      summary.seed = fs_spec.seed;
      const SimulatedDataset d = generate_factor(fs_spec);
      records = to_records(d.observed);
      summary.true_reliability_total = d.true_reliability_total;
      summary.n_candidates = fs_spec.n_candidates;
      summary.n_items = static_cast<std::size_t>(fs_spec.loadings.rows());
    } else {  // criterion
      if (!spec.contains("seed")) throw ParseError("criterion spec: 'seed' is required");
      const double rel_y = spec.at("criterion_reliability").get<double>();
      const double latent = spec.at("latent_corr").get<double>();
      const std::string crit_metric = spec.value("criterion_metric", std::string("criterion"));
      SimulatedDataset d;
      Json echo = spec;
      if (spec.contains("ctt")) {
        const CttSpec ctt = spec["ctt"].get<CttSpec>();
        echo["ctt"] = ctt;
        d = generate_ctt(ctt);
      } else if (spec.contains("factor")) {
        const FactorSimSpec f = spec["factor"].get<FactorSimSpec>();
        echo["factor"] = f;
        d = generate_factor(f);
      } else {
        throw ParseError("criterion spec needs a 'ctt' or 'factor' dataset spec");
      }
      summary.spec = echo;
      summary.seed = spec.at("seed").get<std::uint64_t>();
      const Eigen::VectorXd y = generate_criterion(d, rel_y, latent, summary.seed);
      records = to_records(d.observed);
      const auto crit = criterion_records(d.observed.candidates, y, crit_metric);
      records.insert(records.end(), crit.begin(), crit.end());
      summary.true_reliability_total = d.true_reliability_total;
      summary.population_validity = latent * std::sqrt(d.true_reliability_total * rel_y);
      summary.n_candidates = static_cast<std::size_t>(d.observed.n_candidates());
      summary.n_items = static_cast<std::size_t>(d.observed.n_items());
    }
  } catch (const Json::exception& e) {
    throw ParseError(cfg.sim_spec + ": malformed spec: " + e.what());
  }
  const std::string csv = write_records_csv(records);
  write_file(cfg.out_csv, csv);
  summary.output_csv = cfg.out_csv;
  summary.output_digest = "sha256:" + sha256_hex(csv);
  s.emit(summary, out);
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Config cfg;
  CLI::App app{"Psychometric meta-evaluation of NLG metric scores", "nlgm"};
  app.require_subcommand(1);
  app.fallthrough();

  std::uint64_t seed_value = 0;
  std::size_t n_splits_value = 0;
  double rel_x_value = 0.0;
  double rel_y_value = 0.0;

  app.add_option("--input", cfg.input, "Score file (long CSV or JSON records)");
  app.add_option("--input-format", cfg.input_format, "Score file format")
      ->check(CLI::IsMember({"auto", "csv", "json"}));
  app.add_option("--metric", cfg.metric, "Metric id to analyse");
  app.add_option("--format", cfg.format, "Report format")->check(CLI::IsMember({"json", "markdown"}));
  app.add_option("--out", cfg.out, "Report path (default stdout)");
  app.add_option("--plot-csv", cfg.plot_csv, "Also write plottable series (scree, bootstrap, MTMM) as CSV");
  auto* seed_opt = app.add_option("--seed", seed_value, "Seed for every randomized step");
  app.add_option("--bootstrap", cfg.bootstrap, "Bootstrap replicates (0 disables)");
  app.add_option("--level", cfg.level, "Confidence level")->check(CLI::Range(0.0, 1.0));
  app.add_option("--aggregation", cfg.aggregation, "mean-over-runs | mean-over-raters")
      ->check(CLI::IsMember({"mean-over-runs", "mean-over-raters"}));
  app.add_option("--run-id", cfg.run_id, "Use a single run");
  app.add_option("--rater-id", cfg.rater_id, "Use a single rater");
  app.add_option("--missing", cfg.missing, "Missing-cell policy")
      ->check(CLI::IsMember({"error", "drop-candidate", "drop-item"}));
  app.add_option("--by", cfg.by, "Indicators are items of one metric, or metrics")
      ->check(CLI::IsMember({"item", "metric"}));
  app.add_option("--created-at", cfg.created_at, "Timestamp recorded in the report");
  app.add_option("--threads", cfg.threads, "Bootstrap worker threads (0 = all cores)");

  auto* rel = app.add_subcommand("reliability", "Reliability estimates");
  rel->require_subcommand(1)->fallthrough();
  auto* tr = rel->add_subcommand("test-retest", "Correlation of total scores across two administrations");
  tr->fallthrough();
  tr->add_option("--input2", cfg.input2, "Second administration");
  tr->add_option("--run-id2", cfg.run_id2, "Run id of the second administration");
  tr->add_option("--rater-id2", cfg.rater_id2, "Rater id of the second administration");
  auto* sh = rel->add_subcommand("split-half", "Split-half with Spearman-Brown step-up");
  sh->fallthrough();
  sh->add_option("--split", cfg.split, "Split scheme")->check(CLI::IsMember({"odd-even", "first-second", "random"}));
  auto* nsplits_opt = sh->add_option("--n-splits", n_splits_value, "Random splits to average");
  auto* al = rel->add_subcommand("alpha", "Coefficient alpha");
  al->fallthrough();

  auto* val = app.add_subcommand("validity", "Criterion-related validity");
  val->require_subcommand(1)->fallthrough();
  auto* crit = val->add_subcommand("criterion", "Validity coefficient with attenuation analysis");
  crit->fallthrough();
  crit->add_option("--criterion", cfg.criterion, "Criterion score file")->required();
  crit->add_option("--criterion-metric", cfg.criterion_metric, "Metric id inside the criterion file");
  auto* relx_opt = crit->add_option("--rel-x", rel_x_value, "Reliability of the metric")->check(CLI::Range(0.0, 1.0));
  auto* rely_opt = crit->add_option("--rel-y", rel_y_value, "Reliability of the criterion")->check(CLI::Range(0.0, 1.0));
  crit->add_option("--mode", cfg.mode, "concurrent | predictive")->check(CLI::IsMember({"concurrent", "predictive"}));

  auto* mt = app.add_subcommand("mtmm", "Multitrait-multimethod table");
  mt->fallthrough();
  mt->add_option("--spec", cfg.mtmm_spec, "MTMM spec JSON")->required();
  mt->add_flag("--check", cfg.check, "Run Campbell-Fiske convergent/discriminant checks");

  auto* fa = app.add_subcommand("factor", "Factor analysis");
  fa->require_subcommand(1)->fallthrough();
  auto* efa_cmd = fa->add_subcommand("efa", "Exploratory factor analysis (principal axis)");
  efa_cmd->fallthrough();
  efa_cmd->add_option("--k", cfg.k, "Number of factors")->required();
  efa_cmd->add_option("--rotate", cfg.rotate, "none | varimax")->check(CLI::IsMember({"none", "varimax"}));
  auto* cfa_cmd = fa->add_subcommand("cfa", "Maximum-likelihood confirmatory factor analysis");
  cfa_cmd->fallthrough();
  cfa_cmd->add_option("--pattern", cfg.pattern, "Loading pattern JSON")->required();
  auto* scores_cmd = fa->add_subcommand("scores", "Regression factor scores");
  scores_cmd->fallthrough();
  scores_cmd->add_option("--model", cfg.model, "Factor model or efa/cfa report JSON")->required();
  auto* sk_cmd = fa->add_subcommand("suggest-k", "Kaiser-rule number of factors");
  sk_cmd->fallthrough();

  auto* sim = app.add_subcommand("simulate", "Generate data with known true scores");
  sim->require_subcommand(1)->fallthrough();
  std::vector<CLI::App*> sim_cmds;
  for (const char* name : {"ctt", "retest", "factor", "criterion"}) {
    auto* c = sim->add_subcommand(name, std::string("Simulate ") + name + " data");
    c->fallthrough();
    c->add_option("--spec", cfg.sim_spec, "Simulation spec JSON")->required();
    c->add_option("--out-csv", cfg.out_csv, "Generated score file")->required();
    sim_cmds.push_back(c);
  }

  std::vector<std::string> argv_store;
  argv_store.emplace_back("nlgm");
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : argv_store) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  }
  if (seed_opt->count()) cfg.seed = seed_value;
  if (nsplits_opt->count()) cfg.n_splits = n_splits_value;
  if (relx_opt->count()) cfg.rel_x = rel_x_value;
  if (rely_opt->count()) cfg.rel_y = rel_y_value;

  try {
    if (rel->parsed()) {
      const std::string sub = tr->parsed() ? "test-retest" : sh->parsed() ? "split-half" : "alpha";
      cmd_reliability(sub, cfg, out);
    } else if (val->parsed()) {
      cmd_validity(cfg, out);
    } else if (mt->parsed()) {
      cmd_mtmm(cfg, out);
    } else if (fa->parsed()) {
      const std::string sub = efa_cmd->parsed()   ? "efa"
                              : cfa_cmd->parsed() ? "cfa"
                              : scores_cmd->parsed() ? "scores"
                                                     : "suggest-k";
      cmd_factor(sub, cfg, out);
    } else {
      std::string sub;
      for (auto* c : sim_cmds) {
        if (c->parsed()) sub = c->get_name();
      }
      cmd_simulate(sub, cfg, out);
    }
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitDataError;
  } catch (const Json::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitDataError;
  }
  return kExitOk;
}

}  // namespace nlgm::cli
