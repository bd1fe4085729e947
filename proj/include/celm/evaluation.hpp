#pragma once

// Accuracy, stratified k-fold selection of the ridge factor, multi-round
// benchmark sweeps, and CSV/JSON report emission.
//
// Seed derivation (all through derive_seed):
//   round seed      = derive_seed(master, round)
//   split seed      = derive_seed(round seed, kSplitStream)
//   cell seed       = derive_seed(derive_seed(round seed, kCellStream + strategy tag), L)
//   CV fold seed    = derive_seed(cell seed, kFoldStream)
//   CV model seed   = derive_seed(cell seed, kCvModelStream + fold)
// The cell seed is also the hidden-layer seed of the final model, so a cell's
// result depends only on (master seed, round, strategy, L).

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "celm/dataset.hpp"
#include "celm/error.hpp"
#include "celm/hidden_layer.hpp"
#include "celm/model.hpp"
#include "celm/rng.hpp"

namespace celm {

/// Fraction of positions where predicted[i] == actual[i].
template <typename T>
double accuracy(std::span<const T> predicted, std::span<const T> actual) {
  if (predicted.size() != actual.size())
    throw UsageError("accuracy: " + std::to_string(predicted.size()) + " predictions for " +
                     std::to_string(actual.size()) + " labels");
  if (predicted.empty()) throw UsageError("accuracy of an empty list is undefined");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) hits += predicted[i] == actual[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(predicted.size());
}

template <typename T>
double accuracy(const std::vector<T>& predicted, const std::vector<T>& actual) {
  return accuracy(std::span<const T>(predicted), std::span<const T>(actual));
}

inline constexpr std::uint64_t kSplitStream = 0x5350'4C49'5400ULL;
inline constexpr std::uint64_t kCellStream = 0x4345'4C4C'0000ULL;
inline constexpr std::uint64_t kFoldStream = 0x464F'4C44'0000ULL;
inline constexpr std::uint64_t kCvModelStream = 0x4356'4D44'0000ULL;

inline std::uint64_t round_seed(std::uint64_t master, int round) {
  return derive_seed(master, static_cast<std::uint64_t>(round));
}

inline std::uint64_t cell_seed(std::uint64_t round_seed_value, StrategyKind kind, Index nodes) {
  return derive_seed(derive_seed(round_seed_value, kCellStream + static_cast<std::uint64_t>(kind)),
                     static_cast<std::uint64_t>(nodes));
}

// ---------------------------------------------------------------------------
// Cross-validation

/// lambda = 10^k for k = log10_min, log10_min + step, ..., <= log10_max.
struct CvGrid {
  int log10_min = -8;
  int log10_max = 8;
  int step = 1;
  int folds = 3;

  void validate() const {
    if (log10_min > log10_max) throw ConfigError("CV grid: log10_min exceeds log10_max");
    if (step < 1) throw ConfigError("CV grid: step must be at least 1");
    if (folds < 2) throw ConfigError("CV grid: at least 2 folds are required");
  }

  std::vector<double> lambdas() const {
    validate();
    std::vector<double> out;
    for (int k = log10_min; k <= log10_max; k += step) out.push_back(std::pow(10.0, k));
    return out;
  }
};

/// Stratified assignment of rows to folds: each class's rows are shuffled
/// and dealt round-robin. Returned indices are rows of `data`.
inline std::vector<std::vector<Index>> stratified_folds(const Dataset& data, int folds, std::uint64_t seed) {
  if (folds < 2) throw ConfigError("at least 2 folds are required");
  for (std::size_t k = 0; k < data.class_index().size(); ++k)
    if (static_cast<int>(data.class_index()[k].size()) < folds)
      throw ConfigError("class '" + data.classes()[k] + "' has " + std::to_string(data.class_index()[k].size()) +
                        " samples, fewer than the " + std::to_string(folds) + " CV folds");
  auto rng = make_rng(seed);
  std::vector<std::vector<Index>> out(static_cast<std::size_t>(folds));
  std::size_t next = 0;
  for (const auto& members : data.class_index()) {
    std::vector<Index> rows = members;
    shuffle(std::span<Index>(rows), rng);
    for (Index r : rows) {
      out[next].push_back(r);
      next = (next + 1) % out.size();
    }
  }
  for (auto& f : out) std::sort(f.begin(), f.end());
  return out;
}

struct CvResult {
  double lambda = 1.0;
  std::vector<double> grid;
  std::vector<double> mean_accuracy;  // one per grid point
};

/// Mean validation accuracy of every grid point; the selected lambda has the
/// highest mean, ties going to the smaller lambda.
inline CvResult cross_validate_lambda(const Dataset& train, const StrategySpec& strategy, Index nodes,
                                      const CvGrid& grid, std::uint64_t seed) {
  CvResult res;
  res.grid = grid.lambdas();
  res.mean_accuracy.assign(res.grid.size(), 0.0);
  const auto folds = stratified_folds(train, grid.folds, derive_seed(seed, kFoldStream));
  std::vector<char> in_fold(static_cast<std::size_t>(train.size()));
  for (std::size_t f = 0; f < folds.size(); ++f) {
    std::fill(in_fold.begin(), in_fold.end(), 0);
    for (Index r : folds[f]) in_fold[static_cast<std::size_t>(r)] = 1;
    std::vector<Index> fit_rows;
    for (Index r = 0; r < train.size(); ++r)
      if (!in_fold[static_cast<std::size_t>(r)]) fit_rows.push_back(r);
    const Dataset fit = train.subset(fit_rows);
    const Dataset held = train.subset(folds[f]);
    StrategySpec fold_spec = strategy;
    fold_spec.seed = derive_seed(seed, kCvModelStream + f);
    const auto prep = prepare_training(fit, fold_spec, nodes);
    const Matrix h_val = feature_map(prep.generated.layer, normalize_apply(prep.norm, held.x()));
    const auto truth = held.labels();
    for (std::size_t g = 0; g < res.grid.size(); ++g) {
      const Matrix beta = solve_output_weights(prep.h, prep.t, res.grid[g]);
      const auto pred = decode_scores(h_val * beta, prep.codec);
      res.mean_accuracy[g] += accuracy(pred, truth) / static_cast<double>(folds.size());
    }
  }
  std::size_t best = 0;
  for (std::size_t g = 1; g < res.grid.size(); ++g)
    if (res.mean_accuracy[g] > res.mean_accuracy[best]) best = g;
  res.lambda = res.grid[best];
  return res;
}

inline double cv_select_lambda(const Dataset& train, const StrategySpec& strategy, Index nodes, const CvGrid& grid,
                               std::uint64_t seed) {
  return cross_validate_lambda(train, strategy, nodes, grid, seed).lambda;
}

// ---------------------------------------------------------------------------
// Benchmark

enum class RidgeMode { none, fixed, cross_validated };

struct BenchmarkConfig {
  std::vector<StrategyKind> strategies;
  std::vector<Index> hidden_nodes;
  int rounds = 10;
  double train_fraction = 2.0 / 3.0;
  std::uint64_t seed = 0;
  RidgeMode ridge = RidgeMode::none;
  double fixed_lambda = 1.0;
  CvGrid grid;
  std::size_t max_redraws = 1000;
  int jobs = 1;
  /// When false, train_seconds is recorded as 0 so reports are byte-stable.
  bool measure_time = true;
};

struct BenchmarkRecord {
  std::string strategy;
  Index nodes = 0;
  int round = 0;
  std::uint64_t seed = 0;  // round seed
  double test_accuracy = std::numeric_limits<double>::quiet_NaN();
  double train_seconds = std::numeric_limits<double>::quiet_NaN();
  std::optional<double> lambda_used;
  std::optional<std::string> error;  // set for failed cells

  bool failed() const noexcept { return error.has_value(); }
};

struct BenchmarkAggregate {
  std::string strategy;
  Index nodes = 0;
  int count = 0;   // successful rounds
  int failed = 0;
  double mean_accuracy = std::numeric_limits<double>::quiet_NaN();
  double std_accuracy = std::numeric_limits<double>::quiet_NaN();  // sample std (n - 1), 0 for one round
  double mean_train_seconds = std::numeric_limits<double>::quiet_NaN();
};

struct BenchmarkReport {
  std::vector<BenchmarkRecord> records;
  std::vector<BenchmarkAggregate> aggregates;

  const BenchmarkAggregate* find(std::string_view strategy, Index nodes) const {
    for (const auto& a : aggregates)
      if (a.strategy == strategy && a.nodes == nodes) return &a;
    return nullptr;
  }
};

/// Aggregates in first-appearance order of (strategy, L) within `records`.
inline std::vector<BenchmarkAggregate> compute_aggregates(const std::vector<BenchmarkRecord>& records) {
  std::vector<BenchmarkAggregate> out;
  for (const auto& rec : records) {
    auto it = std::find_if(out.begin(), out.end(),
                           [&](const auto& a) { return a.strategy == rec.strategy && a.nodes == rec.nodes; });
    if (it == out.end()) {
      out.push_back({rec.strategy, rec.nodes});
      it = out.end() - 1;
    }
  }
  for (auto& agg : out) {
    std::vector<double> acc, secs;
    for (const auto& rec : records) {
      if (rec.strategy != agg.strategy || rec.nodes != agg.nodes) continue;
      if (rec.failed()) {
        ++agg.failed;
        continue;
      }
      acc.push_back(rec.test_accuracy);
      secs.push_back(rec.train_seconds);
    }
    agg.count = static_cast<int>(acc.size());
    if (acc.empty()) continue;
    const double n = static_cast<double>(acc.size());
    double sum = 0.0, tsum = 0.0;
    for (double a : acc) sum += a;
    for (double s : secs) tsum += s;
    agg.mean_accuracy = sum / n;
    agg.mean_train_seconds = tsum / n;
    double ss = 0.0;
    for (double a : acc) ss += (a - agg.mean_accuracy) * (a - agg.mean_accuracy);
    agg.std_accuracy = acc.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  }
  return out;
}

namespace detail {

inline BenchmarkRecord run_cell(const Split& split, StrategyKind kind, Index nodes, int round, std::uint64_t rseed,
                                const BenchmarkConfig& cfg) {
  BenchmarkRecord rec;
  rec.strategy = std::string(strategy_name(kind));
  rec.nodes = nodes;
  rec.round = round;
  rec.seed = rseed;
  try {
    const std::uint64_t cseed = cell_seed(rseed, kind, nodes);
    StrategySpec spec{kind, cseed, cfg.max_redraws};
    if (cfg.ridge == RidgeMode::fixed) rec.lambda_used = cfg.fixed_lambda;
    if (cfg.ridge == RidgeMode::cross_validated)
      rec.lambda_used = cv_select_lambda(split.train, spec, nodes, cfg.grid, cseed);
    const auto start = std::chrono::steady_clock::now();
    const TrainedModel model = train(split.train, spec, nodes, rec.lambda_used);
    const auto stop = std::chrono::steady_clock::now();
    rec.train_seconds = cfg.measure_time ? std::chrono::duration<double>(stop - start).count() : 0.0;
    rec.test_accuracy = accuracy(predict(model, split.test.x()), split.test.labels());
  } catch (const std::exception& e) {
    rec.error = e.what();
    rec.test_accuracy = std::numeric_limits<double>::quiet_NaN();
    rec.train_seconds = std::numeric_limits<double>::quiet_NaN();
  }
  return rec;
}

}  // namespace detail

/// Multi-round sweep: each round draws a fresh seeded split; every
/// (strategy, L) cell trains on the training part and scores the test part.
/// Records are ordered by (strategy as listed, L as listed, round) regardless
/// of `jobs`. A cell that throws is recorded as failed; the sweep continues.
inline BenchmarkReport run_benchmark(const Dataset& data, const BenchmarkConfig& cfg) {
  if (cfg.strategies.empty()) throw ConfigError("benchmark needs at least one strategy");
  if (cfg.hidden_nodes.empty()) throw ConfigError("benchmark needs at least one hidden node count");
  if (cfg.rounds < 1) throw ConfigError("benchmark needs at least one round");
  for (Index l : cfg.hidden_nodes)
    if (l < 1) throw ConfigError("hidden node counts must be positive");
  if (cfg.ridge == RidgeMode::fixed) (void)RidgeConfig(cfg.fixed_lambda);
  if (cfg.ridge == RidgeMode::cross_validated) cfg.grid.validate();

  std::vector<Split> splits;
  std::vector<std::uint64_t> rseeds;
  for (int r = 0; r < cfg.rounds; ++r) {
    rseeds.push_back(round_seed(cfg.seed, r));
    splits.push_back(split(data, SplitSpec{cfg.train_fraction, derive_seed(rseeds.back(), kSplitStream)}));
  }

  const std::size_t per_strategy = cfg.hidden_nodes.size() * static_cast<std::size_t>(cfg.rounds);
  const std::size_t total = cfg.strategies.size() * per_strategy;
  std::vector<BenchmarkRecord> records(total);
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t i = next.fetch_add(1); i < total; i = next.fetch_add(1)) {
      const std::size_t s = i / per_strategy;
      const std::size_t l = (i % per_strategy) / static_cast<std::size_t>(cfg.rounds);
      const int r = static_cast<int>(i % static_cast<std::size_t>(cfg.rounds));
      records[i] = detail::run_cell(splits[static_cast<std::size_t>(r)], cfg.strategies[s], cfg.hidden_nodes[l], r,
                                    rseeds[static_cast<std::size_t>(r)], cfg);
    }
  };
  const int jobs = std::max(1, cfg.jobs);
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
  }
  BenchmarkReport report;
  report.records = std::move(records);
  report.aggregates = compute_aggregates(report.records);
  return report;
}

// ---------------------------------------------------------------------------
// Report emission

enum class ReportFormat { csv, json };

namespace detail {

inline std::string fixed(double v, int decimals) {
  if (!std::isfinite(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  if (std::string_view(buf) == "-0.000000" || std::string_view(buf) == "-0.000") return fixed(0.0, decimals);
  return buf;
}

/// Rounded value as a JSON number (null when not finite).
inline nlohmann::ordered_json rounded(double v, int decimals) {
  if (!std::isfinite(v)) return nullptr;
  return std::stod(fixed(v, decimals));
}

}  // namespace detail

inline const char* kReportCsvHeader = "strategy,L,round,seed,test_accuracy,train_seconds,lambda_used";

/// CSV: header plus one line per record. JSON: {"records": [...], "aggregates": [...]}.
/// Accuracies carry 6 decimals, seconds 3.
inline std::string emit_report(const BenchmarkReport& report, ReportFormat format) {
  if (format == ReportFormat::csv) {
    std::ostringstream out;
    out << kReportCsvHeader << '\n';
    for (const auto& r : report.records) {
      out << r.strategy << ',' << r.nodes << ',' << r.round << ',' << r.seed << ','
          << detail::fixed(r.test_accuracy, 6) << ',' << detail::fixed(r.train_seconds, 3) << ','
          << (r.lambda_used ? detail::format_double(*r.lambda_used) : "none") << '\n';
    }
    return out.str();
  }
  nlohmann::ordered_json doc;
  doc["records"] = nlohmann::ordered_json::array();
  for (const auto& r : report.records) {
    nlohmann::ordered_json j;
    j["strategy"] = r.strategy;
    j["L"] = r.nodes;
    j["round"] = r.round;
    j["seed"] = r.seed;
    j["test_accuracy"] = detail::rounded(r.test_accuracy, 6);
    j["train_seconds"] = detail::rounded(r.train_seconds, 3);
    j["lambda_used"] = r.lambda_used ? nlohmann::ordered_json(*r.lambda_used) : nlohmann::ordered_json(nullptr);
    if (r.error) j["error"] = *r.error;
    doc["records"].push_back(std::move(j));
  }
  doc["aggregates"] = nlohmann::ordered_json::array();
  for (const auto& a : report.aggregates) {
    nlohmann::ordered_json j;
    j["strategy"] = a.strategy;
    j["L"] = a.nodes;
    j["count"] = a.count;
    j["failed"] = a.failed;
    j["mean_accuracy"] = detail::rounded(a.mean_accuracy, 6);
    j["std_accuracy"] = detail::rounded(a.std_accuracy, 6);
    j["mean_train_seconds"] = detail::rounded(a.mean_train_seconds, 3);
    doc["aggregates"].push_back(std::move(j));
  }
  return doc.dump(2) + "\n";
}

/// Inverse of the JSON emission for the record fields (values as rounded on output).
inline std::vector<BenchmarkRecord> parse_report_records(std::string_view json_text) {
  const auto doc = nlohmann::json::parse(json_text);
  std::vector<BenchmarkRecord> out;
  for (const auto& j : doc.at("records")) {
    BenchmarkRecord r;
    r.strategy = j.at("strategy").get<std::string>();
    r.nodes = j.at("L").get<Index>();
    r.round = j.at("round").get<int>();
    r.seed = j.at("seed").get<std::uint64_t>();
    if (!j.at("test_accuracy").is_null()) r.test_accuracy = j.at("test_accuracy").get<double>();
    if (!j.at("train_seconds").is_null()) r.train_seconds = j.at("train_seconds").get<double>();
    if (!j.at("lambda_used").is_null()) r.lambda_used = j.at("lambda_used").get<double>();
    if (j.contains("error")) r.error = j.at("error").get<std::string>();
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace celm
