#pragma once

// `celm` command-line front end: train, predict, benchmark, spiral-gen.
// run() takes the argument list and the two output streams so tests can drive
// it in-process.

#include <CLI11.hpp>

#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "celm/celm.hpp"

namespace celm::cli {

namespace detail {

inline std::string one_line(std::string msg) {
  for (char& c : msg)
    if (c == '\n' || c == '\r') c = ' ';
  return msg;
}

inline std::optional<std::int64_t> parse_int(const std::string& s) {
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

inline LabelColumn parse_column(const std::string& s) {
  if (auto v = parse_int(s)) return static_cast<Index>(*v);
  return s;
}

inline HeaderMode parse_header(const std::string& s) {
  if (s == "auto") return HeaderMode::detect;
  if (s == "yes") return HeaderMode::present;
  if (s == "no") return HeaderMode::absent;
  throw ConfigError("--header must be one of auto, yes, no");
}

/// --seed when given, else $CELM_SEED, else 0.
inline std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag) {
  if (flag) return *flag;
  if (const char* env = std::getenv("CELM_SEED")) {
    std::uint64_t v = 0;
    const std::string s(env);
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty())
      throw ConfigError("CELM_SEED is not an unsigned integer: '" + s + "'");
    return v;
  }
  return 0;
}

struct RidgeChoice {
  RidgeMode mode = RidgeMode::none;
  double lambda = 1.0;
};

inline RidgeChoice parse_ridge(const std::optional<std::string>& flag) {
  if (!flag) return {};
  if (*flag == "auto") return {RidgeMode::cross_validated, 1.0};
  const auto v = celm::detail::parse_double(*flag);
  if (!v) throw ConfigError("--ridge takes 'auto' or a positive number, got '" + *flag + "'");
  (void)RidgeConfig(*v);
  return {RidgeMode::fixed, *v};
}

}  // namespace detail

/// Hidden node sweep: "start:stop:step" (stop included when aligned),
/// a comma list "50,100", or a single count.
inline std::vector<Index> parse_node_sweep(const std::string& text) {
  std::vector<Index> out;
  auto positive = [&](const std::string& s) {
    const auto v = detail::parse_int(s);
    if (!v || *v < 1) throw ConfigError("invalid hidden node count '" + s + "' in '" + text + "'");
    return static_cast<Index>(*v);
  };
  if (text.find(':') != std::string::npos) {
    std::vector<std::string> parts;
    std::stringstream ss(text);
    for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
    if (parts.size() != 3) throw ConfigError("node sweep must look like start:stop:step, got '" + text + "'");
    const Index start = positive(parts[0]), stop = positive(parts[1]), step = positive(parts[2]);
    if (stop < start) throw ConfigError("node sweep stop is below start in '" + text + "'");
    for (Index l = start; l <= stop; l += step) out.push_back(l);
    return out;
  }
  std::stringstream ss(text);
  for (std::string p; std::getline(ss, p, ',');) out.push_back(positive(p));
  if (out.empty()) throw ConfigError("empty node sweep");
  return out;
}

inline std::vector<StrategyKind> parse_strategy_list(const std::string& text) {
  std::vector<StrategyKind> out;
  std::stringstream ss(text);
  for (std::string p; std::getline(ss, p, ',');)
    if (const auto name = celm::detail::trim(p); !name.empty()) out.push_back(parse_strategy(name));
  if (out.empty()) throw ConfigError("no strategies given (valid: " + valid_strategy_names() + ")");
  return out;
}

inline std::string format_fixed(double v, int decimals) { return celm::detail::fixed(v, decimals); }

inline void print_aggregates(std::ostream& out, const BenchmarkReport& report) {
  out << std::left << std::setw(8) << "strategy" << std::right << std::setw(6) << "L" << std::setw(7) << "runs"
      << std::setw(11) << "mean_acc" << std::setw(11) << "std_acc" << std::setw(10) << "mean_s" << std::setw(8)
      << "failed" << '\n';
  for (const auto& a : report.aggregates)
    out << std::left << std::setw(8) << a.strategy << std::right << std::setw(6) << a.nodes << std::setw(7)
        << a.count << std::setw(11) << format_fixed(a.mean_accuracy, 6) << std::setw(11)
        << format_fixed(a.std_accuracy, 6) << std::setw(10) << format_fixed(a.mean_train_seconds, 3)
        << std::setw(8) << a.failed << '\n';
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot write '" + path + "'");
  f << text;
  if (!f) throw DataError("failed writing '" + path + "'");
}

inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Constrained extreme learning machine toolkit"};
  app.require_subcommand(1, 1);

  // train
  auto* train_cmd = app.add_subcommand("train", "Train a model from a labelled CSV");
  std::string train_data, train_label = "-1", train_header = "auto", train_strategy, train_out;
  Index train_hidden = 0;
  std::optional<std::string> train_ridge;
  std::optional<std::uint64_t> train_seed;
  std::size_t train_redraws = 1000;
  CvGrid train_grid;
  train_cmd->add_option("--data", train_data, "Training CSV")->required();
  train_cmd->add_option("--label-col", train_label, "Label column (index, negative from end, or header name)");
  train_cmd->add_option("--header", train_header, "Header row: auto, yes, no");
  train_cmd->add_option("--strategy", train_strategy, "elm, oelm, cdelm, selm, cselm, rselm, cmelm")->required();
  train_cmd->add_option("--hidden", train_hidden, "Number of hidden nodes")->required();
  train_cmd->add_option("--ridge", train_ridge, "'auto' for cross-validated lambda, or a fixed lambda");
  train_cmd->add_option("--seed", train_seed, "Random seed (default $CELM_SEED or 0)");
  train_cmd->add_option("--max-redraws", train_redraws, "Redraw limit for degenerate sample pairs");
  train_cmd->add_option("--cv-folds", train_grid.folds, "Cross-validation folds for --ridge auto");
  train_cmd->add_option("--out", train_out, "Model output path")->required();

  // predict
  auto* predict_cmd = app.add_subcommand("predict", "Predict classes for a feature CSV");
  std::string predict_model, predict_data, predict_header = "auto";
  std::optional<std::string> predict_truth;
  predict_cmd->add_option("--model", predict_model, "Model file")->required();
  predict_cmd->add_option("--data", predict_data, "Feature CSV")->required();
  predict_cmd->add_option("--header", predict_header, "Header row: auto, yes, no");
  predict_cmd->add_option("--truth-col", predict_truth, "Column holding true labels; prints accuracy");

  // benchmark
  auto* bench_cmd = app.add_subcommand("benchmark", "Multi-round accuracy sweep over strategies and node counts");
  std::optional<std::string> bench_dataset, bench_data;
  std::string bench_label = "-1", bench_header = "auto", bench_strategies = valid_strategy_names(),
              bench_nodes = "10:150:10", bench_out, bench_format;
  std::optional<std::string> bench_ridge;
  std::optional<std::uint64_t> bench_seed;
  int bench_rounds = 10, bench_jobs = 1;
  double bench_fraction = 2.0 / 3.0, bench_noise = 0.0;
  Index bench_total = 5000;
  bool bench_no_timing = false;
  std::size_t bench_redraws = 1000;
  CvGrid bench_grid;
  bench_cmd->add_option("--dataset", bench_dataset, "Built-in dataset: spiral");
  bench_cmd->add_option("--data", bench_data, "Labelled CSV");
  bench_cmd->add_option("--label-col", bench_label, "Label column for --data");
  bench_cmd->add_option("--header", bench_header, "Header row for --data: auto, yes, no");
  bench_cmd->add_option("--strategies", bench_strategies, "Comma-separated strategy names");
  bench_cmd->add_option("--nodes", bench_nodes, "start:stop:step, comma list, or single count");
  bench_cmd->add_option("--rounds", bench_rounds, "Rounds (fresh split each)");
  bench_cmd->add_option("--seed", bench_seed, "Master seed (default $CELM_SEED or 0)");
  bench_cmd->add_option("--ridge", bench_ridge, "'auto' for cross-validated lambda, or a fixed lambda");
  bench_cmd->add_option("--cv-folds", bench_grid.folds, "Cross-validation folds");
  bench_cmd->add_option("--cv-min", bench_grid.log10_min, "Smallest log10 lambda");
  bench_cmd->add_option("--cv-max", bench_grid.log10_max, "Largest log10 lambda");
  bench_cmd->add_option("--cv-step", bench_grid.step, "log10 lambda step");
  bench_cmd->add_option("--train-fraction", bench_fraction, "Training share of each split");
  bench_cmd->add_option("--spiral-total", bench_total, "Spiral size for --dataset spiral");
  bench_cmd->add_option("--spiral-noise", bench_noise, "Spiral noise sigma");
  bench_cmd->add_option("--jobs", bench_jobs, "Parallel cells (report content is unchanged)");
  bench_cmd->add_flag("--no-timing", bench_no_timing, "Record train_seconds as 0 for byte-stable reports");
  bench_cmd->add_option("--max-redraws", bench_redraws, "Redraw limit for degenerate sample pairs");
  bench_cmd->add_option("--format", bench_format, "csv or json (default from --out extension)");
  bench_cmd->add_option("--out", bench_out, "Report output path")->required();

  // spiral-gen
  auto* spiral_cmd = app.add_subcommand("spiral-gen", "Write the two-spiral dataset as CSV");
  Index spiral_total = 5000;
  double spiral_noise = 0.0;
  std::optional<std::uint64_t> spiral_seed;
  std::string spiral_out;
  spiral_cmd->add_option("--total", spiral_total, "Number of points (even)");
  spiral_cmd->add_option("--noise", spiral_noise, "Gaussian noise sigma");
  spiral_cmd->add_option("--seed", spiral_seed, "Random seed (default $CELM_SEED or 0)");
  spiral_cmd->add_option("--out", spiral_out, "Output CSV")->required();

  std::vector<const char*> argv{"celm"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << detail::one_line(e.what()) << '\n';
    return 1;
  }

  try {
    if (*train_cmd) {
      const auto kind = parse_strategy(train_strategy);
      const auto header = detail::parse_header(train_header);
      const auto ridge = detail::parse_ridge(train_ridge);
      const std::uint64_t seed = detail::resolve_seed(train_seed);
      const auto start = std::chrono::steady_clock::now();
      const Dataset data = load_csv(train_data, detail::parse_column(train_label), header);
      if (data.empty()) throw DataError("training file '" + train_data + "' has no data rows");
      check_class_requirements(kind, data);
      if (train_hidden < 1) throw ConfigError("--hidden must be at least 1");
      StrategySpec spec{kind, seed, train_redraws};
      std::optional<double> lambda;
      if (ridge.mode == RidgeMode::fixed) lambda = ridge.lambda;
      if (ridge.mode == RidgeMode::cross_validated)
        lambda = cv_select_lambda(data, spec, train_hidden, train_grid, seed);
      const TrainedModel model = train(data, spec, train_hidden, lambda);
      const double acc = accuracy(predict(model, data.x()), data.labels());
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      save_model_file(train_out, model);
      out << "strategy: " << strategy_name(kind) << '\n'
          << "hidden nodes: " << train_hidden << '\n'
          << "lambda: "
          << (lambda ? celm::detail::format_double(*lambda) + (ridge.mode == RidgeMode::cross_validated ? " (cv)" : "")
                     : std::string("none"))
          << '\n'
          << "training accuracy: " << format_fixed(acc, 6) << '\n'
          << "wall time (s): " << format_fixed(secs, 3) << '\n'
          << "model: " << train_out << '\n';
      return 0;
    }

    if (*predict_cmd) {
      const TrainedModel model = load_model_file(predict_model);
      const auto header = detail::parse_header(predict_header);
      std::optional<LabelColumn> truth_spec;
      if (predict_truth) truth_spec = detail::parse_column(*predict_truth);
      std::optional<Index> exempt;
      if (truth_spec)
        if (const auto* pos = std::get_if<Index>(&*truth_spec)) exempt = *pos;
      const CsvTable table = read_csv_file(predict_data, header, exempt);
      if (table.rows.empty()) return 0;
      std::optional<Index> truth_col;
      if (truth_spec) truth_col = resolve_column(table, *truth_spec);
      const Matrix x = table_features(table, truth_col);
      if (x.cols() != model.inputs())
        throw UsageError("model expects " + std::to_string(model.inputs()) + " features, input has " +
                         std::to_string(x.cols()));
      const auto pred = predict(model, x);
      std::ostringstream buf;
      for (const auto& p : pred) buf << p << '\n';
      if (truth_col) {
        std::vector<ClassId> truth;
        truth.reserve(table.rows.size());
        for (const auto& row : table.rows) truth.push_back(row[static_cast<std::size_t>(*truth_col)]);
        buf << "accuracy: " << format_fixed(accuracy(pred, truth), 6) << '\n';
      }
      out << buf.str();
      return 0;
    }

    if (*bench_cmd) {
      if (bench_dataset.has_value() == bench_data.has_value())
        throw ConfigError("benchmark needs exactly one of --dataset spiral or --data <csv>");
      BenchmarkConfig cfg;
      cfg.strategies = parse_strategy_list(bench_strategies);
      cfg.hidden_nodes = parse_node_sweep(bench_nodes);
      cfg.rounds = bench_rounds;
      cfg.train_fraction = bench_fraction;
      cfg.seed = detail::resolve_seed(bench_seed);
      const auto ridge = detail::parse_ridge(bench_ridge);
      cfg.ridge = ridge.mode;
      cfg.fixed_lambda = ridge.lambda;
      cfg.grid = bench_grid;
      cfg.max_redraws = bench_redraws;
      cfg.jobs = bench_jobs;
      cfg.measure_time = !bench_no_timing;
      if (cfg.jobs < 1) throw ConfigError("--jobs must be at least 1");
      ReportFormat format = ReportFormat::csv;
      const std::string fmt = bench_format.empty()
                                  ? (bench_out.size() >= 5 && bench_out.substr(bench_out.size() - 5) == ".json" ? "json"
                                                                                                                 : "csv")
                                  : bench_format;
      if (fmt == "json")
        format = ReportFormat::json;
      else if (fmt != "csv")
        throw ConfigError("--format must be csv or json");
      Dataset data;
      if (bench_dataset) {
        if (*bench_dataset != "spiral") throw ConfigError("unknown built-in dataset '" + *bench_dataset + "'");
        data = gen_spiral(bench_total, bench_noise, cfg.seed);
      } else {
        data = load_csv(*bench_data, detail::parse_column(bench_label), detail::parse_header(bench_header));
      }
      const BenchmarkReport report = run_benchmark(data, cfg);
      write_text_file(bench_out, emit_report(report, format));
      print_aggregates(out, report);
      out << "report: " << bench_out << " (" << report.records.size() << " records)\n";
      return 0;
    }

    if (*spiral_cmd) {
      const Dataset data = gen_spiral(spiral_total, spiral_noise, detail::resolve_seed(spiral_seed));
      write_csv_file(spiral_out, data);
      out << "wrote " << data.size() << " points to " << spiral_out << '\n';
      return 0;
    }
  } catch (const std::exception& e) {
    err << "error: " << detail::one_line(e.what()) << '\n';
    return 1;
  }
  return 1;
}

}  // namespace celm::cli
