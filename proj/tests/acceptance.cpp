// Acceptance suite: one PASS/FAIL/SKIP line per criterion (sub-checks are
// listed underneath). Exit status is nonzero when any criterion fails.
//
// Optional data: CELM_WDBC_CSV (label in the last column) and CELM_MNIST_CSV
// (label column from CELM_MNIST_LABEL_COL, default 0). Missing files give SKIP.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <sstream>
#include <thread>

#include "celm/celm.hpp"
#include "cli.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

namespace {

using namespace celm;
using Clock = std::chrono::steady_clock;

// Tolerances and budgets, pinned here.
constexpr double kTwoPointTol = 1e-9;
constexpr double kTwoPointBudget = 1.0;
constexpr double kPrimalDualRelTol = 1e-6;
constexpr double kPinvTol = 1e-8;
constexpr double kSolverBudget = 10.0;
constexpr double kSpiralFloorAt100 = 0.95;
constexpr double kSpiralGapAt150 = 0.05;
constexpr double kSpiralBudget = 300.0;
constexpr double kWdbcCdelmTarget = 0.973;
constexpr double kWdbcCselmTarget = 0.975;
constexpr double kWdbcBand = 0.03;
constexpr double kWdbcElmSlack = 0.01;
constexpr double kWdbcBudget = 600.0;
constexpr double kMnistGap = 0.01;
constexpr double kDeterminismBudget = 60.0;
constexpr double kPropertyBudget = 30.0;

enum class Status { pass, fail, skip };

struct Outcome {
  Status status = Status::pass;
  std::vector<std::string> notes;

  void check(bool ok, const std::string& what) {
    notes.push_back(std::string(ok ? "ok   " : "FAIL ") + what);
    if (!ok) status = Status::fail;
  }
  void note(const std::string& what) { notes.push_back("     " + what); }
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

int worker_count() { return static_cast<int>(std::max(1u, std::thread::hardware_concurrency())); }

constexpr StrategyKind kCelms[] = {StrategyKind::cdelm, StrategyKind::selm, StrategyKind::cselm, StrategyKind::rselm,
                                   StrategyKind::cmelm};

// ---------------------------------------------------------------------------

Outcome two_point_mapping() {
  Outcome o;
  const auto t0 = Clock::now();
  const auto data = testing_support::random_dataset(500, 8, 5, 2024);
  const auto cd = gen_cdelm(data, 1000, 1);
  const auto cm = gen_cmelm(data, 2000, 2);  // second half: 1000 difference nodes
  double worst = 0.0;
  std::size_t nodes = 0;
  bool classes_differ = true;
  for (const GeneratedLayer* g : {&cd, &cm}) {
    for (Index j = 0; j < g->layer.nodes(); ++j) {
      const auto& origin = g->provenance[static_cast<std::size_t>(j)];
      if (origin.source != NodeSource::class_difference) continue;
      const auto w = g->layer.weights.col(j);
      const double b = g->layer.biases(j);
      worst = std::max(worst, std::abs(data.sample(origin.samples[0]).dot(w) + b + 1.0));
      worst = std::max(worst, std::abs(data.sample(origin.samples[1]).dot(w) + b - 1.0));
      classes_differ &= data.y()[static_cast<std::size_t>(origin.samples[0])] !=
                        data.y()[static_cast<std::size_t>(origin.samples[1])];
      ++nodes;
    }
  }
  const double secs = seconds_since(t0);
  o.check(nodes == 2000, std::to_string(nodes) + " difference nodes checked (1000 cdelm + 1000 cmelm)");
  o.check(worst <= kTwoPointTol, "max |w.x + b -/+ 1| = " + fmt("%.3e", worst) + " <= " + fmt("%.0e", kTwoPointTol));
  o.check(classes_differ, "every pair spans two classes");
  o.check(secs < kTwoPointBudget, "runtime " + fmt("%.3f", secs) + " s < 1 s");
  return o;
}

Outcome solver_equivalence() {
  Outcome o;
  const auto t0 = Clock::now();
  std::mt19937_64 gen(20240);
  std::uniform_int_distribution<int> dim(1, 50), cls(1, 5);
  const double lambdas[] = {1e-3, 1.0, 1e3};
  double worst_pd = 0.0, worst_pinv = 0.0;
  for (int i = 0; i < 200; ++i) {
    const Matrix h = oracle::random_matrix(dim(gen), dim(gen), gen);
    const Matrix t = oracle::random_matrix(h.rows(), cls(gen), gen);
    const RidgeConfig cfg(lambdas[i % 3]);
    const Matrix p = solve_ridge_primal(h, t, cfg);
    const Matrix d = solve_ridge_dual(h, t, cfg);
    worst_pd = std::max(worst_pd, (p - d).cwiseAbs().maxCoeff() / std::max(1.0, p.cwiseAbs().maxCoeff()));
    const Matrix ref = oracle::matmul(oracle::jacobi_pinv(h), t);
    const Matrix got = solve_least_squares(h, t);
    worst_pinv = std::max(worst_pinv, (got - ref).cwiseAbs().maxCoeff() / std::max(1.0, ref.cwiseAbs().maxCoeff()));
  }
  const double secs = seconds_since(t0);
  o.check(worst_pd <= kPrimalDualRelTol, "primal vs dual, worst relative diff " + fmt("%.3e", worst_pd));
  o.check(worst_pinv <= kPinvTol, "pseudoinverse vs Jacobi-SVD oracle, worst relative diff " + fmt("%.3e", worst_pinv));
  o.check(secs < kSolverBudget, "runtime " + fmt("%.2f", secs) + " s < 10 s");
  return o;
}

Outcome spiral_ordering() {
  Outcome o;
  const auto t0 = Clock::now();
  BenchmarkConfig cfg;
  cfg.strategies = {StrategyKind::elm,  StrategyKind::orthogonal_elm, StrategyKind::cdelm, StrategyKind::selm,
                    StrategyKind::cselm, StrategyKind::rselm,         StrategyKind::cmelm};
  for (Index l = 10; l <= 150; l += 10) cfg.hidden_nodes.push_back(l);
  cfg.rounds = 10;
  cfg.seed = 1;
  cfg.jobs = worker_count();
  cfg.measure_time = false;
  const auto report = run_benchmark(gen_spiral(5000, 0.0, cfg.seed), cfg);
  const double secs = seconds_since(t0);

  auto mean = [&](StrategyKind k, Index l) { return report.find(strategy_name(k), l)->mean_accuracy; };
  std::string header = "   L";
  for (auto k : cfg.strategies) header += std::string(9 - strategy_name(k).size(), ' ') + std::string(strategy_name(k));
  o.note("mean test accuracy over 10 rounds:");
  o.note(header);
  for (Index l : cfg.hidden_nodes) {
    std::string row = fmt("%4.0f", static_cast<double>(l));
    for (auto k : cfg.strategies) row += fmt("%9.4f", mean(k, l));
    o.note(row);
  }
  for (auto k : kCelms) {
    const double a = mean(k, 100);
    o.check(a >= kSpiralFloorAt100, "(a) " + std::string(strategy_name(k)) + " at L=100: " + fmt("%.4f", a) + " >= 0.95");
  }
  const double elm150 = mean(StrategyKind::elm, 150);
  for (auto k : kCelms) {
    const double gap = mean(k, 150) - elm150;
    o.check(gap >= kSpiralGapAt150,
            "(b) " + std::string(strategy_name(k)) + " - elm at L=150: " + fmt("%.4f", gap) + " >= 0.05");
  }
  for (auto k : kCelms) {
    Index violations = 0;
    std::string where;
    for (Index l = 50; l <= 150; l += 10)
      if (!(mean(k, l) > mean(StrategyKind::elm, l))) {
        ++violations;
        where += " " + std::to_string(l);
      }
    o.check(violations == 0, "(c) " + std::string(strategy_name(k)) + " above elm for every L >= 50" +
                                 (violations ? " (not at L =" + where + ")" : ""));
  }
  o.check(secs < kSpiralBudget, "runtime " + fmt("%.1f", secs) + " s < 300 s (" + std::to_string(cfg.jobs) +
                                    " worker threads)");
  return o;
}

std::optional<std::string> env_file(const char* name) {
  const char* v = std::getenv(name);
  if (!v || !*v || !std::filesystem::exists(v)) return std::nullopt;
  return std::string(v);
}

Outcome wdbc_table() {
  Outcome o;
  const auto path = env_file("CELM_WDBC_CSV");
  if (!path) {
    o.status = Status::skip;
    o.note("CELM_WDBC_CSV not set or missing; export it with tools/export_wdbc.py");
    return o;
  }
  const auto t0 = Clock::now();
  const auto data = load_csv(*path, Index{-1});
  o.note("data: " + std::to_string(data.size()) + " x " + std::to_string(data.features()) + ", " +
         std::to_string(data.num_classes()) + " classes");
  BenchmarkConfig cfg;
  cfg.strategies = {StrategyKind::elm};
  cfg.strategies.insert(cfg.strategies.end(), std::begin(kCelms), std::end(kCelms));
  for (Index l = 5; l <= 100; l += 5) cfg.hidden_nodes.push_back(l);
  cfg.rounds = 10;
  cfg.seed = 1;
  cfg.ridge = RidgeMode::cross_validated;
  cfg.jobs = worker_count();
  cfg.measure_time = false;
  const auto report = run_benchmark(data, cfg);
  const double secs = seconds_since(t0);

  auto best = [&](StrategyKind k) {
    double b = -1.0;
    Index at = 0;
    for (Index l : cfg.hidden_nodes) {
      const double m = report.find(strategy_name(k), l)->mean_accuracy;
      if (m > b) {
        b = m;
        at = l;
      }
    }
    return std::pair{b, at};
  };
  for (auto k : cfg.strategies) {
    const auto [b, at] = best(k);
    o.note(std::string(strategy_name(k)) + ": best mean " + fmt("%.4f", b) + " at L=" + std::to_string(at));
  }
  const double cd = best(StrategyKind::cdelm).first;
  const double cs = best(StrategyKind::cselm).first;
  o.check(std::abs(cd - kWdbcCdelmTarget) <= kWdbcBand, "cdelm best " + fmt("%.4f", cd) + " within 0.973 +/- 0.03");
  o.check(std::abs(cs - kWdbcCselmTarget) <= kWdbcBand, "cselm best " + fmt("%.4f", cs) + " within 0.975 +/- 0.03");
  const double elm = best(StrategyKind::elm).first;
  for (auto k : kCelms) {
    const double b = best(k).first;
    o.check(b >= elm - kWdbcElmSlack,
            std::string(strategy_name(k)) + " best " + fmt("%.4f", b) + " >= elm best - 0.01 (" + fmt("%.4f", elm) + ")");
  }
  o.check(secs < kWdbcBudget, "runtime " + fmt("%.1f", secs) + " s < 600 s");
  return o;
}

Outcome mnist_gap() {
  Outcome o;
  const auto path = env_file("CELM_MNIST_CSV");
  if (!path) {
    o.status = Status::skip;
    o.note("CELM_MNIST_CSV not set or missing (10,000-row flattened MNIST CSV required)");
    return o;
  }
  const char* col_env = std::getenv("CELM_MNIST_LABEL_COL");
  const Index label_col = col_env ? static_cast<Index>(std::atoll(col_env)) : 0;
  const auto data = load_csv(*path, label_col);
  o.note("data: " + std::to_string(data.size()) + " x " + std::to_string(data.features()));
  BenchmarkConfig cfg;
  cfg.strategies = {StrategyKind::elm, StrategyKind::cdelm};
  cfg.hidden_nodes = {1000};
  cfg.rounds = 1;
  cfg.seed = 1;
  cfg.ridge = RidgeMode::cross_validated;
  cfg.jobs = worker_count();
  cfg.measure_time = false;
  const auto report = run_benchmark(data, cfg);
  const double elm = report.find("elm", 1000)->mean_accuracy;
  const double cd = report.find("cdelm", 1000)->mean_accuracy;
  o.check(cd - elm >= kMnistGap,
          "cdelm " + fmt("%.4f", cd) + " - elm " + fmt("%.4f", elm) + " = " + fmt("%.4f", cd - elm) + " >= 0.01");
  return o;
}

Outcome determinism() {
  Outcome o;
  const auto t0 = Clock::now();
  const auto dir = testing_support::temp_path("acceptance");
  std::filesystem::create_directories(dir);
  auto file = [&](const std::string& n) { return (std::filesystem::path(dir) / n).string(); };
  auto cli = [](std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    if (code != 0) throw std::runtime_error("cli failed: " + err.str());
  };
  const auto data = file("det_train.csv");
  write_csv_file(data, testing_support::blobs(3, 40, 4, 3.0, 1.0, 77));

  bool models_same = true;
  for (const char* strategy : {"elm", "oelm", "cdelm", "selm", "cselm", "rselm", "cmelm"}) {
    for (int run = 0; run < 2; ++run)
      cli({"train", "--data", data, "--strategy", strategy, "--hidden", "40", "--ridge", "auto", "--seed", "5", "--out",
           file(std::string("m") + std::to_string(run) + ".bin")});
    models_same &= testing_support::read_text(file("m0.bin")) == testing_support::read_text(file("m1.bin"));
  }
  o.check(models_same, "train twice with one seed: bit-identical model files for all 7 strategies");

  const std::vector<std::string> bench{"benchmark", "--dataset", "spiral", "--spiral-total", "1000", "--strategies",
                                       "elm,oelm,cdelm,selm,cselm,rselm,cmelm", "--nodes", "10:50:20", "--rounds", "3",
                                       "--seed", "11", "--ridge", "auto", "--no-timing"};
  auto bench_to = [&](const std::string& out, const char* jobs) {
    auto args = bench;
    args.insert(args.end(), {"--jobs", jobs, "--out", out});
    cli(args);
    return testing_support::read_text(out);
  };
  const auto r1 = bench_to(file("r1.json"), "1");
  const auto r2 = bench_to(file("r2.json"), "1");
  const auto r4 = bench_to(file("r4.json"), "4");
  o.check(!r1.empty() && r1 == r2, "benchmark report byte-identical across two runs");
  o.check(r1 == r4, "benchmark report byte-identical for --jobs 1 vs --jobs 4");

  // With timing on, everything except the train_seconds column must still match.
  auto timed_run = [&](const std::string& out, const char* jobs) {
    auto args = bench;
    args.pop_back();  // drop --no-timing
    args.insert(args.end(), {"--jobs", jobs, "--out", out});
    cli(args);
    std::istringstream in(testing_support::read_text(out));
    std::string stripped;
    for (std::string line; std::getline(in, line);) {
      std::vector<std::string> cols;
      std::stringstream ls(line);
      for (std::string c; std::getline(ls, c, ',');) cols.push_back(c);
      if (cols.size() == 7) cols.erase(cols.begin() + 5);
      for (const auto& c : cols) stripped += c + ',';
      stripped += '\n';
    }
    return stripped;
  };
  const auto t1 = timed_run(file("t1.csv"), "1");
  const auto t4 = timed_run(file("t4.csv"), "4");
  o.check(!t1.empty() && t1 == t4, "with timing on, all columns except train_seconds match for --jobs 1 vs 4");
  const double secs = seconds_since(t0);
  o.check(secs < kDeterminismBudget, "runtime " + fmt("%.1f", secs) + " s < 60 s");
  return o;
}

/// Runs `body` and adds a runtime check against the per-suite budget.
void timed_suite(Outcome& o, const std::string& name, const std::function<bool(std::string&)>& body) {
  const auto t0 = Clock::now();
  std::string detail;
  const bool ok = body(detail);
  const double secs = seconds_since(t0);
  o.check(ok && secs < kPropertyBudget, name + ": " + detail + " (" + fmt("%.2f", secs) + " s)");
}

Outcome property_suites() {
  using testing_support::random_dataset;
  Outcome o;

  timed_suite(o, "unit-norm weights (selm, cselm, rselm)", [](std::string& d) {
    double worst = 0.0;
    int layers = 0;
    for (std::uint64_t s = 0; s < 60; ++s) {
      const auto data = random_dataset(30 + static_cast<int>(s), 1 + static_cast<int>(s % 9), 2 + static_cast<int>(s % 4), s);
      for (auto k : {StrategyKind::selm, StrategyKind::cselm, StrategyKind::rselm}) {
        const auto g = generate(StrategySpec{k, s}, data, 50);
        worst = std::max(worst, (g.layer.weights.colwise().norm().array() - 1.0).abs().maxCoeff());
        ++layers;
      }
    }
    d = std::to_string(layers) + " layers, max |norm - 1| = " + fmt("%.2e", worst);
    return worst <= 1e-12;
  });

  timed_suite(o, "class-constraint provenance (cdelm, cselm, cmelm)", [](std::string& d) {
    std::size_t bad = 0, checked = 0;
    for (std::uint64_t s = 0; s < 40; ++s) {
      const auto data = random_dataset(60, 3, 2 + static_cast<int>(s % 5), s);
      for (auto k : {StrategyKind::cdelm, StrategyKind::cselm, StrategyKind::cmelm}) {
        const auto g = generate(StrategySpec{k, s}, data, 31);
        for (const auto& org : g.provenance) {
          const int a = data.y()[static_cast<std::size_t>(org.samples.at(0))];
          const int b = data.y()[static_cast<std::size_t>(org.samples.at(1))];
          const bool ok = org.source == NodeSource::class_difference ? a != b
                          : org.source == NodeSource::same_class_sum ? a == b
                                                                     : false;
          bad += ok ? 0 : 1;
          ++checked;
        }
      }
    }
    d = std::to_string(checked) + " nodes, " + std::to_string(bad) + " violations";
    return bad == 0;
  });

  timed_suite(o, "train-set normalization mean/std", [](std::string& d) {
    double worst_mean = 0.0, worst_sd = 0.0;
    for (std::uint64_t s = 0; s < 50; ++s) {
      auto data = random_dataset(20 + static_cast<int>(s) * 4, 5, 2, s);
      Matrix x = data.x();
      for (Index c = 0; c < x.cols(); ++c) x.col(c) = x.col(c) * std::pow(10.0, static_cast<double>(c) - 2.0) +
                                                       Vector::Constant(x.rows(), 100.0 * static_cast<double>(c));
      const Matrix z = normalize_apply(normalize_fit(x), x);
      for (Index c = 0; c < z.cols(); ++c) {
        const double m = z.col(c).mean();
        worst_mean = std::max(worst_mean, std::abs(m));
        worst_sd = std::max(worst_sd, std::abs(std::sqrt((z.col(c).array() - m).square().mean()) - 1.0));
      }
    }
    d = "max |mean| = " + fmt("%.2e", worst_mean) + ", max |std - 1| = " + fmt("%.2e", worst_sd);
    return worst_mean <= 1e-9 && worst_sd <= 1e-6;
  });

  timed_suite(o, "split partition", [](std::string& d) {
    int bad = 0;
    for (int t = 0; t < 500; ++t) {
      const int n = 2 + t % 150;
      const auto data = random_dataset(n, 2, 1 + t % 4, static_cast<std::uint64_t>(t), 0);
      const auto sp = split(data, SplitSpec{0.05 + 0.9 * (t % 19) / 18.0, static_cast<std::uint64_t>(t)});
      std::vector<Index> all = sp.train_rows;
      all.insert(all.end(), sp.test_rows.begin(), sp.test_rows.end());
      std::sort(all.begin(), all.end());
      bool ok = static_cast<int>(all.size()) == n;
      for (int i = 0; ok && i < n; ++i) ok = all[static_cast<std::size_t>(i)] == i;
      bad += ok ? 0 : 1;
    }
    d = "500 random splits, " + std::to_string(bad) + " violations";
    return bad == 0;
  });

  timed_suite(o, "label codec round trip", [](std::string& d) {
    std::mt19937_64 gen(3);
    int bad = 0;
    for (int t = 0; t < 200; ++t) {
      const int m = 2 + t % 12;
      std::vector<ClassId> classes;
      for (int k = 0; k < m; ++k) classes.push_back("k" + std::to_string(k * 31 + t));
      const LabelCodec codec(classes);
      std::uniform_int_distribution<int> pick(0, m - 1);
      std::vector<ClassId> labels;
      for (int i = 0; i < 1 + t % 40; ++i) labels.push_back(classes[static_cast<std::size_t>(pick(gen))]);
      bad += decode_scores(encode_labels(labels, codec), codec) == labels ? 0 : 1;
    }
    d = "200 label lists, " + std::to_string(bad) + " mismatches";
    return bad == 0;
  });

  timed_suite(o, "model save/load round trip", [](std::string& d) {
    int bad = 0, models = 0;
    for (std::uint64_t s = 0; s < 10; ++s)
      for (auto k : kAllStrategies) {
        const auto data = random_dataset(50, 3, 3, s);
        const std::optional<double> lambda = s % 2 ? std::optional<double>(std::pow(10.0, static_cast<double>(s) - 5.0))
                                                    : std::nullopt;
        const auto m = train(data, StrategySpec{k, s}, 12, lambda);
        const auto bytes = save_model(m);
        const auto back = load_model(bytes);
        const bool ok = save_model(back) == bytes && predict(back, data.x()) == predict(m, data.x()) &&
                         decision_scores(back, data.x()) == decision_scores(m, data.x());
        bad += ok ? 0 : 1;
        ++models;
      }
    d = std::to_string(models) + " models, " + std::to_string(bad) + " mismatches";
    return bad == 0;
  });
  return o;
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    std::function<Outcome()> run;
  };
  const Criterion criteria[] = {
      {"1 two-point mapping of difference nodes", two_point_mapping},
      {"2 ridge primal/dual and pseudoinverse equivalence", solver_equivalence},
      {"3 spiral ordering of CELM variants over ELM", spiral_ordering},
      {"4 WDBC accuracy with cross-validated ridge", wdbc_table},
      {"5 MNIST cdelm over elm gap", mnist_gap},
      {"6 determinism of models and reports", determinism},
      {"7 property suites", property_suites},
  };
  int failed = 0;
  std::vector<std::pair<std::string, Status>> summary;
  for (const auto& c : criteria) {
    Outcome o;
    const auto t0 = Clock::now();
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.status = Status::fail;
      o.notes.push_back(std::string("FAIL exception: ") + e.what());
    }
    const char* tag = o.status == Status::pass ? "PASS" : o.status == Status::fail ? "FAIL" : "SKIP";
    std::printf("[%s] %s (%.2f s)\n", tag, c.name, seconds_since(t0));
    for (const auto& n : o.notes) std::printf("       %s\n", n.c_str());
    std::fflush(stdout);
    if (o.status == Status::fail) ++failed;
    summary.emplace_back(c.name, o.status);
  }
  std::printf("\nsummary:\n");
  for (const auto& [name, st] : summary)
    std::printf("  %s  %s\n", st == Status::pass ? "PASS" : st == Status::fail ? "FAIL" : "SKIP", name.c_str());
  std::printf("%d of %zu criteria failed\n", failed, summary.size());
  return failed == 0 ? 0 : 1;
}
