#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "csgp/benchmark.hpp"
#include "csgp/fit.hpp"
#include "csgp/grid.hpp"
#include "csgp/init.hpp"
#include "csgp/model.hpp"
#include "csgp/serialize.hpp"

namespace csgp {

struct RunConfig {
  std::string dataset;
  std::string model_path;
  std::string out_dir = "out";
  Index r = 2;
  Index q = 3;
  Index m = 5;
  std::string strategy = "middle";  // exact | middle | greedy:S
  std::uint64_t seed = 0;
  Index dense_cap = 4096;
  double test_frac = 0.1;
  bool sort_line = false;
  bool with_var = false;
  Index time_axis = -1;
  Index restarts = 10;

  // Optimization budget knobs.
  Index max_iters = 120;
  Index init_g = 10;
  Index init_h = 10;
  Index init_partial = 30;
  Index init_subsample = 600;
  Index opt_subsample = 0;

  // Synthetic grid size.
  Index n1 = 50;
  Index n2 = 50;
};

/// Apply a key=value config file ('#' comments, blank lines ignored).
/// Keys mirror the CLI flag names without dashes; command-line flags
/// override file values because the file is applied first.
inline void apply_config_file(RunConfig& cfg, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read config file " + path);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto last = line.find_last_not_of(" \t\r");
    line = line.substr(first, last - first + 1);
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw Error(path + ":" + std::to_string(line_no) + ": expected key=value");
    const std::string key = line.substr(0, eq);
    const std::string val = line.substr(eq + 1);
    const auto as_index = [&] { return static_cast<Index>(std::stoll(val)); };
    const auto as_bool = [&] { return val == "1" || val == "true"; };
    if (key == "dataset") cfg.dataset = val;
    else if (key == "model") cfg.model_path = val;
    else if (key == "out") cfg.out_dir = val;
    else if (key == "r") cfg.r = as_index();
    else if (key == "q") cfg.q = as_index();
    else if (key == "m") cfg.m = as_index();
    else if (key == "strategy") cfg.strategy = val;
    else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(std::stoull(val));
    else if (key == "dense-cap") cfg.dense_cap = as_index();
    else if (key == "test-frac") cfg.test_frac = std::stod(val);
    else if (key == "sort-line") cfg.sort_line = as_bool();
    else if (key == "with-var") cfg.with_var = as_bool();
    else if (key == "time-axis") cfg.time_axis = as_index();
    else if (key == "restarts") cfg.restarts = as_index();
    else if (key == "max-iters") cfg.max_iters = as_index();
    else if (key == "init-g") cfg.init_g = as_index();
    else if (key == "init-h") cfg.init_h = as_index();
    else if (key == "init-partial") cfg.init_partial = as_index();
    else if (key == "init-subsample") cfg.init_subsample = as_index();
    else if (key == "opt-subsample") cfg.opt_subsample = as_index();
    else if (key == "n1") cfg.n1 = as_index();
    else if (key == "n2") cfg.n2 = as_index();
    else
      throw Error(path + ":" + std::to_string(line_no) + ": unknown key '" +
                  key + "'");
  }
}

inline WeylStrategy parse_strategy(const std::string& s) {
  if (s == "exact") return WeylExact{};
  if (s == "middle") return WeylMiddle{};
  if (s.rfind("greedy:", 0) == 0) {
    const long w = std::stol(s.substr(7));
    if (w < 1) throw Error("greedy window must be >= 1");
    return WeylGreedy{static_cast<Index>(w)};
  }
  throw Error("unknown strategy '" + s + "' (exact | middle | greedy:S)");
}

namespace detail {

inline void ensure_dir(const std::string& dir) {
  std::filesystem::create_directories(dir);
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << std::setprecision(17);
  return out;
}

/// Run fn(0..jobs-1) on up to `workers` threads; results land wherever fn
/// writes them, so output stays deterministic regardless of scheduling.
template <typename Fn>
void parallel_jobs(Index jobs, Index workers, Fn&& fn) {
  workers = std::min<Index>(workers, jobs);
  if (workers <= 1) {
    for (Index j = 0; j < jobs; ++j) fn(j);
    return;
  }
  std::atomic<Index> next{0};
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
  for (Index w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (;;) {
          const Index j = next.fetch_add(1);
          if (j >= jobs) return;
          fn(j);
        }
      } catch (...) {
        errors[static_cast<std::size_t>(w)] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

inline Index default_workers() {
  const unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<Index>(hc);
}

/// Number of input columns in a CSV (columns minus the response).
inline Index csv_dims(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw EmptyFile("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw EmptyFile(path + " is empty");
  Index cols = 1;
  for (char c : line)
    if (c == ',') ++cols;
  if (cols < 2) throw DimensionMismatch(path + ": need 2+ columns");
  return cols - 1;
}

}  // namespace detail

// --- shared fitting pipeline --------------------------------------------------

struct PipelineResult {
  ChangeSurfaceModel model;
  FitReport report;
  WeightInit weight_init;  // empty for r = 1
  SmInit sm_init;
};

/// Full initialization + fit on training points drawn from a grid:
/// Algorithm-1 weight search (r >= 2), Algorithm-2 spectral init over the
/// observed cells, then exact-mode optimization of the full model.
inline PipelineResult fit_change_surface(
    const GridDataset& grid, const std::vector<bool>& observed,
    const MatrixXd& train_x, const VectorXd& train_y, const RunConfig& cfg,
    std::uint64_t seed) {
  PipelineResult out;

  InitConfig icfg;
  icfg.g = cfg.init_g;
  icfg.h = cfg.init_h;
  icfg.partial_iters = cfg.init_partial;
  icfg.q = cfg.q;
  icfg.m = cfg.m;
  icfg.seed = seed;
  icfg.subsample = cfg.init_subsample;
  icfg.dense_cap = cfg.dense_cap;
  icfg.sort_line = cfg.sort_line;

  ChangeSurfaceModel model0;
  if (cfg.r >= 2) {
    out.weight_init = init_weights(train_x, train_y, cfg.r, icfg);
    model0.surface = out.weight_init.surface;
    model0.noise_var = out.weight_init.noise_var;
  } else {
    model0.surface.weights = {ZeroWeight{}};
    const double sigma_n = train_y.array().abs().mean() / 10.0;
    model0.noise_var = std::max(sigma_n * sigma_n, 1e-12);
  }

  out.sm_init = init_sm(grid, model0.surface, icfg, &observed);
  for (const auto& sm : out.sm_init.kernels)
    model0.kernels.emplace_back(normalized_for_product(sm));

  FitConfig fcfg;
  fcfg.mode = FitMode::Exact;
  fcfg.max_iters = cfg.max_iters;
  fcfg.dense_cap = cfg.dense_cap;
  fcfg.opt_subsample = cfg.opt_subsample;
  fcfg.seed = seed;
  auto [model, report] = fit(model0, train_x, train_y, fcfg);
  out.model = std::move(model);
  out.report = std::move(report);
  return out;
}

inline void write_fit_report(const std::string& path, const FitReport& r) {
  auto out = detail::open_out(path);
  out << "mode=" << r.mode << "\n";
  out << "strategy=" << r.strategy << "\n";
  out << "final_objective=" << r.final_objective << "\n";
  out << "iterations=" << r.iterations << "\n";
  out << "converged=" << (r.converged ? 1 : 0) << "\n";
  out << "line_search_failed=" << (r.line_search_failed ? 1 : 0) << "\n";
  out << "seconds=" << r.seconds << "\n";
  out << "trace=";
  for (std::size_t i = 0; i < r.trace.size(); ++i)
    out << (i ? "," : "") << r.trace[i];
  out << "\n";
}

inline void write_init_report(const std::string& path, const PipelineResult& p) {
  auto out = detail::open_out(path);
  out << "weight_init_objective=" << p.weight_init.objective << "\n";
  out << "candidate_draw_objectives=";
  for (std::size_t i = 0; i < p.weight_init.draw_objectives.size(); ++i)
    out << (i ? "," : "") << p.weight_init.draw_objectives[i];
  out << "\n";
  out << "candidate_partial_objectives=";
  for (std::size_t i = 0; i < p.weight_init.partial_objectives.size(); ++i)
    out << (i ? "," : "") << p.weight_init.partial_objectives[i];
  out << "\n";
  for (std::size_t i = 0; i < p.sm_init.kernels.size(); ++i) {
    out << "regime_" << i
        << "_fallback=" << (p.sm_init.fallback[i] ? 1 : 0) << "\n";
    for (std::size_t d = 0; d < p.sm_init.gmms[i].size(); ++d) {
      const auto& g = p.sm_init.gmms[i][d];
      out << "regime_" << i << "_dim_" << d << "_gmm=";
      for (Index k = 0; k < g.weights.size(); ++k)
        out << (k ? ";" : "") << g.weights[k] << "," << g.means[k] << ","
            << g.stds[k];
      out << "\n";
    }
  }
}

// --- synthetic experiment ------------------------------------------------------

struct SyntheticOutcome {
  std::vector<double> cs_nmse;  // change-surface model, per restart
  std::vector<double> sm_nmse;  // r=1 spectral mixture ablation
  double cs_mean = 0.0;
  double sm_mean = 0.0;
  double surface_accuracy = 0.0;  // best restart, label-permutation invariant
  Index best_restart = 0;
};

/// Numerical experiment: one synthetic draw, one train/test split, and
/// `restarts` independently seeded init+fit runs for the change-surface
/// model and the one-regime spectral mixture ablation. Writes NMSE tables,
/// true and predicted surfaces, test predictions, and a plot script.
inline SyntheticOutcome run_synthetic(const RunConfig& cfg) {
  detail::ensure_dir(cfg.out_dir);
  const auto [data, truth] = generate_synthetic(cfg.n1, cfg.n2, cfg.seed);
  const auto tts = split(data, cfg.test_frac, Rng::derive(cfg.seed, 0x511));

  const MatrixXd pts = data.points();
  const MatrixXd train_x = select_rows(pts, tts.train_idx);
  const VectorXd train_y = select(data.y, tts.train_idx);
  const MatrixXd test_x = select_rows(pts, tts.test_idx);
  const VectorXd test_y = select(data.y, tts.test_idx);

  // Observed-cell view for initialization: held-out responses zeroed and
  // masked so they can never leak into the spectrum.
  GridDataset observed_grid = data;
  std::vector<bool> observed(static_cast<std::size_t>(data.n()), false);
  for (Index i : tts.train_idx) observed[static_cast<std::size_t>(i)] = true;
  for (Index i : tts.test_idx) observed_grid.y[i] = 0.0;

  SyntheticOutcome outcome;
  outcome.cs_nmse.resize(static_cast<std::size_t>(cfg.restarts));
  outcome.sm_nmse.resize(static_cast<std::size_t>(cfg.restarts));
  std::vector<ChangeSurfaceModel> cs_models(
      static_cast<std::size_t>(cfg.restarts));

  detail::parallel_jobs(cfg.restarts, detail::default_workers(), [&](Index k) {
    const std::uint64_t seed_k = Rng::derive(cfg.seed, 0x1000 + static_cast<std::uint64_t>(k));
    auto res = fit_change_surface(observed_grid, observed, train_x, train_y,
                                  cfg, seed_k);
    const auto pred =
        predict(res.model, train_x, train_y, test_x, false, cfg.dense_cap);
    outcome.cs_nmse[static_cast<std::size_t>(k)] =
        nmse(test_y, pred.mean, train_y.mean());
    cs_models[static_cast<std::size_t>(k)] = std::move(res.model);
  });

  RunConfig ablation = cfg;
  ablation.r = 1;
  detail::parallel_jobs(cfg.restarts, detail::default_workers(), [&](Index k) {
    const std::uint64_t seed_k = Rng::derive(cfg.seed, 0x2000 + static_cast<std::uint64_t>(k));
    auto res = fit_change_surface(observed_grid, observed, train_x, train_y,
                                  ablation, seed_k);
    const auto pred =
        predict(res.model, train_x, train_y, test_x, false, cfg.dense_cap);
    outcome.sm_nmse[static_cast<std::size_t>(k)] =
        nmse(test_y, pred.mean, train_y.mean());
  });

  for (Index k = 0; k < cfg.restarts; ++k) {
    outcome.cs_mean += outcome.cs_nmse[static_cast<std::size_t>(k)];
    outcome.sm_mean += outcome.sm_nmse[static_cast<std::size_t>(k)];
  }
  outcome.cs_mean /= static_cast<double>(cfg.restarts);
  outcome.sm_mean /= static_cast<double>(cfg.restarts);

  outcome.best_restart = static_cast<Index>(
      std::min_element(outcome.cs_nmse.begin(), outcome.cs_nmse.end()) -
      outcome.cs_nmse.begin());
  const auto& best = cs_models[static_cast<std::size_t>(outcome.best_restart)];
  const MatrixXd w = warp(best.surface, pts);
  Index agree = 0;
  for (Index i = 0; i < data.n(); ++i)
    if ((w(i, 0) > 0.5) == (truth.surface[i] > 0.5)) ++agree;
  const double frac = static_cast<double>(agree) / static_cast<double>(data.n());
  outcome.surface_accuracy = std::max(frac, 1.0 - frac);

  // NMSE table.
  {
    auto out = detail::open_out(cfg.out_dir + "/synthetic_nmse.csv");
    out << "model,restart,nmse\n";
    for (Index k = 0; k < cfg.restarts; ++k)
      out << "change-surface," << k << ","
          << outcome.cs_nmse[static_cast<std::size_t>(k)] << "\n";
    for (Index k = 0; k < cfg.restarts; ++k)
      out << "spectral-mixture," << k << ","
          << outcome.sm_nmse[static_cast<std::size_t>(k)] << "\n";
    out << "change-surface,mean," << outcome.cs_mean << "\n";
    out << "spectral-mixture,mean," << outcome.sm_mean << "\n";
  }
  // True and predicted surfaces over the full grid.
  {
    auto out = detail::open_out(cfg.out_dir + "/surface_true.csv");
    out << "x1,x2,sigma1\n";
    for (Index i = 0; i < data.n(); ++i)
      out << pts(i, 0) << "," << pts(i, 1) << "," << truth.surface[i] << "\n";
  }
  {
    auto out = detail::open_out(cfg.out_dir + "/surface_pred.csv");
    out << "x1,x2";
    for (Index c = 0; c < best.regimes(); ++c) out << ",sigma" << (c + 1);
    out << "\n";
    for (Index i = 0; i < data.n(); ++i) {
      out << pts(i, 0) << "," << pts(i, 1);
      for (Index c = 0; c < best.regimes(); ++c) out << "," << w(i, c);
      out << "\n";
    }
  }
  // Test predictions from the best restart.
  {
    const auto pred = predict(best, train_x, train_y, test_x, cfg.with_var,
                              cfg.dense_cap);
    auto out = detail::open_out(cfg.out_dir + "/predictions.csv");
    out << "x1,x2,y_true,y_pred";
    if (cfg.with_var) out << ",var";
    out << "\n";
    for (Index i = 0; i < test_x.rows(); ++i) {
      out << test_x(i, 0) << "," << test_x(i, 1) << "," << test_y[i] << ","
          << pred.mean[i];
      if (cfg.with_var) out << "," << pred.var[i];
      out << "\n";
    }
  }
  {
    auto out = detail::open_out(cfg.out_dir + "/plot_synthetic.py");
    out << "import csv, matplotlib\n"
           "matplotlib.use('Agg')\n"
           "import matplotlib.pyplot as plt\n"
           "import numpy as np\n"
           "def load(path):\n"
           "    with open(path) as f:\n"
           "        rows = list(csv.DictReader(f))\n"
           "    return rows\n"
           "true = load('surface_true.csv')\n"
           "pred = load('surface_pred.csv')\n"
           "x1 = sorted({float(r['x1']) for r in true})\n"
           "x2 = sorted({float(r['x2']) for r in true})\n"
           "def field(rows, key):\n"
           "    g = np.zeros((len(x1), len(x2)))\n"
           "    for r in rows:\n"
           "        g[x1.index(float(r['x1'])), x2.index(float(r['x2']))] = "
           "float(r[key])\n"
           "    return g\n"
           "fig, axes = plt.subplots(1, 2, figsize=(10, 4))\n"
           "for ax, g, title in [(axes[0], field(true, 'sigma1'), 'true "
           "surface'), (axes[1], field(pred, 'sigma1'), 'predicted surface')]:\n"
           "    im = ax.imshow(g, origin='lower', vmin=0, vmax=1, "
           "cmap='coolwarm')\n"
           "    ax.set_title(title)\n"
           "    fig.colorbar(im, ax=ax)\n"
           "fig.savefig('synthetic_surfaces.png', dpi=150)\n";
  }
  return outcome;
}

// --- coal experiment ------------------------------------------------------------

struct CoalOutcome {
  double midpoint = 0.0;       // year of the first 0.5 crossing
  double duration = 0.0;       // years between the 0.1 and 0.9 crossings
  bool crossed = false;
  Index half_crossings = 0;    // number of 0.5 crossings of the series
  VectorXd sigma1;             // per-year sigma(w_1)
};

/// Coal-mining experiment: a two-regime fit to the yearly accident counts
/// with the change region summarized along the year axis. Writes the
/// sigma(w_1) series, a summary, and a cumulative plot script with the
/// 1887 reference line.
inline CoalOutcome run_coal(const RunConfig& cfg) {
  detail::ensure_dir(cfg.out_dir);
  const std::string path =
      cfg.dataset.empty() ? "data/coal.csv" : cfg.dataset;
  const GridDataset data = load_csv(path, 1);

  RunConfig run = cfg;
  run.r = 2;
  const std::vector<bool> observed(static_cast<std::size_t>(data.n()), true);
  const MatrixXd pts = data.points();
  const auto res =
      fit_change_surface(data, observed, pts, data.y, run, cfg.seed);

  CoalOutcome outcome;
  const MatrixXd w = warp(res.model.surface, pts);
  outcome.sigma1 = w.col(0);

  const VectorXd& years = data.axes[0];
  const auto mid = detail::first_crossing(years, outcome.sigma1, 0.5);
  outcome.crossed = mid.has_value();
  if (mid) outcome.midpoint = *mid;
  const auto t_lo = detail::first_crossing(years, outcome.sigma1, 0.1);
  const auto t_hi = detail::first_crossing(years, outcome.sigma1, 0.9);
  if (t_lo && t_hi) outcome.duration = std::abs(*t_hi - *t_lo);
  for (Index i = 0; i + 1 < outcome.sigma1.size(); ++i) {
    const double a = outcome.sigma1[i] - 0.5;
    const double b = outcome.sigma1[i + 1] - 0.5;
    if (a * b < 0.0) ++outcome.half_crossings;
  }

  {
    auto out = detail::open_out(cfg.out_dir + "/coal_surface.csv");
    out << "year,count,sigma1\n";
    for (Index i = 0; i < data.n(); ++i)
      out << years[i] << "," << data.y[i] << "," << outcome.sigma1[i] << "\n";
  }
  {
    auto out = detail::open_out(cfg.out_dir + "/coal_summary.txt");
    out << "years=" << years[0] << ".." << years[data.n() - 1] << "\n";
    out << "midpoint_year=" << (outcome.crossed ? outcome.midpoint : -1.0)
        << "\n";
    out << "transition_years_0.1_to_0.9=" << outcome.duration << "\n";
    out << "half_crossings=" << outcome.half_crossings << "\n";
    out << "final_objective=" << res.report.final_objective << "\n";
  }
  write_fit_report(cfg.out_dir + "/coal_fit_report.txt", res.report);
  {
    auto out = detail::open_out(cfg.out_dir + "/plot_coal.py");
    out << "import csv, matplotlib\n"
           "matplotlib.use('Agg')\n"
           "import matplotlib.pyplot as plt\n"
           "years, counts, sigma = [], [], []\n"
           "with open('coal_surface.csv') as f:\n"
           "    for row in csv.DictReader(f):\n"
           "        years.append(float(row['year']))\n"
           "        counts.append(float(row['count']))\n"
           "        sigma.append(float(row['sigma1']))\n"
           "cum = [sum(counts[:i+1]) for i in range(len(counts))]\n"
           "fig, ax1 = plt.subplots(figsize=(8, 4))\n"
           "ax1.plot(years, cum, 'b-', label='cumulative accidents')\n"
           "ax2 = ax1.twinx()\n"
           "ax2.plot(years, sigma, 'g-', label='sigma(w1)')\n"
           "ax1.axvline(1887, color='red', label='1887 act')\n";
    if (outcome.crossed)
      out << "ax1.axvline(" << outcome.midpoint
          << ", color='magenta', label='sigma=0.5')\n";
    out << "ax1.set_xlabel('year')\n"
           "fig.legend(loc='upper left')\n"
           "fig.savefig('coal.png', dpi=150)\n";
  }
  return outcome;
}

// --- log-determinant benchmark ---------------------------------------------------

inline std::vector<BenchRow> run_benchmark_logdet(const RunConfig& cfg) {
  detail::ensure_dir(cfg.out_dir);
  BenchmarkConfig bcfg;
  bcfg.seed = cfg.seed;
  bcfg.dense_cap = cfg.dense_cap;
  const WeylStrategy strat = parse_strategy(cfg.strategy);
  if (const auto* g = std::get_if<WeylGreedy>(&strat))
    bcfg.greedy_window = g->window;
  const auto rows = benchmark_bounds(bcfg);

  auto out = detail::open_out(cfg.out_dir + "/logdet_benchmark.csv");
  out << "n,kernels,strategy,logdet_value,exact_value,ratio,seconds\n";
  for (const auto& r : rows)
    out << r.n << "," << r.kernels << "," << r.strategy << ","
        << r.logdet_value << "," << r.exact_value << "," << r.ratio << ","
        << r.seconds << "\n";

  auto plot = detail::open_out(cfg.out_dir + "/plot_logdet.py");
  plot << "import csv, matplotlib\n"
          "matplotlib.use('Agg')\n"
          "import matplotlib.pyplot as plt\n"
          "rows = list(csv.DictReader(open('logdet_benchmark.csv')))\n"
          "for kernels in ('2', '3'):\n"
          "    fig, (axr, axt) = plt.subplots(1, 2, figsize=(11, 4))\n"
          "    names = sorted({r['strategy'] for r in rows if r['kernels'] "
          "== kernels})\n"
          "    for name in names:\n"
          "        pts = [(int(r['n']), float(r['ratio']), "
          "float(r['seconds'])) for r in rows if r['strategy'] == name and "
          "r['kernels'] == kernels]\n"
          "        pts.sort()\n"
          "        axr.plot([p[0] for p in pts], [p[1] for p in pts], "
          "marker='o', label=name)\n"
          "        axt.loglog([p[0] for p in pts], [p[2] for p in pts], "
          "marker='o', label=name)\n"
          "    axr.set_xlabel('n'); axr.set_ylabel('ratio to exact')\n"
          "    axt.set_xlabel('n'); axt.set_ylabel('seconds')\n"
          "    axr.legend(); axt.legend()\n"
          "    fig.savefig(f'logdet_{kernels}kernels.png', dpi=150)\n";
  return rows;
}

// --- generic fit / predict --------------------------------------------------------

/// Fit a change-surface model to a complete-grid CSV and serialize it.
inline PipelineResult run_fit(const RunConfig& cfg) {
  detail::ensure_dir(cfg.out_dir);
  const Index dims = detail::csv_dims(cfg.dataset);
  const GridDataset data = load_csv(cfg.dataset, dims);
  if (data.n() > cfg.dense_cap)
    throw SizeCap("run_fit: dataset exceeds the dense cap; reduce the grid "
                  "or raise --dense-cap");
  const std::vector<bool> observed(static_cast<std::size_t>(data.n()), true);
  const MatrixXd pts = data.points();
  auto res = fit_change_surface(data, observed, pts, data.y, cfg, cfg.seed);

  save_model(cfg.out_dir + "/model.json", res.model);
  write_fit_report(cfg.out_dir + "/fit_report.txt", res.report);
  write_init_report(cfg.out_dir + "/init_report.txt", res);
  return res;
}

struct PredictOutcome {
  VectorXd mean;
  VectorXd var;
  double nmse_value = -1.0;  // only when a test split was requested
};

/// Predict with a serialized model over a dataset: held-out points when
/// --test-frac is positive, the full grid otherwise. A designated time
/// axis adds per-slice midpoint/slope summaries of sigma(w_1).
inline PredictOutcome run_predict(const RunConfig& cfg) {
  detail::ensure_dir(cfg.out_dir);
  const ChangeSurfaceModel model = load_model(cfg.model_path);
  const Index dims = detail::csv_dims(cfg.dataset);
  const GridDataset data = load_csv(cfg.dataset, dims);
  const MatrixXd pts = data.points();

  MatrixXd train_x = pts;
  VectorXd train_y = data.y;
  MatrixXd eval_x = pts;
  VectorXd eval_y = data.y;
  bool have_split = false;
  if (cfg.test_frac > 0.0) {
    const auto tts = split(data, cfg.test_frac, cfg.seed);
    train_x = select_rows(pts, tts.train_idx);
    train_y = select(data.y, tts.train_idx);
    eval_x = select_rows(pts, tts.test_idx);
    eval_y = select(data.y, tts.test_idx);
    have_split = true;
  }

  Prediction pred;
  if (!have_split && data.n() > cfg.dense_cap) {
    pred = predict_grid(model, data, eval_x, cfg.with_var, cfg.dense_cap);
  } else {
    if (train_x.rows() > cfg.dense_cap)
      throw SizeCap("run_predict: training set exceeds the dense cap");
    pred = predict(model, train_x, train_y, eval_x, cfg.with_var,
                   cfg.dense_cap);
  }

  PredictOutcome outcome;
  outcome.mean = pred.mean;
  outcome.var = pred.var;
  if (have_split) outcome.nmse_value = nmse(eval_y, pred.mean, train_y.mean());

  {
    auto out = detail::open_out(cfg.out_dir + "/predictions.csv");
    for (Index d = 0; d < dims; ++d) out << "x" << (d + 1) << ",";
    out << "y_true,y_pred";
    if (cfg.with_var) out << ",var";
    out << "\n";
    for (Index i = 0; i < eval_x.rows(); ++i) {
      for (Index d = 0; d < dims; ++d) out << eval_x(i, d) << ",";
      out << eval_y[i] << "," << pred.mean[i];
      if (cfg.with_var) out << "," << pred.var[i];
      out << "\n";
    }
  }
  // Change-surface export over the full grid.
  const MatrixXd w = warp(model.surface, pts);
  {
    auto out = detail::open_out(cfg.out_dir + "/surface_pred.csv");
    for (Index d = 0; d < dims; ++d) out << "x" << (d + 1) << ",";
    for (Index c = 0; c < model.regimes(); ++c)
      out << "sigma" << (c + 1) << (c + 1 == model.regimes() ? "" : ",");
    out << "\n";
    for (Index i = 0; i < data.n(); ++i) {
      for (Index d = 0; d < dims; ++d) out << pts(i, d) << ",";
      for (Index c = 0; c < model.regimes(); ++c)
        out << w(i, c) << (c + 1 == model.regimes() ? "" : ",");
      out << "\n";
    }
  }
  if (cfg.time_axis >= 0) {
    const auto summaries =
        surface_summary(data.axes, w.col(0), cfg.time_axis);
    auto out = detail::open_out(cfg.out_dir + "/midpoints.csv");
    for (Index d = 0; d < dims; ++d)
      if (d != cfg.time_axis) out << "x" << (d + 1) << ",";
    out << "midpoint,slope,crossed\n";
    for (const auto& s : summaries) {
      for (Index c = 0; c < s.slice_coords.size(); ++c)
        out << s.slice_coords[c] << ",";
      out << (s.midpoint ? *s.midpoint : std::nan("")) << ","
          << (s.slope ? *s.slope : std::nan("")) << ","
          << (s.crossed ? 1 : 0) << "\n";
    }
  }
  if (outcome.nmse_value >= 0.0) {
    auto out = detail::open_out(cfg.out_dir + "/predict_summary.txt");
    out << "nmse=" << outcome.nmse_value << "\n";
  }
  return outcome;
}

}  // namespace csgp
