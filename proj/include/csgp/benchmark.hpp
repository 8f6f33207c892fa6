#pragma once

#include <chrono>
#include <cmath>
#include <string>
#include <vector>

#include "csgp/kernels.hpp"
#include "csgp/kron.hpp"
#include "csgp/logdet.hpp"
#include "csgp/rng.hpp"
#include "csgp/weights.hpp"

namespace csgp {

struct BenchmarkConfig {
  std::vector<Index> sizes = {64, 256, 512, 1024, 2048, 4096};
  std::vector<Index> kernel_counts = {2, 3};
  Index greedy_window = 40;
  std::uint64_t seed = 0;
  Index dense_cap = 4096;
  double min_timing_window = 0.01;  // seconds of repeated work per timing
};

struct BenchRow {
  Index n = 0;
  Index kernels = 0;
  std::string strategy;
  double logdet_value = 0.0;
  double exact_value = 0.0;
  double ratio = 0.0;
  double seconds = 0.0;
};

namespace detail {

// One synthetic change-surface instance: r softmax-scaled Kronecker RBF
// terms on a 2-D grid, mirroring the numerical-experiment setup.
struct BenchInstance {
  std::vector<VectorXd> scales;
  std::vector<std::vector<MatrixXd>> factors;
  double noise_var = 0.0;
};

inline BenchInstance make_bench_instance(Index n, Index r, Rng& rng) {
  Index g1 = static_cast<Index>(std::round(std::sqrt(static_cast<double>(n))));
  while (n % g1 != 0) --g1;
  const Index g2 = n / g1;
  const std::vector<VectorXd> axes = {VectorXd::LinSpaced(g1, 0.0, 1.0),
                                      VectorXd::LinSpaced(g2, 0.0, 1.0)};
  MatrixXd pts(n, 2);
  Index row = 0;
  for (Index i = 0; i < g1; ++i)
    for (Index j = 0; j < g2; ++j) {
      pts(row, 0) = axes[0][i];
      pts(row, 1) = axes[1][j];
      ++row;
    }

  ChangeSurface surface;
  const VectorXd lambda = VectorXd::Constant(2, 0.25);
  for (Index i = 0; i + 1 < r; ++i)
    surface.weights.emplace_back(sample_rks_prior(5, lambda, 4.0, rng));
  surface.weights.emplace_back(ZeroWeight{});
  const MatrixXd w = warp(surface, pts);

  BenchInstance inst;
  double total_var = 0.0;
  for (Index i = 0; i < r; ++i) {
    RbfParams rbf;
    rbf.length_scales = (VectorXd(2) << rng.uniform(0.05, 0.4),
                         rng.uniform(0.05, 0.4))
                            .finished();
    rbf.signal_var = rng.uniform(0.5, 2.0);
    total_var += rbf.signal_var;
    inst.scales.push_back(w.col(i));
    inst.factors.push_back(eval_factors(KernelSpec(rbf), axes));
  }
  inst.noise_var = 0.05 * total_var;
  return inst;
}

template <typename F>
double time_adaptive(F&& body, double min_window) {
  using clock = std::chrono::steady_clock;
  // Grow the repetition count until one window is long enough to trust,
  // then keep the best of three windows to suppress scheduler noise.
  Index reps = 1;
  for (;;) {
    const auto t0 = clock::now();
    for (Index k = 0; k < reps; ++k) body();
    const double elapsed = std::chrono::duration<double>(clock::now() - t0).count();
    if (elapsed >= min_window || reps >= (Index{1} << 22)) break;
    reps *= 4;
  }
  double best = std::numeric_limits<double>::infinity();
  for (int w = 0; w < 3; ++w) {
    const auto t0 = clock::now();
    for (Index k = 0; k < reps; ++k) body();
    const double elapsed = std::chrono::duration<double>(clock::now() - t0).count();
    best = std::min(best, elapsed / static_cast<double>(reps));
  }
  return best;
}

}  // namespace detail

/// Ratio-to-exact and post-eigendecomposition timing for every bound
/// strategy over a size sweep, for 2- and 3-kernel sums. The Fiedler row
/// appears only in the two-kernel case.
inline std::vector<BenchRow> benchmark_bounds(const BenchmarkConfig& cfg = {}) {
  std::vector<BenchRow> rows;
  for (Index r : cfg.kernel_counts) {
    for (Index n : cfg.sizes) {
      if (n > cfg.dense_cap) continue;
      Rng rng(Rng::derive(cfg.seed, static_cast<std::uint64_t>(n * 10 + r)));
      const auto inst = detail::make_bench_instance(n, r, rng);

      // Scaled per-term spectra (shared by all strategies).
      std::vector<EigenSpectrum> spectra;
      std::vector<MatrixXd> dense_terms;
      for (Index i = 0; i < r; ++i) {
        std::vector<MatrixXd> jittered = inst.factors[static_cast<std::size_t>(i)];
        for (auto& f : jittered) add_factor_jitter(f);
        spectra.push_back(scaled_term_spectrum(
            inst.scales[static_cast<std::size_t>(i)], kron_eigvals(jittered)));

        MatrixXd dense = MatrixXd::Ones(1, 1);
        for (const auto& f : inst.factors[static_cast<std::size_t>(i)]) {
          MatrixXd next(dense.rows() * f.rows(), dense.cols() * f.cols());
          for (Index a = 0; a < dense.rows(); ++a)
            for (Index b = 0; b < dense.cols(); ++b)
              next.block(a * f.rows(), b * f.cols(), f.rows(), f.cols()) =
                  dense(a, b) * f;
          dense = std::move(next);
        }
        const auto& s = inst.scales[static_cast<std::size_t>(i)];
        dense = s.asDiagonal() * dense * s.asDiagonal();
        dense_terms.push_back(std::move(dense));
      }

      BenchRow exact_row;
      exact_row.n = n;
      exact_row.kernels = r;
      exact_row.strategy = "dense-exact";
      {
        const auto t0 = std::chrono::steady_clock::now();
        exact_row.logdet_value =
            exact_logdet_dense(dense_terms, inst.noise_var, cfg.dense_cap);
        exact_row.seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                .count();
      }
      exact_row.exact_value = exact_row.logdet_value;
      exact_row.ratio = 1.0;
      rows.push_back(exact_row);

      std::vector<std::pair<std::string, WeylStrategy>> strategies = {
          {"exact-weyl", WeylExact{}},
          {"middle", WeylMiddle{}},
          {"greedy:" + std::to_string(cfg.greedy_window),
           WeylGreedy{cfg.greedy_window}}};
      for (const auto& [name, strat] : strategies) {
        BenchRow row;
        row.n = n;
        row.kernels = r;
        row.strategy = name;
        row.logdet_value = weyl_logdet(spectra, inst.noise_var, strat);
        row.exact_value = exact_row.exact_value;
        row.ratio = row.logdet_value / row.exact_value;
        row.seconds = detail::time_adaptive(
            [&] { (void)weyl_logdet(spectra, inst.noise_var, strat); },
            cfg.min_timing_window);
        rows.push_back(row);
      }
      if (r == 2) {
        BenchRow row;
        row.n = n;
        row.kernels = r;
        row.strategy = "fiedler";
        row.logdet_value =
            fiedler_logdet(spectra[0], spectra[1], inst.noise_var);
        row.exact_value = exact_row.exact_value;
        row.ratio = row.logdet_value / row.exact_value;
        row.seconds = detail::time_adaptive(
            [&] { (void)fiedler_logdet(spectra[0], spectra[1], inst.noise_var); },
            cfg.min_timing_window);
        rows.push_back(row);
      }
    }
  }
  return rows;
}

}  // namespace csgp
