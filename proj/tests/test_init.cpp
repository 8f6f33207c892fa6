#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "csgp/init.hpp"

using namespace csgp;

TEST_CASE("fit_gmm1d") {
  SECTION("Q=1 recovers mean and std in closed form") {
    Rng rng(81);
    VectorXd samples(500);
    for (Index i = 0; i < 500; ++i) samples[i] = 3.0 + 0.5 * rng.normal();
    const auto fit = fit_gmm1d(samples, 1, 1);
    const double mean = samples.mean();
    const double stdv = std::sqrt((samples.array() - mean).square().mean());
    REQUIRE(fit.gmm.weights[0] == Catch::Approx(1.0));
    REQUIRE(fit.gmm.means[0] == Catch::Approx(mean).margin(1e-10));
    REQUIRE(fit.gmm.stds[0] == Catch::Approx(stdv).margin(1e-10));
  }
  SECTION("two well-separated clusters are recovered") {
    Rng rng(82);
    VectorXd samples(600);
    for (Index i = 0; i < 600; ++i)
      samples[i] = (i % 2 == 0) ? -4.0 + 0.3 * rng.normal()
                                : 4.0 + 0.3 * rng.normal();
    const auto fit = fit_gmm1d(samples, 2, 2);
    VectorXd means = fit.gmm.means;
    std::sort(means.data(), means.data() + 2);
    REQUIRE(std::abs(means[0] + 4.0) < 0.8);  // 0.1 * separation of 8
    REQUIRE(std::abs(means[1] - 4.0) < 0.8);
    REQUIRE(fit.gmm.weights.sum() == Catch::Approx(1.0).epsilon(1e-12));
  }
  SECTION("log likelihood is non-decreasing") {
    Rng rng(83);
    VectorXd samples(300);
    for (Index i = 0; i < 300; ++i)
      samples[i] = rng.normal() + (i % 3 == 0 ? 2.0 : 0.0);
    const auto fit = fit_gmm1d(samples, 3, 3);
    for (std::size_t i = 1; i < fit.loglik_trace.size(); ++i)
      REQUIRE(fit.loglik_trace[i] >=
              fit.loglik_trace[i - 1] - 1e-8 * std::abs(fit.loglik_trace[i]));
  }
  SECTION("fewer than Q distinct samples throws") {
    VectorXd samples = VectorXd::Constant(10, 1.0);
    samples[0] = 2.0;
    REQUIRE_THROWS_AS(fit_gmm1d(samples, 3, 4), DegenerateData);
  }
}

TEST_CASE("empirical_spectrum") {
  SECTION("pure sinusoid concentrates at the right bin") {
    GridDataset data;
    const Index n = 64;
    data.axes = {VectorXd::LinSpaced(n, 0.0, static_cast<double>(n - 1))};
    const double freq = 0.25;  // cycles per unit spacing; bin 16 of 64
    data.y.resize(n);
    for (Index i = 0; i < n; ++i)
      data.y[i] = std::cos(2.0 * std::numbers::pi * freq * data.axes[0][i]);
    std::vector<bool> mask(static_cast<std::size_t>(n), true);
    Rng rng(84);
    const VectorXd samples = empirical_spectrum(data, mask, 0, rng);
    const double bin_width = 1.0 / static_cast<double>(n);
    Index close = 0;
    for (Index i = 0; i < samples.size(); ++i)
      if (std::abs(samples[i] - freq) <= bin_width) ++close;
    REQUIRE(close >= samples.size() * 9 / 10);
  }
  SECTION("constant responses put all mass at zero frequency") {
    GridDataset data;
    data.axes = {VectorXd::LinSpaced(32, 0.0, 31.0)};
    data.y = VectorXd::Constant(32, 2.5);
    std::vector<bool> mask(32, true);
    Rng rng(85);
    const VectorXd samples = empirical_spectrum(data, mask, 0, rng);
    const double bin_width = 1.0 / 32.0;
    REQUIRE(samples.cwiseAbs().maxCoeff() <= 0.5 * bin_width + 1e-12);
  }
  SECTION("all-false mask throws EmptyRegime") {
    GridDataset data;
    data.axes = {VectorXd::LinSpaced(8, 0.0, 7.0)};
    data.y = VectorXd::Ones(8);
    std::vector<bool> mask(8, false);
    Rng rng(86);
    REQUIRE_THROWS_AS(empirical_spectrum(data, mask, 0, rng), EmptyRegime);
  }
  SECTION("sorting the line moves mass toward low frequencies") {
    GridDataset data;
    const Index n = 64;
    data.axes = {VectorXd::LinSpaced(n, 0.0, static_cast<double>(n - 1))};
    data.y.resize(n);
    for (Index i = 0; i < n; ++i)
      data.y[i] = std::cos(2.0 * std::numbers::pi * 0.25 * data.axes[0][i]);
    std::vector<bool> mask(static_cast<std::size_t>(n), true);
    Rng rng1(87), rng2(87);
    const VectorXd plain = empirical_spectrum(data, mask, 0, rng1, false);
    const VectorXd sorted = empirical_spectrum(data, mask, 0, rng2, true);
    REQUIRE(sorted.mean() < plain.mean());
  }
}

TEST_CASE("init_weights on a sharp planar change") {
  // Two clearly different regimes split by a plane; the selected
  // weighting function should classify most points correctly.
  Rng rng(88);
  const Index n1 = 20, n2 = 20;
  GridDataset data;
  data.axes = {VectorXd::LinSpaced(n1, 0.0, 1.0),
               VectorXd::LinSpaced(n2, 0.0, 1.0)};
  data.y.resize(n1 * n2);
  const MatrixXd pts = data.points();
  VectorXd true_side(n1 * n2);
  for (Index i = 0; i < n1 * n2; ++i) {
    const bool left = pts(i, 0) < 0.5;
    true_side[i] = left ? 1.0 : 0.0;
    data.y[i] = left ? 2.0 + 0.1 * rng.normal()
                     : -2.0 + 1.0 * std::sin(20.0 * pts(i, 1)) +
                           0.1 * rng.normal();
  }

  InitConfig cfg;
  cfg.g = 8;
  cfg.h = 6;
  cfg.partial_iters = 15;
  cfg.convergence_iters = 60;
  cfg.seed = 99;
  const auto init = init_weights(pts, data.y, 2, cfg);

  REQUIRE(init.draw_objectives.size() == 48);
  REQUIRE(init.partial_objectives.size() == 8);
  // Selection correctness: the final objective beats every candidate.
  for (double obj : init.draw_objectives) REQUIRE(init.objective <= obj + 1e-6);
  for (double obj : init.partial_objectives)
    REQUIRE(init.objective <= obj + 1e-6);

  const MatrixXd w = warp(init.surface, pts);
  Index agree = 0;
  for (Index i = 0; i < n1 * n2; ++i) {
    const bool fitted_first = w(i, 0) > 0.5;
    const bool truth_first = true_side[i] > 0.5;
    if (fitted_first == truth_first) ++agree;
  }
  // Regime labels may be swapped; accept either orientation.
  const double frac =
      static_cast<double>(std::max(agree, n1 * n2 - agree)) /
      static_cast<double>(n1 * n2);
  REQUIRE(frac >= 0.8);

  SECTION("default lambda follows (range/2)^2") {
    const auto& rks = std::get<RksWeight>(init.surface.weights[0]);
    REQUIRE(rks.lambda[0] == Catch::Approx(0.25));
    REQUIRE(rks.lambda[1] == Catch::Approx(0.25));
  }
  SECTION("fixed seed reproduces the winner") {
    const auto again = init_weights(pts, data.y, 2, cfg);
    REQUIRE(again.objective == init.objective);
    const auto& a = std::get<RksWeight>(init.surface.weights[0]);
    const auto& b = std::get<RksWeight>(again.surface.weights[0]);
    REQUIRE((a.a - b.a).norm() == 0.0);
  }
}

TEST_CASE("minimal init config runs") {
  Rng rng(90);
  MatrixXd x(30, 1);
  x.col(0) = VectorXd::LinSpaced(30, 0, 1);
  VectorXd y = rng.normal_vector(30);
  InitConfig cfg;
  cfg.g = 1;
  cfg.h = 1;
  cfg.partial_iters = 1;
  cfg.convergence_iters = 5;
  const auto init = init_weights(x, y, 2, cfg);
  REQUIRE(std::isfinite(init.objective));
}

TEST_CASE("degenerate responses are rejected") {
  MatrixXd x(10, 1);
  x.col(0) = VectorXd::LinSpaced(10, 0, 1);
  const VectorXd y = VectorXd::Constant(10, 3.0);
  InitConfig cfg;
  REQUIRE_THROWS_AS(init_weights(x, y, 2, cfg), DegenerateData);
}

TEST_CASE("init_sm") {
  SECTION("identity mapping from the mixture fit") {
    Rng rng(91);
    GridDataset data;
    data.axes = {VectorXd::LinSpaced(24, 0.0, 23.0),
                 VectorXd::LinSpaced(8, 0.0, 7.0)};
    data.y.resize(24 * 8);
    const MatrixXd pts = data.points();
    for (Index i = 0; i < data.n(); ++i)
      data.y[i] = std::sin(0.8 * pts(i, 0)) + 0.3 * rng.normal();

    ChangeSurface surface;
    PolyWeight tilt;
    tilt.beta = MatrixXd::Zero(2, 2);
    tilt.beta(1, 0) = 1.0;  // w = x1, crosses zero mid-grid
    tilt.beta(0, 0) = -11.0;
    surface.weights = {tilt, ZeroWeight{}};

    InitConfig cfg;
    cfg.q = 2;
    cfg.seed = 7;
    const auto sm_init = init_sm(data, surface, cfg);
    REQUIRE(sm_init.kernels.size() == 2);

    const double y_mean = data.y.mean();
    const double y_std = std::sqrt((data.y.array() - y_mean).square().mean());
    for (Index i = 0; i < 2; ++i) {
      const auto& sm = sm_init.kernels[static_cast<std::size_t>(i)];
      for (Index d = 0; d < 2; ++d) {
        const auto& gmm = sm_init.gmms[static_cast<std::size_t>(i)]
                                   [static_cast<std::size_t>(d)];
        // Line 8 identities: w_q = std(y) phi_q, m_q = mu_q, v_q = sigma_q.
        REQUIRE(sm.weights.row(d).sum() ==
                Catch::Approx(y_std).epsilon(1e-10));
        for (Index q = 0; q < 2; ++q) {
          REQUIRE(sm.weights(d, q) / y_std ==
                  Catch::Approx(gmm.weights[q]).epsilon(1e-12));
          REQUIRE(sm.means(d, q) == gmm.means[q]);
          REQUIRE(sm.vars(d, q) == gmm.stds[q]);
        }
      }
    }
  }
  SECTION("sinusoidal regime frequency is recovered") {
    GridDataset data;
    const Index n = 64;
    data.axes = {VectorXd::LinSpaced(n, 0.0, static_cast<double>(n - 1))};
    data.y.resize(n);
    const double freq = 0.125;
    for (Index i = 0; i < n; ++i)
      data.y[i] = std::cos(2.0 * std::numbers::pi * freq * data.axes[0][i]);

    ChangeSurface surface;
    surface.weights = {ZeroWeight{}};  // single always-on regime
    InitConfig cfg;
    cfg.q = 2;
    cfg.seed = 8;
    const auto sm_init = init_sm(data, surface, cfg);
    const auto& sm = sm_init.kernels[0];
    const double bin_width = 1.0 / static_cast<double>(n);
    double closest = 1e9;
    for (Index q = 0; q < 2; ++q)
      closest = std::min(closest, std::abs(sm.means(0, q) - freq));
    REQUIRE(closest <= bin_width);
  }
  SECTION("empty dominance region falls back and is flagged") {
    GridDataset data;
    data.axes = {VectorXd::LinSpaced(16, 0.0, 15.0)};
    Rng rng(92);
    data.y = rng.normal_vector(16);
    ChangeSurface surface;
    PolyWeight sunk;
    sunk.beta = MatrixXd::Constant(1, 1, -30.0);  // sigma(w_1) ~ 0 everywhere
    surface.weights = {sunk, ZeroWeight{}};
    InitConfig cfg;
    cfg.q = 1;
    const auto sm_init = init_sm(data, surface, cfg);
    REQUIRE(sm_init.fallback[0]);
    REQUIRE_FALSE(sm_init.fallback[1]);
    REQUIRE(sm_init.kernels[0].vars.minCoeff() > 0.0);
  }
  SECTION("normalized_for_product keeps dim 0 and normalizes the rest") {
    SmParams sm;
    sm.weights = (MatrixXd(2, 2) << 3.0, 1.0, 2.0, 6.0).finished();
    sm.means = MatrixXd::Zero(2, 2);
    sm.vars = MatrixXd::Ones(2, 2);
    const SmParams out = normalized_for_product(sm);
    REQUIRE(out.weights.row(0).sum() == Catch::Approx(4.0));
    REQUIRE(out.weights.row(1).sum() == Catch::Approx(1.0));
    REQUIRE(out.weights(1, 0) == Catch::Approx(0.25));
  }
}
