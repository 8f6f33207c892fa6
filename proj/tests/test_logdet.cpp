#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "csgp/logdet.hpp"
#include "helpers.hpp"

using namespace csgp;
using test::random_spd;

namespace {

EigenSpectrum spectrum_of(const MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(m, Eigen::EigenvaluesOnly);
  return EigenSpectrum::sorted(eig.eigenvalues().cwiseMax(0.0));
}

// Exhaustive minimum over all valid pairs, independent of weyl_pairwise.
VectorXd exhaustive_weyl(const VectorXd& a, const VectorXd& b) {
  const Index n = a.size();
  VectorXd mu(n);
  for (Index l = 0; l < n; ++l) {
    double best = std::numeric_limits<double>::infinity();
    for (Index i = 0; i < n; ++i) {
      const Index j = l - i;
      if (j < 0 || j >= n) continue;
      best = std::min(best, a[i] + b[j]);
    }
    mu[l] = best;
  }
  return mu;
}

}  // namespace

TEST_CASE("weyl_pairwise hand-computed middle example") {
  EigenSpectrum alpha{(VectorXd(2) << 2, 1).finished()};
  EigenSpectrum beta{(VectorXd(2) << 4, 3).finished()};
  const auto mu = weyl_pairwise(alpha, beta, WeylMiddle{});
  // mu_1 <= a_1+b_1 = 6 (i=j=1); mu_2 <= a_2+b_1 = 5 (i=2, j=1).
  REQUIRE(mu.values[0] == Catch::Approx(6.0));
  REQUIRE(mu.values[1] == Catch::Approx(5.0));
  // True spectrum of diag(2,1)+diag(4,3) is (6,4); the bound holds.
  REQUIRE(mu.values[0] >= 6.0 - 1e-12);
  REQUIRE(mu.values[1] >= 4.0 - 1e-12);
}

TEST_CASE("weyl_pairwise zero second matrix") {
  Rng rng(21);
  const auto alpha = spectrum_of(random_spd(12, rng));
  EigenSpectrum beta{VectorXd::Zero(12)};
  // Exact and greedy pairings recover alpha itself; the middle heuristic
  // stays a valid (looser) upper bound.
  for (const WeylStrategy& s :
       {WeylStrategy(WeylExact{}), WeylStrategy(WeylGreedy{3})}) {
    const auto mu = weyl_pairwise(alpha, beta, s);
    REQUIRE((mu.values - alpha.values).cwiseAbs().maxCoeff() < 1e-14);
  }
  const auto mid = weyl_pairwise(alpha, beta, WeylMiddle{});
  for (Index l = 0; l < 12; ++l) REQUIRE(mid.values[l] >= alpha.values[l]);
}

TEST_CASE("weyl_pairwise exact matches exhaustive oracle") {
  Rng rng(22);
  for (Index n : {5, 20, 50}) {
    const auto a = spectrum_of(random_spd(n, rng));
    const auto b = spectrum_of(random_spd(n, rng, 0.8));
    const auto got = weyl_pairwise(a, b, WeylExact{});
    const VectorXd want = exhaustive_weyl(a.values, b.values);
    REQUIRE((got.values - want).cwiseAbs().maxCoeff() < 1e-13);
  }
}

TEST_CASE("greedy with window n/2 equals exact on random spectra") {
  Rng rng(23);
  for (Index n : {10, 24, 50}) {
    const auto a = spectrum_of(random_spd(n, rng));
    const auto b = spectrum_of(random_spd(n, rng, 0.85));
    const auto exact = weyl_pairwise(a, b, WeylExact{});
    const auto greedy = weyl_pairwise(a, b, WeylGreedy{n / 2});
    REQUIRE((greedy.values - exact.values).cwiseAbs().maxCoeff() < 1e-13);
  }
}

TEST_CASE("weyl_pairwise outputs are descending") {
  Rng rng(24);
  const auto a = spectrum_of(random_spd(30, rng));
  const auto b = spectrum_of(random_spd(30, rng, 0.7));
  for (const WeylStrategy& s :
       {WeylStrategy(WeylExact{}), WeylStrategy(WeylMiddle{}),
        WeylStrategy(WeylGreedy{2})}) {
    const auto mu = weyl_pairwise(a, b, s);
    for (Index l = 0; l + 1 < mu.size(); ++l)
      REQUIRE(mu.values[l] >= mu.values[l + 1] - 1e-12);
  }
}

TEST_CASE("weyl_logdet") {
  Rng rng(25);
  SECTION("single spectrum is the exact log det") {
    const MatrixXd m = random_spd(10, rng);
    const auto spec = spectrum_of(m);
    const double got = weyl_logdet({spec}, 0.3, WeylMiddle{});
    const double want = exact_logdet_dense({m}, 0.3);
    REQUIRE(got == Catch::Approx(want).epsilon(1e-10));
  }
  SECTION("bound dominates dense log det for r=3, every strategy") {
    for (int rep = 0; rep < 5; ++rep) {
      std::vector<MatrixXd> mats;
      std::vector<EigenSpectrum> spectra;
      for (int i = 0; i < 3; ++i) {
        mats.push_back(random_spd(20, rng, rng.uniform(0.5, 0.95)));
        spectra.push_back(spectrum_of(mats.back()));
      }
      const double noise = 0.05;
      const double exact = exact_logdet_dense(mats, noise);
      for (const WeylStrategy& s :
           {WeylStrategy(WeylExact{}), WeylStrategy(WeylMiddle{}),
            WeylStrategy(WeylGreedy{5})}) {
        REQUIRE(weyl_logdet(spectra, noise, s) >= exact - 1e-8);
      }
    }
  }
  SECTION("strategy ordering: exact <= greedy <= middle") {
    for (int rep = 0; rep < 10; ++rep) {
      const auto a = spectrum_of(random_spd(25, rng, rng.uniform(0.5, 0.95)));
      const auto b = spectrum_of(random_spd(25, rng, rng.uniform(0.5, 0.95)));
      const double noise = 0.1;
      const double e = weyl_logdet({a, b}, noise, WeylExact{});
      const double g = weyl_logdet({a, b}, noise, WeylGreedy{4});
      const double m = weyl_logdet({a, b}, noise, WeylMiddle{});
      REQUIRE(e <= g + 1e-10);
      REQUIRE(g <= m + 1e-10);
    }
  }
  SECTION("commuting flat-spectrum matrices are tight for every strategy") {
    // With both spectra constant any admissible pair gives the true
    // eigenvalue, so every pairing strategy is exact.
    const MatrixXd m1 = 3.0 * MatrixXd::Identity(6, 6);
    const MatrixXd m2 = 1.5 * MatrixXd::Identity(6, 6);
    const double exact = exact_logdet_dense({m1, m2}, 0.1);
    for (const WeylStrategy& s :
         {WeylStrategy(WeylExact{}), WeylStrategy(WeylMiddle{}),
          WeylStrategy(WeylGreedy{2})}) {
      const double bound =
          weyl_logdet({spectrum_of(m1), spectrum_of(m2)}, 0.1, s);
      REQUIRE(bound == Catch::Approx(exact).epsilon(1e-12));
    }
  }
  SECTION("aligned decaying diagonals: bound valid but strictly loose") {
    VectorXd d1(4), d2(4);
    d1 << 8, 4, 2, 1;
    d2 << 16, 8, 4, 2;
    const MatrixXd m1 = d1.asDiagonal();
    const MatrixXd m2 = d2.asDiagonal();
    const double exact = exact_logdet_dense({m1, m2}, 0.0);
    const double bound = weyl_logdet({spectrum_of(m1), spectrum_of(m2)}, 0.0,
                                     WeylExact{});
    REQUIRE(bound >= exact - 1e-12);
    REQUIRE(bound > exact);  // min_{i+j=l} a_i + b_j > a_l + b_l for l > 0
  }
  SECTION("zero eigenvalues with zero noise throw") {
    EigenSpectrum z{VectorXd::Zero(3)};
    REQUIRE_THROWS_AS(weyl_logdet({z}, 0.0, WeylMiddle{}), NonPositive);
  }
}

TEST_CASE("fiedler_logdet") {
  SECTION("diagonal hand computation") {
    EigenSpectrum alpha{(VectorXd(2) << 2, 1).finished()};
    EigenSpectrum beta{(VectorXd(2) << 4, 3).finished()};
    const double got = fiedler_logdet(alpha, beta, 0.0);
    REQUIRE(got == Catch::Approx(std::log(5.0) + std::log(5.0)));
    REQUIRE(got >= std::log(24.0) - 1e-12);  // exact is log(6*4)
  }
  SECTION("zero second matrix is exact") {
    EigenSpectrum alpha{(VectorXd(3) << 3, 2, 1).finished()};
    EigenSpectrum beta{VectorXd::Zero(3)};
    REQUIRE(fiedler_logdet(alpha, beta, 0.0) ==
            Catch::Approx(std::log(6.0)).epsilon(1e-12));
  }
  SECTION("equal spectra instantiation") {
    EigenSpectrum alpha{(VectorXd(3) << 3, 2, 1).finished()};
    const double want = std::log(3 + 1) + std::log(2 + 2) + std::log(1 + 3);
    REQUIRE(fiedler_logdet(alpha, alpha, 0.0) == Catch::Approx(want));
  }
  SECTION("dominates dense log det") {
    Rng rng(26);
    for (int rep = 0; rep < 10; ++rep) {
      const MatrixXd a = random_spd(15, rng, rng.uniform(0.5, 0.95));
      const MatrixXd b = random_spd(15, rng, rng.uniform(0.5, 0.95));
      const double exact = exact_logdet_dense({a, b}, 0.01);
      REQUIRE(fiedler_logdet(spectrum_of(a), spectrum_of(b), 0.01) >=
              exact - 1e-8);
    }
  }
}

TEST_CASE("exact_logdet_dense") {
  SECTION("identity plus identity") {
    const MatrixXd i3 = MatrixXd::Identity(3, 3);
    REQUIRE(exact_logdet_dense({i3, i3}, 0.0) ==
            Catch::Approx(3.0 * std::log(2.0)));
  }
  SECTION("noise-only") {
    const MatrixXd z = MatrixXd::Zero(4, 4);
    REQUIRE(exact_logdet_dense({z}, 0.25) ==
            Catch::Approx(4.0 * std::log(0.25)));
  }
  SECTION("agrees with eigenvalue sum") {
    Rng rng(27);
    const MatrixXd a = random_spd(10, rng);
    const MatrixXd b = random_spd(10, rng);
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(a + b);
    const double want = eig.eigenvalues().array().log().sum();
    REQUIRE(exact_logdet_dense({a, b}, 0.0) ==
            Catch::Approx(want).epsilon(1e-10));
  }
  SECTION("size cap enforced") {
    const MatrixXd big = MatrixXd::Identity(8, 8);
    REQUIRE_THROWS_AS(exact_logdet_dense({big}, 0.0, 4), SizeCap);
  }
}
