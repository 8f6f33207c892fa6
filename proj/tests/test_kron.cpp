#include <catch2/catch_amalgamated.hpp>

#include "csgp/kron.hpp"
#include "helpers.hpp"

using namespace csgp;
using test::kron_dense;
using test::operator_dense;
using test::random_spd;

TEST_CASE("kron_matvec identities") {
  Rng rng(11);
  SECTION("identity factors") {
    std::vector<MatrixXd> id = {MatrixXd::Identity(3, 3),
                                MatrixXd::Identity(4, 4)};
    const VectorXd v = rng.normal_vector(12);
    REQUIRE((kron_matvec(id, v) - v).norm() == Catch::Approx(0.0).margin(1e-14));
  }
  SECTION("scalar factor") {
    std::vector<MatrixXd> fs = {2.0 * MatrixXd::Identity(2, 2),
                                MatrixXd::Identity(3, 3)};
    const VectorXd v = rng.normal_vector(6);
    REQUIRE((kron_matvec(fs, v) - 2.0 * v).norm() < 1e-14);
  }
  SECTION("length mismatch throws") {
    std::vector<MatrixXd> fs = {MatrixXd::Identity(2, 2)};
    REQUIRE_THROWS_AS(kron_matvec(fs, VectorXd::Zero(3)), DimensionMismatch);
  }
}

TEST_CASE("kron_matvec matches dense oracle") {
  Rng rng(12);
  SECTION("2x2 kron 3x3") {
    std::vector<MatrixXd> fs = {rng.normal_matrix(2, 2).eval(),
                                rng.normal_matrix(3, 3).eval()};
    for (auto& f : fs) f = (f + f.transpose()).eval();
    const VectorXd v = rng.normal_vector(6);
    const VectorXd got = kron_matvec(fs, v);
    const VectorXd want = kron_dense(fs) * v;
    REQUIRE((got - want).norm() < 1e-12 * want.norm());
  }
  SECTION("three factors") {
    std::vector<MatrixXd> fs;
    for (Index n : {2, 3, 4}) {
      MatrixXd f = rng.normal_matrix(n, n);
      fs.push_back((f + f.transpose()).eval());
    }
    const VectorXd v = rng.normal_vector(24);
    REQUIRE((kron_matvec(fs, v) - kron_dense(fs) * v).norm() < 1e-12);
  }
}

TEST_CASE("operator_matvec") {
  Rng rng(13);
  SECTION("single unscaled term reduces to kron_matvec") {
    KronOperator op;
    op.noise_var = 0.0;
    KronTerm t;
    t.factors = {random_spd(3, rng), random_spd(4, rng)};
    t.scale = VectorXd::Ones(12);
    op.terms.push_back(t);
    const VectorXd v = rng.normal_vector(12);
    REQUIRE((operator_matvec(op, v) - kron_matvec(op.terms[0].factors, v)).norm() <
            1e-13);
  }
  SECTION("two random terms vs dense assembly, n=36") {
    KronOperator op;
    op.noise_var = 0.3;
    for (int i = 0; i < 2; ++i) {
      KronTerm t;
      t.factors = {random_spd(6, rng), random_spd(6, rng)};
      VectorXd s(36);
      for (Index k = 0; k < 36; ++k) s[k] = rng.uniform(0.05, 1.0);
      t.scale = s;
      op.terms.push_back(t);
    }
    const MatrixXd dense = operator_dense(op);
    const VectorXd v = rng.normal_vector(36);
    REQUIRE((operator_matvec(op, v) - dense * v).norm() < 1e-12 * v.norm());
  }
  SECTION("zero maps to zero") {
    KronOperator op;
    op.noise_var = 1.0;
    KronTerm t;
    t.factors = {random_spd(5, rng)};
    t.scale = VectorXd::Ones(5);
    op.terms.push_back(t);
    REQUIRE(operator_matvec(op, VectorXd::Zero(5)).norm() == 0.0);
  }
}

TEST_CASE("operator symmetry and diagonal") {
  Rng rng(14);
  KronOperator op;
  op.noise_var = 0.2;
  for (int i = 0; i < 2; ++i) {
    KronTerm t;
    t.factors = {random_spd(4, rng), random_spd(5, rng)};
    VectorXd s(20);
    for (Index k = 0; k < 20; ++k) s[k] = rng.uniform(0.1, 1.0);
    t.scale = s;
    op.terms.push_back(t);
  }
  SECTION("<op u, v> == <u, op v>") {
    for (int rep = 0; rep < 5; ++rep) {
      const VectorXd u = rng.normal_vector(20);
      const VectorXd v = rng.normal_vector(20);
      REQUIRE(operator_matvec(op, u).dot(v) ==
              Catch::Approx(u.dot(operator_matvec(op, v))).margin(1e-10));
    }
  }
  SECTION("diagonal matches dense") {
    const VectorXd d = operator_diagonal(op);
    const MatrixXd dense = operator_dense(op);
    REQUIRE((d - dense.diagonal()).norm() < 1e-12);
  }
}

TEST_CASE("cg_solve") {
  Rng rng(15);
  SECTION("identity system") {
    KronOperator op;
    op.noise_var = 0.0;
    KronTerm t;
    t.factors = {MatrixXd::Identity(6, 6)};
    t.scale = VectorXd::Ones(6);
    op.terms.push_back(t);
    const VectorXd rhs = rng.normal_vector(6);
    const auto res = cg_solve(op, rhs);
    REQUIRE(res.converged);
    REQUIRE((res.x - rhs).norm() < 1e-8);
  }
  SECTION("zero rhs solves in zero iterations") {
    KronOperator op;
    op.noise_var = 1.0;
    KronTerm t;
    t.factors = {MatrixXd::Identity(4, 4)};
    t.scale = VectorXd::Ones(4);
    op.terms.push_back(t);
    const auto res = cg_solve(op, VectorXd::Zero(4));
    REQUIRE(res.converged);
    REQUIRE(res.iterations == 0);
    REQUIRE(res.x.norm() == 0.0);
  }
  SECTION("dense oracle on structured SPD operator, n=64") {
    KronOperator op;
    op.noise_var = 0.1;
    for (int i = 0; i < 2; ++i) {
      KronTerm t;
      t.factors = {random_spd(8, rng), random_spd(8, rng)};
      VectorXd s(64);
      for (Index k = 0; k < 64; ++k) s[k] = rng.uniform(0.05, 1.0);
      t.scale = s;
      op.terms.push_back(t);
    }
    const VectorXd rhs = rng.normal_vector(64);
    const auto res = cg_solve(op, rhs, 1e-10, 2000);
    REQUIRE(res.converged);
    const VectorXd want = operator_dense(op).ldlt().solve(rhs);
    REQUIRE((res.x - want).norm() < 1e-8 * want.norm());
  }
  SECTION("round trip: op(solve(rhs)) ~ rhs") {
    KronOperator op;
    op.noise_var = 0.5;
    KronTerm t;
    t.factors = {random_spd(9, rng)};
    VectorXd s(9);
    for (Index k = 0; k < 9; ++k) s[k] = rng.uniform(0.2, 1.0);
    t.scale = s;
    op.terms.push_back(t);
    const VectorXd rhs = rng.normal_vector(9);
    const auto res = cg_solve(op, rhs, 1e-9);
    REQUIRE((operator_matvec(op, res.x) - rhs).norm() <= 1e-8 * rhs.norm());
  }
}

TEST_CASE("kron_eigvals") {
  Rng rng(16);
  SECTION("products of factor eigenvalues") {
    MatrixXd a = MatrixXd::Zero(2, 2);
    a.diagonal() << 2.0, 1.0;
    MatrixXd b = MatrixXd::Zero(2, 2);
    b.diagonal() << 4.0, 3.0;
    const auto spec = kron_eigvals({a, b});
    VectorXd want(4);
    want << 8, 6, 4, 3;
    REQUIRE((spec.values - want).norm() < 1e-12);
  }
  SECTION("identity factors give all ones") {
    const auto spec =
        kron_eigvals({MatrixXd::Identity(3, 3), MatrixXd::Identity(2, 2)});
    REQUIRE((spec.values.array() - 1.0).abs().maxCoeff() < 1e-14);
  }
  SECTION("single factor returns its spectrum") {
    const MatrixXd a = random_spd(5, rng);
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(a);
    VectorXd want = eig.eigenvalues().reverse();
    const auto spec = kron_eigvals({a});
    REQUIRE((spec.values - want).norm() < 1e-10);
  }
  SECTION("matches dense eigenvalues up to 4x4x4") {
    std::vector<MatrixXd> fs = {random_spd(4, rng), random_spd(4, rng),
                                random_spd(4, rng)};
    const MatrixXd dense = kron_dense(fs);
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(dense);
    VectorXd want = eig.eigenvalues().reverse();
    const auto spec = kron_eigvals(fs);
    REQUIRE((spec.values - want).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("scaled_term_spectrum") {
  Rng rng(17);
  const MatrixXd k = random_spd(20, rng);
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(k);
  const auto kspec = EigenSpectrum::sorted(eig.eigenvalues());

  SECTION("unit scales leave the spectrum unchanged") {
    const auto out = scaled_term_spectrum(VectorXd::Ones(20), kspec);
    REQUIRE((out.values - kspec.values).norm() < 1e-14);
  }
  SECTION("constant 0.5 scales by 0.25") {
    const auto out = scaled_term_spectrum(VectorXd::Constant(20, 0.5), kspec);
    REQUIRE((out.values - 0.25 * kspec.values).norm() < 1e-14);
  }
  SECTION("bound majorizes the true scaled spectrum") {
    VectorXd s(20);
    for (Index i = 0; i < 20; ++i) s[i] = rng.uniform(0.05, 1.0);
    const MatrixXd scaled = s.asDiagonal() * k * s.asDiagonal();
    Eigen::SelfAdjointEigenSolver<MatrixXd> seig(scaled);
    const VectorXd truth = seig.eigenvalues().reverse();
    const auto bound = scaled_term_spectrum(s, kspec);
    double bound_partial = 0.0, true_partial = 0.0;
    for (Index i = 0; i < 20; ++i) {
      bound_partial += bound.values[i];
      true_partial += truth[i];
      REQUIRE(bound_partial >= true_partial - 1e-10);
    }
  }
}
