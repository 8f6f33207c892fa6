#pragma once

#include <Eigen/Dense>
#include <vector>

#include "csgp/kron.hpp"
#include "csgp/rng.hpp"

namespace csgp::test {

/// Dense Kronecker product of a factor list (axis 0 slowest), used as the
/// independent oracle for all structured operations.
inline MatrixXd kron_dense(const std::vector<MatrixXd>& factors) {
  MatrixXd acc = MatrixXd::Ones(1, 1);
  for (const auto& f : factors) {
    MatrixXd next(acc.rows() * f.rows(), acc.cols() * f.cols());
    for (Index i = 0; i < acc.rows(); ++i)
      for (Index j = 0; j < acc.cols(); ++j)
        next.block(i * f.rows(), j * f.cols(), f.rows(), f.cols()) =
            acc(i, j) * f;
    acc = std::move(next);
  }
  return acc;
}

/// Random symmetric positive definite matrix with decaying spectrum.
inline MatrixXd random_spd(Index n, Rng& rng, double decay = 0.9) {
  MatrixXd g = rng.normal_matrix(n, n);
  Eigen::HouseholderQR<MatrixXd> qr(g);
  MatrixXd q = qr.householderQ();
  VectorXd ev(n);
  double v = 1.0;
  for (Index i = 0; i < n; ++i) {
    ev[i] = v;
    v *= decay;
  }
  return q * ev.asDiagonal() * q.transpose();
}

/// Dense assembly of a KronOperator (including noise), oracle form.
inline MatrixXd operator_dense(const KronOperator& op) {
  const Index n = op.size();
  MatrixXd out = op.noise_var * MatrixXd::Identity(n, n);
  for (const auto& term : op.terms) {
    MatrixXd k = kron_dense(term.factors);
    out += term.scale.asDiagonal() * k * term.scale.asDiagonal();
  }
  return out;
}

}  // namespace csgp::test
