#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <vector>

#include "csgp/errors.hpp"

namespace csgp {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

/// (F_1 kron ... kron F_D) v without forming the product, using one
/// mode-multiplication per dimension. v is laid out lexicographically
/// with axis 0 slowest; cost O(n * sum n_d).
inline VectorXd kron_matvec(const std::vector<MatrixXd>& factors,
                            const VectorXd& v) {
  Index n = 1;
  for (const auto& f : factors) {
    if (f.rows() != f.cols()) throw DimensionMismatch("kron factor not square");
    n *= f.rows();
  }
  if (n != v.size()) throw DimensionMismatch("kron_matvec: length mismatch");

  VectorXd cur = v;
  VectorXd next(n);
  Index outer = 1;   // product of sizes before d
  Index inner = n;   // product of sizes from d on
  for (const auto& f : factors) {
    const Index nd = f.rows();
    inner /= nd;
    // Tensor viewed as (outer, nd, inner); multiply f along the middle mode.
    for (Index o = 0; o < outer; ++o) {
      Eigen::Map<const MatrixXd> block(cur.data() + o * nd * inner, inner, nd);
      Eigen::Map<MatrixXd> out(next.data() + o * nd * inner, inner, nd);
      out.noalias() = block * f.transpose();
    }
    std::swap(cur, next);
    outer *= nd;
  }
  return cur;
}

/// One additive term diag(s) (F_1 kron ... kron F_D) diag(s).
struct KronTerm {
  VectorXd scale;               // length n, entries in (0, 1]
  std::vector<MatrixXd> factors;  // symmetric, prod of sizes = n
};

/// Sum of diagonally scaled Kronecker products plus isotropic noise.
struct KronOperator {
  std::vector<KronTerm> terms;
  double noise_var = 0.0;

  Index size() const {
    if (terms.empty()) return 0;
    Index n = 1;
    for (const auto& f : terms.front().factors) n *= f.rows();
    return n;
  }

  void validate() const {
    const Index n = size();
    for (const auto& term : terms) {
      Index p = 1;
      for (const auto& f : term.factors) {
        if (f.rows() != f.cols())
          throw DimensionMismatch("operator factor not square");
        p *= f.rows();
      }
      if (p != n || term.scale.size() != n)
        throw DimensionMismatch("operator term size mismatch");
      if ((term.scale.array() <= 0.0).any())
        throw DimensionMismatch("operator scale not strictly positive");
    }
  }
};

/// sum_i diag(s_i) K_i diag(s_i) v + noise_var * v.
inline VectorXd operator_matvec(const KronOperator& op, const VectorXd& v) {
  if (v.size() != op.size())
    throw DimensionMismatch("operator_matvec: length mismatch");
  VectorXd out = op.noise_var * v;
  for (const auto& term : op.terms) {
    VectorXd t = term.scale.cwiseProduct(v);
    t = kron_matvec(term.factors, t);
    out += term.scale.cwiseProduct(t);
  }
  return out;
}

/// Exact diagonal of the operator (for Jacobi preconditioning).
inline VectorXd operator_diagonal(const KronOperator& op) {
  const Index n = op.size();
  VectorXd diag = VectorXd::Constant(n, op.noise_var);
  for (const auto& term : op.terms) {
    VectorXd d = VectorXd::Ones(1);
    for (const auto& f : term.factors) {
      VectorXd fd = f.diagonal();
      VectorXd next(d.size() * fd.size());
      for (Index i = 0; i < d.size(); ++i)
        next.segment(i * fd.size(), fd.size()) = d[i] * fd;
      d = std::move(next);
    }
    diag += term.scale.array().square().matrix().cwiseProduct(d);
  }
  return diag;
}

struct CgResult {
  VectorXd x;
  Index iterations = 0;
  bool converged = false;
  double residual = 0.0;  // relative to |rhs|
};

/// Jacobi-preconditioned conjugate gradients on a positive definite
/// KronOperator. Returns the best iterate with a convergence flag; a
/// zero right-hand side returns immediately.
inline CgResult cg_solve(const KronOperator& op, const VectorXd& rhs,
                         double tol = 1e-6, Index max_iter = 1000) {
  if (rhs.size() != op.size())
    throw DimensionMismatch("cg_solve: length mismatch");
  CgResult res;
  const double rhs_norm = rhs.norm();
  if (rhs_norm == 0.0) {
    res.x = VectorXd::Zero(rhs.size());
    res.converged = true;
    return res;
  }

  const VectorXd inv_diag = operator_diagonal(op).cwiseInverse();
  VectorXd x = VectorXd::Zero(rhs.size());
  VectorXd r = rhs;
  VectorXd z = inv_diag.cwiseProduct(r);
  VectorXd p = z;
  double rz = r.dot(z);

  VectorXd best_x = x;
  double best_res = r.norm() / rhs_norm;

  for (Index it = 0; it < max_iter; ++it) {
    const VectorXd ap = operator_matvec(op, p);
    const double denom = p.dot(ap);
    if (denom <= 0.0) break;  // loss of positive definiteness
    const double alpha = rz / denom;
    x += alpha * p;
    r -= alpha * ap;
    res.iterations = it + 1;
    const double rel = r.norm() / rhs_norm;
    if (rel < best_res) {
      best_res = rel;
      best_x = x;
    }
    if (rel <= tol) {
      res.x = x;
      res.converged = true;
      res.residual = rel;
      return res;
    }
    z = inv_diag.cwiseProduct(r);
    const double rz_new = r.dot(z);
    p = z + (rz_new / rz) * p;
    rz = rz_new;
  }
  res.x = best_x;
  res.residual = best_res;
  res.converged = false;
  return res;
}

/// Descending-sorted eigenvalue list.
struct EigenSpectrum {
  VectorXd values;

  static EigenSpectrum sorted(VectorXd v) {
    std::sort(v.data(), v.data() + v.size(), std::greater<double>());
    return EigenSpectrum{std::move(v)};
  }

  Index size() const { return values.size(); }
};

/// Spectrum of F_1 kron ... kron F_D: all products of factor eigenvalues,
/// clamped at zero from below and sorted descending.
inline EigenSpectrum kron_eigvals(const std::vector<MatrixXd>& factors) {
  VectorXd prod = VectorXd::Ones(1);
  for (const auto& f : factors) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(f, Eigen::EigenvaluesOnly);
    const VectorXd ev = eig.eigenvalues().cwiseMax(0.0);
    VectorXd next(prod.size() * ev.size());
    for (Index i = 0; i < prod.size(); ++i)
      next.segment(i * ev.size(), ev.size()) = prod[i] * ev;
    prod = std::move(next);
  }
  return EigenSpectrum::sorted(std::move(prod));
}

/// Spectrum bound for diag(s) K diag(s): elementwise products of the two
/// descending-sorted spectra, s entering squared. The result weakly
/// log-majorizes the true spectrum.
inline EigenSpectrum scaled_term_spectrum(const VectorXd& s,
                                          const EigenSpectrum& kern) {
  if (s.size() != kern.size())
    throw DimensionMismatch("scaled_term_spectrum: length mismatch");
  VectorXd ss = s;
  std::sort(ss.data(), ss.data() + ss.size(), std::greater<double>());
  VectorXd out = ss.array().square() * kern.values.array();
  return EigenSpectrum::sorted(std::move(out));
}

}  // namespace csgp
