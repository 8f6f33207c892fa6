#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <vector>

#include "csgp/errors.hpp"
#include "csgp/grid.hpp"
#include "csgp/kernels.hpp"
#include "csgp/kron.hpp"
#include "csgp/logdet.hpp"
#include "csgp/weights.hpp"

namespace csgp {

/// r latent regimes with per-regime kernels, softmax-warped weighting
/// functions, and Gaussian observation noise. The mean function is zero;
/// y_mean records the training-response mean subtracted before fitting.
struct ChangeSurfaceModel {
  ChangeSurface surface;
  std::vector<KernelSpec> kernels;
  double noise_var = 1e-2;
  double y_mean = 0.0;

  Index regimes() const { return static_cast<Index>(kernels.size()); }

  Index dims() const {
    return kernels.empty() ? 0 : kernel_dims(kernels.front());
  }

  void validate() const {
    if (kernels.empty() || surface.regimes() != regimes())
      throw DimensionMismatch("model: regime count mismatch");
    if (!(noise_var > 0.0)) throw DimensionMismatch("model: noise_var <= 0");
  }
};

/// Nonstationary composite covariance
///   k(x,x') = sum_i sigma(w_i(x)) k_i(x,x') sigma(w_i(x')).
inline MatrixXd composite_dense(const ChangeSurfaceModel& model,
                                const MatrixXd& xa, const MatrixXd& xb,
                                Index dense_cap = 4096) {
  model.validate();
  if (xa.rows() > dense_cap || xb.rows() > dense_cap)
    throw SizeCap("composite_dense: size exceeds dense cap");
  const MatrixXd wa = warp(model.surface, xa);
  const MatrixXd wb = warp(model.surface, xb);
  MatrixXd k = MatrixXd::Zero(xa.rows(), xb.rows());
  for (Index i = 0; i < model.regimes(); ++i) {
    MatrixXd ki = eval_dense(model.kernels[static_cast<std::size_t>(i)], xa, xb);
    k += wa.col(i).asDiagonal() * ki * wb.col(i).asDiagonal();
  }
  return k;
}

/// Kronecker operator for the composite kernel on a complete grid:
/// one term per regime with scale vector sigma(w_i) on the flattened grid.
inline KronOperator build_operator(const ChangeSurfaceModel& model,
                                   const GridDataset& data) {
  model.validate();
  data.validate();
  const MatrixXd w = warp(model.surface, data.points());
  KronOperator op;
  op.noise_var = model.noise_var;
  for (Index i = 0; i < model.regimes(); ++i) {
    KronTerm term;
    term.scale = w.col(i);
    term.factors =
        eval_factors(model.kernels[static_cast<std::size_t>(i)], data.axes);
    op.terms.push_back(std::move(term));
  }
  op.validate();
  return op;
}

namespace detail {

inline VectorXd centered(const VectorXd& y, double y_mean) {
  return y.array() - y_mean;
}

// Cholesky with escalating relative jitter; prediction must not fail just
// because the fitted noise collapsed on noiseless data.
inline Eigen::LLT<MatrixXd> robust_llt(MatrixXd k, const char* where) {
  const double scale = k.diagonal().mean();
  for (double rel : {0.0, 1e-12, 1e-10, 1e-8}) {
    MatrixXd trial = k;
    trial.diagonal().array() += rel * scale;
    Eigen::LLT<MatrixXd> llt(trial);
    if (llt.info() == Eigen::Success) return llt;
  }
  throw NotPsd(std::string(where) + ": covariance not positive definite");
}

}  // namespace detail

/// Exact negative log marginal likelihood
///   0.5 (log|K + s I| + y^T (K + s I)^{-1} y + n log 2pi)
/// via dense Cholesky; y is centered by the model's stored mean.
inline double nlml_exact(const ChangeSurfaceModel& model, const MatrixXd& x,
                         const VectorXd& y, Index dense_cap = 4096) {
  const Index n = x.rows();
  if (n > dense_cap) throw SizeCap("nlml_exact: n exceeds dense cap");
  if (y.size() != n) throw DimensionMismatch("nlml_exact: length mismatch");
  MatrixXd k = composite_dense(model, x, x, dense_cap);
  k.diagonal().array() += model.noise_var;
  Eigen::LLT<MatrixXd> llt(k);
  if (llt.info() != Eigen::Success)
    throw NotPsd("nlml_exact: covariance not positive definite");
  const VectorXd yc = detail::centered(y, model.y_mean);
  const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  const double quad = yc.dot(llt.solve(yc));
  return 0.5 * (logdet + quad +
                static_cast<double>(n) * std::log(2.0 * std::numbers::pi));
}

inline double nlml_exact(const ChangeSurfaceModel& model,
                         const GridDataset& data, Index dense_cap = 4096) {
  return nlml_exact(model, data.points(), data.y, dense_cap);
}

struct NlmlBound {
  double value = 0.0;
  bool cg_converged = true;
  Index cg_iterations = 0;
};

/// Weyl-bounded negative log marginal likelihood on a complete grid:
/// upper-bounds nlml_exact. Log determinant from per-term Kronecker
/// spectra scaled per regime and folded with the selected Weyl strategy;
/// quadratic term by conjugate gradients.
inline NlmlBound nlml_bound(const ChangeSurfaceModel& model,
                            const GridDataset& data,
                            const WeylStrategy& strategy,
                            double cg_tol = 1e-6, Index cg_max_iter = 1000) {
  const KronOperator op = build_operator(model, data);
  std::vector<EigenSpectrum> spectra;
  spectra.reserve(op.terms.size());
  for (const auto& term : op.terms) {
    std::vector<MatrixXd> jittered = term.factors;
    for (auto& f : jittered) add_factor_jitter(f);
    spectra.push_back(scaled_term_spectrum(term.scale, kron_eigvals(jittered)));
  }
  const double logdet = weyl_logdet(spectra, model.noise_var, strategy);

  const VectorXd yc = detail::centered(data.y, model.y_mean);
  const CgResult cg = cg_solve(op, yc, cg_tol, cg_max_iter);
  NlmlBound out;
  out.cg_converged = cg.converged;
  out.cg_iterations = cg.iterations;
  out.value = 0.5 * (logdet + yc.dot(cg.x) +
                     static_cast<double>(data.n()) *
                         std::log(2.0 * std::numbers::pi));
  return out;
}

// --- prediction -------------------------------------------------------------

struct Prediction {
  VectorXd mean;
  VectorXd var;  // empty unless requested; includes observation noise
  bool converged = true;
};

/// Posterior mean (and optional variance) at xstar given training points.
/// Dense path; training size must respect the cap.
inline Prediction predict(const ChangeSurfaceModel& model,
                          const MatrixXd& xtrain, const VectorXd& ytrain,
                          const MatrixXd& xstar, bool with_var = false,
                          Index dense_cap = 4096) {
  const Index n = xtrain.rows();
  if (n > dense_cap) throw SizeCap("predict: n exceeds dense cap");
  MatrixXd k = composite_dense(model, xtrain, xtrain, dense_cap);
  k.diagonal().array() += model.noise_var;
  const Eigen::LLT<MatrixXd> llt = detail::robust_llt(std::move(k), "predict");
  const VectorXd yc = detail::centered(ytrain, model.y_mean);
  const VectorXd alpha = llt.solve(yc);
  const MatrixXd kstar =
      composite_dense(model, xtrain, xstar, std::max(dense_cap, xstar.rows()));

  Prediction out;
  out.mean = (kstar.transpose() * alpha).array() + model.y_mean;
  if (with_var) {
    const MatrixXd v = llt.solve(kstar);
    out.var.resize(xstar.rows());
    const MatrixXd wstar = warp(model.surface, xstar);
    for (Index j = 0; j < xstar.rows(); ++j) {
      double kss = model.noise_var;
      for (Index i = 0; i < model.regimes(); ++i)
        kss += wstar(j, i) * wstar(j, i) *
               kernel_variance(model.kernels[static_cast<std::size_t>(i)]);
      out.var[j] = kss - kstar.col(j).dot(v.col(j));
    }
  }
  return out;
}

/// Grid-structured prediction: uses conjugate gradients on the Kronecker
/// operator when the training grid exceeds the dense cap (one extra solve
/// per test point for variances).
inline Prediction predict_grid(const ChangeSurfaceModel& model,
                               const GridDataset& train, const MatrixXd& xstar,
                               bool with_var = false, Index dense_cap = 4096,
                               double cg_tol = 1e-6, Index cg_max_iter = 1000) {
  if (train.n() <= dense_cap)
    return predict(model, train.points(), train.y, xstar, with_var, dense_cap);

  const KronOperator op = build_operator(model, train);
  const VectorXd yc = detail::centered(train.y, model.y_mean);
  const CgResult cg = cg_solve(op, yc, cg_tol, cg_max_iter);

  Prediction out;
  out.converged = cg.converged;
  const MatrixXd xtrain = train.points();
  const MatrixXd kstar = composite_dense(model, xtrain, xstar,
                                         std::max(train.n(), xstar.rows()));
  out.mean = (kstar.transpose() * cg.x).array() + model.y_mean;
  if (with_var) {
    out.var.resize(xstar.rows());
    const MatrixXd wstar = warp(model.surface, xstar);
    for (Index j = 0; j < xstar.rows(); ++j) {
      const CgResult cj = cg_solve(op, kstar.col(j), cg_tol, cg_max_iter);
      out.converged = out.converged && cj.converged;
      double kss = model.noise_var;
      for (Index i = 0; i < model.regimes(); ++i)
        kss += wstar(j, i) * wstar(j, i) *
               kernel_variance(model.kernels[static_cast<std::size_t>(i)]);
      out.var[j] = kss - kstar.col(j).dot(cj.x);
    }
  }
  return out;
}

/// Normalized mean squared error against the train-mean baseline.
inline double nmse(const VectorXd& y_test, const VectorXd& y_pred,
                   double y_train_mean) {
  if (y_test.size() != y_pred.size())
    throw DimensionMismatch("nmse: length mismatch");
  const double denom = (y_test.array() - y_train_mean).square().sum();
  if (denom == 0.0) throw DegenerateDenominator("nmse: zero baseline error");
  return (y_test - y_pred).squaredNorm() / denom;
}

}  // namespace csgp
