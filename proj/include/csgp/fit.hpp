#pragma once

#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <numbers>
#include <vector>

#include "csgp/model.hpp"
#include "csgp/optimize.hpp"

namespace csgp {

// --- flat hyperparameter vector ---------------------------------------------
//
// Layout: per regime the kernel pack (see kernels.hpp), then per regime the
// weight-function parameters (RKS: a, omega row-major, b; polynomial: beta
// row-major; zero reference: none), then log noise variance.

inline Index weight_param_count(const WeightFunction& w) {
  if (const auto* rks = std::get_if<RksWeight>(&w))
    return rks->features() * (2 + rks->dims());
  if (const auto* poly = std::get_if<PolyWeight>(&w))
    return poly->beta.size();
  return 0;
}

inline Index model_param_count(const ChangeSurfaceModel& model) {
  Index n = 1;  // log noise
  for (const auto& k : model.kernels) n += param_count(k);
  for (const auto& w : model.surface.weights) n += weight_param_count(w);
  return n;
}

inline VectorXd pack_model(const ChangeSurfaceModel& model) {
  VectorXd out(model_param_count(model));
  Index at = 0;
  for (const auto& k : model.kernels) {
    const VectorXd p = pack(k);
    out.segment(at, p.size()) = p;
    at += p.size();
  }
  for (const auto& w : model.surface.weights) {
    if (const auto* rks = std::get_if<RksWeight>(&w)) {
      const Index m = rks->features();
      out.segment(at, m) = rks->a;
      at += m;
      for (Index t = 0; t < m; ++t)
        for (Index d = 0; d < rks->dims(); ++d) out[at++] = rks->omega(t, d);
      out.segment(at, m) = rks->b;
      at += m;
    } else if (const auto* poly = std::get_if<PolyWeight>(&w)) {
      for (Index i = 0; i < poly->beta.rows(); ++i)
        for (Index d = 0; d < poly->beta.cols(); ++d)
          out[at++] = poly->beta(i, d);
    }
  }
  out[at++] = std::log(model.noise_var);
  return out;
}

inline ChangeSurfaceModel unpack_model(const ChangeSurfaceModel& proto,
                                       const VectorXd& packed) {
  if (packed.size() != model_param_count(proto))
    throw DimensionMismatch("unpack_model: packed length mismatch");
  ChangeSurfaceModel out = proto;
  Index at = 0;
  for (auto& k : out.kernels) {
    const Index np = param_count(k);
    k = unpack(k, packed.segment(at, np));
    at += np;
  }
  for (auto& w : out.surface.weights) {
    if (auto* rks = std::get_if<RksWeight>(&w)) {
      const Index m = rks->features();
      rks->a = packed.segment(at, m);
      at += m;
      for (Index t = 0; t < m; ++t)
        for (Index d = 0; d < rks->dims(); ++d) rks->omega(t, d) = packed[at++];
      rks->b = packed.segment(at, m);
      at += m;
    } else if (auto* poly = std::get_if<PolyWeight>(&w)) {
      for (Index i = 0; i < poly->beta.rows(); ++i)
        for (Index d = 0; d < poly->beta.cols(); ++d)
          poly->beta(i, d) = packed[at++];
    }
  }
  out.noise_var = std::exp(packed[at++]);
  return out;
}

// --- exact-mode objective with analytic gradient ------------------------------

namespace detail {

// Per-dimension lag matrices X(p,d) - X(q,d), shared across regimes.
inline std::vector<MatrixXd> lag_matrices(const MatrixXd& x) {
  std::vector<MatrixXd> lags;
  lags.reserve(static_cast<std::size_t>(x.cols()));
  for (Index d = 0; d < x.cols(); ++d) {
    const VectorXd c = x.col(d);
    lags.emplace_back(c.replicate(1, x.rows()) -
                      c.transpose().replicate(x.rows(), 1));
  }
  return lags;
}

// Factor matrices of one kernel over cached lags (dimension 0 carries the
// signal variance, matching kernel_factor_1d).
inline std::vector<MatrixXd> factor_matrices(const KernelSpec& spec,
                                             const std::vector<MatrixXd>& lags) {
  std::vector<MatrixXd> g;
  g.reserve(lags.size());
  for (Index d = 0; d < static_cast<Index>(lags.size()); ++d) {
    const MatrixXd& lag = lags[static_cast<std::size_t>(d)];
    MatrixXd f(lag.rows(), lag.cols());
    for (Index j = 0; j < lag.cols(); ++j)
      for (Index i = 0; i < lag.rows(); ++i)
        f(i, j) = kernel_factor_1d(spec, d, lag(i, j));
    g.push_back(std::move(f));
  }
  return g;
}

}  // namespace detail

/// Exact NLML and its analytic gradient in the packed parameters.
/// Returns +inf (and leaves grad untouched) when the trial covariance is
/// not positive definite, so line searches reject the step.
class ExactNlmlObjective {
 public:
  ExactNlmlObjective(ChangeSurfaceModel proto, MatrixXd x, VectorXd y,
                     Index dense_cap = 4096)
      : proto_(std::move(proto)),
        x_(std::move(x)),
        yc_(y.array() - proto_.y_mean),
        lags_(detail::lag_matrices(x_)),
        dense_cap_(dense_cap) {
    if (x_.rows() > dense_cap_)
      throw SizeCap("ExactNlmlObjective: n exceeds dense cap");
  }

  double operator()(const VectorXd& theta, VectorXd* grad) const {
    const ChangeSurfaceModel model = unpack_model(proto_, theta);
    const Index n = x_.rows();
    const Index r = model.regimes();
    const MatrixXd w = warp(model.surface, x_);

    std::vector<std::vector<MatrixXd>> factors;
    std::vector<MatrixXd> kmats, scaled;
    factors.reserve(static_cast<std::size_t>(r));
    MatrixXd ktil = MatrixXd::Zero(n, n);
    for (Index i = 0; i < r; ++i) {
      factors.push_back(detail::factor_matrices(
          model.kernels[static_cast<std::size_t>(i)], lags_));
      MatrixXd k = factors.back()[0];
      for (std::size_t d = 1; d < factors.back().size(); ++d)
        k.array() *= factors.back()[d].array();
      MatrixXd m =
          (w.col(i) * w.col(i).transpose()).array() * k.array();
      ktil += m;
      kmats.push_back(std::move(k));
      scaled.push_back(std::move(m));
    }
    ktil.diagonal().array() += model.noise_var;

    Eigen::LLT<MatrixXd> llt(ktil);
    if (llt.info() != Eigen::Success)
      return std::numeric_limits<double>::infinity();
    const double logdet =
        2.0 * llt.matrixLLT().diagonal().array().log().sum();
    const VectorXd alpha = llt.solve(yc_);
    const double nlml =
        0.5 * (logdet + yc_.dot(alpha) +
               static_cast<double>(n) * std::log(2.0 * std::numbers::pi));
    if (grad == nullptr) return nlml;

    grad->setZero(theta.size());
    const MatrixXd winv = llt.solve(MatrixXd::Identity(n, n));

    // Shared pieces for the weighting-function gradients: with
    // h_i = d sigma_i / sigma_i, the objective derivative is
    // sum_i h_i . (diag(M_i Winv) - alpha o (M_i alpha)).
    MatrixXd cvecs(n, r);
    for (Index i = 0; i < r; ++i) {
      const VectorXd mi_alpha = scaled[static_cast<std::size_t>(i)] * alpha;
      const VectorXd di = (scaled[static_cast<std::size_t>(i)].array() *
                           winv.array())
                              .rowwise()
                              .sum();
      cvecs.col(i) = di - alpha.cwiseProduct(mi_alpha);
    }
    const VectorXd csum = cvecs.rowwise().sum();

    Index at = 0;
    for (Index i = 0; i < r; ++i) {
      // T = (sigma sigma^T) o Winv - (alpha o sigma)(alpha o sigma)^T, so
      // that dNLML for a kernel parameter is 0.5 sum(T o dK_i).
      const VectorXd asig = alpha.cwiseProduct(w.col(i));
      MatrixXd t = (w.col(i) * w.col(i).transpose()).array() * winv.array();
      t.noalias() -= asig * asig.transpose();
      at += kernel_gradient(model.kernels[static_cast<std::size_t>(i)],
                            factors[static_cast<std::size_t>(i)],
                            kmats[static_cast<std::size_t>(i)], t, grad, at);
    }
    for (Index j = 0; j < r; ++j) {
      const VectorXd ej =
          cvecs.col(j) - w.col(j).cwiseProduct(csum);
      at += weight_gradient(model.surface.weights[static_cast<std::size_t>(j)],
                            ej, grad, at);
    }
    (*grad)[at] =
        0.5 * model.noise_var * (winv.trace() - alpha.squaredNorm());
    return nlml;
  }

 private:
  // Writes the packed-gradient block for one kernel; returns its length.
  Index kernel_gradient(const KernelSpec& spec,
                        const std::vector<MatrixXd>& g, const MatrixXd& kmat,
                        const MatrixXd& t, VectorXd* grad, Index at) const {
    const Index n2 = kmat.size();
    if (const auto* rbf = std::get_if<RbfParams>(&spec)) {
      for (Index d = 0; d < rbf->dims(); ++d) {
        const double inv_l2 =
            1.0 / (rbf->length_scales[d] * rbf->length_scales[d]);
        const auto& lag = lags_[static_cast<std::size_t>(d)];
        double acc = 0.0;
        const double* tp = t.data();
        const double* kp = kmat.data();
        const double* lp = lag.data();
        for (Index e = 0; e < n2; ++e)
          acc += tp[e] * kp[e] * lp[e] * lp[e] * inv_l2;
        (*grad)[at + d] = 0.5 * acc;
      }
      (*grad)[at + rbf->dims()] = 0.5 * (t.array() * kmat.array()).sum();
      return rbf->dims() + 1;
    }
    const auto& sm = std::get<SmParams>(spec);
    constexpr double two_pi = 2.0 * std::numbers::pi;
    Index k = at;
    for (Index d = 0; d < sm.dims(); ++d) {
      // Product of the other dimensions' factors, fused with T.
      MatrixXd tr = t;
      for (Index e = 0; e < sm.dims(); ++e)
        if (e != d) tr.array() *= g[static_cast<std::size_t>(e)].array();
      const auto& lag = lags_[static_cast<std::size_t>(d)];
      const double* trp = tr.data();
      const double* lp = lag.data();
      for (Index q = 0; q < sm.components(); ++q) {
        const double wq = sm.weights(d, q);
        const double mq = sm.means(d, q);
        const double vq = sm.vars(d, q);
        double acc_w = 0.0, acc_m = 0.0, acc_v = 0.0;
        for (Index e = 0; e < n2; ++e) {
          const double delta = lp[e];
          const double d2 = delta * delta;
          const double co = std::cos(two_pi * delta * mq);
          const double ex = std::exp(-detail::kTwoPiSq * d2 * vq);
          const double piece = wq * co * ex;
          acc_w += trp[e] * piece;
          acc_m += trp[e] * wq * (-two_pi * delta) *
                   std::sin(two_pi * delta * mq) * ex;
          acc_v += trp[e] * piece * (-detail::kTwoPiSq * d2 * vq);
        }
        (*grad)[k++] = 0.5 * acc_w;  // log weight
        (*grad)[k++] = 0.5 * acc_m;  // mean
        (*grad)[k++] = 0.5 * acc_v;  // log variance
      }
    }
    return k - at;
  }

  // Gradient block for one weighting function given e_j (see above).
  Index weight_gradient(const WeightFunction& wf, const VectorXd& e,
                        VectorXd* grad, Index at) const {
    if (const auto* rks = std::get_if<RksWeight>(&wf)) {
      const Index m = rks->features();
      const double scale = std::sqrt(2.0 / static_cast<double>(m));
      MatrixXd phase = x_ * rks->omega.transpose();
      phase.rowwise() += rks->b.transpose();
      const MatrixXd cosm = phase.array().cos();
      const MatrixXd sinm = phase.array().sin();
      grad->segment(at, m) = scale * (cosm.transpose() * e);
      Index k = at + m;
      for (Index t = 0; t < m; ++t)
        for (Index d = 0; d < rks->dims(); ++d)
          (*grad)[k++] = -scale * rks->a[t] *
                         sinm.col(t).dot(e.cwiseProduct(x_.col(d)));
      grad->segment(k, m) =
          (-scale * rks->a.array() * (sinm.transpose() * e).array()).matrix();
      return m * (2 + rks->dims());
    }
    if (const auto* poly = std::get_if<PolyWeight>(&wf)) {
      Index k = at;
      MatrixXd pw = MatrixXd::Ones(x_.rows(), x_.cols());
      for (Index i = 0; i < poly->beta.rows(); ++i) {
        for (Index d = 0; d < poly->beta.cols(); ++d)
          (*grad)[k++] = pw.col(d).dot(e);
        if (i + 1 < poly->beta.rows()) pw.array() *= x_.array();
      }
      return k - at;
    }
    return 0;
  }

  ChangeSurfaceModel proto_;
  MatrixXd x_;
  VectorXd yc_;
  std::vector<MatrixXd> lags_;
  Index dense_cap_;
};

// --- bounded-mode objective (finite differences) ------------------------------

/// Weyl-bounded NLML on a complete grid; gradients by central finite
/// differences (the pairing inside the bound is piecewise in the
/// hyperparameters, so no analytic form is used).
class BoundNlmlObjective {
 public:
  BoundNlmlObjective(ChangeSurfaceModel proto, GridDataset data,
                     WeylStrategy strategy, double cg_tol = 1e-6,
                     Index cg_max_iter = 1000, double fd_rel = 1e-4)
      : proto_(std::move(proto)),
        data_(std::move(data)),
        strategy_(strategy),
        cg_tol_(cg_tol),
        cg_max_iter_(cg_max_iter),
        fd_rel_(fd_rel) {}

  double operator()(const VectorXd& theta, VectorXd* grad) const {
    const double f = value(theta);
    if (grad == nullptr) return f;
    grad->resize(theta.size());
    for (Index k = 0; k < theta.size(); ++k) {
      const double h = fd_rel_ * std::max(1.0, std::abs(theta[k]));
      VectorXd tp = theta, tm = theta;
      tp[k] += h;
      tm[k] -= h;
      (*grad)[k] = (value(tp) - value(tm)) / (2.0 * h);
    }
    return f;
  }

  double value(const VectorXd& theta) const {
    try {
      const ChangeSurfaceModel model = unpack_model(proto_, theta);
      return nlml_bound(model, data_, strategy_, cg_tol_, cg_max_iter_).value;
    } catch (const NonPositive&) {
      return std::numeric_limits<double>::infinity();
    } catch (const NotPsd&) {
      return std::numeric_limits<double>::infinity();
    }
  }

 private:
  ChangeSurfaceModel proto_;
  GridDataset data_;
  WeylStrategy strategy_;
  double cg_tol_;
  Index cg_max_iter_;
  double fd_rel_;
};

// --- fitting ------------------------------------------------------------------

enum class FitMode { Exact, Bounded };

struct FitConfig {
  FitMode mode = FitMode::Exact;
  WeylStrategy strategy = WeylMiddle{};
  Index max_iters = 100;
  double grad_tol = 1e-5;
  Index dense_cap = 4096;
  double cg_tol = 1e-6;
  Index cg_max_iter = 1000;
  double fd_rel = 1e-4;
  Index opt_subsample = 0;  // exact mode: optimize on this many points (0 = all)
  std::uint64_t seed = 0;   // subsample seed
};

struct FitReport {
  double final_objective = 0.0;
  std::vector<double> trace;
  std::string strategy;
  std::string mode;
  double seconds = 0.0;
  bool converged = false;
  bool line_search_failed = false;
  Index iterations = 0;
};

/// Exact-mode fit on arbitrary training points. Centers y, optimizes all
/// hyperparameters by L-BFGS with analytic gradients, and returns the
/// refitted model plus a report with a non-increasing objective trace.
inline std::pair<ChangeSurfaceModel, FitReport> fit(
    const ChangeSurfaceModel& model0, const MatrixXd& x, const VectorXd& y,
    const FitConfig& cfg = {}) {
  const auto start = std::chrono::steady_clock::now();
  ChangeSurfaceModel proto = model0;
  proto.y_mean = y.mean();

  MatrixXd xo = x;
  VectorXd yo = y;
  if (cfg.opt_subsample > 0 && cfg.opt_subsample < x.rows()) {
    Rng rng(Rng::derive(cfg.seed, 0x5ab5u));
    const auto perm = rng.permutation(x.rows());
    std::vector<Index> idx(perm.begin(), perm.begin() + cfg.opt_subsample);
    std::sort(idx.begin(), idx.end());
    xo = select_rows(x, idx);
    yo = select(y, idx);
  }

  ExactNlmlObjective obj(proto, xo, yo, cfg.dense_cap);
  OptimOptions opt;
  opt.max_iters = cfg.max_iters;
  opt.grad_tol = cfg.grad_tol;
  const OptimResult res = minimize(obj, pack_model(proto), opt);

  ChangeSurfaceModel out = unpack_model(proto, res.x);
  FitReport report;
  report.final_objective = res.fx;
  report.trace = res.trace;
  report.strategy = "dense-exact";
  report.mode = "exact";
  report.converged = res.converged;
  report.line_search_failed = res.line_search_failed;
  report.iterations = res.iterations;
  report.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  return {std::move(out), std::move(report)};
}

/// Grid fit: exact mode extracts the grid points, bounded mode optimizes
/// the Weyl-bounded objective with finite differences.
inline std::pair<ChangeSurfaceModel, FitReport> fit(
    const ChangeSurfaceModel& model0, const GridDataset& data,
    const FitConfig& cfg = {}) {
  if (cfg.mode == FitMode::Exact)
    return fit(model0, data.points(), data.y, cfg);

  const auto start = std::chrono::steady_clock::now();
  ChangeSurfaceModel proto = model0;
  proto.y_mean = data.y.mean();
  BoundNlmlObjective obj(proto, data, cfg.strategy, cfg.cg_tol,
                         cfg.cg_max_iter, cfg.fd_rel);
  OptimOptions opt;
  opt.max_iters = cfg.max_iters;
  opt.grad_tol = cfg.grad_tol;
  const OptimResult res = minimize(obj, pack_model(proto), opt);

  ChangeSurfaceModel out = unpack_model(proto, res.x);
  FitReport report;
  report.final_objective = res.fx;
  report.trace = res.trace;
  report.strategy = strategy_name(cfg.strategy);
  report.mode = "bounded";
  report.converged = res.converged;
  report.line_search_failed = res.line_search_failed;
  report.iterations = res.iterations;
  report.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  return {std::move(out), std::move(report)};
}

}  // namespace csgp
