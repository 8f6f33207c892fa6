#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <variant>
#include <vector>

#include "csgp/errors.hpp"

namespace csgp {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Squared-exponential kernel with one length-scale per input dimension.
struct RbfParams {
  VectorXd length_scales;  // D, strictly positive
  double signal_var = 1.0;

  Index dims() const { return length_scales.size(); }
};

/// Product-form spectral mixture kernel: one Q-component univariate
/// mixture per input dimension, multiplied across dimensions.
/// Row d holds the components of dimension d.
struct SmParams {
  MatrixXd weights;  // D x Q, nonnegative, at least one positive per row
  MatrixXd means;    // D x Q, frequency units
  MatrixXd vars;     // D x Q, strictly positive

  Index dims() const { return weights.rows(); }
  Index components() const { return weights.cols(); }
};

using KernelSpec = std::variant<RbfParams, SmParams>;

inline Index kernel_dims(const KernelSpec& spec) {
  return std::visit([](const auto& p) { return p.dims(); }, spec);
}

/// Prior variance k(x, x).
inline double kernel_variance(const KernelSpec& spec) {
  if (const auto* rbf = std::get_if<RbfParams>(&spec)) return rbf->signal_var;
  const auto& sm = std::get<SmParams>(spec);
  double v = 1.0;
  for (Index d = 0; d < sm.dims(); ++d) v *= sm.weights.row(d).sum();
  return v;
}

namespace detail {

constexpr double kTwoPiSq = 2.0 * std::numbers::pi * std::numbers::pi;

// Univariate SM mixture value at lag delta for row d of the parameters.
inline double sm_factor_1d(const SmParams& sm, Index d, double delta) {
  double acc = 0.0;
  const double d2 = delta * delta;
  for (Index q = 0; q < sm.components(); ++q) {
    acc += sm.weights(d, q) *
           std::cos(2.0 * std::numbers::pi * delta * sm.means(d, q)) *
           std::exp(-kTwoPiSq * d2 * sm.vars(d, q));
  }
  return acc;
}

inline double rbf_factor_1d(double delta, double length_scale) {
  const double z = delta / length_scale;
  return std::exp(-0.5 * z * z);
}

}  // namespace detail

/// Factor value of dimension d at lag delta. The overall signal variance
/// is carried by dimension 0: RBF multiplies signal_var there, SM carries
/// it in the dimension-0 mixture weights.
inline double kernel_factor_1d(const KernelSpec& spec, Index d, double delta) {
  if (const auto* rbf = std::get_if<RbfParams>(&spec)) {
    const double v = detail::rbf_factor_1d(delta, rbf->length_scales[d]);
    return d == 0 ? rbf->signal_var * v : v;
  }
  return detail::sm_factor_1d(std::get<SmParams>(spec), d, delta);
}

/// k(x, x') as the product of per-dimension factors.
inline double eval1(const KernelSpec& spec, const VectorXd& xa,
                    const VectorXd& xb) {
  if (xa.size() != xb.size() || xa.size() != kernel_dims(spec))
    throw DimensionMismatch("eval1: point dimension mismatch");
  double k = 1.0;
  for (Index d = 0; d < xa.size(); ++d)
    k *= kernel_factor_1d(spec, d, xa[d] - xb[d]);
  return k;
}

/// Dense cross-covariance between row-point sets xa (N x D) and xb (M x D).
inline MatrixXd eval_dense(const KernelSpec& spec, const MatrixXd& xa,
                           const MatrixXd& xb) {
  const Index dims = kernel_dims(spec);
  if (xa.cols() != dims || xb.cols() != dims)
    throw DimensionMismatch("eval_dense: point dimension mismatch");
  MatrixXd k = MatrixXd::Ones(xa.rows(), xb.rows());
  for (Index d = 0; d < dims; ++d) {
    for (Index i = 0; i < xa.rows(); ++i)
      for (Index j = 0; j < xb.rows(); ++j)
        k(i, j) *= kernel_factor_1d(spec, d, xa(i, d) - xb(j, d));
  }
  return k;
}

/// Per-dimension factor matrices on grid axes; their Kronecker product
/// (axis 0 slowest) equals eval_dense on the full grid.
inline std::vector<MatrixXd> eval_factors(const KernelSpec& spec,
                                          const std::vector<VectorXd>& axes) {
  if (static_cast<Index>(axes.size()) != kernel_dims(spec))
    throw DimensionMismatch("eval_factors: axis count mismatch");
  std::vector<MatrixXd> factors;
  factors.reserve(axes.size());
  for (Index d = 0; d < static_cast<Index>(axes.size()); ++d) {
    const VectorXd& ax = axes[static_cast<std::size_t>(d)];
    MatrixXd f(ax.size(), ax.size());
    for (Index i = 0; i < ax.size(); ++i) {
      f(i, i) = kernel_factor_1d(spec, d, 0.0);
      for (Index j = 0; j < i; ++j) {
        const double v = kernel_factor_1d(spec, d, ax[i] - ax[j]);
        f(i, j) = v;
        f(j, i) = v;
      }
    }
    factors.push_back(std::move(f));
  }
  return factors;
}

/// Relative jitter added to factor diagonals before eigendecomposition.
inline constexpr double kFactorJitterRel = 1e-8;

inline void add_factor_jitter(MatrixXd& factor) {
  factor.diagonal().array() += kFactorJitterRel * factor(0, 0);
}

// --- flat log-parameter packing ------------------------------------------
//
// RBF: [log l_1 .. log l_D, log signal_var]
// SM:  per dimension d, per component q: [log w, m, log v]

inline Index param_count(const KernelSpec& spec) {
  if (const auto* rbf = std::get_if<RbfParams>(&spec))
    return rbf->dims() + 1;
  const auto& sm = std::get<SmParams>(spec);
  return 3 * sm.dims() * sm.components();
}

inline VectorXd pack(const KernelSpec& spec) {
  VectorXd out(param_count(spec));
  if (const auto* rbf = std::get_if<RbfParams>(&spec)) {
    for (Index d = 0; d < rbf->dims(); ++d)
      out[d] = std::log(rbf->length_scales[d]);
    out[rbf->dims()] = std::log(rbf->signal_var);
    return out;
  }
  const auto& sm = std::get<SmParams>(spec);
  Index k = 0;
  for (Index d = 0; d < sm.dims(); ++d)
    for (Index q = 0; q < sm.components(); ++q) {
      out[k++] = std::log(sm.weights(d, q));
      out[k++] = sm.means(d, q);
      out[k++] = std::log(sm.vars(d, q));
    }
  return out;
}

/// Inverse of pack; `proto` supplies the kernel form and shape.
inline KernelSpec unpack(const KernelSpec& proto, const VectorXd& packed) {
  if (packed.size() != param_count(proto))
    throw DimensionMismatch("unpack: packed length mismatch");
  if (const auto* rbf = std::get_if<RbfParams>(&proto)) {
    RbfParams out = *rbf;
    for (Index d = 0; d < rbf->dims(); ++d)
      out.length_scales[d] = std::exp(packed[d]);
    out.signal_var = std::exp(packed[rbf->dims()]);
    return out;
  }
  SmParams out = std::get<SmParams>(proto);
  Index k = 0;
  for (Index d = 0; d < out.dims(); ++d)
    for (Index q = 0; q < out.components(); ++q) {
      out.weights(d, q) = std::exp(packed[k++]);
      out.means(d, q) = packed[k++];
      out.vars(d, q) = std::exp(packed[k++]);
    }
  return out;
}

}  // namespace csgp
