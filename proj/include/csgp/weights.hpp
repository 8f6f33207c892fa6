#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <optional>
#include <variant>
#include <vector>

#include "csgp/errors.hpp"
#include "csgp/rng.hpp"

namespace csgp {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Random-cosine-feature weighting function
///   w(x) = sqrt(2/m) * sum_i a_i cos(omega_i . x + b_i).
struct RksWeight {
  VectorXd a;      // m coefficients
  MatrixXd omega;  // m x D frequencies
  VectorXd b;      // m phases in [0, 2pi)
  double sigma0 = 1.0;
  VectorXd lambda;  // D squared length-scales of the sampling prior

  Index features() const { return a.size(); }
  Index dims() const { return omega.cols(); }
};

/// Explicit polynomial weighting function
///   w(x) = sum_{i=0}^{p} beta_i . x^i  (elementwise powers).
struct PolyWeight {
  MatrixXd beta;  // (p+1) x D coefficient blocks, row i for power i

  Index degree() const { return beta.rows() - 1; }
  Index dims() const { return beta.cols(); }
};

/// Reference regime pinned at w(x) = 0 for softmax identifiability.
struct ZeroWeight {};

using WeightFunction = std::variant<RksWeight, PolyWeight, ZeroWeight>;

/// RKS feature matrix: |x| rows, m columns, entries sqrt(2/m) cos(w.x+b).
inline MatrixXd rks_features(const MatrixXd& x, const MatrixXd& omega,
                             const VectorXd& b) {
  if (x.cols() != omega.cols())
    throw DimensionMismatch("rks_features: dimension mismatch");
  if (omega.rows() != b.size())
    throw DimensionMismatch("rks_features: feature count mismatch");
  const double scale = std::sqrt(2.0 / static_cast<double>(omega.rows()));
  MatrixXd phase = x * omega.transpose();
  phase.rowwise() += b.transpose();
  return scale * phase.array().cos().matrix();
}

/// Draw an RKS weight function from its prior:
///   a ~ N(0, sigma0/m I), omega_d ~ N(0, 1/(4 pi^2 lambda_d)),
///   b ~ Uniform[0, 2pi).
inline RksWeight sample_rks_prior(Index m, const VectorXd& lambda,
                                  double sigma0, Rng& rng) {
  RksWeight w;
  w.sigma0 = sigma0;
  w.lambda = lambda;
  const double a_std = std::sqrt(sigma0 / static_cast<double>(m));
  w.a = a_std * rng.normal_vector(m);
  w.omega.resize(m, lambda.size());
  for (Index d = 0; d < lambda.size(); ++d) {
    const double omega_std = 1.0 / (2.0 * std::numbers::pi * std::sqrt(lambda[d]));
    for (Index i = 0; i < m; ++i) w.omega(i, d) = omega_std * rng.normal();
  }
  w.b.resize(m);
  for (Index i = 0; i < m; ++i)
    w.b[i] = rng.uniform(0.0, 2.0 * std::numbers::pi);
  return w;
}

inline RksWeight sample_rks_prior(Index m, const VectorXd& lambda,
                                  double sigma0, std::uint64_t seed) {
  Rng rng(seed);
  return sample_rks_prior(m, lambda, sigma0, rng);
}

/// Evaluate one weighting function at row-points x.
inline VectorXd eval_weight(const WeightFunction& w, const MatrixXd& x) {
  if (std::holds_alternative<ZeroWeight>(w))
    return VectorXd::Zero(x.rows());
  if (const auto* rks = std::get_if<RksWeight>(&w))
    return rks_features(x, rks->omega, rks->b) * rks->a;
  const auto& poly = std::get<PolyWeight>(w);
  if (x.cols() != poly.dims())
    throw DimensionMismatch("eval_weight: dimension mismatch");
  VectorXd out = VectorXd::Zero(x.rows());
  MatrixXd pw = MatrixXd::Ones(x.rows(), x.cols());
  for (Index i = 0; i < poly.beta.rows(); ++i) {
    out += pw * poly.beta.row(i).transpose();
    if (i + 1 < poly.beta.rows()) pw = pw.array() * x.array();
  }
  return out;
}

/// r weighting functions defining an r-regime change surface. The last
/// regime is conventionally a ZeroWeight reference; r = 1 degenerates to
/// a single always-on regime.
struct ChangeSurface {
  std::vector<WeightFunction> weights;

  Index regimes() const { return static_cast<Index>(weights.size()); }
};

/// Softmax warp: returns |x| rows by r columns, rows summing to one.
/// Computed with max subtraction so large |w| cannot overflow.
inline MatrixXd warp(const ChangeSurface& surface, const MatrixXd& x) {
  const Index r = surface.regimes();
  MatrixXd w(x.rows(), r);
  for (Index i = 0; i < r; ++i)
    w.col(i) = eval_weight(surface.weights[static_cast<std::size_t>(i)], x);
  const VectorXd row_max = w.rowwise().maxCoeff();
  w.colwise() -= row_max;
  w = w.array().exp();
  const VectorXd norm = w.rowwise().sum();
  w.array().colwise() /= norm.array();
  return w;
}

// --- change-surface summaries ---------------------------------------------

/// Midpoint and slope of a two-regime surface along one grid axis.
struct SliceSummary {
  VectorXd slice_coords;           // fixed coordinates of the other axes
  std::optional<double> midpoint;  // first 0.5 crossing along the axis
  std::optional<double> slope;     // 0.5 / (t_{0.75} - t_{0.25})
  bool crossed = false;
};

namespace detail {

/// First crossing of `level` along (t, s), linearly interpolated.
inline std::optional<double> first_crossing(const VectorXd& t,
                                            const VectorXd& s, double level) {
  for (Index i = 0; i + 1 < s.size(); ++i) {
    const double lo = s[i] - level;
    const double hi = s[i + 1] - level;
    if (lo == 0.0) return t[i];
    if (lo * hi < 0.0)
      return t[i] + (t[i + 1] - t[i]) * (level - s[i]) / (s[i + 1] - s[i]);
  }
  if (s.size() > 0 && s[s.size() - 1] == level) return t[t.size() - 1];
  return std::nullopt;
}

}  // namespace detail

/// Per-slice midpoints and slopes of sigma(w_1) over a grid field.
/// `sigma1` is the first regime's warped weight at every grid point in
/// lexicographic order (axis 0 slowest); `time_axis` selects the axis the
/// crossings are searched along. Slices that never cross 0.5 are flagged,
/// not errors.
inline std::vector<SliceSummary> surface_summary(
    const std::vector<VectorXd>& axes, const VectorXd& sigma1,
    Index time_axis) {
  const Index dims = static_cast<Index>(axes.size());
  if (time_axis < 0 || time_axis >= dims)
    throw DimensionMismatch("surface_summary: bad time axis");
  Index n = 1;
  for (const auto& ax : axes) n *= ax.size();
  if (sigma1.size() != n)
    throw DimensionMismatch("surface_summary: field length mismatch");

  // Strides of the lexicographic (axis 0 slowest) flattening.
  std::vector<Index> strides(static_cast<std::size_t>(dims));
  Index acc = 1;
  for (Index d = dims - 1; d >= 0; --d) {
    strides[static_cast<std::size_t>(d)] = acc;
    acc *= axes[static_cast<std::size_t>(d)].size();
  }

  const VectorXd& t = axes[static_cast<std::size_t>(time_axis)];
  const Index nt = t.size();
  const Index n_slices = n / nt;

  std::vector<SliceSummary> out;
  out.reserve(static_cast<std::size_t>(n_slices));
  for (Index slice = 0; slice < n_slices; ++slice) {
    // Decode the slice index over all axes except time_axis.
    SliceSummary s;
    s.slice_coords.resize(dims - 1);
    Index rem = slice;
    Index base = 0;
    Index k = 0;
    for (Index d = 0; d < dims; ++d) {
      if (d == time_axis) continue;
      Index tail = 1;
      for (Index e = d + 1; e < dims; ++e)
        if (e != time_axis) tail *= axes[static_cast<std::size_t>(e)].size();
      const Index id = rem / tail;
      rem %= tail;
      base += id * strides[static_cast<std::size_t>(d)];
      s.slice_coords[k++] = axes[static_cast<std::size_t>(d)][id];
    }
    VectorXd line(nt);
    for (Index i = 0; i < nt; ++i)
      line[i] = sigma1[base + i * strides[static_cast<std::size_t>(time_axis)]];

    s.midpoint = detail::first_crossing(t, line, 0.5);
    s.crossed = s.midpoint.has_value();
    const auto t25 = detail::first_crossing(t, line, 0.25);
    const auto t75 = detail::first_crossing(t, line, 0.75);
    if (t25 && t75 && *t75 != *t25) s.slope = 0.5 / (*t75 - *t25);
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace csgp
