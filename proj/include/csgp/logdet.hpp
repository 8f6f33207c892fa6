#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <string>
#include <variant>
#include <vector>

#include "csgp/errors.hpp"
#include "csgp/kron.hpp"

namespace csgp {

/// Eigenvalue pairing strategies for the Weyl sum bound.
struct WeylExact {};
struct WeylMiddle {};
struct WeylGreedy {
  Index window = 40;  // half-width s >= 1
};
using WeylStrategy = std::variant<WeylExact, WeylMiddle, WeylGreedy>;

inline std::string strategy_name(const WeylStrategy& s) {
  if (std::holds_alternative<WeylExact>(s)) return "exact-weyl";
  if (std::holds_alternative<WeylMiddle>(s)) return "middle";
  return "greedy:" + std::to_string(std::get<WeylGreedy>(s).window);
}

/// Weyl bound on the spectrum of A + B from the sorted spectra of A and B:
/// mu_{i+j-1} <= alpha_i + beta_j for every valid pair. Each strategy picks
/// one pair per output index; the result is descending and bounds the true
/// spectrum of the sum elementwise from above.
///
/// Exact minimizes over all valid pairs (O(n^2)); Middle takes i = j for odd
/// output indices and i = j + 1 for even ones (O(n)); Greedy(s) minimizes
/// over a window of half-width s around the previous choice (O(sn)), ties
/// broken toward smaller i.
inline EigenSpectrum weyl_pairwise(const EigenSpectrum& alpha,
                                   const EigenSpectrum& beta,
                                   const WeylStrategy& strategy) {
  const Index n = alpha.size();
  if (beta.size() != n) throw DimensionMismatch("weyl_pairwise: length mismatch");
  const VectorXd& a = alpha.values;
  const VectorXd& b = beta.values;
  VectorXd mu(n);

  // 0-based: output l uses pairs (i, l - i) with i in [lo(l), hi(l)].
  const auto lo = [n](Index l) { return std::max<Index>(0, l + 1 - n); };
  const auto hi = [n](Index l) { return std::min<Index>(l, n - 1); };

  if (std::holds_alternative<WeylExact>(strategy)) {
    for (Index l = 0; l < n; ++l) {
      double best = std::numeric_limits<double>::infinity();
      for (Index i = lo(l); i <= hi(l); ++i)
        best = std::min(best, a[i] + b[l - i]);
      mu[l] = best;
    }
  } else if (std::holds_alternative<WeylMiddle>(strategy)) {
    for (Index l = 0; l < n; ++l) {
      const Index i = (l % 2 == 0) ? l / 2 : (l + 1) / 2;
      mu[l] = a[i] + b[l - i];
    }
  } else {
    const Index s = std::get<WeylGreedy>(strategy).window;
    if (s < 1) throw DimensionMismatch("weyl_pairwise: greedy window < 1");
    Index prev = 0;
    for (Index l = 0; l < n; ++l) {
      const Index from = std::max(lo(l), prev - s);
      const Index to = std::min(hi(l), prev + s);
      Index arg = from;
      double best = a[from] + b[l - from];
      for (Index i = from + 1; i <= to; ++i) {
        const double v = a[i] + b[l - i];
        if (v < best) {
          best = v;
          arg = i;
        }
      }
      mu[l] = best;
      prev = arg;
    }
  }
  return EigenSpectrum{std::move(mu)};
}

/// Upper bound on log|K_1 + ... + K_r + noise_var I| from the r term
/// spectra: the pairwise Weyl bound folded left over the terms in the
/// given order, noise added after bounding.
inline double weyl_logdet(const std::vector<EigenSpectrum>& spectra,
                          double noise_var, const WeylStrategy& strategy) {
  if (spectra.empty()) throw DimensionMismatch("weyl_logdet: no spectra");
  const Index n = spectra.front().size();
  for (const auto& s : spectra) {
    if (s.size() != n) throw DimensionMismatch("weyl_logdet: length mismatch");
    if ((s.values.array() < 0.0).any())
      throw NonPositive("weyl_logdet: negative eigenvalue bound");
  }
  EigenSpectrum acc = spectra.front();
  for (std::size_t i = 1; i < spectra.size(); ++i)
    acc = weyl_pairwise(acc, spectra[i], strategy);

  double logdet = 0.0;
  for (Index l = 0; l < n; ++l) {
    const double v = acc.values[l] + noise_var;
    if (v <= 0.0) throw NonPositive("weyl_logdet: nonpositive bounded eigenvalue");
    logdet += std::log(v);
  }
  return logdet;
}

/// Fiedler two-matrix bound: sum_i log(alpha_i + beta_{n-i+1} + noise_var).
/// Does not generalize past two matrices.
inline double fiedler_logdet(const EigenSpectrum& alpha,
                             const EigenSpectrum& beta, double noise_var) {
  const Index n = alpha.size();
  if (beta.size() != n) throw DimensionMismatch("fiedler_logdet: length mismatch");
  double logdet = 0.0;
  for (Index i = 0; i < n; ++i) {
    const double v = alpha.values[i] + beta.values[n - 1 - i] + noise_var;
    if (v <= 0.0) throw NonPositive("fiedler_logdet: nonpositive eigenvalue");
    logdet += std::log(v);
  }
  return logdet;
}

/// Exact log|sum_i M_i + noise_var I| by Cholesky of the assembled sum.
/// Reference implementation for validation and small-n exact mode.
inline double exact_logdet_dense(const std::vector<MatrixXd>& matrices,
                                 double noise_var, Index dense_cap = 4096) {
  if (matrices.empty()) throw DimensionMismatch("exact_logdet_dense: no matrices");
  const Index n = matrices.front().rows();
  if (n > dense_cap)
    throw SizeCap("exact_logdet_dense: n=" + std::to_string(n) + " exceeds cap " +
                  std::to_string(dense_cap));
  MatrixXd sum = MatrixXd::Zero(n, n);
  for (const auto& m : matrices) {
    if (m.rows() != n || m.cols() != n)
      throw DimensionMismatch("exact_logdet_dense: size mismatch");
    sum += m;
  }
  sum.diagonal().array() += noise_var;
  Eigen::LLT<MatrixXd> llt(sum);
  if (llt.info() != Eigen::Success)
    throw NotPsd("exact_logdet_dense: factorization failed");
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

}  // namespace csgp
