#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <set>
#include <vector>

#include "csgp/fit.hpp"
#include "csgp/grid.hpp"
#include "csgp/model.hpp"
#include "csgp/optimize.hpp"
#include "csgp/rng.hpp"

namespace csgp {

struct InitConfig {
  Index g = 10;              // candidate weight-function draws
  Index h = 10;              // kernel hyperparameter draws per candidate
  Index partial_iters = 30;  // abbreviated optimization cap
  Index convergence_iters = 200;
  Index q = 3;  // spectral mixture components
  Index m = 5;  // RKS features
  std::uint64_t seed = 0;
  Index subsample = 0;  // candidate search on this many points (0 = all)
  Index dense_cap = 4096;
  bool var_as_std = true;   // v_q = sigma_q (literal); false uses sigma_q^2
  bool sort_line = false;   // sort responses before the line transform
};

// --- 1-D Gaussian mixture fitting --------------------------------------------

struct Gmm1D {
  VectorXd weights;  // Q, sums to one
  VectorXd means;
  VectorXd stds;  // strictly positive
};

struct GmmFit {
  Gmm1D gmm;
  std::vector<double> loglik_trace;  // non-decreasing
  bool degenerate = false;           // a component kept collapsing
};

/// EM fit of a Q-component univariate Gaussian mixture, k-means++ seeded.
/// The log likelihood is non-decreasing across iterations; components whose
/// variance collapses below the floor are re-seeded, and after three
/// retries the fit is flagged degenerate.
inline GmmFit fit_gmm1d(const VectorXd& samples, Index q, std::uint64_t seed,
                        Index max_iters = 300) {
  const Index n = samples.size();
  {
    std::set<double> distinct(samples.data(), samples.data() + n);
    if (static_cast<Index>(distinct.size()) < q)
      throw DegenerateData("fit_gmm1d: fewer than Q distinct samples");
  }
  Rng rng(seed);
  const double mean = samples.mean();
  const double global_std =
      std::sqrt((samples.array() - mean).square().mean());
  const double spread =
      std::max(samples.maxCoeff() - samples.minCoeff(), 1e-12);
  const double std_floor = std::max(1e-6 * spread, 1e-12);

  GmmFit fit;
  auto& gmm = fit.gmm;
  gmm.weights = VectorXd::Constant(q, 1.0 / static_cast<double>(q));
  gmm.stds = VectorXd::Constant(q, std::max(global_std, std_floor));
  gmm.means.resize(q);

  // k-means++ seeding.
  gmm.means[0] = samples[static_cast<Index>(rng.uniform_index(
      static_cast<std::uint64_t>(n)))];
  for (Index k = 1; k < q; ++k) {
    VectorXd d2(n);
    for (Index i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (Index j = 0; j < k; ++j)
        best = std::min(best, std::abs(samples[i] - gmm.means[j]));
      d2[i] = best * best;
    }
    const double total = d2.sum();
    if (total <= 0.0) {
      gmm.means[k] = samples[static_cast<Index>(
          rng.uniform_index(static_cast<std::uint64_t>(n)))];
      continue;
    }
    double u = rng.uniform() * total;
    Index pick = n - 1;
    for (Index i = 0; i < n; ++i) {
      u -= d2[i];
      if (u <= 0.0) {
        pick = i;
        break;
      }
    }
    gmm.means[k] = samples[pick];
  }

  MatrixXd resp(n, q);
  Index retries = 0;
  constexpr double log2pi = 1.8378770664093453;
  for (Index iter = 0; iter < max_iters; ++iter) {
    // E step in log space.
    double loglik = 0.0;
    for (Index i = 0; i < n; ++i) {
      double row_max = -std::numeric_limits<double>::infinity();
      for (Index k = 0; k < q; ++k) {
        const double z = (samples[i] - gmm.means[k]) / gmm.stds[k];
        resp(i, k) = std::log(gmm.weights[k]) - 0.5 * (z * z + log2pi) -
                     std::log(gmm.stds[k]);
        row_max = std::max(row_max, resp(i, k));
      }
      double sum = 0.0;
      for (Index k = 0; k < q; ++k) sum += std::exp(resp(i, k) - row_max);
      const double log_norm = row_max + std::log(sum);
      loglik += log_norm;
      for (Index k = 0; k < q; ++k)
        resp(i, k) = std::exp(resp(i, k) - log_norm);
    }
    fit.loglik_trace.push_back(loglik);

    // M step.
    bool reseeded = false;
    for (Index k = 0; k < q; ++k) {
      const double nk = resp.col(k).sum();
      if (nk < 1e-10) {
        if (retries++ < 3) {
          gmm.means[k] = samples[static_cast<Index>(
              rng.uniform_index(static_cast<std::uint64_t>(n)))];
          gmm.stds[k] = std::max(global_std, std_floor);
          reseeded = true;
          continue;
        }
        fit.degenerate = true;
        gmm.weights[k] = 1e-10;
        continue;
      }
      gmm.weights[k] = nk / static_cast<double>(n);
      gmm.means[k] = resp.col(k).dot(samples) / nk;
      const double var =
          resp.col(k).dot((samples.array() - gmm.means[k]).square().matrix()) /
          nk;
      const double std_k = std::sqrt(std::max(var, 0.0));
      if (std_k < std_floor) {
        if (retries++ < 3) {
          gmm.means[k] = samples[static_cast<Index>(
              rng.uniform_index(static_cast<std::uint64_t>(n)))];
          gmm.stds[k] = std::max(global_std, std_floor);
          reseeded = true;
        } else {
          fit.degenerate = true;
          gmm.stds[k] = std_floor;
        }
      } else {
        gmm.stds[k] = std_k;
      }
    }
    gmm.weights /= gmm.weights.sum();
    if (reseeded) {
      fit.loglik_trace.clear();  // restart the monotone trace
      continue;
    }
    if (fit.loglik_trace.size() >= 2) {
      const double prev = fit.loglik_trace[fit.loglik_trace.size() - 2];
      if (loglik - prev <= 1e-10 * (std::abs(loglik) + 1.0)) break;
    }
  }
  return fit;
}

// --- empirical spectrum (Algorithm 2 line 5) ----------------------------------

namespace detail {

// Unitary-free DFT magnitudes; line lengths are small so the direct
// O(L^2) transform is fine.
inline VectorXd dft_power(const VectorXd& v) {
  const Index n = v.size();
  const Index bins = n / 2 + 1;
  VectorXd power(bins);
  for (Index k = 0; k < bins; ++k) {
    double re = 0.0, im = 0.0;
    for (Index t = 0; t < n; ++t) {
      const double ang =
          -2.0 * std::numbers::pi * static_cast<double>(k * t) / static_cast<double>(n);
      re += v[t] * std::cos(ang);
      im += v[t] * std::sin(ang);
    }
    power[k] = re * re + im * im;
  }
  return power;
}

}  // namespace detail

/// Frequency samples for one input dimension of one regime: every grid
/// line along `dim` is restricted to the masked points, transformed, and
/// sampled proportionally to the squared spectrum magnitude. Masked gaps
/// are re-indexed as evenly spaced; `sort_line` additionally sorts the
/// responses before the transform.
inline VectorXd empirical_spectrum(const GridDataset& data,
                                   const std::vector<bool>& mask, Index dim,
                                   Rng& rng, bool sort_line = false,
                                   Index max_samples_per_line = 64) {
  data.validate();
  if (dim < 0 || dim >= data.dims())
    throw DimensionMismatch("empirical_spectrum: bad dimension");
  if (static_cast<Index>(mask.size()) != data.n())
    throw DimensionMismatch("empirical_spectrum: mask length mismatch");
  const auto shape = data.shape();
  const VectorXd& axis = data.axes[static_cast<std::size_t>(dim)];
  const Index nd = axis.size();
  const double spacing =
      nd > 1 ? (axis[nd - 1] - axis[0]) / static_cast<double>(nd - 1) : 1.0;

  // Stride of `dim` in the lexicographic flattening.
  Index stride = 1;
  for (Index e = dim + 1; e < data.dims(); ++e)
    stride *= shape[static_cast<std::size_t>(e)];
  const Index n_lines = data.n() / nd;

  std::vector<double> pooled;
  for (Index line = 0; line < n_lines; ++line) {
    // Base flat index of this line (slot `dim` zeroed).
    Index rem = line;
    Index base = 0;
    for (Index e = data.dims() - 1; e >= 0; --e) {
      if (e == dim) continue;
      const Index size_e = shape[static_cast<std::size_t>(e)];
      const Index coord = rem % size_e;
      rem /= size_e;
      Index stride_e = 1;
      for (Index f = e + 1; f < data.dims(); ++f)
        stride_e *= shape[static_cast<std::size_t>(f)];
      base += coord * stride_e;
    }
    std::vector<double> vals;
    for (Index i = 0; i < nd; ++i) {
      const Index flat = base + i * stride;
      if (mask[static_cast<std::size_t>(flat)]) vals.push_back(data.y[flat]);
    }
    if (vals.size() < 2) continue;
    if (sort_line) std::sort(vals.begin(), vals.end());

    VectorXd v = Eigen::Map<VectorXd>(vals.data(), static_cast<Index>(vals.size()));
    const VectorXd power = detail::dft_power(v);
    const double total = power.sum();
    if (total <= 0.0) continue;
    const Index len = v.size();
    const double bin_width = 1.0 / (static_cast<double>(len) * spacing);
    const Index n_draw = std::min<Index>(max_samples_per_line, len);
    for (Index s = 0; s < n_draw; ++s) {
      double u = rng.uniform() * total;
      Index bin = power.size() - 1;
      for (Index k = 0; k < power.size(); ++k) {
        u -= power[k];
        if (u <= 0.0) {
          bin = k;
          break;
        }
      }
      const double f = static_cast<double>(bin) * bin_width +
                       (rng.uniform() - 0.5) * bin_width;
      pooled.push_back(std::abs(f));  // reflect the DC bin at zero
    }
  }
  if (pooled.empty())
    throw EmptyRegime("empirical_spectrum: no line has 2+ masked points");
  return Eigen::Map<VectorXd>(pooled.data(), static_cast<Index>(pooled.size()));
}

// --- Algorithm 1: weight-function initialization -------------------------------

struct WeightInit {
  ChangeSurface surface;
  std::vector<RbfParams> rbf;
  double noise_var = 0.0;
  double objective = 0.0;             // after full optimization
  std::vector<double> draw_objectives;     // all g*h raw draws
  std::vector<double> partial_objectives;  // per candidate after partial opt
  FitReport final_report;
};

namespace detail {

inline RbfParams draw_rbf(const VectorXd& ranges, double y_var, Rng& rng) {
  RbfParams p;
  p.length_scales.resize(ranges.size());
  for (Index d = 0; d < ranges.size(); ++d)
    p.length_scales[d] =
        std::max(ranges[d], 1e-12) * std::pow(10.0, rng.uniform(-1.3, -0.15));
  p.signal_var = y_var * std::pow(10.0, rng.uniform(-1.0, 0.5));
  return p;
}

}  // namespace detail

/// Candidate search over RKS weighting functions using a simplified
/// all-RBF model: g weight draws, h kernel draws each, abbreviated
/// optimization per candidate, winner optimized to convergence. The final
/// objective never exceeds any sampled candidate's.
inline WeightInit init_weights(const MatrixXd& x, const VectorXd& y, Index r,
                               const InitConfig& cfg) {
  if (x.rows() < 2) throw DegenerateData("init_weights: too few points");
  const double y_mean = y.mean();
  const double y_std = std::sqrt((y.array() - y_mean).square().mean());
  if (!(y_std > 0.0)) throw DegenerateData("init_weights: zero-variance y");

  // Defaults: Lambda = (range/2)^2, sigma0 = std(y), sigma_n = mean(|y|)/10.
  const Index dims = x.cols();
  VectorXd ranges(dims), lambda(dims);
  for (Index d = 0; d < dims; ++d) {
    ranges[d] = x.col(d).maxCoeff() - x.col(d).minCoeff();
    const double half = std::max(ranges[d] / 2.0, 1e-12);
    lambda[d] = half * half;
  }
  const double sigma0 = y_std;
  const double sigma_n = y.array().abs().mean() / 10.0;
  const double noise_var0 = std::max(sigma_n * sigma_n, 1e-12);

  MatrixXd xo = x;
  VectorXd yo = y;
  if (cfg.subsample > 0 && cfg.subsample < x.rows()) {
    Rng rng(Rng::derive(cfg.seed, 0xca11));
    const auto perm = rng.permutation(x.rows());
    std::vector<Index> idx(perm.begin(), perm.begin() + cfg.subsample);
    std::sort(idx.begin(), idx.end());
    xo = select_rows(x, idx);
    yo = select(y, idx);
  }

  WeightInit best;
  double best_partial = std::numeric_limits<double>::infinity();
  VectorXd best_theta;
  ChangeSurfaceModel best_proto;

  FitConfig partial_cfg;
  partial_cfg.max_iters = cfg.partial_iters;
  partial_cfg.dense_cap = cfg.dense_cap;

  for (Index cand = 0; cand < cfg.g; ++cand) {
    Rng rng(Rng::derive(cfg.seed, 0x100 + static_cast<std::uint64_t>(cand)));
    ChangeSurfaceModel model;
    model.y_mean = y_mean;
    model.noise_var = noise_var0;
    for (Index i = 0; i + 1 < r; ++i)
      model.surface.weights.emplace_back(
          sample_rks_prior(cfg.m, lambda, sigma0, rng));
    model.surface.weights.emplace_back(ZeroWeight{});

    // Best of h kernel draws by exact marginal likelihood.
    double best_draw = std::numeric_limits<double>::infinity();
    std::vector<RbfParams> best_kernels;
    for (Index j = 0; j < cfg.h; ++j) {
      std::vector<RbfParams> ks;
      for (Index i = 0; i < r; ++i)
        ks.push_back(detail::draw_rbf(ranges, y_std * y_std, rng));
      model.kernels.clear();
      for (const auto& k : ks) model.kernels.emplace_back(k);
      double obj;
      try {
        obj = nlml_exact(model, xo, yo, cfg.dense_cap);
      } catch (const NotPsd&) {
        obj = std::numeric_limits<double>::infinity();
      }
      best.draw_objectives.push_back(obj);
      if (obj < best_draw) {
        best_draw = obj;
        best_kernels = ks;
      }
    }
    model.kernels.clear();
    for (const auto& k : best_kernels) model.kernels.emplace_back(k);

    auto [partial_model, partial_report] = fit(model, xo, yo, partial_cfg);
    best.partial_objectives.push_back(partial_report.final_objective);
    if (partial_report.final_objective < best_partial) {
      best_partial = partial_report.final_objective;
      best_proto = partial_model;
    }
  }

  // Optimize the winner to convergence.
  FitConfig full_cfg;
  full_cfg.max_iters = cfg.convergence_iters;
  full_cfg.dense_cap = cfg.dense_cap;
  auto [final_model, final_report] = fit(best_proto, xo, yo, full_cfg);

  best.surface = final_model.surface;
  for (const auto& k : final_model.kernels)
    best.rbf.push_back(std::get<RbfParams>(k));
  best.noise_var = final_model.noise_var;
  best.objective = final_report.final_objective;
  best.final_report = std::move(final_report);
  return best;
}

// --- Algorithm 2: spectral mixture initialization ------------------------------

struct SmInit {
  std::vector<SmParams> kernels;   // one per regime
  std::vector<bool> fallback;      // regime had no dominance region
  std::vector<std::vector<Gmm1D>> gmms;  // [regime][dimension]
};

/// Spectral mixture initialization from the fitted weighting functions:
/// per regime and dimension, a Q-component GMM is fit to the empirical
/// spectrum of the regime's dominance region and mapped to
/// (w_q, m_q, v_q) = (std(y) phi_q, mu_q, sigma_q). `available` restricts
/// every mask to observed grid cells (held-out cells stay unseen).
inline SmInit init_sm(const GridDataset& data, const ChangeSurface& surface,
                      const InitConfig& cfg,
                      const std::vector<bool>* available = nullptr) {
  data.validate();
  if (available && static_cast<Index>(available->size()) != data.n())
    throw DimensionMismatch("init_sm: availability mask length mismatch");
  const Index r = surface.regimes();
  const MatrixXd w = warp(surface, data.points());
  double y_sum = 0.0, y_sq = 0.0;
  Index y_count = 0;
  for (Index p = 0; p < data.n(); ++p) {
    if (available && !(*available)[static_cast<std::size_t>(p)]) continue;
    y_sum += data.y[p];
    y_sq += data.y[p] * data.y[p];
    ++y_count;
  }
  const double y_mean = y_sum / static_cast<double>(y_count);
  const double y_std =
      std::sqrt(std::max(0.0, y_sq / static_cast<double>(y_count) -
                                  y_mean * y_mean));

  const auto base_mask = [&](Index p) {
    return !available || (*available)[static_cast<std::size_t>(p)];
  };

  SmInit out;
  for (Index i = 0; i < r; ++i) {
    std::vector<bool> mask(static_cast<std::size_t>(data.n()));
    Index count = 0;
    for (Index p = 0; p < data.n(); ++p) {
      mask[static_cast<std::size_t>(p)] = base_mask(p) && w(p, i) > 0.5;
      if (mask[static_cast<std::size_t>(p)]) ++count;
    }
    bool fallback = count == 0;
    if (fallback)
      for (Index p = 0; p < data.n(); ++p)
        mask[static_cast<std::size_t>(p)] = base_mask(p);

    SmParams sm;
    sm.weights.resize(data.dims(), cfg.q);
    sm.means.resize(data.dims(), cfg.q);
    sm.vars.resize(data.dims(), cfg.q);
    std::vector<Gmm1D> dims_gmms;
    for (Index d = 0; d < data.dims(); ++d) {
      Rng rng(Rng::derive(cfg.seed, 0x200 + static_cast<std::uint64_t>(i * 16 + d)));
      VectorXd samples;
      try {
        samples = empirical_spectrum(data, mask, d, rng, cfg.sort_line);
      } catch (const EmptyRegime&) {
        fallback = true;
        std::vector<bool> full(static_cast<std::size_t>(data.n()));
        for (Index p = 0; p < data.n(); ++p)
          full[static_cast<std::size_t>(p)] = base_mask(p);
        samples = empirical_spectrum(data, full, d, rng, cfg.sort_line);
      }
      const auto gmm_fit = fit_gmm1d(
          samples, cfg.q,
          Rng::derive(cfg.seed, 0x300 + static_cast<std::uint64_t>(i * 16 + d)));
      const auto& gmm = gmm_fit.gmm;
      for (Index qi = 0; qi < cfg.q; ++qi) {
        sm.weights(d, qi) = y_std * gmm.weights[qi];
        sm.means(d, qi) = gmm.means[qi];
        sm.vars(d, qi) = cfg.var_as_std
                             ? gmm.stds[qi]
                             : gmm.stds[qi] * gmm.stds[qi];
      }
      dims_gmms.push_back(gmm);
    }
    out.kernels.push_back(std::move(sm));
    out.fallback.push_back(fallback);
    out.gmms.push_back(std::move(dims_gmms));
  }
  return out;
}

/// Rescale an initialized spectral mixture for the product-form kernel:
/// dimension 0 keeps the std(y)-scaled weights, the remaining dimensions
/// are normalized to sum to one so the overall scale stays identifiable.
inline SmParams normalized_for_product(SmParams sm) {
  for (Index d = 1; d < sm.dims(); ++d) {
    const double total = sm.weights.row(d).sum();
    if (total > 0.0) sm.weights.row(d) /= total;
  }
  return sm;
}

}  // namespace csgp
