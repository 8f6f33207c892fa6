#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "csgp/errors.hpp"
#include "csgp/kernels.hpp"
#include "csgp/rng.hpp"
#include "csgp/weights.hpp"

namespace csgp {

/// Responses observed on a complete Cartesian-product grid.
/// y is ordered lexicographically with axis 0 slowest.
struct GridDataset {
  std::vector<VectorXd> axes;       // D strictly increasing coordinate vectors
  VectorXd y;                       // length prod(axis sizes)
  std::vector<std::string> labels;  // optional axis labels (+ response last)

  Index dims() const { return static_cast<Index>(axes.size()); }

  Index n() const { return y.size(); }

  std::vector<Index> shape() const {
    std::vector<Index> s;
    s.reserve(axes.size());
    for (const auto& ax : axes) s.push_back(ax.size());
    return s;
  }

  /// All grid points as an n x D row-point matrix in flatten order.
  MatrixXd points() const {
    const Index d = dims();
    Index total = 1;
    for (const auto& ax : axes) total *= ax.size();
    MatrixXd x(total, d);
    std::vector<Index> idx(static_cast<std::size_t>(d), 0);
    for (Index row = 0; row < total; ++row) {
      for (Index k = 0; k < d; ++k)
        x(row, k) = axes[static_cast<std::size_t>(k)][idx[static_cast<std::size_t>(k)]];
      for (Index k = d - 1; k >= 0; --k) {
        auto& i = idx[static_cast<std::size_t>(k)];
        if (++i < axes[static_cast<std::size_t>(k)].size()) break;
        i = 0;
      }
    }
    return x;
  }

  void validate() const {
    Index total = 1;
    for (const auto& ax : axes) {
      if (ax.size() < 1) throw DimensionMismatch("grid axis empty");
      for (Index i = 0; i + 1 < ax.size(); ++i)
        if (!(ax[i] < ax[i + 1]))
          throw DimensionMismatch("grid axis not strictly increasing");
      if (!ax.allFinite()) throw NonNumeric("grid axis not finite");
      total *= ax.size();
    }
    if (y.size() != total)
      throw DimensionMismatch("response length does not match grid size");
    if (!y.allFinite()) throw NonNumeric("responses not finite");
  }
};

inline Index flatten_index(const std::vector<Index>& shape,
                           const std::vector<Index>& multi) {
  Index flat = 0;
  for (std::size_t d = 0; d < shape.size(); ++d)
    flat = flat * shape[d] + multi[d];
  return flat;
}

inline std::vector<Index> unflatten_index(const std::vector<Index>& shape,
                                          Index flat) {
  std::vector<Index> multi(shape.size());
  for (std::size_t d = shape.size(); d-- > 0;) {
    multi[d] = flat % shape[d];
    flat /= shape[d];
  }
  return multi;
}

// --- CSV ingestion ----------------------------------------------------------

namespace detail {

inline double parse_number(const std::string& tok, const char* where) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(tok, &pos);
    while (pos < tok.size() && std::isspace(static_cast<unsigned char>(tok[pos])))
      ++pos;
    if (pos != tok.size()) throw NonNumeric(std::string(where) + ": '" + tok + "'");
    return v;
  } catch (const NonNumeric&) {
    throw;
  } catch (...) {
    throw NonNumeric(std::string(where) + ": '" + tok + "'");
  }
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string tok;
  while (std::getline(ss, tok, ',')) out.push_back(tok);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace detail

/// Load a complete-grid CSV: header row, then D input columns followed by
/// one response column. Rows may appear in any order but must cover every
/// axis combination exactly once.
inline GridDataset load_csv(const std::string& path, Index d) {
  std::ifstream in(path);
  if (!in) throw EmptyFile("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw EmptyFile(path + " is empty");
  auto header = detail::split_csv_line(line);
  if (static_cast<Index>(header.size()) != d + 1)
    throw DimensionMismatch(path + ": expected " + std::to_string(d + 1) +
                            " columns, got " + std::to_string(header.size()));

  std::vector<std::vector<double>> coords(static_cast<std::size_t>(d));
  std::vector<double> resp;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto toks = detail::split_csv_line(line);
    if (static_cast<Index>(toks.size()) != d + 1)
      throw DimensionMismatch(path + ": ragged row '" + line + "'");
    for (Index k = 0; k < d; ++k)
      coords[static_cast<std::size_t>(k)].push_back(
          detail::parse_number(toks[static_cast<std::size_t>(k)], "input column"));
    resp.push_back(detail::parse_number(toks[static_cast<std::size_t>(d)],
                                        "response column"));
  }
  if (resp.empty()) throw EmptyFile(path + " has no data rows");

  GridDataset data;
  data.labels = header;
  data.axes.resize(static_cast<std::size_t>(d));
  std::vector<std::map<double, Index>> lookup(static_cast<std::size_t>(d));
  for (Index k = 0; k < d; ++k) {
    std::vector<double> ax = coords[static_cast<std::size_t>(k)];
    std::sort(ax.begin(), ax.end());
    ax.erase(std::unique(ax.begin(), ax.end()), ax.end());
    auto& axis = data.axes[static_cast<std::size_t>(k)];
    axis.resize(static_cast<Index>(ax.size()));
    for (std::size_t i = 0; i < ax.size(); ++i) {
      axis[static_cast<Index>(i)] = ax[i];
      lookup[static_cast<std::size_t>(k)][ax[i]] = static_cast<Index>(i);
    }
  }

  const auto shape = data.shape();
  Index total = 1;
  for (Index s : shape) total *= s;
  if (static_cast<Index>(resp.size()) != total)
    throw IncompleteGrid(path + ": " + std::to_string(resp.size()) +
                         " rows cannot fill a " + std::to_string(total) +
                         "-cell grid");

  data.y.resize(total);
  std::vector<bool> seen(static_cast<std::size_t>(total), false);
  std::vector<Index> multi(static_cast<std::size_t>(d));
  for (std::size_t row = 0; row < resp.size(); ++row) {
    for (Index k = 0; k < d; ++k)
      multi[static_cast<std::size_t>(k)] =
          lookup[static_cast<std::size_t>(k)]
              .at(coords[static_cast<std::size_t>(k)][row]);
    const Index flat = flatten_index(shape, multi);
    if (seen[static_cast<std::size_t>(flat)])
      throw IncompleteGrid(path + ": duplicated grid cell at data row " +
                           std::to_string(row + 1));
    seen[static_cast<std::size_t>(flat)] = true;
    data.y[flat] = resp[row];
  }
  data.validate();
  return data;
}

// --- train/test splitting ---------------------------------------------------

struct TrainTestSplit {
  std::vector<Index> train_idx;
  std::vector<Index> test_idx;
  std::uint64_t seed = 0;
};

/// Uniform random disjoint split of the flattened grid, reproducible by seed.
inline TrainTestSplit split(const GridDataset& data, double test_frac,
                            std::uint64_t seed) {
  const Index n = data.n();
  const Index n_test = static_cast<Index>(std::llround(test_frac * static_cast<double>(n)));
  if (n_test <= 0 || n_test >= n)
    throw DegenerateSplit("test fraction " + std::to_string(test_frac) +
                          " leaves an empty side for n=" + std::to_string(n));
  Rng rng(seed);
  auto perm = rng.permutation(n);
  TrainTestSplit out;
  out.seed = seed;
  out.test_idx.assign(perm.begin(), perm.begin() + n_test);
  out.train_idx.assign(perm.begin() + n_test, perm.end());
  std::sort(out.test_idx.begin(), out.test_idx.end());
  std::sort(out.train_idx.begin(), out.train_idx.end());
  return out;
}

inline MatrixXd select_rows(const MatrixXd& x, const std::vector<Index>& idx) {
  MatrixXd out(static_cast<Index>(idx.size()), x.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Index>(i)) = x.row(idx[i]);
  return out;
}

inline VectorXd select(const VectorXd& v, const std::vector<Index>& idx) {
  VectorXd out(static_cast<Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) out[static_cast<Index>(i)] = v[idx[i]];
  return out;
}

// --- synthetic generator ----------------------------------------------------

/// Ground truth accompanying a synthetic draw.
struct SyntheticTruth {
  VectorXd surface;  // sigma(w_1(x)) over the grid, values in (0, 1)
  PolyWeight w_poly;
  RbfParams kernel1, kernel2;
  double noise_std = 0.0;
  VectorXd noiseless;  // blended latent field before noise
};

namespace detail {

// Exact GP draw on a 2-D grid from a separable RBF kernel: sample
// vec(A1 Z A2^T) with A_d = U_d diag(sqrt(lambda_d)) per-axis.
inline MatrixXd sample_grid_gp_2d(const RbfParams& rbf, const VectorXd& ax1,
                                  const VectorXd& ax2, Rng& rng) {
  const KernelSpec spec = rbf;
  auto factors = eval_factors(spec, {ax1, ax2});
  std::vector<MatrixXd> roots;
  for (auto& f : factors) {
    add_factor_jitter(f);
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(f);
    roots.push_back(eig.eigenvectors() *
                    eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal());
  }
  MatrixXd z = rng.normal_matrix(ax1.size(), ax2.size());
  return roots[0] * z * roots[1].transpose();
}

}  // namespace detail

/// Two-regime synthetic dataset on an n1 x n2 regular grid over [0,1]^2:
/// two latent RBF GP draws blended by the softmax of a random cubic
/// polynomial, plus Gaussian noise. Bit-reproducible for a fixed seed.
inline std::pair<GridDataset, SyntheticTruth> generate_synthetic(
    Index n1, Index n2, std::uint64_t seed) {
  if (n1 < 2 || n2 < 2)
    throw DimensionMismatch("generate_synthetic: need n1, n2 >= 2");
  GridDataset data;
  data.axes = {VectorXd::LinSpaced(n1, 0.0, 1.0),
               VectorXd::LinSpaced(n2, 0.0, 1.0)};
  data.labels = {"x1", "x2", "y"};

  SyntheticTruth truth;
  truth.kernel1 = RbfParams{VectorXd::Constant(2, 0.1), 1.0};
  truth.kernel2 = RbfParams{VectorXd::Constant(2, 0.3), 0.5};

  Rng rng(seed);
  MatrixXd f1 = detail::sample_grid_gp_2d(truth.kernel1, data.axes[0],
                                          data.axes[1], rng);
  MatrixXd f2 = detail::sample_grid_gp_2d(truth.kernel2, data.axes[0],
                                          data.axes[1], rng);

  // Cubic change surface w(x) = sum_i beta_i . x^i, beta_i ~ N(0, 3 I).
  truth.w_poly.beta = std::sqrt(3.0) * rng.normal_matrix(4, 2);
  const MatrixXd x = data.points();
  const VectorXd w = eval_weight(WeightFunction(truth.w_poly), x);
  truth.surface = (1.0 / (1.0 + (-w.array()).exp())).matrix();

  const Index n = n1 * n2;
  VectorXd f(n);
  for (Index i = 0; i < n; ++i) {
    const double s = truth.surface[i];
    f[i] = s * f1(i / n2, i % n2) + (1.0 - s) * f2(i / n2, i % n2);
  }
  truth.noiseless = f;
  const double f_std = std::sqrt((f.array() - f.mean()).square().mean());
  truth.noise_std = 0.05 * f_std;
  data.y = f + truth.noise_std * rng.normal_vector(n);
  data.validate();
  return {std::move(data), std::move(truth)};
}

}  // namespace csgp
