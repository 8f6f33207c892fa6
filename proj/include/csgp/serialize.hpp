#pragma once

#include <fstream>
#include <string>
#include <vector>

#include "csgp/model.hpp"
#include "json.hpp"

namespace csgp {

namespace detail {

using nlohmann::json;

inline json vec_to_json(const VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

inline VectorXd vec_from_json(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const VectorXd>(v.data(), static_cast<Index>(v.size()));
}

inline json mat_to_json(const MatrixXd& m) {
  json rows = json::array();
  for (Index i = 0; i < m.rows(); ++i)
    rows.push_back(std::vector<double>(m.row(i).begin(), m.row(i).end()));
  return rows;
}

inline MatrixXd mat_from_json(const json& j) {
  const Index rows = static_cast<Index>(j.size());
  if (rows == 0) return MatrixXd(0, 0);
  const Index cols = static_cast<Index>(j[0].size());
  MatrixXd m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index c = 0; c < cols; ++c) m(i, c) = j[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)].get<double>();
  return m;
}

inline json kernel_to_json(const KernelSpec& k) {
  json j;
  if (const auto* rbf = std::get_if<RbfParams>(&k)) {
    j["type"] = "rbf";
    j["length_scales"] = vec_to_json(rbf->length_scales);
    j["signal_var"] = rbf->signal_var;
  } else {
    const auto& sm = std::get<SmParams>(k);
    j["type"] = "spectral_mixture";
    j["weights"] = mat_to_json(sm.weights);
    j["means"] = mat_to_json(sm.means);
    j["vars"] = mat_to_json(sm.vars);
  }
  return j;
}

inline KernelSpec kernel_from_json(const json& j) {
  const std::string type = j.at("type").get<std::string>();
  if (type == "rbf") {
    RbfParams p;
    p.length_scales = vec_from_json(j.at("length_scales"));
    p.signal_var = j.at("signal_var").get<double>();
    return p;
  }
  if (type == "spectral_mixture") {
    SmParams p;
    p.weights = mat_from_json(j.at("weights"));
    p.means = mat_from_json(j.at("means"));
    p.vars = mat_from_json(j.at("vars"));
    return p;
  }
  throw Error("unknown kernel type '" + type + "'");
}

inline json weight_to_json(const WeightFunction& w) {
  json j;
  if (const auto* rks = std::get_if<RksWeight>(&w)) {
    j["type"] = "rks";
    j["a"] = vec_to_json(rks->a);
    j["omega"] = mat_to_json(rks->omega);
    j["b"] = vec_to_json(rks->b);
    j["sigma0"] = rks->sigma0;
    j["lambda"] = vec_to_json(rks->lambda);
  } else if (const auto* poly = std::get_if<PolyWeight>(&w)) {
    j["type"] = "polynomial";
    j["beta"] = mat_to_json(poly->beta);
  } else {
    j["type"] = "zero";
  }
  return j;
}

inline WeightFunction weight_from_json(const json& j) {
  const std::string type = j.at("type").get<std::string>();
  if (type == "rks") {
    RksWeight w;
    w.a = vec_from_json(j.at("a"));
    w.omega = mat_from_json(j.at("omega"));
    w.b = vec_from_json(j.at("b"));
    w.sigma0 = j.at("sigma0").get<double>();
    w.lambda = vec_from_json(j.at("lambda"));
    return w;
  }
  if (type == "polynomial") {
    PolyWeight w;
    w.beta = mat_from_json(j.at("beta"));
    return w;
  }
  if (type == "zero") return ZeroWeight{};
  throw Error("unknown weight type '" + type + "'");
}

}  // namespace detail

inline constexpr int kModelFormatVersion = 1;

inline nlohmann::json model_to_json(const ChangeSurfaceModel& model) {
  nlohmann::json j;
  j["format"] = "csgp-model";
  j["version"] = kModelFormatVersion;
  j["regimes"] = model.regimes();
  j["noise_var"] = model.noise_var;
  j["y_mean"] = model.y_mean;
  j["kernels"] = nlohmann::json::array();
  for (const auto& k : model.kernels)
    j["kernels"].push_back(detail::kernel_to_json(k));
  j["weights"] = nlohmann::json::array();
  for (const auto& w : model.surface.weights)
    j["weights"].push_back(detail::weight_to_json(w));
  return j;
}

inline ChangeSurfaceModel model_from_json(const nlohmann::json& j) {
  if (j.at("format").get<std::string>() != "csgp-model")
    throw Error("not a csgp model file");
  if (j.at("version").get<int>() > kModelFormatVersion)
    throw Error("model file version is newer than this library");
  ChangeSurfaceModel model;
  model.noise_var = j.at("noise_var").get<double>();
  model.y_mean = j.at("y_mean").get<double>();
  for (const auto& k : j.at("kernels"))
    model.kernels.push_back(detail::kernel_from_json(k));
  for (const auto& w : j.at("weights"))
    model.surface.weights.push_back(detail::weight_from_json(w));
  model.validate();
  return model;
}

inline void save_model(const std::string& path,
                       const ChangeSurfaceModel& model) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << model_to_json(model).dump(2) << "\n";
}

inline ChangeSurfaceModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path);
  nlohmann::json j;
  in >> j;
  return model_from_json(j);
}

}  // namespace csgp
