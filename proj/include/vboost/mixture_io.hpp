#pragma once

#include "vboost/mixture.hpp"

#include <json.hpp>

#include <fstream>
#include <string>

namespace vboost {

// Mixture wire format:
//   { "dim": D,
//     "components": [ { "weight": w,
//                       "mean": [..D..],
//                       "factors": [..D*r.., row-major, possibly empty],
//                       "log_diag": [..D..] }, ... ] }
// Finite doubles survive a round trip bit-faithfully (shortest-repr dump,
// correctly rounded parse).
inline nlohmann::json mixture_to_json(const MixtureApprox& mix) {
  nlohmann::json doc;
  doc["dim"] = mix.dim();
  doc["components"] = nlohmann::json::array();
  for (Eigen::Index c = 0; c < mix.size(); ++c) {
    const GaussianComponent& comp = mix.components[c];
    nlohmann::json jc;
    jc["weight"] = mix.weights[c];
    jc["mean"] = std::vector<double>(comp.mean.begin(), comp.mean.end());
    std::vector<double> factors;
    factors.reserve(comp.dim() * comp.cov.rank());
    for (Eigen::Index i = 0; i < comp.dim(); ++i)
      for (Eigen::Index j = 0; j < comp.cov.rank(); ++j)
        factors.push_back(comp.cov.factors(i, j));
    jc["factors"] = factors;
    jc["log_diag"] =
        std::vector<double>(comp.cov.log_diag.begin(), comp.cov.log_diag.end());
    doc["components"].push_back(std::move(jc));
  }
  return doc;
}

inline MixtureApprox mixture_from_json(const nlohmann::json& doc) {
  if (!doc.is_object() || !doc.contains("dim") || !doc.contains("components"))
    throw ConfigError("mixture json: expected object with 'dim' and 'components'");
  const Eigen::Index dim = doc.at("dim").get<Eigen::Index>();
  const auto& comps = doc.at("components");
  if (!comps.is_array() || comps.empty())
    throw ConfigError("mixture json: 'components' must be a non-empty array");

  MixtureApprox mix;
  mix.weights = Vec(static_cast<Eigen::Index>(comps.size()));
  Eigen::Index c = 0;
  for (const auto& jc : comps) {
    mix.weights[c] = jc.at("weight").get<double>();
    const auto mean = jc.at("mean").get<std::vector<double>>();
    const auto factors = jc.at("factors").get<std::vector<double>>();
    const auto log_diag = jc.at("log_diag").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(mean.size()) != dim ||
        static_cast<Eigen::Index>(log_diag.size()) != dim)
      throw ConfigError("mixture json: component " + std::to_string(c) +
                        " has wrong mean/log_diag length");
    if (dim > 0 && factors.size() % mean.size() != 0)
      throw ConfigError("mixture json: component " + std::to_string(c) +
                        " factors length is not a multiple of dim");
    const Eigen::Index rank = static_cast<Eigen::Index>(factors.size()) / dim;
    GaussianComponent comp;
    comp.mean = Eigen::Map<const Vec>(mean.data(), dim);
    comp.cov.log_diag = Eigen::Map<const Vec>(log_diag.data(), dim);
    comp.cov.factors = Mat(dim, rank);
    for (Eigen::Index i = 0; i < dim; ++i)
      for (Eigen::Index j = 0; j < rank; ++j)
        comp.cov.factors(i, j) = factors[static_cast<std::size_t>(i * rank + j)];
    mix.components.push_back(std::move(comp));
    ++c;
  }
  validate(mix);
  return mix;
}

inline void save_mixture(const MixtureApprox& mix, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << mixture_to_json(mix).dump(2) << "\n";
}

inline MixtureApprox load_mixture(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open mixture file: " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("mixture json parse error in " + path + ": " + e.what());
  }
  return mixture_from_json(doc);
}

}  // namespace vboost
