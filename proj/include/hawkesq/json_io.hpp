#pragma once

#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "hawkesq/cov_analytics.hpp"
#include "hawkesq/errors.hpp"
#include "hawkesq/kernels.hpp"
#include "hawkesq/service.hpp"

namespace hawkesq {

using Json = nlohmann::json;

namespace detail {

inline const Json& require(const Json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) throw ConfigError(where + ": missing field '" + key + "'");
  return j.at(key);
}

inline double number(const Json& j, const char* key, const std::string& where) {
  const Json& v = require(j, key, where);
  if (!v.is_number()) throw ConfigError(where + "." + key + ": expected a number");
  return v.get<double>();
}

inline std::vector<double> numbers(const Json& j, const char* key, const std::string& where) {
  const Json& v = require(j, key, where);
  if (!v.is_array()) throw ConfigError(where + "." + key + ": expected an array of numbers");
  std::vector<double> out;
  for (const auto& x : v) {
    if (!x.is_number()) throw ConfigError(where + "." + key + ": expected an array of numbers");
    out.push_back(x.get<double>());
  }
  return out;
}

inline std::string type_of(const Json& j, const std::string& where) {
  const Json& v = require(j, "type", where);
  if (!v.is_string()) throw ConfigError(where + ".type: expected a string");
  return v.get<std::string>();
}

}  // namespace detail

/// {"type": "sum_exp", "terms": [{"alpha": a, "beta": b}, ...]}
/// {"type": "exponential", "alpha": a, "beta": b}
/// {"type": "power_law", "scale": d, "exponent": g, "amplitude": c}
/// {"type": "tabulated", "step": w, "values": [...]}
/// {"type": "zero"}
inline Kernel kernel_from_json(const Json& j, const std::string& where = "kernel") {
  const std::string type = detail::type_of(j, where);
  if (type == "zero") return Kernel::zero();
  if (type == "exponential")
    return Kernel::exponential(detail::number(j, "alpha", where), detail::number(j, "beta", where));
  if (type == "sum_exp") {
    const Json& terms = detail::require(j, "terms", where);
    if (!terms.is_array()) throw ConfigError(where + ".terms: expected an array");
    std::vector<ExpTerm> out;
    for (std::size_t n = 0; n < terms.size(); ++n) {
      const std::string at = where + ".terms[" + std::to_string(n) + "]";
      out.push_back({detail::number(terms[n], "alpha", at), detail::number(terms[n], "beta", at)});
    }
    return Kernel::sum_of_exponentials(std::move(out));
  }
  if (type == "power_law")
    return Kernel::power_law(detail::number(j, "scale", where), detail::number(j, "exponent", where),
                             detail::number(j, "amplitude", where));
  if (type == "tabulated") return Kernel::tabulated(detail::number(j, "step", where), detail::numbers(j, "values", where));
  throw ConfigError(where + ".type: unknown kernel type '" + type + "'");
}

inline Json to_json(const Kernel& h) {
  if (const auto* s = h.as_sum_exp()) {
    Json terms = Json::array();
    for (const auto& t : s->terms) terms.push_back({{"alpha", t.alpha}, {"beta", t.beta}});
    return {{"type", "sum_exp"}, {"terms", terms}};
  }
  if (const auto* p = h.as_power_law())
    return {{"type", "power_law"}, {"scale", p->scale}, {"exponent", p->exponent}, {"amplitude", p->amplitude}};
  const auto* t = h.as_tabulated();
  return {{"type", "tabulated"}, {"step", t->step}, {"values", t->values}};
}

/// Either a single kernel or {"dimension": k, "kernels": [[...], ...], "baseline_weights": [...]}
/// with kernels[i][j] = h_ij (effect of type j on type i).
inline MultiKernel multikernel_from_json(const Json& j, const std::string& where = "kernel") {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  if (!j.contains("dimension")) return MultiKernel::univariate(kernel_from_json(j, where));
  const Json& dim = j.at("dimension");
  if (!dim.is_number_unsigned() || dim.get<std::size_t>() == 0)
    throw ConfigError(where + ".dimension: expected a positive integer");
  const auto k = dim.get<std::size_t>();
  const Json& rows = detail::require(j, "kernels", where);
  if (!rows.is_array() || rows.size() != k) throw ConfigError(where + ".kernels: expected k rows");
  std::vector<Kernel> entries;
  for (std::size_t r = 0; r < k; ++r) {
    if (!rows[r].is_array() || rows[r].size() != k) throw ConfigError(where + ".kernels: expected k x k entries");
    for (std::size_t c = 0; c < k; ++c)
      entries.push_back(kernel_from_json(rows[r][c], where + ".kernels[" + std::to_string(r) + "][" + std::to_string(c) + "]"));
  }
  std::vector<double> weights = j.contains("baseline_weights") ? detail::numbers(j, "baseline_weights", where)
                                                                : std::vector<double>(k, 1.0);
  return MultiKernel(k, std::move(entries), std::move(weights));
}

inline Json to_json(const MultiKernel& m) {
  if (m.dimension() == 1 && m.baseline_weights()[0] == 1.0) return to_json(m.entry(0, 0));
  Json rows = Json::array();
  for (std::size_t i = 0; i < m.dimension(); ++i) {
    Json row = Json::array();
    for (std::size_t j = 0; j < m.dimension(); ++j) row.push_back(to_json(m.entry(i, j)));
    rows.push_back(row);
  }
  return {{"dimension", m.dimension()}, {"kernels", rows}, {"baseline_weights", m.baseline_weights()}};
}

/// {"type": "exponential", "rate": r} | {"type": "deterministic", "duration": d}
/// | {"type": "lognormal", "log_mean": m, "log_sd": s} | {"type": "tabulated_inverse_cdf", "values": [...]}
inline ServiceDistribution service_from_json(const Json& j, const std::string& where = "service") {
  const std::string type = detail::type_of(j, where);
  if (type == "exponential") return ServiceDistribution::exponential(detail::number(j, "rate", where));
  if (type == "deterministic") return ServiceDistribution::deterministic(detail::number(j, "duration", where));
  if (type == "lognormal")
    return ServiceDistribution::lognormal(detail::number(j, "log_mean", where), detail::number(j, "log_sd", where));
  if (type == "tabulated_inverse_cdf") return ServiceDistribution::tabulated_inverse_cdf(detail::numbers(j, "values", where));
  throw ConfigError(where + ".type: unknown service type '" + type + "'");
}

inline Json to_json(const ServiceDistribution& f) {
  return std::visit(
      [](const auto& d) -> Json {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, ExponentialService>) return {{"type", "exponential"}, {"rate", d.rate}};
        else if constexpr (std::is_same_v<T, DeterministicService>)
          return {{"type", "deterministic"}, {"duration", d.duration}};
        else if constexpr (std::is_same_v<T, LogNormalService>)
          return {{"type", "lognormal"}, {"log_mean", d.log_mean}, {"log_sd", d.log_sd}};
        else
          return {{"type", "tabulated_inverse_cdf"}, {"values", d.values}};
      },
      f.variant());
}

inline Json to_json(const Eigen::MatrixXd& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

inline Json to_json(const Eigen::VectorXd& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

/// {R, M, Xtilde, phi_tilde_at: {omega: value}, residual, condition_number}
inline Json to_json(const LaplacePipelineResult& r, const std::vector<double>& omegas = {0.5, 1.0, 2.0}) {
  Json at = Json::object();
  for (double w : omegas) {
    std::ostringstream key;
    key << w;
    at[key.str()] = r.phi_tilde(w);
  }
  return {{"R", to_json(r.R)},
          {"M", to_json(r.M)},
          {"Xtilde", to_json(r.X)},
          {"phi_tilde_at", at},
          {"residual", r.residual},
          {"condition_number", r.condition_number}};
}

}  // namespace hawkesq
