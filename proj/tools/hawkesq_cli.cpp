// hawkesq: configuration-driven experiments for stationary Hawkes processes and
// Hawkes-driven infinite-server queues.
//
// Exit codes: 0 pass, 1 statistical check failed, 2 configuration error,
// 3 numerical error.
#include <CLI11.hpp>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <regex>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "hawkesq/hawkesq.hpp"
#include "hawkesq/json_io.hpp"

#ifndef HAWKESQ_VERSION
#define HAWKESQ_VERSION "unknown"
#endif

namespace fs = std::filesystem;
using namespace hawkesq;

namespace {

constexpr int kSchemaVersion = 1;
constexpr int kExitPass = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

/// Reads fields of one JSON object and rejects keys nobody asked for.
class Fields {
 public:
  Fields(const Json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_ + ": expected an object");
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key) && !j_.at(key).is_null();
  }
  const Json& raw(const std::string& key) {
    seen_.insert(key);
    return detail::require(j_, key.c_str(), where_);
  }
  double number(const std::string& key) {
    seen_.insert(key);
    return detail::number(j_, key.c_str(), where_);
  }
  double number(const std::string& key, double fallback) { return has(key) ? number(key) : fallback; }
  std::uint64_t count(const std::string& key, std::uint64_t fallback) {
    if (!has(key)) return fallback;
    const Json& v = j_.at(key);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0))
      throw ConfigError(where_ + "." + key + ": expected a nonnegative integer");
    return v.get<std::uint64_t>();
  }
  std::string text(const std::string& key, const std::string& fallback) {
    if (!has(key)) return fallback;
    if (!j_.at(key).is_string()) throw ConfigError(where_ + "." + key + ": expected a string");
    return j_.at(key).get<std::string>();
  }
  bool flag(const std::string& key, bool fallback) {
    if (!has(key)) return fallback;
    if (!j_.at(key).is_boolean()) throw ConfigError(where_ + "." + key + ": expected true or false");
    return j_.at(key).get<bool>();
  }
  std::vector<double> numbers(const std::string& key) {
    seen_.insert(key);
    return detail::numbers(j_, key.c_str(), where_);
  }
  std::vector<double> numbers(const std::string& key, std::vector<double> fallback) {
    return has(key) ? numbers(key) : fallback;
  }

  void finish() const {
    for (const auto& item : j_.items())
      if (!seen_.count(item.key())) throw ConfigError(where_ + "." + item.key() + ": unknown field");
  }

 private:
  const Json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> reps;
  std::optional<unsigned> threads;
};

struct Common {
  std::string name;
  MultiKernel kernel;
};

Common read_common(Fields& f, const std::string& command, Json& resolved) {
  if (f.has("schema_version")) {
    const Json& v = f.raw("schema_version");
    if (!v.is_number_integer() || v.get<int>() != kSchemaVersion)
      throw ConfigError("schema_version: expected " + std::to_string(kSchemaVersion));
  }
  if (f.has("command") && f.text("command", command) != command)
    throw ConfigError("command: config is for '" + f.text("command", "") + "', not '" + command + "'");
  Common c;
  c.name = f.text("name", "run");
  if (!std::regex_match(c.name, std::regex("[A-Za-z0-9._-]+")))
    throw ConfigError("name: use letters, digits, '.', '_' or '-'");
  c.kernel = multikernel_from_json(f.raw("kernel"), "kernel");
  resolved["schema_version"] = kSchemaVersion;
  resolved["command"] = command;
  resolved["name"] = c.name;
  resolved["kernel"] = to_json(c.kernel);
  return c;
}

double positive(double x, const std::string& where) {
  if (!(x > 0.0) || !std::isfinite(x)) throw ConfigError(where + ": must be > 0");
  return x;
}

/// Grid whose t_max covers both the kernel tails and `cover`.
PhiGrid read_grid(Fields& parent, const MultiKernel& kern, double cover, Json& resolved) {
  PhiGrid grid;
  std::optional<double> t_max;
  std::string solver = "gmres";
  if (parent.has("grid")) {
    Fields g(parent.raw("grid"), "grid");
    grid.step = positive(g.number("step", 0.01), "grid.step");
    if (g.has("t_max")) t_max = positive(g.number("t_max"), "grid.t_max");
    solver = g.text("solver", solver);
    g.finish();
  }
  if (solver == "gmres") grid.solver = PhiSolver::Gmres;
  else if (solver == "dense") grid.solver = PhiSolver::Dense;
  else if (solver == "picard") grid.solver = PhiSolver::Picard;
  else throw ConfigError("grid.solver: expected gmres, dense or picard");
  if (!t_max) {
    const double need = std::max(default_t_max(kern, grid.step), cover);
    t_max = std::ceil(need / grid.step - 1e-9) * grid.step;
  }
  if (*t_max < cover) throw ConfigError("grid.t_max must cover the largest requested time");
  grid.t_max = t_max;
  resolved["grid"] = {{"step", grid.step}, {"t_max", *t_max}, {"solver", solver}};
  return grid;
}

std::vector<ServiceModel> read_services(Fields& f, std::size_t k, Json& resolved) {
  const auto unit = ServiceDistribution::exponential(1.0);
  std::vector<ServiceModel> out(k, ServiceModel{unit, unit});
  if (f.has("service")) {
    const Json& s = f.raw("service");
    auto one = [](const Json& j, const std::string& where) {
      if (j.is_object() && j.contains("type")) {
        const auto d = service_from_json(j, where);
        return ServiceModel{d, d};
      }
      Fields m(j, where);
      ServiceModel sm{service_from_json(m.raw("initial"), where + ".initial"),
                      service_from_json(m.raw("arrival"), where + ".arrival")};
      m.finish();
      return sm;
    };
    if (s.is_array()) {
      if (s.size() != k) throw ConfigError("service: expected one entry per class");
      for (std::size_t i = 0; i < k; ++i) out[i] = one(s[i], "service[" + std::to_string(i) + "]");
    } else {
      out.assign(k, one(s, "service"));
    }
  }
  Json arr = Json::array();
  for (const auto& sm : out) arr.push_back({{"initial", to_json(sm.initial)}, {"arrival", to_json(sm.arrival)}});
  resolved["service"] = arr;
  return out;
}

Engine read_engine(Fields& f, Json& resolved) {
  const Engine e = engine_from_string(f.text("engine", "cluster"));
  resolved["engine"] = to_string(e);
  return e;
}

/// Seed, replications and threads with command-line overrides applied.
void read_run(Fields& f, const Overrides& o, std::uint64_t default_reps, SimConfig& sim, Json& resolved) {
  const auto seed = f.count("seed", 1), reps = f.count("replications", default_reps), threads = f.count("threads", 1);
  sim.seed = o.seed.value_or(seed);
  sim.replications = o.reps.value_or(reps);
  sim.threads = o.threads.value_or(static_cast<unsigned>(threads));
  if (sim.replications < 2) throw ConfigError("replications: need at least 2");
  if (sim.threads < 1) throw ConfigError("threads: need at least 1");
  resolved["seed"] = sim.seed;
  resolved["replications"] = sim.replications;
  resolved["threads"] = sim.threads;
}

Json moment_json(const MomentEstimate& m) {
  return {{"t", m.t},
          {"mean", to_json(Eigen::VectorXd(m.mean))},
          {"mean_se", to_json(Eigen::VectorXd(m.mean_se))},
          {"cov", to_json(Eigen::MatrixXd(m.cov))},
          {"cov_se", to_json(Eigen::MatrixXd(m.cov_se))}};
}

Json estimate_json(const Estimate& e, double theory) {
  return {{"empirical", e.value}, {"se", e.se}, {"theory", theory}, {"z", e.z(theory)}};
}

std::string number_tag(double x) {
  std::ostringstream os;
  os << x;
  return os.str();
}

/// Output directory plus the list of files written into it.
class Run {
 public:
  Run(const fs::path& root, const std::string& command, const std::string& name)
      : dir_(root / command / name), command_(command) {
    fs::create_directories(dir_);
  }

  template <class Writer>
  void file(const std::string& name, Writer&& write) {
    std::ofstream os(dir_ / name, std::ios::binary);
    if (!os) throw ConfigError("cannot write " + (dir_ / name).string());
    write(os);
    if (!os) throw ConfigError("write failed for " + (dir_ / name).string());
    outputs_.push_back(name);
  }

  void json(const std::string& name, const Json& j) {
    file(name, [&](std::ostream& os) { os << j.dump(2) << '\n'; });
  }

  void manifest(const Json& resolved, bool passed) {
    Json m{{"tool", "hawkesq"},
           {"version", HAWKESQ_VERSION},
           {"command", command_},
           {"schema_version", kSchemaVersion},
           {"config", resolved},
           {"outputs", outputs_},
           {"passed", passed}};
    std::ofstream os(dir_ / "manifest.json", std::ios::binary);
    os << m.dump(2) << '\n';
    std::cout << "wrote " << (dir_ / "manifest.json").string() << '\n';
  }

 private:
  fs::path dir_;
  std::string command_;
  std::vector<std::string> outputs_;
};

int cmd_simulate(const Json& config, const Overrides& o, const fs::path& out) {
  Json resolved;
  Fields f(config, "config");
  const Common c = read_common(f, "simulate", resolved);
  const double mu = positive(f.number("mu"), "mu");
  resolved["mu"] = mu;
  SimConfig sim{HawkesConfig(mu, c.kernel), positive(f.number("horizon"), "horizon"), std::nullopt};
  resolved["horizon"] = sim.horizon;
  sim.engine = read_engine(f, resolved);
  read_run(f, o, 100, sim, resolved);
  sim.burn_in = f.has("burn_in") ? f.number("burn_in") : default_burn_in(sim.config);
  resolved["burn_in"] = *sim.burn_in;
  const auto times = f.numbers("moment_times", {sim.horizon});
  for (double t : times)
    if (!(t >= 0.0 && t <= sim.horizon)) throw ConfigError("moment_times: must lie in [0, horizon]");
  resolved["moment_times"] = times;
  const bool write_paths = f.flag("write_paths", true);
  resolved["write_paths"] = write_paths;
  f.finish();

  const auto paths = simulate_replications(sim);
  Run run(out, "simulate", c.name);
  if (write_paths) run.file("paths.csv", [&](std::ostream& os) { write_paths_csv(os, paths); });
  Json moments = Json::array();
  for (const auto& m : empirical_moments(paths, times)) moments.push_back(moment_json(m));
  Eigen::VectorXd rate(sim.config.dimension());
  for (std::size_t i = 0; i < sim.config.dimension(); ++i) {
    double total = 0.0;
    for (const auto& p : paths) total += static_cast<double>(p.times[i].size());
    rate(i) = total / (static_cast<double>(paths.size()) * sim.horizon);
  }
  run.json("moments.json", {{"mean_rate", to_json(rate)},
                            {"mean_rate_theory", to_json(Eigen::VectorXd(sim.config.mean_rates()))},
                            {"moments", moments}});
  run.manifest(resolved, true);
  std::cout << "simulated " << paths.size() << " paths; mean rate " << rate.transpose() << " (theory "
            << sim.config.mean_rates().transpose() << ")\n";
  return kExitPass;
}

int cmd_analyze(const Json& config, const fs::path& out) {
  Json resolved;
  Fields f(config, "config");
  const Common c = read_common(f, "analyze", resolved);
  const auto cov_times = f.numbers("cov_times", {0.5, 1.0, 2.0, 5.0, 10.0});
  for (double t : cov_times)
    if (!(t >= 0.0)) throw ConfigError("cov_times: must be >= 0");
  resolved["cov_times"] = cov_times;
  const double cover = cov_times.empty() ? 0.0 : *std::max_element(cov_times.begin(), cov_times.end());
  const PhiGrid grid = read_grid(f, c.kernel, cover, resolved);
  const auto stride = f.count("variance_stride", 1);
  resolved["variance_stride"] = stride;
  const auto omegas = f.numbers("laplace_omegas", {0.5, 1.0, 2.0});
  resolved["laplace_omegas"] = omegas;
  f.finish();

  const HawkesConfig cfg(1.0, c.kernel);
  const auto phi = solve_multivariate_phi(c.kernel, grid);
  const auto v = variance_function(phi);
  const std::size_t k = phi.dim;
  Run run(out, "analyze", c.name);
  run.file("phi.csv", [&](std::ostream& os) { write_phi_csv(os, phi); });
  run.file("variance.csv", [&](std::ostream& os) { write_variance_csv(os, v, stride); });
  run.file("cov_G.csv", [&](std::ostream& os) {
    if (k == 1) return write_cov_G_csv(os, v, cov_times);
    os.precision(17);
    os << "s,t,i,j,cov\n";
    for (double s : cov_times)
      for (double t : cov_times)
        for (std::size_t i = 0; i < k; ++i)
          for (std::size_t j = 0; j < k; ++j) os << s << ',' << t << ',' << i << ',' << j << ',' << v.cov(i, s, j, t) << '\n';
  });
  Json summary{{"dimension", k},
               {"norm_matrix", to_json(Eigen::MatrixXd(c.kernel.norm_matrix()))},
               {"spectral_radius", cfg.spectral_radius()},
               {"unit_rates", to_json(Eigen::VectorXd(phi.unit_rates))},
               {"residual", phi.residual},
               {"iterations", phi.iterations},
               {"min_phi", phi.min_value()}};
  std::cout << "phi residual " << phi.residual << '\n';
  if (k == 1) {
    const Kernel& h = c.kernel.entry(0, 0);
    Json asym{{"slope", asymptotic_slope(h)}, {"grid_slope", v.slope}, {"grid_offset", v.offset}};
    try {
      asym["offset"] = asymptotic_offset(h);
    } catch (const IntegrabilityError& e) {
      asym["offset"] = nullptr;
      asym["offset_note"] = e.what();
    }
    run.json("asymptotics.json", asym);
    summary["var_Xe_infty"] = var_Xe_infty(h);
    summary["var_Xe_infty_grid"] = var_Xe_infty(phi);
    if (h.as_sum_exp() && !h.is_zero()) {
      const auto lp = laplace_pipeline(h);
      run.json("laplace.json", to_json(lp, omegas));
    }
    std::cout << "slope " << asym["slope"] << ", offset " << asym["offset"] << ", Var(X_e(inf)) "
              << summary["var_Xe_infty"] << '\n';
  } else {
    const Eigen::MatrixXd ss = steady_state_cov_multi(phi, Eigen::VectorXd::Ones(static_cast<Eigen::Index>(k)));
    summary["steady_state_cov_unit_service"] = to_json(ss);
  }
  run.json("summary.json", summary);
  run.manifest(resolved, true);
  return kExitPass;
}

int cmd_validate_fclt(const Json& config, const Overrides& o, const fs::path& out) {
  Json resolved;
  Fields f(config, "config");
  const Common c = read_common(f, "validate-fclt", resolved);
  const double mu = positive(f.number("mu"), "mu");
  resolved["mu"] = mu;
  const auto probes = f.numbers("probe_times");
  std::vector<std::pair<double, double>> pairs;
  if (f.has("cov_pairs")) {
    const Json& p = f.raw("cov_pairs");
    if (!p.is_array()) throw ConfigError("cov_pairs: expected an array of [s, t]");
    for (const auto& e : p) {
      if (!e.is_array() || e.size() != 2 || !e[0].is_number() || !e[1].is_number())
        throw ConfigError("cov_pairs: expected an array of [s, t]");
      pairs.emplace_back(e[0].get<double>(), e[1].get<double>());
    }
  }
  double horizon = 0.0;
  for (double t : probes) horizon = std::max(horizon, positive(t, "probe_times"));
  Json pairs_json = Json::array();
  for (auto [s, t] : pairs) {
    horizon = std::max({horizon, positive(s, "cov_pairs"), positive(t, "cov_pairs")});
    pairs_json.push_back({s, t});
  }
  if (!(horizon > 0.0)) throw ConfigError("probe_times: need at least one time");
  resolved["probe_times"] = probes;
  resolved["cov_pairs"] = pairs_json;
  SimConfig sim{HawkesConfig(mu, c.kernel), horizon, std::nullopt};
  sim.engine = read_engine(f, resolved);
  read_run(f, o, 1000, sim, resolved);
  sim.burn_in = f.has("burn_in") ? f.number("burn_in") : default_burn_in(sim.config);
  resolved["burn_in"] = *sim.burn_in;
  const PhiGrid grid = read_grid(f, c.kernel, horizon, resolved);
  const double threshold = f.number("z_threshold", 3.0);
  resolved["z_threshold"] = threshold;
  f.finish();

  const auto v = variance_function(solve_multivariate_phi(c.kernel, grid));
  const auto paths = simulate_replications(sim);
  const std::size_t k = sim.config.dimension();
  const Eigen::VectorXd rate = sim.config.mean_rates();
  auto scaled = [&](std::size_t i, double t) {
    auto n = counts_at(paths, i, t);
    for (double& x : n) x = (x - rate(i) * t) / std::sqrt(mu);
    return n;
  };
  Json checks = Json::array();
  bool pass = true;
  auto check = [&](const char* what, std::size_t i, double s, std::size_t j, double t) {
    const auto a = scaled(i, s), b = scaled(j, t);
    std::vector<double> prod(a.size());
    for (std::size_t n = 0; n < a.size(); ++n) prod[n] = a[n] * b[n];
    const double theory = v.cov(i, s, j, t);
    Json e = estimate_json(sample_mean(prod), theory);
    e["quantity"] = what;
    e["i"] = i;
    e["j"] = j;
    e["s"] = s;
    e["t"] = t;
    const double z = e["z"].get<double>();
    e["pass"] = std::abs(z) < threshold;
    pass = pass && std::abs(z) < threshold;
    std::cout << what << " (" << i << "," << j << ") at (" << s << "," << t << "): " << e["empirical"] << " vs "
              << theory << ", z = " << z << '\n';
    checks.push_back(e);
  };
  for (double t : probes)
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = i; j < k; ++j) check(i == j ? "variance" : "cross_covariance", i, t, j, t);
  for (auto [s, t] : pairs)
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = 0; j < k; ++j) check("covariance", i, s, j, t);
  Run run(out, "validate-fclt", c.name);
  run.json("report.json", {{"pass", pass}, {"checks", checks}});
  run.manifest(resolved, pass);
  return pass ? kExitPass : kExitCheckFailed;
}

int cmd_validate_queue(const Json& config, const Overrides& o, const fs::path& out) {
  Json resolved;
  Fields f(config, "config");
  const Common c = read_common(f, "validate-queue", resolved);
  std::vector<double> mus;
  if (f.has("mu_values")) mus = f.numbers("mu_values");
  if (f.has("mu")) mus.push_back(f.number("mu"));
  if (mus.empty()) throw ConfigError("config: need mu or mu_values");
  for (double m : mus) positive(m, "mu_values");
  resolved["mu_values"] = mus;
  const std::size_t k = c.kernel.dimension();
  const auto services = read_services(f, k, resolved);
  SimConfig run_cfg{HawkesConfig(1.0, c.kernel), 1.0, std::nullopt};
  run_cfg.engine = read_engine(f, resolved);
  read_run(f, o, 100, run_cfg, resolved);
  const auto samples = f.count("samples", 10000);
  resolved["samples"] = samples;
  const double spacing = f.number("spacing", 0.0), t_burn = f.number("t_burn", 0.0);
  const PhiGrid grid = read_grid(f, c.kernel, 0.0, resolved);
  const double threshold = f.number("z_threshold", 3.0);
  resolved["z_threshold"] = threshold;
  f.finish();

  const auto phi = solve_multivariate_phi(c.kernel, grid);
  const Eigen::VectorXd a = phi.unit_rates;
  bool exponential = true;
  Eigen::VectorXd r(static_cast<Eigen::Index>(k));
  for (std::size_t i = 0; i < k; ++i) {
    const auto* e = std::get_if<ExponentialService>(&services[i].arrival.variant());
    exponential = exponential && e;
    r(i) = e ? e->rate : 0.0;
  }
  Run run(out, "validate-queue", c.name);
  Json results = Json::array();
  bool pass = true;
  double resolved_spacing = 0.0, resolved_burn = 0.0;
  for (std::size_t n = 0; n < mus.size(); ++n) {
    const double mu = mus[n];
    SteadyStateConfig q{HawkesConfig(mu, c.kernel), services};
    q.samples = samples;
    q.replications = run_cfg.replications;
    q.spacing = spacing;
    q.t_burn = t_burn;
    q.engine = run_cfg.engine;
    q.seed = run_cfg.seed + n;
    q.threads = run_cfg.threads;
    const auto res = steady_state_sample(q);
    resolved_spacing = res.spacing;
    resolved_burn = res.t_burn;
    Json entry{{"mu", mu}, {"seed", q.seed}, {"samples", res.samples()}};
    Json mean = Json::array();
    for (std::size_t i = 0; i < k; ++i) {
      const double theory = mu * a(i) * services[i].arrival.mean();
      mean.push_back(estimate_json(res.mean[i], theory));
      pass = pass && std::abs(res.mean[i].z(theory)) < threshold;
    }
    entry["mean"] = mean;
    if (k == 1) {
      const auto& f_arr = services[0].arrival;
      const double var = mu * var_X_infty(f_arr, phi);
      const Estimate ev = res.variance(0);
      Json jv = estimate_json(ev, var);
      jv["relative_gap"] = ev.value / var - 1.0;
      entry["variance"] = jv;
      pass = pass && std::abs(ev.z(var)) < threshold;
      const GaussianQueueApprox g{mu * a(0) * f_arr.mean(), std::sqrt(var)};
      const auto emp = res.pmf(0);
      const auto gauss = g.pmf_table(emp.size() + static_cast<std::size_t>(10.0 * g.sigma));
      const auto cmp = compare_distributions(emp, gauss);
      entry["gaussian"] = {{"mean", g.mean}, {"sd", g.sigma}};
      entry["tv_distance"] = cmp.tv_distance;
      entry["max_pmf_gap"] = cmp.max_gap;
      const std::string file = "pmf_mu" + number_tag(mu) + ".csv";
      run.file(file, [&](std::ostream& os) { write_histogram_csv(os, emp, gauss); });
      entry["pmf_file"] = file;
      std::cout << "mu " << mu << ": mean " << res.mean[0].value << ", variance " << ev.value << " vs " << var
                << ", TV " << cmp.tv_distance << '\n';
    } else if (exponential) {
      const Eigen::MatrixXd theory = mu * steady_state_cov_multi(phi, r);
      Json cov = Json::array();
      for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = i; j < k; ++j) {
          const Estimate e{res.cov(i, j), res.cov_se(i, j)};
          Json ej = estimate_json(e, theory(i, j));
          ej["i"] = i;
          ej["j"] = j;
          cov.push_back(ej);
          pass = pass && std::abs(e.z(theory(i, j))) < threshold;
          std::cout << "mu " << mu << ": Cov(Q" << i << ", Q" << j << ") " << e.value << " vs " << theory(i, j)
                    << ", z = " << e.z(theory(i, j)) << '\n';
        }
      entry["covariance"] = cov;
    } else {
      entry["covariance"] = {{"empirical", to_json(res.cov)}, {"se", to_json(res.cov_se)}};
      entry["note"] = "no covariance theory for multivariate non-exponential service";
    }
    results.push_back(entry);
  }
  resolved["spacing"] = resolved_spacing;
  resolved["t_burn"] = resolved_burn;
  run.json("comparison.json", {{"pass", pass}, {"results", results}});
  run.manifest(resolved, pass);
  return pass ? kExitPass : kExitCheckFailed;
}

Json load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config " + path);
  Json j;
  try {
    j = Json::parse(is);
  } catch (const Json::parse_error& e) {
    throw ConfigError(path + ": malformed JSON: " + e.what());
  }
  // a manifest from a previous run replays its resolved config
  if (j.is_object() && j.contains("tool") && j.contains("config")) return j.at("config");
  return j;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stationary Hawkes processes and Hawkes-driven infinite-server queues"};
  app.set_version_flag("--version", std::string(HAWKESQ_VERSION));
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = "out";
  Overrides o;
  auto add_common = [&](CLI::App* sub, bool stochastic) {
    sub->add_option("--config", config_path, "JSON config or a previous manifest.json")->required();
    sub->add_option("--out", out_dir, "output root; results go to <out>/<command>/<name>/");
    if (!stochastic) return;
    sub->add_option("--seed", o.seed, "override the config seed");
    sub->add_option("--reps", o.reps, "override the number of replications");
    sub->add_option("--threads", o.threads, "worker threads (results do not depend on it)");
  };
  auto* simulate = app.add_subcommand("simulate", "simulate Hawkes paths and count moments");
  auto* analyze = app.add_subcommand("analyze", "covariance density, variance function and asymptotics");
  auto* fclt = app.add_subcommand("validate-fclt", "compare scaled count covariances with the FCLT limit");
  auto* queue = app.add_subcommand("validate-queue", "compare steady-state queue lengths with the Gaussian limit");
  add_common(simulate, true);
  add_common(analyze, false);
  add_common(fclt, true);
  add_common(queue, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    const Json config = load_config(config_path);
    if (simulate->parsed()) return cmd_simulate(config, o, out_dir);
    if (analyze->parsed()) return cmd_analyze(config, out_dir);
    if (fclt->parsed()) return cmd_validate_fclt(config, o, out_dir);
    return cmd_validate_queue(config, o, out_dir);
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const StabilityError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const RangeError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const Json::exception& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitNumerical;
  }
}
