#include "spherecl/cli.hpp"

#include <Eigen/Core>

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "spherecl/errors.hpp"
#include "spherecl/geometry.hpp"
#include "spherecl/kernels.hpp"
#include "spherecl/losses.hpp"
#include "spherecl/metrics.hpp"
#include "spherecl/optimize.hpp"
#include "spherecl/sampling.hpp"

namespace spherecl::cli {

namespace {

using nlohmann::json;

void check_keys(const json& obj, const std::set<std::string>& allowed,
                const std::string& ctx) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (allowed.find(it.key()) == allowed.end()) {
      throw ConfigError("unknown key '" + it.key() + "' in " + ctx);
    }
  }
}

const json& req(const json& obj, const std::string& key,
                const std::string& ctx) {
  auto it = obj.find(key);
  if (it == obj.end()) {
    throw ConfigError("missing required key '" + key + "' in " + ctx);
  }
  return *it;
}

int as_int(const json& v, const std::string& ctx) {
  if (!v.is_number_integer()) throw ConfigError(ctx + " must be an integer");
  return v.get<int>();
}

long long as_int64(const json& v, const std::string& ctx) {
  if (!v.is_number_integer()) throw ConfigError(ctx + " must be an integer");
  return v.get<long long>();
}

double as_real(const json& v, const std::string& ctx) {
  if (!v.is_number()) throw ConfigError(ctx + " must be a number");
  return v.get<double>();
}

bool as_bool(const json& v, const std::string& ctx) {
  if (!v.is_boolean()) throw ConfigError(ctx + " must be a boolean");
  return v.get<bool>();
}

std::string as_string(const json& v, const std::string& ctx) {
  if (!v.is_string()) throw ConfigError(ctx + " must be a string");
  return v.get<std::string>();
}

int opt_int(const json& obj, const std::string& key, int fallback,
            const std::string& ctx) {
  auto it = obj.find(key);
  return it == obj.end() ? fallback : as_int(*it, ctx + "." + key);
}

long long opt_int64(const json& obj, const std::string& key,
                    long long fallback, const std::string& ctx) {
  auto it = obj.find(key);
  return it == obj.end() ? fallback : as_int64(*it, ctx + "." + key);
}

double opt_real(const json& obj, const std::string& key, double fallback,
                const std::string& ctx) {
  auto it = obj.find(key);
  return it == obj.end() ? fallback : as_real(*it, ctx + "." + key);
}

bool opt_bool(const json& obj, const std::string& key, bool fallback,
              const std::string& ctx) {
  auto it = obj.find(key);
  return it == obj.end() ? fallback : as_bool(*it, ctx + "." + key);
}

std::string opt_string(const json& obj, const std::string& key,
                       const std::string& fallback, const std::string& ctx) {
  auto it = obj.find(key);
  return it == obj.end() ? fallback : as_string(*it, ctx + "." + key);
}

std::pair<KernelSpec, json> parse_kernel(const json& j,
                                         const std::string& ctx) {
  if (!j.is_object()) throw ConfigError(ctx + " must be an object");
  const std::string name = as_string(req(j, "family", ctx), ctx + ".family");
  const KernelFamily family = kernel_family_from_name(name);
  json echo;
  echo["family"] = name;
  switch (family) {
    case KernelFamily::linear:
    case KernelFamily::gaussian: {
      check_keys(j, {"family", "t"}, ctx);
      const double t = opt_real(j, "t", 1.0, ctx);
      echo["t"] = t;
      return {family == KernelFamily::linear ? linear_kernel(t)
                                             : gaussian_kernel(t),
              echo};
    }
    case KernelFamily::riesz: {
      check_keys(j, {"family", "s"}, ctx);
      const double s = opt_real(j, "s", 1.0, ctx);
      echo["s"] = s;
      return {riesz_kernel(s), echo};
    }
    case KernelFamily::logarithmic: {
      check_keys(j, {"family", "s", "beta"}, ctx);
      const double s = opt_real(j, "s", 1.0, ctx);
      const double beta = opt_real(j, "beta", 1.0, ctx);
      echo["s"] = s;
      echo["beta"] = beta;
      return {logarithmic_kernel(s, beta), echo};
    }
  }
  throw ConfigError("unhandled kernel family in " + ctx);
}

std::pair<LossSpec, json> parse_loss(const json& j) {
  if (!j.is_object()) throw ConfigError("loss must be an object");
  const std::string name =
      as_string(req(j, "variant", "loss"), "loss.variant");
  const LossVariant variant = loss_variant_from_name(name);
  const bool symmetric = opt_bool(j, "symmetric", false, "loss");
  json echo;
  echo["variant"] = name;
  echo["symmetric"] = symmetric;
  if (is_named_infonce_family(variant)) {
    check_keys(j, {"variant", "tau", "symmetric"}, "loss");
    const double tau = as_real(req(j, "tau", "loss"), "loss.tau");
    echo["tau"] = tau;
    return {named_loss(variant, tau, symmetric), echo};
  }
  if (variant == LossVariant::kcl) {
    check_keys(j, {"variant", "kernel_a", "kernel_u", "gamma", "symmetric"},
               "loss");
    auto [kernel_a, echo_a] =
        parse_kernel(req(j, "kernel_a", "loss"), "loss.kernel_a");
    auto [kernel_u, echo_u] =
        parse_kernel(req(j, "kernel_u", "loss"), "loss.kernel_u");
    const double gamma = opt_real(j, "gamma", 1.0, "loss");
    echo["kernel_a"] = echo_a;
    echo["kernel_u"] = echo_u;
    echo["gamma"] = gamma;
    return {kcl_loss(kernel_a, kernel_u, gamma, symmetric), echo};
  }
  throw ConfigError("loss variant '" + name +
                    "' cannot be described in a config document");
}

std::pair<SphereDistribution, json> parse_distribution(const json& j,
                                                       long long default_seed) {
  if (!j.is_object()) throw ConfigError("distribution must be an object");
  const int d = as_int(req(j, "d", "distribution"), "distribution.d");
  const std::string model = as_string(req(j, "pair_model", "distribution"),
                                      "distribution.pair_model");
  const long long seed =
      opt_int64(j, "seed", default_seed, "distribution");
  json echo;
  echo["d"] = d;
  echo["pair_model"] = model;
  echo["seed"] = seed;
  if (model == "perfect") {
    check_keys(j, {"d", "pair_model", "seed"}, "distribution");
    return {perfect_pairs(d, seed), echo};
  }
  if (model == "jitter") {
    check_keys(j, {"d", "pair_model", "sigma", "seed"}, "distribution");
    const double sigma =
        as_real(req(j, "sigma", "distribution"), "distribution.sigma");
    echo["sigma"] = sigma;
    return {jittered_pairs(d, sigma, seed), echo};
  }
  if (model == "clustered") {
    check_keys(j, {"d", "pair_model", "k", "concentration", "seed"},
               "distribution");
    const int k = as_int(req(j, "k", "distribution"), "distribution.k");
    const double concentration = as_real(req(j, "concentration", "distribution"),
                                         "distribution.concentration");
    echo["k"] = k;
    echo["concentration"] = concentration;
    return {clustered_pairs(d, k, concentration, seed), echo};
  }
  throw ConfigError("unknown pair model '" + model + "'");
}

std::pair<OptimizerConfig, json> parse_optimizer(const json* j,
                                                 long long default_seed) {
  OptimizerConfig cfg;
  cfg.seed = default_seed;
  if (j != nullptr) {
    if (!j->is_object()) throw ConfigError("optimizer must be an object");
    check_keys(*j,
               {"learning_rate", "steps", "momentum", "grad_tol", "restarts",
                "seed"},
               "optimizer");
    cfg.learning_rate =
        opt_real(*j, "learning_rate", cfg.learning_rate, "optimizer");
    cfg.steps = opt_int(*j, "steps", cfg.steps, "optimizer");
    cfg.momentum = opt_real(*j, "momentum", cfg.momentum, "optimizer");
    cfg.grad_tol = opt_real(*j, "grad_tol", cfg.grad_tol, "optimizer");
    cfg.restarts = opt_int(*j, "restarts", cfg.restarts, "optimizer");
    cfg.seed = opt_int64(*j, "seed", cfg.seed, "optimizer");
  }
  validate(cfg);
  json echo;
  echo["learning_rate"] = cfg.learning_rate;
  echo["steps"] = cfg.steps;
  echo["momentum"] = cfg.momentum;
  echo["grad_tol"] = cfg.grad_tol;
  echo["restarts"] = cfg.restarts;
  echo["seed"] = cfg.seed;
  return {cfg, echo};
}

Matrix parse_matrix(const json& j, const std::string& ctx) {
  if (!j.is_array() || j.empty()) {
    throw ConfigError(ctx + " must be a non-empty array of rows");
  }
  const std::size_t rows = j.size();
  std::size_t cols = 0;
  Matrix out;
  for (std::size_t i = 0; i < rows; ++i) {
    const json& row = j[i];
    if (!row.is_array() || row.empty()) {
      throw ConfigError(ctx + " rows must be non-empty arrays");
    }
    if (i == 0) {
      cols = row.size();
      out.resize(static_cast<Eigen::Index>(rows),
                 static_cast<Eigen::Index>(cols));
    } else if (row.size() != cols) {
      throw ConfigError(ctx + " rows must all have the same length");
    }
    for (std::size_t c = 0; c < cols; ++c) {
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) =
          as_real(row[c], ctx + " entry");
    }
  }
  return out;
}

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(i, c));
    rows.push_back(row);
  }
  return rows;
}

json check_to_json(const ConfigurationCheck& check) {
  json out;
  out["passed"] = check.passed;
  out["max_deviation"] = check.max_deviation;
  json details;
  for (const auto& [key, value] : check.details) details[key] = value;
  out["details"] = details;
  return out;
}

json predicate_to_json(const PredicateOutcome& p) {
  json out;
  out["holds"] = p.holds;
  out["worst_x"] = p.worst_x;
  out["worst_margin"] = p.worst_margin;
  return out;
}

std::string num_str(double x) { return json(x).dump(); }

void write_lines(const std::string& path, const std::string& header,
                 const std::vector<std::string>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out << header << "\n";
  for (const std::string& row : rows) out << row << "\n";
  out.flush();
  if (!out) throw Error("failed while writing '" + path + "'");
}

struct Prepared {
  std::string command;
  json echo;
  std::function<json()> execute;
};

constexpr const char* kCommonKeys[] = {"command", "seed", "output_path"};

std::set<std::string> with_common(std::set<std::string> keys) {
  for (const char* k : kCommonKeys) keys.insert(k);
  return keys;
}

void prepare_loss_eval(const json& config, long long seed, Prepared& prep) {
  check_keys(config, with_common({"loss", "u", "v", "distribution", "M"}),
             "config");
  auto [spec, loss_echo] = parse_loss(req(config, "loss", "config"));
  prep.echo["loss"] = loss_echo;
  const bool inline_points = config.contains("u") || config.contains("v");
  const bool sampled = config.contains("distribution") || config.contains("M");
  if (inline_points == sampled) {
    throw ConfigError(
        "provide either inline 'u' and 'v' or 'distribution' and 'M'");
  }
  if (inline_points) {
    const EmbeddingBatch u(parse_matrix(req(config, "u", "config"), "u"));
    const EmbeddingBatch v(parse_matrix(req(config, "v", "config"), "v"));
    prep.echo["u"] = matrix_to_json(u.points());
    prep.echo["v"] = matrix_to_json(v.points());
    prep.execute = [spec = spec, u, v]() {
      json r;
      r["loss"] = loss_eval(spec, u, v);
      r["m"] = u.size();
      r["d"] = u.dim();
      return r;
    };
  } else {
    auto [dist, dist_echo] =
        parse_distribution(req(config, "distribution", "config"), seed);
    const int m = as_int(req(config, "M", "config"), "M");
    prep.echo["distribution"] = dist_echo;
    prep.echo["M"] = m;
    prep.execute = [spec = spec, dist = dist, m, seed]() {
      std::mt19937_64 rng = derive_rng(static_cast<unsigned long long>(seed), 0);
      auto [u, v] = sample_positive_batch(dist, m, rng);
      json r;
      r["loss"] = loss_eval(spec, u, v);
      r["m"] = m;
      r["d"] = dist.d;
      return r;
    };
  }
}

void prepare_grad_check(const json& config, long long seed, Prepared& prep) {
  check_keys(config, with_common({"loss", "M", "d", "n_instances", "h"}),
             "config");
  auto [spec, loss_echo] = parse_loss(req(config, "loss", "config"));
  const int m = as_int(req(config, "M", "config"), "M");
  const int d = as_int(req(config, "d", "config"), "d");
  const int n_instances = opt_int(config, "n_instances", 20, "config");
  if (n_instances < 1) throw ConfigError("n_instances must be positive");
  const double h = opt_real(config, "h", 1e-6, "config");
  prep.echo["loss"] = loss_echo;
  prep.echo["M"] = m;
  prep.echo["d"] = d;
  prep.echo["n_instances"] = n_instances;
  prep.echo["h"] = h;
  prep.execute = [spec = spec, m, d, n_instances, h, seed]() {
    double max_rel = 0.0;
    for (int i = 0; i < n_instances; ++i) {
      std::mt19937_64 rng = derive_rng(static_cast<unsigned long long>(seed),
                                       static_cast<unsigned long long>(i));
      const EmbeddingBatch u = sample_uniform_sphere(d, m, rng);
      const EmbeddingBatch v = sample_uniform_sphere(d, m, rng);
      const auto [gu, gv] = loss_grad(spec, u, v);
      const auto [fu, fv] = finite_diff_grad(spec, u, v, h);
      const double diff = std::sqrt((gu - fu).squaredNorm() +
                                    (gv - fv).squaredNorm());
      const double base = std::max(
          {std::sqrt(gu.squaredNorm() + gv.squaredNorm()),
           std::sqrt(fu.squaredNorm() + fv.squaredNorm()), 1e-12});
      max_rel = std::max(max_rel, diff / base);
    }
    json r;
    r["max_rel_error"] = max_rel;
    r["n_instances"] = n_instances;
    r["h"] = h;
    return r;
  };
}

void prepare_optimize(const json& config, long long seed, Prepared& prep) {
  check_keys(config,
             with_common({"loss", "M", "d", "optimizer", "trajectory_path"}),
             "config");
  auto [spec, loss_echo] = parse_loss(req(config, "loss", "config"));
  const int m = as_int(req(config, "M", "config"), "M");
  const int d = as_int(req(config, "d", "config"), "d");
  const json* opt_json =
      config.contains("optimizer") ? &config.at("optimizer") : nullptr;
  auto [cfg, opt_echo] = parse_optimizer(opt_json, seed);
  const std::string trajectory_path =
      opt_string(config, "trajectory_path", "", "config");
  prep.echo["loss"] = loss_echo;
  prep.echo["M"] = m;
  prep.echo["d"] = d;
  prep.echo["optimizer"] = opt_echo;
  prep.echo["trajectory_path"] = trajectory_path;
  prep.execute = [spec = spec, m, d, cfg = cfg, trajectory_path]() {
    const OptimizeResult res = optimize_free_embeddings(spec, m, d, cfg);
    if (!trajectory_path.empty()) {
      std::vector<std::string> rows;
      rows.reserve(res.trajectory.size());
      for (const TrajectoryPoint& p : res.trajectory) {
        rows.push_back(std::to_string(p.step) + "," + num_str(p.loss) + "," +
                       num_str(p.grad_norm));
      }
      write_lines(trajectory_path, "step,loss,grad_norm", rows);
    }
    json r;
    r["best_loss"] = res.best_loss;
    r["converged"] = res.converged;
    r["best_restart"] = res.best_restart;
    r["restarts_used"] = res.restarts_used;
    r["aborted_restarts"] = res.aborted_restarts;
    r["alignment_gap"] = alignment_gap(res.u, res.v);
    r["trajectory_points"] = res.trajectory.size();
    r["u"] = matrix_to_json(res.u.points());
    r["v"] = matrix_to_json(res.v.points());
    return r;
  };
}

void prepare_verify(const json& config, long long seed, Prepared& prep) {
  check_keys(config,
             with_common({"loss", "theorem", "M", "d", "optimizer", "tol",
                          "energy_rel_tol"}),
             "config");
  auto [spec, loss_echo] = parse_loss(req(config, "loss", "config"));
  const std::string theorem =
      opt_string(config, "theorem", "simplex", "config");
  const int d = as_int(req(config, "d", "config"), "d");
  const json* opt_json =
      config.contains("optimizer") ? &config.at("optimizer") : nullptr;
  auto [cfg, opt_echo] = parse_optimizer(opt_json, seed);
  const double tol = opt_real(config, "tol", 1e-3, "config");
  const double energy_rel_tol =
      opt_real(config, "energy_rel_tol", 1e-4, "config");
  prep.echo["loss"] = loss_echo;
  prep.echo["theorem"] = theorem;
  prep.echo["d"] = d;
  prep.echo["optimizer"] = opt_echo;
  prep.echo["tol"] = tol;
  prep.echo["energy_rel_tol"] = energy_rel_tol;

  if (theorem == "simplex") {
    const int m = as_int(req(config, "M", "config"), "M");
    prep.echo["M"] = m;
    prep.execute = [spec = spec, m, d, cfg = cfg, tol]() {
      const TheoremVerdict verdict =
          verify_simplex_theorem(spec, m, d, cfg, tol);
      json r;
      r["passed"] = verdict.passed;
      r["best_loss"] = verdict.best_loss;
      r["alignment_gap"] = verdict.alignment_gap;
      r["converged"] = verdict.converged;
      r["restarts_used"] = verdict.restarts_used;
      r["m"] = verdict.m;
      r["d"] = verdict.d;
      r["simplex_check"] = check_to_json(*verdict.simplex_check);
      return r;
    };
    return;
  }
  if (theorem == "cross_polytope") {
    const int m = opt_int(config, "M", 2 * d, "config");
    if (m != 2 * d) {
      throw ConfigError("cross-polytope verification requires M = 2d");
    }
    prep.echo["M"] = m;
    prep.execute = [spec = spec, d, cfg = cfg, tol, energy_rel_tol]() {
      const TheoremVerdict verdict =
          verify_cross_polytope(spec, d, cfg, tol, energy_rel_tol);
      json r;
      r["passed"] = verdict.passed;
      r["best_loss"] = verdict.best_loss;
      r["alignment_gap"] = verdict.alignment_gap;
      r["converged"] = verdict.converged;
      r["restarts_used"] = verdict.restarts_used;
      r["m"] = verdict.m;
      r["d"] = verdict.d;
      r["cross_polytope_check"] =
          check_to_json(*verdict.cross_polytope_check);
      r["final_energy"] = verdict.final_energy;
      r["reference_energy"] = verdict.reference_energy;
      r["energy_rel_err"] = verdict.energy_rel_err;
      return r;
    };
    return;
  }
  throw ConfigError("theorem must be 'simplex' or 'cross_polytope'");
}

void prepare_expectation(const json& config, long long seed, Prepared& prep) {
  check_keys(config,
             with_common({"loss", "distribution", "estimator", "M",
                          "n_batches", "n_samples"}),
             "config");
  auto [spec, loss_echo] = parse_loss(req(config, "loss", "config"));
  auto [dist, dist_echo] =
      parse_distribution(req(config, "distribution", "config"), seed);
  const std::string estimator =
      opt_string(config, "estimator", "finite", "config");
  prep.echo["loss"] = loss_echo;
  prep.echo["distribution"] = dist_echo;
  prep.echo["estimator"] = estimator;
  if (estimator == "finite") {
    if (config.contains("n_samples")) {
      throw ConfigError("'n_samples' does not apply to the finite estimator");
    }
    const int m = as_int(req(config, "M", "config"), "M");
    const int n_batches = opt_int(config, "n_batches", 100, "config");
    prep.echo["M"] = m;
    prep.echo["n_batches"] = n_batches;
    prep.execute = [spec = spec, dist = dist, m, n_batches, seed]() {
      const ExpectationEstimate est =
          estimate_expected_loss(spec, dist, m, n_batches, seed);
      json r;
      r["mean"] = est.mean;
      r["std_error"] = est.std_error;
      r["n_batches"] = est.n_batches;
      r["m"] = est.m;
      return r;
    };
    return;
  }
  if (estimator == "asymptotic") {
    if (config.contains("M") || config.contains("n_batches")) {
      throw ConfigError(
          "'M' and 'n_batches' do not apply to the asymptotic estimator");
    }
    const int n_samples = opt_int(config, "n_samples", 5000, "config");
    prep.echo["n_samples"] = n_samples;
    prep.execute = [spec = spec, dist = dist, n_samples, seed]() {
      const AsymptoticEstimate est =
          estimate_asymptotic_loss_detailed(spec, dist, n_samples, seed);
      json r;
      r["value"] = est.value;
      r["std_error"] = est.std_error;
      r["n_samples"] = est.n_samples;
      return r;
    };
    return;
  }
  throw ConfigError("estimator must be 'finite' or 'asymptotic'");
}

void prepare_convergence(const json& config, long long seed, Prepared& prep) {
  check_keys(config,
             with_common({"loss", "distribution", "m_list", "n_batches",
                          "n_samples", "csv_path"}),
             "config");
  auto [spec, loss_echo] = parse_loss(req(config, "loss", "config"));
  auto [dist, dist_echo] =
      parse_distribution(req(config, "distribution", "config"), seed);
  const json& m_json = req(config, "m_list", "config");
  if (!m_json.is_array() || m_json.empty()) {
    throw ConfigError("m_list must be a non-empty array of integers");
  }
  std::vector<int> m_list;
  m_list.reserve(m_json.size());
  for (const json& entry : m_json) {
    m_list.push_back(as_int(entry, "m_list entry"));
  }
  const int n_batches = opt_int(config, "n_batches", 100, "config");
  const int n_samples = opt_int(config, "n_samples", 5000, "config");
  const std::string csv_path = opt_string(config, "csv_path", "", "config");
  prep.echo["loss"] = loss_echo;
  prep.echo["distribution"] = dist_echo;
  prep.echo["m_list"] = m_list;
  prep.echo["n_batches"] = n_batches;
  prep.echo["n_samples"] = n_samples;
  prep.echo["csv_path"] = csv_path;
  prep.execute = [spec = spec, dist = dist, m_list, n_batches, n_samples,
                  csv_path, seed]() {
    const ConvergenceStudy study =
        convergence_study(spec, dist, m_list, n_batches, n_samples, seed);
    if (!csv_path.empty()) {
      std::vector<std::string> rows;
      rows.reserve(study.points.size());
      for (const ConvergencePoint& p : study.points) {
        rows.push_back(std::to_string(p.m) + "," + num_str(p.normalized_mean) +
                       "," + num_str(p.std_error));
      }
      write_lines(csv_path, "m,normalized_mean,std_error", rows);
    }
    json points = json::array();
    for (const ConvergencePoint& p : study.points) {
      json point;
      point["m"] = p.m;
      point["normalized_mean"] = p.normalized_mean;
      point["std_error"] = p.std_error;
      points.push_back(point);
    }
    json r;
    r["points"] = points;
    json asym;
    asym["value"] = study.asymptotic.value;
    asym["std_error"] = study.asymptotic.std_error;
    asym["n_samples"] = study.asymptotic.n_samples;
    r["asymptotic"] = asym;
    return r;
  };
}

void prepare_metrics(const json& config, long long seed, Prepared& prep) {
  check_keys(config,
             with_common({"u", "v", "distribution", "M", "t", "n_ref"}),
             "config");
  const double t = opt_real(config, "t", 2.0, "config");
  const int n_ref = opt_int(config, "n_ref", 10000, "config");
  prep.echo["t"] = t;
  prep.echo["n_ref"] = n_ref;
  const bool inline_points = config.contains("u") || config.contains("v");
  const bool sampled = config.contains("distribution") || config.contains("M");
  if (inline_points == sampled) {
    throw ConfigError(
        "provide either inline 'u' and 'v' or 'distribution' and 'M'");
  }
  auto report_json = [](const MetricsReport& rep) {
    json r;
    r["alignment"] = rep.alignment;
    r["uniformity"] = rep.uniformity;
    r["wasserstein"] = rep.wasserstein;
    r["rank"] = rep.rank;
    r["effective_rank"] = rep.effective_rank;
    return r;
  };
  if (inline_points) {
    const EmbeddingBatch u(parse_matrix(req(config, "u", "config"), "u"));
    const EmbeddingBatch v(parse_matrix(req(config, "v", "config"), "v"));
    prep.echo["u"] = matrix_to_json(u.points());
    prep.echo["v"] = matrix_to_json(v.points());
    prep.execute = [u, v, t, n_ref, seed, report_json]() {
      return report_json(compute_metrics(u, v, t, n_ref, seed));
    };
  } else {
    auto [dist, dist_echo] =
        parse_distribution(req(config, "distribution", "config"), seed);
    const int m = as_int(req(config, "M", "config"), "M");
    prep.echo["distribution"] = dist_echo;
    prep.echo["M"] = m;
    prep.execute = [dist = dist, m, t, n_ref, seed, report_json]() {
      std::mt19937_64 rng = derive_rng(static_cast<unsigned long long>(seed), 0);
      auto [u, v] = sample_positive_batch(dist, m, rng);
      return report_json(compute_metrics(u, v, t, n_ref, seed));
    };
  }
}

void prepare_kernel_check(const json& config, Prepared& prep) {
  check_keys(config, with_common({"kernel", "grid_size"}), "config");
  auto [kernel, kernel_echo] =
      parse_kernel(req(config, "kernel", "config"), "kernel");
  const int grid_size = opt_int(config, "grid_size", 401, "config");
  if (grid_size < 2) throw ConfigError("grid_size must be at least 2");
  prep.echo["kernel"] = kernel_echo;
  prep.echo["grid_size"] = grid_size;
  prep.execute = [kernel = kernel, grid_size]() {
    const ConditionReport report = check_conditions(kernel, grid_size);
    json r;
    r["decreasing"] = predicate_to_json(report.decreasing);
    r["convex"] = predicate_to_json(report.convex);
    r["strictly_convex"] = predicate_to_json(report.strictly_convex);
    r["completely_monotone"] =
        predicate_to_json(report.completely_monotone);
    r["strictly_completely_monotone"] =
        predicate_to_json(report.strictly_completely_monotone);
    r["neg_derivative_strictly_completely_monotone"] = predicate_to_json(
        report.neg_derivative_strictly_completely_monotone);
    return r;
  };
}

Prepared prepare(const json& config) {
  if (!config.is_object()) throw ConfigError("config must be a JSON object");
  const std::string command =
      as_string(req(config, "command", "config"), "command");
  const long long seed = opt_int64(config, "seed", 0, "config");
  const std::string output_path =
      opt_string(config, "output_path", "", "config");
  Prepared prep;
  prep.command = command;
  prep.echo["command"] = command;
  prep.echo["seed"] = seed;
  prep.echo["output_path"] = output_path;
  if (command == "loss-eval") {
    prepare_loss_eval(config, seed, prep);
  } else if (command == "grad-check") {
    prepare_grad_check(config, seed, prep);
  } else if (command == "optimize") {
    prepare_optimize(config, seed, prep);
  } else if (command == "verify-theorems") {
    prepare_verify(config, seed, prep);
  } else if (command == "expectation") {
    prepare_expectation(config, seed, prep);
  } else if (command == "convergence") {
    prepare_convergence(config, seed, prep);
  } else if (command == "metrics") {
    prepare_metrics(config, seed, prep);
  } else if (command == "kernel-check") {
    prepare_kernel_check(config, prep);
  } else {
    throw ConfigError("unknown command '" + command + "'");
  }
  return prep;
}

}  // namespace

RunOutput run_from_json(const nlohmann::json& config) {
  const auto start = std::chrono::steady_clock::now();
  Prepared prep;
  try {
    prep = prepare(config);
  } catch (const Error& e) {
    return {2, "", e.what()};
  } catch (const json::exception& e) {
    return {2, "", e.what()};
  }

  json results;
  bool verdict_failed = false;
  try {
    results = prep.execute();
    if (prep.command == "verify-theorems") {
      verdict_failed = !results.at("passed").get<bool>();
    }
  } catch (const Error& e) {
    return {3, "", e.what()};
  } catch (const std::exception& e) {
    return {3, "", e.what()};
  }

  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  json doc;
  doc["command"] = prep.command;
  doc["config_echo"] = prep.echo;
  doc["results"] = results;
  doc["version"] = kVersion;
  doc["wall_time_s"] = wall;

  RunOutput out;
  out.exit_code = verdict_failed ? 1 : 0;
  out.result_json = doc.dump(2) + "\n";
  if (verdict_failed) out.diagnostic = "theorem verification failed";
  return out;
}

RunOutput run_from_text(const std::string& config_text) {
  json config;
  try {
    config = json::parse(config_text);
  } catch (const json::parse_error& e) {
    return {2, "", e.what()};
  }
  return run_from_json(config);
}

void apply_thread_env() {
  const char* env = std::getenv("SPHERE_CL_THREADS");
  if (env == nullptr) return;
  char* end = nullptr;
  const long n = std::strtol(env, &end, 10);
  if (end == env || *end != '\0' || n < 0) return;
  if (n > 0) Eigen::setNbThreads(static_cast<int>(n));
}

int run_main(int argc, char** argv) {
  CLI::App app{
      "Contrastive losses on the sphere: evaluate, optimize, verify, "
      "estimate"};
  std::string config_path;
  app.add_option("--config", config_path, "experiment config JSON file")
      ->required();
  long long seed_override = 0;
  CLI::Option* seed_opt =
      app.add_option("--seed", seed_override, "override the config seed");
  std::string output_override;
  CLI::Option* output_opt = app.add_option(
      "--output", output_override, "override the result document path");
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  apply_thread_env();

  std::ifstream in(config_path, std::ios::binary);
  if (!in) {
    std::cerr << "error: cannot read config '" << config_path << "'\n";
    return 2;
  }
  std::stringstream buffer;
  buffer << in.rdbuf();
  json config;
  try {
    config = json::parse(buffer.str());
  } catch (const json::parse_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  if (!config.is_object()) {
    std::cerr << "error: config must be a JSON object\n";
    return 2;
  }
  if (seed_opt->count() > 0) config["seed"] = seed_override;
  if (output_opt->count() > 0) config["output_path"] = output_override;

  const RunOutput out = run_from_json(config);
  if (!out.diagnostic.empty()) {
    std::cerr << "error: " << out.diagnostic << "\n";
  }
  if (!out.result_json.empty()) {
    std::string path;
    if (config.contains("output_path") && config["output_path"].is_string()) {
      path = config["output_path"].get<std::string>();
    }
    if (path.empty()) {
      std::cout << out.result_json;
    } else {
      std::ofstream result_file(path, std::ios::binary);
      if (!result_file) {
        std::cerr << "error: cannot open '" << path << "' for writing\n";
        return 3;
      }
      result_file << out.result_json;
    }
  }
  return out.exit_code;
}

}  // namespace spherecl::cli
