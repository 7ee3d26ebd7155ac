#include "declqr/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <sstream>
#include <thread>

#include "declqr/errors.hpp"

namespace declqr {

SystemModel generate_system(const DirectedDelayGraph& g, const Partition& part, const GeneratorOptions& options,
                            std::uint64_t seed) {
  const Network net(g);
  return generate_random_system(net, part, options, seed);
}

Plant::Plant(SystemModel m, const DirectedDelayGraph& g) : model(std::move(m)), net(g) {
  model.check_shapes();
  if (model.partition.p() != net.graph.size()) throw ShapeMismatch("partition does not match the graph");
  gains = synthesize_gains(model, net.info);
  j_star = optimal_cost(gains, net.info, model.partition, model.sigma_w);
}

namespace {

Matrix stack_theta(const Matrix& a, const Matrix& b) {
  Matrix theta(a.rows(), a.cols() + b.cols());
  theta << a, b;
  return theta;
}

}  // namespace

ExperimentRecord run_pipeline(const Plant& plant, const PipelineOptions& options) {
  const SystemModel& model = plant.model;
  ExperimentRecord rec;
  rec.samples = options.samples;
  rec.seed = options.seed;
  rec.j_star = plant.j_star;

  Matrix a_hat = model.A;
  Matrix b_hat = model.B;
  if (!options.oracle_model) {
    const auto data = collect(model, options.samples, options.sigma_u, derive_seed(options.seed, 10));
    const double lambda = options.lambda.value_or(default_lambda(model.sigma_w, options.sigma_u));
    const Estimate est = estimate(data, lambda);
    a_hat = est.A_hat;
    b_hat = est.B_hat;
  }
  rec.est_error = spectral_norm(stack_theta(a_hat, b_hat) - stack_theta(model.A, model.B));

  try {
    const GainSet est_gains = synthesize_gains(a_hat, b_hat, model, plant.net.info, GainKind::kEstimate);
    rec.j_tilde = tilde_P_and_cost(est_gains, model, plant.net.info).cost;
    ClosedLoopConfig cfg;
    cfg.kind = options.controller;
    cfg.horizon = options.t_eval;
    cfg.seed = derive_seed(options.seed, 20);
    cfg.a_hat = a_hat;
    cfg.b_hat = b_hat;
    cfg.estimate_gains = &est_gains;
    cfg.true_gains = &plant.gains;
    const auto run = run_closed_loop(model, plant.net, cfg);
    rec.j_hat = run.cost;
    if (!std::isfinite(rec.j_hat)) {
      rec.status = "diverged";
      rec.message = "closed-loop cost is not finite";
    }
  } catch (const NoConvergence& e) {
    rec.status = "no-convergence";
    rec.message = e.what();
  } catch (const UnstableMixedLoop& e) {
    rec.status = "unstable-mixed-loop";
    rec.message = e.what();
  } catch (const NumericalError& e) {
    rec.status = "numerical-failure";
    rec.message = e.what();
  }
  rec.subopt = rec.j_hat - rec.j_star;
  return rec;
}

Quartiles quartiles(std::vector<double> values) {
  if (values.empty()) throw ValidationError("quartiles of an empty sample");
  std::sort(values.begin(), values.end());
  const auto at = [&](double q) {
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
  };
  return {at(0.25), at(0.5), at(0.75)};
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  std::vector<double> lx, ly;
  for (std::size_t k = 0; k < std::min(x.size(), y.size()); ++k) {
    if (x[k] > 0.0 && y[k] > 0.0) {
      lx.push_back(std::log(x[k]));
      ly.push_back(std::log(y[k]));
    }
  }
  if (lx.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  const double n = static_cast<double>(lx.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t k = 0; k < lx.size(); ++k) {
    mx += lx[k];
    my += ly[k];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t k = 0; k < lx.size(); ++k) {
    sxy += (lx[k] - mx) * (ly[k] - my);
    sxx += (lx[k] - mx) * (lx[k] - mx);
  }
  return sxy / sxx;
}

SweepResult run_sweep(const Plant& plant, const DirectedDelayGraph& g, const SweepConfig& config) {
  if (config.trials < 1) throw ValidationError("trials must be at least 1");
  if (config.grid.empty()) throw ValidationError("empty N grid");
  for (std::size_t k = 1; k < config.grid.size(); ++k) {
    if (config.grid[k] <= config.grid[k - 1]) throw ValidationError("N grid must be strictly ascending");
  }

  // Systems are shared across N: trial k always sees the same plant.
  std::vector<Plant> trial_plants;
  if (config.per_trial_system) {
    for (int k = 0; k < config.trials; ++k) {
      const std::uint64_t seed = derive_seed(config.base_seed + static_cast<std::uint64_t>(k), 99);
      trial_plants.emplace_back(generate_random_system(plant.net, plant.model.partition, config.gen, seed), g);
    }
  }

  const int cells = static_cast<int>(config.grid.size()) * config.trials;
  SweepResult result;
  result.records.resize(static_cast<std::size_t>(cells));
  std::atomic<int> next{0};
  const auto worker = [&] {
    for (int c = next++; c < cells; c = next++) {
      const int trial = c % config.trials;
      PipelineOptions opt;
      opt.samples = config.grid[static_cast<std::size_t>(c / config.trials)];
      opt.sigma_u = config.sigma_u;
      opt.lambda = config.lambda;
      opt.t_eval = config.t_eval;
      opt.seed = config.base_seed + static_cast<std::uint64_t>(trial);
      opt.controller = config.controller;
      const Plant& p = config.per_trial_system ? trial_plants[static_cast<std::size_t>(trial)] : plant;
      ExperimentRecord rec = run_pipeline(p, opt);
      rec.trial = trial;
      result.records[static_cast<std::size_t>(c)] = std::move(rec);
    }
  };
  int threads = config.threads > 0 ? config.threads : static_cast<int>(std::thread::hardware_concurrency());
  threads = std::clamp(threads, 1, cells);
  std::vector<std::thread> pool;
  for (int k = 1; k < threads; ++k) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  std::vector<double> ns, est_medians, sub_medians;
  for (std::size_t gi = 0; gi < config.grid.size(); ++gi) {
    SweepRow row;
    row.samples = config.grid[gi];
    std::vector<double> est, sub;
    for (int k = 0; k < config.trials; ++k) {
      const auto& rec = result.records[gi * static_cast<std::size_t>(config.trials) + static_cast<std::size_t>(k)];
      if (rec.ok()) {
        ++row.ok;
        est.push_back(rec.est_error);
        sub.push_back(rec.subopt);
      } else {
        ++row.failed;
      }
    }
    if (!est.empty()) {
      row.est_error = quartiles(est);
      row.subopt = quartiles(sub);
      ns.push_back(row.samples);
      est_medians.push_back(row.est_error.q50);
      sub_medians.push_back(row.subopt.q50);
    }
    result.rows.push_back(row);
  }
  result.est_error_slope = loglog_slope(ns, est_medians);
  result.subopt_slope = loglog_slope(ns, sub_medians);
  return result;
}

namespace {

std::string num(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

Json quartiles_json(const Quartiles& q) { return {{"q25", q.q25}, {"q50", q.q50}, {"q75", q.q75}}; }

Json finite_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

}  // namespace

std::string sweep_csv(const SweepResult& result) {
  std::ostringstream os;
  os << "# declqr sweep v1\n";
  os << "N,trial,seed,status,est_error,J_hat,J_star,J_tilde,subopt\n";
  for (const auto& r : result.records) {
    os << r.samples << ',' << r.trial << ',' << r.seed << ',' << r.status << ',' << num(r.est_error) << ','
       << (r.ok() ? num(r.j_hat) : "") << ',' << num(r.j_star) << ',' << (r.j_tilde ? num(*r.j_tilde) : "") << ','
       << (r.ok() ? num(r.subopt) : "") << '\n';
  }
  return os.str();
}

Json sweep_summary(const SweepResult& result, const SweepConfig& config) {
  Json rows = Json::array();
  for (const auto& row : result.rows) {
    Json item = {{"N", row.samples}, {"ok", row.ok}, {"failed", row.failed}};
    if (row.ok > 0) {
      item["est_error"] = quartiles_json(row.est_error);
      item["subopt"] = quartiles_json(row.subopt);
    }
    rows.push_back(std::move(item));
  }
  return {{"config",
           {{"grid", config.grid},
            {"trials", config.trials},
            {"T_eval", config.t_eval},
            {"sigma_u", config.sigma_u},
            {"lambda", config.lambda ? Json(*config.lambda) : Json(nullptr)},
            {"base_seed", config.base_seed},
            {"system_mode", config.per_trial_system ? "per-trial" : "fixed"},
            {"controller", to_string(config.controller)}}},
          {"rows", rows},
          {"slopes", {{"est_error", finite_or_null(result.est_error_slope)},
                      {"subopt", finite_or_null(result.subopt_slope)}}}};
}

Matrix unit_direction(int rows, int cols, std::uint64_t seed) {
  Matrix u = gaussian_matrix(rows, cols, 1.0, seed);
  const double norm = spectral_norm(u);
  return norm > 0.0 ? Matrix(u / norm) : u;
}

Json bounds_report(const Plant& plant, const std::vector<double>& eps_grid, double phi, std::uint64_t seed) {
  const SystemModel& model = plant.model;
  const ProblemConstants c = problem_constants(model, plant.net, plant.gains);
  const Matrix u = unit_direction(model.partition.n(), model.partition.n(), derive_seed(seed, 1));
  const Matrix v = unit_direction(model.partition.n(), model.partition.m(), derive_seed(seed, 2));

  Json rows = Json::array();
  for (double eps : eps_grid) {
    if (eps < 0.0) throw ValidationError("eps must be nonnegative");
    const Matrix a_hat = model.A + eps * u;
    const Matrix b_hat = model.B + eps * v;
    Json row = {{"eps", eps}, {"admissible", eps <= c.eps_bar}};
    try {
      const GainSet est = synthesize_gains(a_hat, b_hat, model, plant.net.info, GainKind::kEstimate);
      const auto riccati = riccati_perturbation_bounds(eps, c, plant.net.info, &plant.gains, &est);
      const auto measured = stationary_measurements(model, plant.net, plant.gains, est, a_hat, b_hat);
      const auto costs = suboptimality_bounds(c, eps, phi, &measured);
      row["riccati"] = bound_report_to_json(riccati);
      row["costs"] = bound_report_to_json(costs);
      row["violations"] = riccati.violations() + costs.violations();
    } catch (const NumericalError& e) {
      row["error"] = e.what();
      row["costs"] = bound_report_to_json(suboptimality_bounds(c, eps, phi));
    }
    rows.push_back(std::move(row));
  }
  return {{"constants",
           {{"n", c.n},
            {"m", c.m},
            {"p", c.p},
            {"q", c.q},
            {"d_max", c.d_max},
            {"kappa0", c.stab.kappa0},
            {"gamma0", c.stab.gamma0},
            {"kappa", c.stab.kappa},
            {"gamma", c.stab.gamma},
            {"Gamma", c.mag.Gamma},
            {"Gamma_tilde", c.mag.Gamma_tilde},
            {"zeta_b", c.zeta_b},
            {"eps_bar", c.eps_bar},
            {"root_eps_threshold", root_eps_threshold(c)},
            {"node_eps_threshold", node_eps_threshold(c)}}},
          {"phi", phi},
          {"seed", seed},
          {"rows", rows}};
}

RunOutput run_and_record(const Plant& plant, const DirectedDelayGraph& g, const RunSpec& spec) {
  const SystemModel& model = plant.model;
  ClosedLoopConfig cfg;
  cfg.kind = spec.controller;
  cfg.horizon = spec.horizon;
  cfg.seed = derive_seed(spec.seed, 20);
  cfg.true_gains = &plant.gains;
  GainSet est_gains;
  if (spec.controller == ControllerKind::kCeCentralized || spec.controller == ControllerKind::kCeDecentralized ||
      spec.controller == ControllerKind::kTilde) {
    const auto data = collect(model, spec.samples, spec.sigma_u, derive_seed(spec.seed, 10));
    const Estimate est = estimate(data, spec.lambda.value_or(default_lambda(model.sigma_w, spec.sigma_u)));
    cfg.a_hat = est.A_hat;
    cfg.b_hat = est.B_hat;
    est_gains = synthesize_gains(est.A_hat, est.B_hat, model, plant.net.info, GainKind::kEstimate);
    cfg.estimate_gains = &est_gains;
  } else if (spec.controller == ControllerKind::kExternalInputs) {
    throw ValidationError("external-inputs runs are only available through the library");
  }
  RunOutput out;
  out.run = run_closed_loop(model, plant.net, cfg);
  out.manifest = {{"version", 1},
                  {"controller", to_string(spec.controller)},
                  {"T", spec.horizon},
                  {"seed", spec.seed},
                  {"samples", spec.samples},
                  {"sigma_u", spec.sigma_u},
                  {"lambda", spec.lambda ? Json(*spec.lambda) : Json(nullptr)},
                  {"cost", out.run.cost},
                  {"J_star", plant.j_star},
                  {"system", system_to_json(model, g)}};
  return out;
}

RunOutput replay(const Json& manifest) {
  const auto loaded = system_from_json(manifest.at("system"));
  const Plant plant(loaded.model, loaded.graph);
  RunSpec spec;
  spec.controller = controller_kind_from_string(manifest.at("controller").get<std::string>());
  spec.horizon = manifest.at("T").get<int>();
  spec.seed = manifest.at("seed").get<std::uint64_t>();
  spec.samples = manifest.at("samples").get<int>();
  spec.sigma_u = manifest.at("sigma_u").get<double>();
  if (!manifest.at("lambda").is_null()) spec.lambda = manifest.at("lambda").get<double>();
  return run_and_record(plant, loaded.graph, spec);
}

}  // namespace declqr
