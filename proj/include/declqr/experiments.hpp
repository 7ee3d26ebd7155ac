#pragma once

// The identify -> synthesize -> run pipeline and the sweeps built on it.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "declqr/bounds.hpp"
#include "declqr/serialization.hpp"

namespace declqr {

// ---- gen ---------------------------------------------------------------------

SystemModel generate_system(const DirectedDelayGraph& g, const Partition& part, const GeneratorOptions& options,
                            std::uint64_t seed);

// ---- pipeline --------------------------------------------------------------------

struct PipelineOptions {
  int samples = 100;
  double sigma_u = 1.0;
  std::optional<double> lambda;  // default min(sigma_w, sigma_u)^2 / 40
  int t_eval = 2000;
  std::uint64_t seed = 0;
  bool oracle_model = false;  // use (A, B) in place of the estimate
  ControllerKind controller = ControllerKind::kCeDecentralized;
};

struct ExperimentRecord {
  int samples = 0;
  int trial = 0;
  std::uint64_t seed = 0;
  std::string status = "ok";  // or a failure tag
  std::string message;
  double est_error = 0.0;  // ||[A^ B^] - [A B]||
  double j_hat = 0.0;
  double j_star = 0.0;
  std::optional<double> j_tilde;
  double subopt = 0.0;  // J^ - J*, never clamped

  bool ok() const { return status == "ok"; }
};

// A fully prepared plant: model, network and true-model gains.
struct Plant {
  SystemModel model;
  Network net;
  GainSet gains;
  double j_star = 0.0;

  Plant() = default;
  Plant(SystemModel m, const DirectedDelayGraph& g);
};

// Numerical failures become tagged records; validation errors propagate.
ExperimentRecord run_pipeline(const Plant& plant, const PipelineOptions& options);

// ---- sweep ----------------------------------------------------------------------------

struct Quartiles {
  double q25 = 0.0;
  double q50 = 0.0;
  double q75 = 0.0;
};

// Linear interpolation between order statistics. Requires a nonempty input.
Quartiles quartiles(std::vector<double> values);

// Least-squares slope of log(y) on log(x) over points with x, y > 0; NaN when
// fewer than two such points remain.
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

struct SweepConfig {
  std::vector<int> grid;
  int trials = 100;
  int t_eval = 2000;
  double sigma_u = 1.0;
  std::optional<double> lambda;
  std::uint64_t base_seed = 0;
  bool per_trial_system = false;
  GeneratorOptions gen;  // used by the per-trial mode
  ControllerKind controller = ControllerKind::kCeDecentralized;
  int threads = 0;  // 0: hardware concurrency
};

struct SweepRow {
  int samples = 0;
  int ok = 0;
  int failed = 0;
  Quartiles est_error;
  Quartiles subopt;
};

struct SweepResult {
  std::vector<ExperimentRecord> records;  // (N, trial) order
  std::vector<SweepRow> rows;
  double est_error_slope = 0.0;
  double subopt_slope = 0.0;
};

// Trial seeds are base_seed + trial. In per-trial mode each trial draws its
// own system from the graph and the partition of `plant`.
SweepResult run_sweep(const Plant& plant, const DirectedDelayGraph& g, const SweepConfig& config);

std::string sweep_csv(const SweepResult& result);
Json sweep_summary(const SweepResult& result, const SweepConfig& config);

// ---- bounds ------------------------------------------------------------------------------

// Direction with unit spectral norm, drawn from the seed.
Matrix unit_direction(int rows, int cols, std::uint64_t seed);

// Evaluates every bound at each eps with A^ = A + eps U, B^ = B + eps V.
Json bounds_report(const Plant& plant, const std::vector<double>& eps_grid, double phi, std::uint64_t seed);

// ---- runs ----------------------------------------------------------------------------------

struct RunSpec {
  ControllerKind controller = ControllerKind::kOptimal;
  int horizon = 1000;
  std::uint64_t seed = 0;
  int samples = 200;  // identification length for ce-* and tilde
  double sigma_u = 1.0;
  std::optional<double> lambda;
};

struct RunOutput {
  ClosedLoopRun run;
  Json manifest;
};

// Self-contained manifest: embeds the system so a replay needs nothing else.
RunOutput run_and_record(const Plant& plant, const DirectedDelayGraph& g, const RunSpec& spec);
RunOutput replay(const Json& manifest);

}  // namespace declqr
