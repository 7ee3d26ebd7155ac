#include <CLI11.hpp>

#include <iostream>
#include <sstream>

#include "declqr/errors.hpp"
#include "declqr/experiments.hpp"

using namespace declqr;

namespace {

void emit(const std::string& text, const std::string& path) {
  if (path.empty()) {
    std::cout << text;
  } else {
    write_text_file(path, text);
  }
}

std::vector<int> parse_grid(const std::string& spec) {
  std::vector<int> out;
  if (spec.find(':') != std::string::npos) {
    int lo = 0, hi = 0, step = 0;
    char c1 = 0, c2 = 0;
    std::istringstream in(spec);
    if (!(in >> lo >> c1 >> hi >> c2 >> step) || c1 != ':' || c2 != ':' || step <= 0 || lo > hi) {
      throw ValidationError("grid must look like lo:hi:step");
    }
    for (int v = lo; v <= hi; v += step) out.push_back(v);
    return out;
  }
  std::istringstream in(spec);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      out.push_back(std::stoi(item));
    } catch (const std::exception&) {
      throw ValidationError("bad grid entry '" + item + "'");
    }
  }
  return out;
}

std::vector<int> dims_or_ones(const std::vector<int>& dims, int p) {
  return dims.empty() ? std::vector<int>(static_cast<std::size_t>(p), 1) : dims;
}

Json record_json(const ExperimentRecord& r) {
  return {{"N", r.samples},
          {"seed", r.seed},
          {"status", r.status},
          {"message", r.message},
          {"est_error", r.est_error},
          {"J_hat", r.ok() ? Json(r.j_hat) : Json(nullptr)},
          {"J_star", r.j_star},
          {"J_tilde", r.j_tilde ? Json(*r.j_tilde) : Json(nullptr)},
          {"subopt", r.ok() ? Json(r.subopt) : Json(nullptr)}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Learned decentralized LQR under delayed, sparse information"};
  app.require_subcommand(1);

  std::string graph_path, system_path, out_path, csv_path, summary_path, manifest_path, replay_path;
  std::uint64_t seed = 0;
  std::vector<int> state_dims, input_dims;
  GeneratorOptions gen;

  auto* gen_cmd = app.add_subcommand("gen", "Generate a random system on a graph");
  gen_cmd->add_option("--graph", graph_path, "Graph JSON")->required();
  gen_cmd->add_option("--state-dims", state_dims, "Per-subsystem state dimensions (default 1)")->delimiter(',');
  gen_cmd->add_option("--input-dims", input_dims, "Per-subsystem input dimensions (default 1)")->delimiter(',');
  gen_cmd->add_option("--rho-target", gen.rho_target, "Spectral radius cap for A")->capture_default_str();
  gen_cmd->add_option("--q-scale", gen.q_scale, "Q = q I")->capture_default_str();
  gen_cmd->add_option("--r-scale", gen.r_scale, "R = r I")->capture_default_str();
  gen_cmd->add_option("--sigma-w", gen.sigma_w, "Noise standard deviation")->capture_default_str();
  gen_cmd->add_option("--seed", seed, "Seed")->required();
  gen_cmd->add_option("--out", out_path, "Output file (stdout if omitted)");

  PipelineOptions pipe;
  std::string controller = "ce-decentralized";
  auto* pipe_cmd = app.add_subcommand("pipeline", "Identify, synthesize and evaluate once");
  pipe_cmd->add_option("--system", system_path, "System JSON")->required();
  pipe_cmd->add_option("--samples", pipe.samples, "Identification length N")->required();
  pipe_cmd->add_option("--sigma-u", pipe.sigma_u, "Exploration input std")->capture_default_str();
  double lambda = 0.0;
  pipe_cmd->add_option("--lambda", lambda, "Ridge parameter (default min(sigma_w, sigma_u)^2 / 40)");
  pipe_cmd->add_option("--T", pipe.t_eval, "Evaluation horizon")->capture_default_str();
  pipe_cmd->add_option("--seed", seed, "Seed")->required();
  pipe_cmd->add_flag("--oracle-model", pipe.oracle_model, "Use the true (A, B) in place of the estimate");
  pipe_cmd->add_option("--controller", controller, "ce-decentralized | ce-centralized")->capture_default_str();
  pipe_cmd->add_option("--out", out_path, "Output file (stdout if omitted)");

  SweepConfig sweep;
  std::string grid = "20:280:20";
  auto* sweep_cmd = app.add_subcommand("sweep", "Estimation error and suboptimality over an N grid");
  sweep_cmd->add_option("--system", system_path, "System JSON")->required();
  sweep_cmd->add_option("--grid", grid, "lo:hi:step or a comma list")->capture_default_str();
  sweep_cmd->add_option("--trials", sweep.trials, "Trials per N")->capture_default_str();
  sweep_cmd->add_option("--T", sweep.t_eval, "Evaluation horizon")->capture_default_str();
  sweep_cmd->add_option("--sigma-u", sweep.sigma_u, "Exploration input std")->capture_default_str();
  sweep_cmd->add_option("--lambda", lambda, "Ridge parameter");
  sweep_cmd->add_option("--seed", seed, "Base seed; trial k uses seed + k")->required();
  sweep_cmd->add_flag("--per-trial-system", sweep.per_trial_system, "Draw a fresh system per trial");
  sweep_cmd->add_option("--rho-target", sweep.gen.rho_target, "Generator setting for per-trial systems");
  sweep_cmd->add_option("--threads", sweep.threads, "Worker threads (0: all cores)")->capture_default_str();
  sweep_cmd->add_option("--csv", csv_path, "Records CSV (stdout if omitted)");
  sweep_cmd->add_option("--summary", summary_path, "Summary JSON");

  std::vector<double> eps_grid{0.0};
  double phi = 0.01;
  auto* bounds_cmd = app.add_subcommand("bounds", "Evaluate the theoretical bounds on an eps grid");
  bounds_cmd->add_option("--system", system_path, "System JSON")->required();
  bounds_cmd->add_option("--eps", eps_grid, "Comma list of perturbation sizes")->delimiter(',');
  bool relative = false;
  bounds_cmd->add_flag("--relative", relative, "Interpret --eps as multiples of eps_bar");
  bounds_cmd->add_option("--phi", phi, "Slack in the J~ - J* bound")->capture_default_str();
  bounds_cmd->add_option("--seed", seed, "Seed for the perturbation directions")->required();
  bounds_cmd->add_option("--out", out_path, "Output file (stdout if omitted)");

  RunSpec run;
  std::string run_controller = "optimal";
  auto* sim_cmd = app.add_subcommand("simulate", "Run one closed loop and export it");
  sim_cmd->add_option("--system", system_path, "System JSON");
  sim_cmd->add_option("--controller", run_controller, "optimal | ce-centralized | ce-decentralized | tilde")
      ->capture_default_str();
  sim_cmd->add_option("--T", run.horizon, "Horizon")->capture_default_str();
  sim_cmd->add_option("--samples", run.samples, "Identification length for learned controllers")
      ->capture_default_str();
  sim_cmd->add_option("--sigma-u", run.sigma_u, "Exploration input std")->capture_default_str();
  sim_cmd->add_option("--seed", seed, "Seed");
  sim_cmd->add_option("--csv", csv_path, "Trajectory CSV");
  sim_cmd->add_option("--manifest", manifest_path, "Run manifest JSON (stdout if omitted)");
  sim_cmd->add_option("--replay", replay_path, "Re-execute a manifest");

  auto* ig_cmd = app.add_subcommand("infograph", "Print the information graph");
  ig_cmd->add_option("--graph", graph_path, "Graph JSON");
  ig_cmd->add_option("--system", system_path, "System JSON (its graph is used)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (gen_cmd->parsed()) {
      const auto g = graph_from_json(read_json_file(graph_path));
      const Partition part(dims_or_ones(state_dims, g.size()), dims_or_ones(input_dims, g.size()));
      emit(system_to_json(generate_system(g, part, gen, seed), g).dump(2) + "\n", out_path);
    } else if (pipe_cmd->parsed()) {
      const auto loaded = system_from_json(read_json_file(system_path));
      const Plant plant(loaded.model, loaded.graph);
      pipe.seed = seed;
      pipe.controller = controller_kind_from_string(controller);
      if (pipe_cmd->count("--lambda")) pipe.lambda = lambda;
      emit(record_json(run_pipeline(plant, pipe)).dump(2) + "\n", out_path);
    } else if (sweep_cmd->parsed()) {
      const auto loaded = system_from_json(read_json_file(system_path));
      const Plant plant(loaded.model, loaded.graph);
      sweep.grid = parse_grid(grid);
      sweep.base_seed = seed;
      sweep.gen.q_scale = loaded.model.Q(0, 0);
      sweep.gen.r_scale = loaded.model.R(0, 0);
      sweep.gen.sigma_w = loaded.model.sigma_w;
      if (sweep_cmd->count("--lambda")) sweep.lambda = lambda;
      const auto result = run_sweep(plant, loaded.graph, sweep);
      emit(sweep_csv(result), csv_path);
      if (!summary_path.empty()) write_text_file(summary_path, sweep_summary(result, sweep).dump(2) + "\n");
    } else if (bounds_cmd->parsed()) {
      const auto loaded = system_from_json(read_json_file(system_path));
      const Plant plant(loaded.model, loaded.graph);
      if (relative) {
        const double eps_bar = problem_constants(plant.model, plant.net, plant.gains).eps_bar;
        for (double& e : eps_grid) e *= eps_bar;
      }
      emit(bounds_report(plant, eps_grid, phi, seed).dump(2) + "\n", out_path);
    } else if (sim_cmd->parsed()) {
      RunOutput result;
      if (!replay_path.empty()) {
        result = replay(read_json_file(replay_path));
      } else {
        if (system_path.empty()) throw ValidationError("simulate needs --system or --replay");
        if (!sim_cmd->count("--seed")) throw ValidationError("simulate needs --seed");
        const auto loaded = system_from_json(read_json_file(system_path));
        const Plant plant(loaded.model, loaded.graph);
        run.controller = controller_kind_from_string(run_controller);
        run.seed = seed;
        result = run_and_record(plant, loaded.graph, run);
      }
      if (!csv_path.empty()) write_text_file(csv_path, trajectory_csv(result.run.traj));
      emit(result.manifest.dump(2) + "\n", manifest_path);
    } else if (ig_cmd->parsed()) {
      DirectedDelayGraph g;
      if (!graph_path.empty()) {
        g = graph_from_json(read_json_file(graph_path));
      } else if (!system_path.empty()) {
        g = system_from_json(read_json_file(system_path)).graph;
      } else {
        throw ValidationError("infograph needs --graph or --system");
      }
      const Network net(g);
      std::cout << infograph_to_json(net.info, net.delays).dump(2) << "\n";
    }
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
