#include <cstdint>
#include <cstdlib>
#include <exception>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mbsched/energy.hpp"
#include "mbsched/io.hpp"
#include "mbsched/sim.hpp"
#include "mbsched/solver.hpp"
#include "mbsched/verify.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitBadInput = 1;
constexpr int kExitCheckFailed = 2;

// MULTIBAND_SCHED_THREADS caps the fan-out of sweep and verify; unset or 0
// means "all cores". Results are identical for every value.
unsigned thread_cap_from_env() {
  const char* raw = std::getenv("MULTIBAND_SCHED_THREADS");
  if (raw == nullptr || *raw == '\0') return 0;
  char* end = nullptr;
  const long v = std::strtol(raw, &end, 10);
  if (end == raw || *end != '\0' || v < 1)
    throw std::invalid_argument(
        "MULTIBAND_SCHED_THREADS must be a positive integer, got \"" + std::string(raw) + "\"");
  return static_cast<unsigned>(v);
}

int cmd_solve(const std::string& problem_path, const std::string& out_path) {
  const mbsched::SolveProblem p = mbsched::load_problem(problem_path);
  const std::vector<double> solver_gains = mbsched::perturb_ties(p.gains);
  const mbsched::DecodeOrder ord = mbsched::decode_order(solver_gains);
  std::vector<double> gains(p.gains.size()), queues(p.gains.size());
  for (std::size_t k = 0; k < ord.order.size(); ++k) {
    gains[k] = solver_gains[ord.order[k]];
    queues[k] = p.queues[ord.order[k]];
  }
  const mbsched::BandProblem prob =
      mbsched::make_band_problem(gains, queues, p.v_param * p.noise_psd);
  const mbsched::SolverSolution sol = mbsched::solve_band(prob);
  mbsched::write_solve_json(out_path, p, ord, sol);
  std::cout << "solved " << p.gains.size() << " users in " << sol.iterations
            << " drops, objective " << mbsched::format_double(sol.objective) << ", wrote "
            << out_path << "\n";
  return kExitOk;
}

int cmd_simulate(const std::string& scenario_path, const std::string& out_dir,
                 std::optional<std::int64_t> horizon, std::optional<std::uint64_t> seed) {
  mbsched::Scenario sc = mbsched::load_scenario(scenario_path);
  if (horizon) sc.horizon = *horizon;
  if (seed) sc.seed = *seed;
  const mbsched::SimTrace trace = mbsched::run_simulation(sc);
  const std::string summary_path = out_dir + "/summary.json";
  const std::string trace_path = out_dir + "/trace.csv";
  mbsched::write_summary_json(summary_path, trace);
  mbsched::write_trace_csv(trace_path, trace);
  std::cout << "simulated " << trace.horizon << " slots (seed " << trace.seed
            << "): power/slot " << mbsched::format_double(trace.summary.power_efficiency)
            << ", mean total queue " << mbsched::format_double(trace.summary.mean_queue)
            << ", stable "
            << (trace.summary.stability
                    ? (trace.summary.stability->stable ? "yes" : "NO")
                    : "n/a (horizon too short)")
            << "\nwrote " << summary_path << " and " << trace_path << "\n";
  return kExitOk;
}

int cmd_sweep(const std::string& scenario_path, const std::vector<double>& v_values,
              const std::vector<std::uint64_t>& seeds, const std::string& out_path) {
  const mbsched::Scenario sc = mbsched::load_scenario(scenario_path);
  const std::vector<mbsched::SweepRow> rows =
      mbsched::run_sweep(sc, v_values, seeds, thread_cap_from_env());
  const std::string csv = mbsched::format_sweep_csv(rows);
  if (out_path.empty()) {
    std::cout << csv;
  } else {
    mbsched::write_text_file(out_path, csv);
    std::cout << "wrote " << rows.size() << " rows to " << out_path << "\n";
  }
  return kExitOk;
}

int cmd_verify(std::size_t instances, std::uint64_t seed, bool inject_fault) {
  mbsched::SuiteOptions opt;
  opt.instances = instances;
  opt.seed = seed;
  opt.threads = thread_cap_from_env();
  opt.inject_fault = inject_fault;
  if (inject_fault)
    std::cout << "fault injection is ON: solver-facing suites are expected to fail\n";
  const std::vector<mbsched::SuiteResult> results = mbsched::run_all_suites(opt);
  bool all_ok = true;
  for (const mbsched::SuiteResult& r : results) {
    all_ok = all_ok && r.passed;
    std::cout << (r.passed ? "PASS " : "FAIL ") << r.name << " (instances=" << r.instances
              << "): " << r.detail << "\n";
  }
  std::cout << (all_ok ? "VERIFY: PASS" : "VERIFY: FAIL") << "\n";
  return all_ok ? kExitOk : kExitCheckFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"power-aware multi-user multi-band scheduler"};
  app.require_subcommand(1);

  std::string problem_path, solve_out = "solve.json";
  CLI::App* solve = app.add_subcommand("solve", "solve one band allocation problem");
  solve->add_option("problem", problem_path, "problem JSON file")->required();
  solve->add_option("--out", solve_out, "output path for solve.json");

  std::string scenario_path, sim_out;
  std::int64_t horizon_override = 0;
  std::uint64_t seed_override = 0;
  CLI::App* simulate = app.add_subcommand("simulate", "run one scenario and write trace+summary");
  simulate->add_option("scenario", scenario_path, "scenario JSON file")->required();
  simulate->add_option("--out", sim_out, "output directory")->required();
  CLI::Option* horizon_opt =
      simulate->add_option("--horizon", horizon_override, "override the scenario horizon");
  CLI::Option* seed_opt = simulate->add_option("--seed", seed_override, "override the seed");

  std::string sweep_scenario, sweep_out;
  std::vector<double> v_values;
  std::vector<std::uint64_t> sweep_seeds;
  CLI::App* sweep = app.add_subcommand("sweep", "grid of runs over v values and seeds");
  sweep->add_option("scenario", sweep_scenario, "scenario JSON file")->required();
  sweep->add_option("--v-values", v_values, "comma-separated v values")
      ->required()
      ->delimiter(',');
  sweep->add_option("--seeds", sweep_seeds, "comma-separated seeds")->required()->delimiter(',');
  sweep->add_option("--out", sweep_out, "output CSV path (default: stdout)");

  std::size_t instances = 1000;
  std::uint64_t verify_seed = mbsched::kDefaultVerifySeed;
  bool inject_fault = false;
  CLI::App* verify = app.add_subcommand("verify", "run the solver certification suites");
  verify->add_option("--instances", instances, "random instances per suite")
      ->check(CLI::PositiveNumber);
  verify->add_option("--seed", verify_seed, "master seed for instance generation");
  verify->add_flag("--inject-fault", inject_fault)->group("");  // negative control, hidden

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);  // prints the message
    return kExitBadInput;
  }

  try {
    if (solve->parsed()) return cmd_solve(problem_path, solve_out);
    if (simulate->parsed())
      return cmd_simulate(
          scenario_path, sim_out,
          horizon_opt->count() ? std::optional<std::int64_t>(horizon_override) : std::nullopt,
          seed_opt->count() ? std::optional<std::uint64_t>(seed_override) : std::nullopt);
    if (sweep->parsed()) return cmd_sweep(sweep_scenario, v_values, sweep_seeds, sweep_out);
    if (verify->parsed()) return cmd_verify(instances, verify_seed, inject_fault);
  } catch (const mbsched::SolverConsistencyError& e) {
    std::cerr << "solver consistency failure: " << e.what() << "\n";
    const mbsched::KktReport& k = e.partial().kkt;
    std::cerr << "  iterations=" << e.partial().iterations
              << " stationarity=" << k.max_stationarity << " min_lambda=" << k.min_lambda
              << "\n";
    return kExitCheckFailed;
  } catch (const std::overflow_error& e) {
    std::cerr << "numeric overflow: " << e.what() << "\n";
    return kExitCheckFailed;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitBadInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitBadInput;
  }
  return kExitBadInput;  // unreachable with require_subcommand(1)
}
