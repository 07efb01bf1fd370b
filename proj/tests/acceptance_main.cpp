// Acceptance gate for the scheduler library: nine checks, one pass/fail line
// each, nonzero exit if any check fails. Budgeted checks also fail when they
// blow their wall-clock allowance.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "mbsched/energy.hpp"
#include "mbsched/rng.hpp"
#include "mbsched/sim.hpp"
#include "mbsched/solver.hpp"
#include "mbsched/verify.hpp"

using namespace mbsched;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

bool report(int criterion, const char* name, bool pass, const std::string& detail,
            double elapsed_s) {
  std::printf("%s %d %s: %s [%.2f s]\n", pass ? "PASS" : "FAIL", criterion, name,
              detail.c_str(), elapsed_s);
  std::fflush(stdout);
  return pass;
}

bool run_suite_criterion(int criterion, const char* name, SuiteResult (*suite)(const SuiteOptions&),
                         std::size_t instances, double budget_s) {
  SuiteOptions opt;
  opt.instances = instances;
  opt.threads = 1;
  const Clock::time_point t0 = Clock::now();
  const SuiteResult res = suite(opt);
  const double dt = seconds_since(t0);
  bool pass = res.passed;
  std::string detail = res.detail;
  if (budget_s > 0 && dt > budget_s) {
    pass = false;
    detail += "; exceeded " + std::to_string(budget_s) + " s budget";
  }
  return report(criterion, name, pass, detail, dt);
}

// --- curve fit of solve time against problem size ---------------------------

BandProblem sized_problem(Rng& rng, std::size_t n) {
  std::vector<double> gains(n), queues(n);
  for (double& g : gains) g = rng.log_uniform(0.01, 10.0);
  gains = perturb_ties(gains);
  std::sort(gains.begin(), gains.end());
  for (double& q : queues) q = rng.uniform(0.0, 50.0);
  static constexpr double kVn0Choices[] = {0.1, 1.0, 10.0};
  return make_band_problem(gains, queues, kVn0Choices[rng.uniform_index(3)]);
}

bool criterion_complexity() {
  const Clock::time_point t0 = Clock::now();
  const std::vector<std::size_t> sizes = {8, 16, 32, 64, 128, 256, 512};
  std::vector<double> log_n, log_t;
  double sink = 0.0;  // keeps the timed solves observable
  for (std::size_t n : sizes) {
    Rng rng(2718, "complexity", n);
    std::vector<BandProblem> probs;
    for (int i = 0; i < 8; ++i) probs.push_back(sized_problem(rng, n));
    for (const BandProblem& p : probs) sink += solve_band(p).objective;  // warm-up

    const Clock::time_point batch0 = Clock::now();
    std::size_t count = 0;
    double elapsed = 0.0;
    while (elapsed < 0.05) {  // accumulate enough work to outvote clock noise
      for (const BandProblem& p : probs) sink += solve_band(p).objective;
      count += probs.size();
      elapsed = seconds_since(batch0);
    }
    log_n.push_back(std::log(static_cast<double>(n)));
    log_t.push_back(std::log(elapsed / static_cast<double>(count)));
  }

  double xm = 0.0, ym = 0.0;
  for (std::size_t i = 0; i < log_n.size(); ++i) {
    xm += log_n[i];
    ym += log_t[i];
  }
  xm /= static_cast<double>(log_n.size());
  ym /= static_cast<double>(log_n.size());
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < log_n.size(); ++i) {
    sxy += (log_n[i] - xm) * (log_t[i] - ym);
    sxx += (log_n[i] - xm) * (log_n[i] - xm);
  }
  const double slope = sxy / sxx;

  const bool pass = slope <= 2.5;
  char buf[160];
  std::snprintf(buf, sizeof buf,
                "log-log runtime exponent %.3f over sizes 8..512 (limit 2.5, checksum %.3g)",
                slope, sink);
  return report(8, "solve-time-scaling", pass, buf, seconds_since(t0));
}

// --- end-to-end simulation behavior -----------------------------------------

Scenario base_scenario() {
  Scenario sc;
  sc.system.n_users = 2;
  sc.system.n_bands = 2;
  sc.system.noise_psd = 1.0;
  sc.system.v_param = 10.0;
  sc.channel.n_users = 2;
  sc.channel.n_bands = 2;
  MarkovChain chain;
  chain.gains = {1.0, 4.0};
  chain.transition = Mat(2, 2);
  chain.transition(0, 0) = 0.9;
  chain.transition(0, 1) = 0.1;
  chain.transition(1, 0) = 0.1;
  chain.transition(1, 1) = 0.9;
  chain.initial = {0.5, 0.5};
  for (int i = 0; i < 4; ++i) sc.channel.chains.push_back(chain);
  sc.arrivals.kind = ArrivalKind::kPoisson;
  sc.arrivals.users = {{0.5, 0.0, 0.0}, {0.5, 0.0, 0.0}};
  sc.horizon = 100000;
  sc.burn_in_fraction = 0.1;
  sc.seed = 1;
  return sc;
}

bool criterion_simulation() {
  const Clock::time_point t0 = Clock::now();
  std::string fail;
  char buf[256];

  // stability + throughput across three seeds of a comfortably feasible system
  for (std::uint64_t seed : {std::uint64_t{1}, std::uint64_t{2}, std::uint64_t{3}}) {
    Scenario sc = base_scenario();
    sc.seed = seed;
    const SimTrace tr = run_simulation(sc);
    if (!tr.summary.stability || !tr.summary.stability->stable) {
      fail = "seed " + std::to_string(seed) + " not diagnosed stable";
      break;
    }
    for (std::size_t k = 0; k < 2; ++k) {
      const double served = tr.summary.per_user_throughput[k];
      const double offered = tr.summary.per_user_arrival_mean[k];
      if (std::abs(served - offered) > 0.05 * offered) {
        std::snprintf(buf, sizeof buf,
                      "seed %llu user %zu: throughput %.4f vs arrivals %.4f (>5%% apart)",
                      static_cast<unsigned long long>(seed), k, served, offered);
        fail = buf;
        break;
      }
    }
    if (!fail.empty()) break;
  }

  // trading more delay for less power must actually happen along the knob
  std::vector<double> avg_power, avg_queue;
  if (fail.empty()) {
    const std::vector<double> vs = {1.0, 10.0, 100.0};
    const std::vector<std::uint64_t> seeds = {1, 2, 3};
    const std::vector<SweepRow> rows = run_sweep(base_scenario(), vs, seeds, 1);
    for (std::size_t vi = 0; vi < vs.size(); ++vi) {
      double p = 0.0, q = 0.0;
      for (std::size_t si = 0; si < seeds.size(); ++si) {
        const SweepRow& r = rows[vi * seeds.size() + si];
        if (!r.stable) fail = "sweep row v=" + std::to_string(r.v_param) + " unstable";
        p += r.power_efficiency;
        q += r.mean_queue;
      }
      avg_power.push_back(p / 3.0);
      avg_queue.push_back(q / 3.0);
    }
    for (std::size_t vi = 0; fail.empty() && vi + 1 < avg_power.size(); ++vi) {
      if (avg_power[vi + 1] > avg_power[vi] * 1.05) {
        std::snprintf(buf, sizeof buf, "power rose along v: %.4f -> %.4f",
                      avg_power[vi], avg_power[vi + 1]);
        fail = buf;
      }
      if (fail.empty() && avg_queue[vi + 1] < avg_queue[vi] * 0.95) {
        std::snprintf(buf, sizeof buf, "queues shrank along v: %.4f -> %.4f",
                      avg_queue[vi], avg_queue[vi + 1]);
        fail = buf;
      }
    }
  }

  // an offered load far beyond capacity must be flagged
  if (fail.empty()) {
    Scenario over = base_scenario();
    over.system.v_param = 1e6;
    over.arrivals.users = {{5.0, 0.0, 0.0}, {5.0, 0.0, 0.0}};
    over.horizon = 20000;
    const SimTrace tr = run_simulation(over);
    if (!tr.summary.stability || tr.summary.stability->stable)
      fail = "overloaded system not flagged unstable";
  }

  const double dt = seconds_since(t0);
  bool pass = fail.empty();
  std::string detail;
  if (pass) {
    std::snprintf(buf, sizeof buf,
                  "3 seeds stable with matched throughput; power %.3f>=%.3f>=%.3f and queue "
                  "%.2f<=%.2f<=%.2f along v in {1,10,100}; overload flagged",
                  avg_power[0], avg_power[1], avg_power[2], avg_queue[0], avg_queue[1],
                  avg_queue[2]);
    detail = buf;
  } else {
    detail = fail;
  }
  if (dt > 300.0) {
    pass = false;
    detail += "; exceeded 300 s budget";
  }
  return report(9, "simulation-behavior", pass, detail, dt);
}

}  // namespace

int main() {
  bool ok = true;
  ok &= run_suite_criterion(1, "oracle-equivalence", suite_oracle_equivalence, 1000, 60.0);
  ok &= run_suite_criterion(2, "first-order-conditions", suite_kkt, 1000, 0.0);
  ok &= run_suite_criterion(3, "multiplier-monotonicity", suite_lambda_monotonicity, 10000, 0.0);
  ok &= run_suite_criterion(4, "drop-order-independence", suite_selection_independence, 1000, 0.0);
  ok &= run_suite_criterion(5, "decode-order-optimality", suite_order_optimality, 1000, 0.0);
  ok &= run_suite_criterion(6, "gradient-hessian-checks", suite_calculus, 200, 0.0);
  ok &= run_suite_criterion(7, "objective-nonpositive", suite_objective_sign, 1000, 0.0);
  ok &= criterion_complexity();
  ok &= criterion_simulation();
  std::printf("ACCEPTANCE: %s\n", ok ? "PASS" : "FAIL");
  return ok ? 0 : 1;
}
