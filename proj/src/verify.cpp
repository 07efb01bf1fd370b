#include "mbsched/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "mbsched/energy.hpp"
#include "mbsched/oracle.hpp"
#include "mbsched/parallel.hpp"

namespace mbsched {

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

// Worst case and first failure message across instances, merged thread-safely
// by keeping one slot per instance and reducing afterwards.
struct PerInstance {
  bool ok = true;
  std::string error;
};

std::string first_error(const std::vector<PerInstance>& slots) {
  for (const PerInstance& s : slots)
    if (!s.ok && !s.error.empty()) return s.error;
  return {};
}

}  // namespace

BandProblem random_band_problem(Rng& rng, std::size_t max_users) {
  const std::size_t n = 1 + static_cast<std::size_t>(rng.uniform_index(max_users));
  std::vector<double> gains(n), queues(n);
  for (double& g : gains) g = rng.log_uniform(0.01, 10.0);
  std::sort(gains.begin(), gains.end());
  gains = perturb_ties(gains);  // exact collisions are astronomically rare; belt anyway
  for (double& q : queues) q = rng.uniform(0.0, 50.0);
  static constexpr double kVn0Choices[] = {0.1, 1.0, 10.0};
  const double vn0 = kVn0Choices[rng.uniform_index(3)];
  return make_band_problem(gains, queues, vn0);
}

SuiteResult suite_oracle_equivalence(const SuiteOptions& opt) {
  SuiteResult res{"oracle-equivalence", true, opt.instances, ""};
  std::vector<PerInstance> slots(opt.instances);
  std::vector<double> worst_df(opt.instances, 0.0), worst_dr(opt.instances, 0.0);
  parallel_for(opt.instances, opt.threads, [&](std::size_t i) {
    Rng rng(opt.seed, "equivalence-instance", i);
    const BandProblem prob = random_band_problem(rng);
    try {
      SolverSolution sol = solve_band(prob);
      if (opt.inject_fault) sol.rates[0] += 0.1;
      const OracleResult orc = oracle_solve(prob);
      const double f_exact = objective_f(sol.rates, prob);
      const double f_oracle = objective_f(orc.rates, prob);
      const double df = std::abs(f_exact - f_oracle);
      const double allowance = 1e-8 + 1e-6 * std::abs(f_exact);
      double dr = 0.0;
      for (std::size_t k = 0; k < sol.rates.size(); ++k)
        dr = std::max(dr, std::abs(sol.rates[k] - orc.rates[k]));
      worst_df[i] = df / allowance;  // normalized so one number compares across instances
      worst_dr[i] = dr;
      if (df > allowance || dr > 1e-4) {
        slots[i].ok = false;
        slots[i].error = "instance " + std::to_string(i) + ": |dF|=" + num(df) +
                         " (allowed " + num(allowance) + "), max|dR|=" + num(dr);
      }
    } catch (const std::exception& e) {
      slots[i].ok = false;
      slots[i].error = "instance " + std::to_string(i) + ": " + e.what();
    }
  });
  res.passed = std::all_of(slots.begin(), slots.end(), [](const PerInstance& s) { return s.ok; });
  const double df = *std::max_element(worst_df.begin(), worst_df.end());
  const double dr = *std::max_element(worst_dr.begin(), worst_dr.end());
  res.detail = "worst |dF|/allowance=" + num(df) + ", worst max|dR|=" + num(dr);
  if (!res.passed) res.detail += "; " + first_error(slots);
  return res;
}

SuiteResult suite_kkt(const SuiteOptions& opt) {
  SuiteResult res{"kkt-residuals", true, opt.instances, ""};
  std::vector<PerInstance> slots(opt.instances);
  std::vector<double> stat(opt.instances, 0.0), lam(opt.instances, 0.0),
      comp(opt.instances, 0.0), rate(opt.instances, 0.0);
  parallel_for(opt.instances, opt.threads, [&](std::size_t i) {
    Rng rng(opt.seed, "equivalence-instance", i);  // same instances as the oracle suite
    const BandProblem prob = random_band_problem(rng);
    try {
      SolverSolution sol = solve_band(prob);
      if (opt.inject_fault) sol.rates[0] += 0.1;
      const KktReport rep = kkt_check(sol.rates, sol.lambdas, prob);
      stat[i] = rep.max_stationarity;
      lam[i] = rep.min_lambda;
      comp[i] = rep.max_complementarity;
      rate[i] = rep.min_rate;
      if (rep.max_stationarity > 1e-8 || rep.min_rate < 0 || rep.min_lambda < -1e-12 ||
          rep.max_complementarity > 1e-12) {
        slots[i].ok = false;
        slots[i].error = "instance " + std::to_string(i) + ": stationarity=" +
                         num(rep.max_stationarity) + ", min rate=" + num(rep.min_rate) +
                         ", min lambda=" + num(rep.min_lambda) +
                         ", complementarity=" + num(rep.max_complementarity);
      }
    } catch (const std::exception& e) {
      slots[i].ok = false;
      slots[i].error = "instance " + std::to_string(i) + ": " + e.what();
    }
  });
  res.passed = std::all_of(slots.begin(), slots.end(), [](const PerInstance& s) { return s.ok; });
  res.detail = "worst stationarity=" + num(*std::max_element(stat.begin(), stat.end())) +
               ", min rate=" + num(*std::min_element(rate.begin(), rate.end())) +
               ", min lambda=" + num(*std::min_element(lam.begin(), lam.end())) +
               ", worst complementarity=" + num(*std::max_element(comp.begin(), comp.end()));
  if (!res.passed) res.detail += "; " + first_error(slots);
  return res;
}

SuiteResult suite_lambda_monotonicity(const SuiteOptions& opt) {
  SuiteResult res{"lambda-monotonicity", true, opt.instances, ""};
  std::vector<PerInstance> slots(opt.instances);
  std::vector<double> violation(opt.instances, 0.0);
  parallel_for(opt.instances, opt.threads, [&](std::size_t i) {
    Rng rng(opt.seed, "monotonicity-instance", i);
    const BandProblem prob = random_band_problem(rng);
    try {
      SolverSolution sol = solve_band(prob);
      if (opt.inject_fault && !sol.lambdas.empty()) sol.lambdas[0] = -1.0;
      double v = 0.0;  // worst decrease along the drop sequence, and below zero
      const std::vector<double> zeros(sol.lambdas.size(), 0.0);
      const std::vector<double>* prev = &zeros;
      for (const std::vector<double>& step : sol.lambda_history) {
        for (std::size_t k = 0; k < step.size(); ++k)
          v = std::max(v, (*prev)[k] - step[k]);
        prev = &step;
      }
      for (double l : sol.lambdas) v = std::max(v, -l);
      violation[i] = v;
      if (v > 1e-12) {
        slots[i].ok = false;
        slots[i].error = "instance " + std::to_string(i) + ": decrease of " + num(v);
      }
    } catch (const std::exception& e) {
      slots[i].ok = false;
      slots[i].error = "instance " + std::to_string(i) + ": " + e.what();
    }
  });
  res.passed = std::all_of(slots.begin(), slots.end(), [](const PerInstance& s) { return s.ok; });
  res.detail =
      "worst decrease=" + num(*std::max_element(violation.begin(), violation.end()));
  if (!res.passed) res.detail += "; " + first_error(slots);
  return res;
}

SuiteResult suite_selection_independence(const SuiteOptions& opt) {
  SuiteResult res{"selection-independence", true, opt.instances, ""};
  std::vector<PerInstance> slots(opt.instances);
  std::vector<double> spread(opt.instances, 0.0);
  parallel_for(opt.instances, opt.threads, [&](std::size_t i) {
    Rng rng(opt.seed, "selection-instance", i);
    const BandProblem prob = random_band_problem(rng);
    try {
      SolverSolution a = solve_band(prob, SelectionRule::kSmallestIndex);
      const SolverSolution b = solve_band(prob, SelectionRule::kLargestIndex);
      const SolverSolution c = solve_band(prob, SelectionRule::kSeededRandom, opt.seed + i);
      if (opt.inject_fault) a.rates[0] += 1e-8;
      double d = 0.0;
      for (std::size_t k = 0; k < a.rates.size(); ++k) {
        d = std::max(d, std::abs(a.rates[k] - b.rates[k]));
        d = std::max(d, std::abs(a.rates[k] - c.rates[k]));
        d = std::max(d, std::abs(b.rates[k] - c.rates[k]));
      }
      spread[i] = d;
      if (d > 1e-10) {
        slots[i].ok = false;
        slots[i].error = "instance " + std::to_string(i) + ": rules differ by " + num(d);
      }
    } catch (const std::exception& e) {
      slots[i].ok = false;
      slots[i].error = "instance " + std::to_string(i) + ": " + e.what();
    }
  });
  res.passed = std::all_of(slots.begin(), slots.end(), [](const PerInstance& s) { return s.ok; });
  res.detail = "worst rule spread=" + num(*std::max_element(spread.begin(), spread.end()));
  if (!res.passed) res.detail += "; " + first_error(slots);
  return res;
}

SuiteResult suite_order_optimality(const SuiteOptions& opt) {
  SuiteResult res{"decode-order-optimality", true, opt.instances, ""};
  std::vector<PerInstance> slots(opt.instances);
  std::vector<double> excess(opt.instances, 0.0);
  parallel_for(opt.instances, opt.threads, [&](std::size_t i) {
    Rng rng(opt.seed, "order-instance", i);
    const std::size_t n = 1 + static_cast<std::size_t>(rng.uniform_index(5));
    std::vector<double> gains(n), rates(n);
    for (double& g : gains) g = rng.log_uniform(0.01, 10.0);
    gains = perturb_ties(gains);
    for (double& r : rates) r = rng.uniform(0.0, 2.0);
    static constexpr double kN0Choices[] = {0.1, 1.0, 10.0};
    const double n0 = kN0Choices[rng.uniform_index(3)];
    try {
      const double sorted_total = superposition_energies(gains, rates, n0).total;
      std::vector<std::size_t> perm(n);
      std::iota(perm.begin(), perm.end(), std::size_t{0});
      double best = sorted_total;
      do {
        best = std::min(best, energy_for_order(gains, rates, perm, n0).total);
      } while (std::next_permutation(perm.begin(), perm.end()));
      excess[i] = sorted_total - best;
      if (sorted_total > best + 1e-12) {
        slots[i].ok = false;
        slots[i].error = "instance " + std::to_string(i) + ": weakest-first exceeds best order by " +
                         num(sorted_total - best);
      }
    } catch (const std::exception& e) {
      slots[i].ok = false;
      slots[i].error = "instance " + std::to_string(i) + ": " + e.what();
    }
  });
  res.passed = std::all_of(slots.begin(), slots.end(), [](const PerInstance& s) { return s.ok; });
  res.detail = "worst excess over best order=" +
               num(*std::max_element(excess.begin(), excess.end()));
  if (!res.passed) res.detail += "; " + first_error(slots);
  return res;
}

SuiteResult suite_calculus(const SuiteOptions& opt) {
  SuiteResult res{"gradient-hessian", true, opt.instances, ""};
  std::vector<PerInstance> slots(opt.instances);
  std::vector<double> grad_err(opt.instances, 0.0), hess_err(opt.instances, 0.0),
      min_eig(opt.instances, 0.0);
  const double h = 1e-5;
  parallel_for(opt.instances, opt.threads, [&](std::size_t i) {
    Rng rng(opt.seed, "calculus-instance", i);
    const BandProblem prob = random_band_problem(rng, 6);
    const std::size_t n = prob.n_users();
    std::vector<double> r(n);
    for (double& v : r) v = rng.uniform(0.0, 2.0);
    try {
      const std::vector<double> g = gradient_f(r, prob);
      std::vector<double> probe = r;
      double ge = 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        probe[k] = r[k] + h;
        const double fp = objective_f(probe, prob);
        probe[k] = r[k] - h;
        const double fm = objective_f(probe, prob);
        probe[k] = r[k];
        const double fd = (fp - fm) / (2 * h);
        ge = std::max(ge, std::abs(fd - g[k]) / std::max(1.0, std::abs(g[k])));
      }
      grad_err[i] = ge;

      const Mat hess = hessian_f(r, prob);
      double he = 0.0, asym = 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        probe[k] = r[k] + h;
        const std::vector<double> gp = gradient_f(probe, prob);
        probe[k] = r[k] - h;
        const std::vector<double> gm = gradient_f(probe, prob);
        probe[k] = r[k];
        for (std::size_t jj = 0; jj < n; ++jj) {
          const double fd = (gp[jj] - gm[jj]) / (2 * h);
          he = std::max(he, std::abs(fd - hess(jj, k)) / std::max(1.0, std::abs(hess(jj, k))));
          asym = std::max(asym, std::abs(hess(jj, k) - hess(k, jj)));
        }
      }
      hess_err[i] = he;
      min_eig[i] = min_eigenvalue_sym(hess);
      if (ge > 1e-6 || he > 1e-5 || asym > 1e-12 || !(min_eig[i] > 0)) {
        slots[i].ok = false;
        slots[i].error = "instance " + std::to_string(i) + ": grad err=" + num(ge) +
                         ", hess err=" + num(he) + ", asym=" + num(asym) +
                         ", min eig=" + num(min_eig[i]);
      }
    } catch (const std::exception& e) {
      slots[i].ok = false;
      slots[i].error = "instance " + std::to_string(i) + ": " + e.what();
    }
  });
  res.passed = std::all_of(slots.begin(), slots.end(), [](const PerInstance& s) { return s.ok; });
  res.detail = "worst grad err=" + num(*std::max_element(grad_err.begin(), grad_err.end())) +
               ", worst hess err=" + num(*std::max_element(hess_err.begin(), hess_err.end())) +
               ", smallest eigenvalue=" + num(*std::min_element(min_eig.begin(), min_eig.end()));
  if (!res.passed) res.detail += "; " + first_error(slots);
  return res;
}

SuiteResult suite_objective_sign(const SuiteOptions& opt) {
  SuiteResult res{"objective-nonpositive", true, opt.instances, ""};
  std::vector<PerInstance> slots(opt.instances);
  std::vector<double> worst(opt.instances, 0.0);
  parallel_for(opt.instances, opt.threads, [&](std::size_t i) {
    Rng rng(opt.seed, "equivalence-instance", i);
    const BandProblem prob = random_band_problem(rng);
    try {
      const SolverSolution sol = solve_band(prob);
      worst[i] = sol.objective;
      if (!(sol.objective <= 0)) {
        slots[i].ok = false;
        slots[i].error =
            "instance " + std::to_string(i) + ": F(R*)=" + num(sol.objective) + " > 0";
      }
    } catch (const std::exception& e) {
      slots[i].ok = false;
      slots[i].error = "instance " + std::to_string(i) + ": " + e.what();
    }
  });
  res.passed = std::all_of(slots.begin(), slots.end(), [](const PerInstance& s) { return s.ok; });
  res.detail = "largest F(R*)=" + num(*std::max_element(worst.begin(), worst.end()));
  if (!res.passed) res.detail += "; " + first_error(slots);
  return res;
}

std::vector<SuiteResult> run_all_suites(const SuiteOptions& opt) {
  return {suite_oracle_equivalence(opt), suite_kkt(opt),     suite_lambda_monotonicity(opt),
          suite_selection_independence(opt), suite_order_optimality(opt), suite_calculus(opt),
          suite_objective_sign(opt)};
}

}  // namespace mbsched
