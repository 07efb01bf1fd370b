#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mbsched/rng.hpp"
#include "mbsched/solver.hpp"

namespace mbsched {

inline constexpr std::uint64_t kDefaultVerifySeed = 13579;

struct SuiteOptions {
  std::size_t instances = 1000;
  std::uint64_t seed = kDefaultVerifySeed;
  unsigned threads = 1;  // 0 = all cores; results never depend on this
  // Negative control: perturbs solver outputs before checking so the
  // solver-facing suites must go red. Proves the harness can actually fail.
  bool inject_fault = false;
};

struct SuiteResult {
  std::string name;
  bool passed = false;
  std::size_t instances = 0;
  std::string detail;  // worst-case residuals, for humans
};

// Certification distribution: 1..max_users users, gains log-uniform on
// [0.01, 10], queues uniform on [0, 50], vn0 drawn from {0.1, 1, 10}.
BandProblem random_band_problem(Rng& rng, std::size_t max_users = 8);

// Exact solver against the descent oracle: objective within 1e-8 + 1e-6|F|,
// rates within 1e-4 max-norm, on every instance.
SuiteResult suite_oracle_equivalence(const SuiteOptions& opt);

// First-order conditions of every returned solution: stationarity <= 1e-8,
// rates >= 0, multipliers >= -1e-12, complementarity <= 1e-12.
SuiteResult suite_kkt(const SuiteOptions& opt);

// Multipliers never decrease across drops, and end nonnegative (slack 1e-12).
SuiteResult suite_lambda_monotonicity(const SuiteOptions& opt);

// All drop-selection rules land on the same rates within 1e-10.
SuiteResult suite_selection_independence(const SuiteOptions& opt);

// Weakest-gain-first decoding beats every other order (<= 5 users, exhaustive).
SuiteResult suite_order_optimality(const SuiteOptions& opt);

// Analytic gradient vs central differences (1e-6 rel), Hessian vs gradient
// differences (1e-5 rel), symmetry, and positive definiteness, <= 6 users.
SuiteResult suite_calculus(const SuiteOptions& opt);

// The optimum never beats doing nothing: F(R*) <= 0 on every instance.
SuiteResult suite_objective_sign(const SuiteOptions& opt);

std::vector<SuiteResult> run_all_suites(const SuiteOptions& opt);

}  // namespace mbsched
