#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "mbsched/core.hpp"
#include "mbsched/solver.hpp"

namespace mbsched {

// Reference solver used to certify the exact one: projected gradient descent
// with Armijo backtracking, periodically polished by a damped Newton step on
// the currently-positive coordinates. A polish is only accepted if the full
// first-order conditions hold at grad_tol afterwards, so the slow PGD tail is
// skipped without ever trusting a guess. No knowledge of the closed forms.
struct OracleSettings {
  double step_init = 1.0;
  double armijo_c = 1e-4;
  double shrink = 0.5;
  double grad_tol = 1e-10;       // on the max-norm of the projected gradient
  std::size_t max_iters = 1000000;
  bool record_objective = false; // keep F after every accepted step (tests only)
};

struct OracleResult {
  std::vector<double> rates;
  std::size_t iterations = 0;
  double final_pg_norm = 0.0;
  bool converged = false;  // false = stopped at the numerical floor instead
  std::vector<double> objective_history;
};

OracleResult oracle_solve(const BandProblem& prob, const OracleSettings& settings = {});

// Dense second derivatives of the band objective at `rates`; entry (j,k)
// depends only on max(j,k), so the matrix is symmetric by construction.
Mat hessian_f(std::span<const double> rates, const BandProblem& prob);

// Newton iteration restricted to the coordinates in active_mask (others pinned
// at zero), with step halving whenever a full step would raise the objective.
// Runs until the restricted gradient is below 1e-12 or max_iters steps.
std::vector<double> newton_refine(std::span<const double> rates, const BandProblem& prob,
                                  const std::vector<std::uint8_t>& active_mask,
                                  int max_iters = 100);

// Smallest eigenvalue of a symmetric matrix (certification helper).
double min_eigenvalue_sym(const Mat& m);

}  // namespace mbsched
