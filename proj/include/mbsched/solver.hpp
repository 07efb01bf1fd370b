#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mbsched {

// One band's allocation problem, already in decode order: entry k is the k-th
// weakest user, inv_gain strictly decreasing. Both arrays carry one sentinel
// entry at the end (inv_gain = 0, queue = 0) standing in for "the noise floor
// after everyone": boundary formulas below index it like a user.
struct BandProblem {
  std::vector<double> inv_gain;  // size n+1, strictly decreasing, last = 0
  std::vector<double> queue;     // size n+1, >= 0, last = 0
  double vn0 = 1.0;              // V * N0 > 0

  std::size_t n_users() const { return inv_gain.empty() ? 0 : inv_gain.size() - 1; }
};

// Build from per-user gains sorted strictly ascending (weakest first).
BandProblem make_band_problem(std::span<const double> sorted_gains,
                              std::span<const double> sorted_queues, double vn0);

// Throws std::invalid_argument on any invariant breach.
void validate_band_problem(const BandProblem& prob);

// Objective being minimized: total weighted transmit energy minus queue-weighted
// rates,  F(R) = sum_k vn0*inv_gain_k*(e^{R_k}-1)*e^{R_1+..+R_{k-1}} - sum_k q_k R_k.
double objective_f(std::span<const double> rates, const BandProblem& prob);

// Gradient of F, with optional per-user multipliers folded into the queue
// weights (pass empty for the plain gradient). O(n) via suffix accumulation.
std::vector<double> gradient_f(std::span<const double> rates, const BandProblem& prob,
                               std::span<const double> lambdas = {});

// Stationary rates for a given support: zero off the mask, log-ratio closed
// form across consecutive retained users (the trailing sentinel closes the
// chain). Retained users are chained directly to each other - routing the
// ratios through zero-rate users would subtract nearly equal weights and lose
// half the mantissa exactly when a multiplier sits close to a queue gap.
// A nonpositive log argument means no stationary point exists on this support;
// that entry is NaN with log_ok false, by design not fatal.
struct ClosedFormRates {
  std::vector<double> rates;
  std::vector<std::uint8_t> log_ok;
};
ClosedFormRates closed_form_rates(const std::vector<std::uint8_t>& active_mask,
                                  const BandProblem& prob);

// True when user k (0-based, currently active) should be dropped to zero rate:
// its queue weight is below the interpolation of its neighbors' weights.
bool inactivity_test(std::size_t k, std::span<const double> lambdas, const BandProblem& prob);

// Recomputes all multipliers from scratch given the active mask (size n,
// nonzero = active): zero on active users, run formulas on maximal inactive
// runs. Not incremental on purpose - the recomputation is what keeps the
// multipliers consistent after each removal.
std::vector<double> update_lagrange(const std::vector<std::uint8_t>& active_mask,
                                    const BandProblem& prob);

struct KktReport {
  double max_stationarity = 0.0;    // max |grad_k| with multipliers folded in
  double min_rate = 0.0;            // most negative rate (>= 0 when clean)
  double min_lambda = 0.0;          // most negative multiplier
  double max_complementarity = 0.0; // max |R_k * lambda_k|
};
KktReport kkt_check(std::span<const double> rates, std::span<const double> lambdas,
                    const BandProblem& prob);

// Which eligible user gets dropped each iteration. All rules reach the same
// solution; the knob exists so tests can prove that.
enum class SelectionRule { kSmallestIndex, kLargestIndex, kSeededRandom };

struct SolverSolution {
  std::vector<double> rates;                       // size n, >= 0
  std::vector<double> lambdas;                     // size n
  std::vector<std::size_t> active;                 // ascending indices
  std::vector<std::size_t> inactive;               // ascending indices
  std::size_t iterations = 0;                      // users dropped, <= n
  std::vector<std::vector<double>> lambda_history; // multipliers after each drop
  KktReport kkt;
  double objective = 0.0;
};

// Raised when the finished solution fails its own optimality audit; carries
// whatever was computed for post-mortems.
class SolverConsistencyError : public std::runtime_error {
 public:
  SolverConsistencyError(const std::string& what, SolverSolution partial)
      : std::runtime_error(what), partial_(std::move(partial)) {}
  const SolverSolution& partial() const { return partial_; }

 private:
  SolverSolution partial_;
};

// Exact active-set solve: start all-active, repeatedly drop one eligible user
// and recompute multipliers, finish with closed-form rates. At most n drops.
SolverSolution solve_band(const BandProblem& prob,
                          SelectionRule rule = SelectionRule::kSmallestIndex,
                          std::uint64_t rule_seed = 0);

// Tolerances for the self-audit at the end of every solve.
inline constexpr double kStationarityTol = 1e-8;
inline constexpr double kSignSlackTol = 1e-12;

}  // namespace mbsched
