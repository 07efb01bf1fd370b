#include "mbsched/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mbsched/energy.hpp"
#include "mbsched/rng.hpp"

namespace mbsched {

namespace {

// Weight of entry j in [0, n]: queue plus multiplier, sentinel weighs 0.
inline double weight(const BandProblem& prob, std::span<const double> lambdas, std::size_t j) {
  return prob.queue[j] + (j < lambdas.size() ? lambdas[j] : 0.0);
}

// e^{R_0+..+R_k} for each k, accumulated in the log domain.
std::vector<double> cumulative_exp(std::span<const double> rates) {
  std::vector<double> c(rates.size());
  long double prefix = 0.0L;
  for (std::size_t k = 0; k < rates.size(); ++k) {
    if (!std::isfinite(rates[k]))
      throw std::invalid_argument("rates must be finite");
    prefix += rates[k];
    if (prefix > kMaxExponent)
      throw std::overflow_error("rate sum exceeds exponent limit in band objective");
    c[k] = std::exp(static_cast<double>(prefix));
  }
  return c;
}

}  // namespace

BandProblem make_band_problem(std::span<const double> sorted_gains,
                              std::span<const double> sorted_queues, double vn0) {
  if (sorted_gains.empty() || sorted_gains.size() != sorted_queues.size())
    throw std::invalid_argument("band problem needs equal, nonempty gain/queue arrays");
  BandProblem prob;
  prob.vn0 = vn0;
  const std::size_t n = sorted_gains.size();
  prob.inv_gain.resize(n + 1);
  prob.queue.resize(n + 1);
  for (std::size_t k = 0; k < n; ++k) {
    if (!(sorted_gains[k] > 0) || !std::isfinite(sorted_gains[k]))
      throw std::invalid_argument("gains must be finite and > 0");
    if (k > 0 && !(sorted_gains[k] > sorted_gains[k - 1]))
      throw std::invalid_argument("gains must be strictly ascending (weakest user first)");
    prob.inv_gain[k] = 1.0 / sorted_gains[k];
    prob.queue[k] = sorted_queues[k];
  }
  prob.inv_gain[n] = 0.0;
  prob.queue[n] = 0.0;
  validate_band_problem(prob);
  return prob;
}

void validate_band_problem(const BandProblem& prob) {
  const std::size_t n = prob.n_users();
  if (n < 1 || prob.queue.size() != n + 1)
    throw std::invalid_argument("band problem needs n>=1 users plus one sentinel entry");
  if (prob.inv_gain[n] != 0.0 || prob.queue[n] != 0.0)
    throw std::invalid_argument("sentinel entries must be zero");
  for (std::size_t k = 0; k < n; ++k) {
    if (!std::isfinite(prob.inv_gain[k]) || !(prob.inv_gain[k] > prob.inv_gain[k + 1]))
      throw std::invalid_argument("inverse gains must be finite and strictly decreasing to 0");
    if (!(prob.queue[k] >= 0) || !std::isfinite(prob.queue[k]))
      throw std::invalid_argument("queues must be finite and >= 0");
  }
  if (!(prob.vn0 > 0) || !std::isfinite(prob.vn0))
    throw std::invalid_argument("vn0 must be finite and > 0");
}

double objective_f(std::span<const double> rates, const BandProblem& prob) {
  const std::size_t n = prob.n_users();
  if (rates.size() != n) throw std::invalid_argument("objective_f: rate size mismatch");
  long double energy = 0.0L, linear = 0.0L, prefix = 0.0L;
  for (std::size_t k = 0; k < n; ++k) {
    if (!std::isfinite(rates[k])) throw std::invalid_argument("rates must be finite");
    if (prefix + rates[k] > kMaxExponent)
      throw std::overflow_error("rate sum exceeds exponent limit in band objective");
    energy += static_cast<long double>(prob.vn0) * prob.inv_gain[k] *
              std::expm1(rates[k]) * std::exp(static_cast<double>(prefix));
    linear += static_cast<long double>(prob.queue[k]) * rates[k];
    prefix += rates[k];
  }
  return static_cast<double>(energy - linear);
}

std::vector<double> gradient_f(std::span<const double> rates, const BandProblem& prob,
                               std::span<const double> lambdas) {
  const std::size_t n = prob.n_users();
  if (rates.size() != n) throw std::invalid_argument("gradient_f: rate size mismatch");
  if (!lambdas.empty() && lambdas.size() != n)
    throw std::invalid_argument("gradient_f: lambda size mismatch");
  const std::vector<double> c = cumulative_exp(rates);
  // Suffix form: dF/dR_k = vn0 * sum_{i>=k} (inv_gain_i - inv_gain_{i+1}) e^{R_0+..+R_i} - w_k.
  // Every summand is positive and bounded by queue scale, so the subtraction at
  // the end is the only cancellation; the raw per-term expansion is much worse
  // when the cumulative exponents are large.
  std::vector<double> grad(n);
  long double suffix = 0.0L;
  for (std::size_t k = n; k-- > 0;) {
    suffix += static_cast<long double>(prob.inv_gain[k] - prob.inv_gain[k + 1]) * c[k];
    grad[k] = static_cast<double>(static_cast<long double>(prob.vn0) * suffix -
                                  weight(prob, lambdas, k));
  }
  return grad;
}

ClosedFormRates closed_form_rates(const std::vector<std::uint8_t>& active_mask,
                                  const BandProblem& prob) {
  const std::size_t n = prob.n_users();
  if (active_mask.size() != n)
    throw std::invalid_argument("closed_form_rates: mask size mismatch");
  ClosedFormRates out;
  out.rates.assign(n, 0.0);
  out.log_ok.assign(n, 1);
  std::vector<std::size_t> chain;  // retained users plus the closing sentinel
  for (std::size_t k = 0; k < n; ++k)
    if (active_mask[k]) chain.push_back(k);
  chain.push_back(n);

  // Between consecutive retained users j and jn the cumulative exponential is
  // (q_j - q_jn) / (vn0 (ig_j - ig_jn)); each rate is the log of the ratio of
  // consecutive cumulative values. The ratio is taken factor by factor so a
  // wild intermediate product cannot overflow.
  double prev_num = 1.0, prev_den = 1.0;
  bool prev_ok = false;
  for (std::size_t a = 0; a + 1 < chain.size(); ++a) {
    const std::size_t j = chain[a], jn = chain[a + 1];
    const double num = prob.queue[j] - prob.queue[jn];
    const double den = prob.vn0 * (prob.inv_gain[j] - prob.inv_gain[jn]);  // > 0 always
    const bool ok = num > 0;
    if (a == 0) {
      if (ok) {
        out.rates[j] = std::log(num / den);
      } else {
        out.rates[j] = std::numeric_limits<double>::quiet_NaN();
        out.log_ok[j] = 0;
      }
    } else if (ok && prev_ok) {
      out.rates[j] = std::log((num / prev_num) * (prev_den / den));
    } else {
      out.rates[j] = std::numeric_limits<double>::quiet_NaN();
      out.log_ok[j] = 0;
    }
    prev_num = num;
    prev_den = den;
    prev_ok = ok;
  }
  return out;
}

bool inactivity_test(std::size_t k, std::span<const double> lambdas, const BandProblem& prob) {
  const std::size_t n = prob.n_users();
  if (k >= n) throw std::invalid_argument("inactivity_test: index out of range");
  if (lambdas.size() != n) throw std::invalid_argument("inactivity_test: lambda size mismatch");
  if (k == 0)
    return prob.queue[0] <
           prob.vn0 * (prob.inv_gain[0] - prob.inv_gain[1]) + weight(prob, lambdas, 1);
  // Cross-multiplied form of: q_k below the weight line through neighbors
  // k-1, k+1. Extended precision on purpose: with nearly tied inverse gains
  // the two products agree in their leading ~16 digits and the comparison
  // would otherwise be decided by rounding noise. (The boundary cases that
  // survive even this are caught by the rate recheck in solve_band.)
  const long double lhs = static_cast<long double>(prob.queue[k]) *
                          (static_cast<long double>(prob.inv_gain[k - 1]) - prob.inv_gain[k + 1]);
  const long double rhs =
      static_cast<long double>(weight(prob, lambdas, k - 1)) *
          (static_cast<long double>(prob.inv_gain[k]) - prob.inv_gain[k + 1]) +
      static_cast<long double>(weight(prob, lambdas, k + 1)) *
          (static_cast<long double>(prob.inv_gain[k - 1]) - prob.inv_gain[k]);
  return lhs < rhs;
}

std::vector<double> update_lagrange(const std::vector<std::uint8_t>& active_mask,
                                    const BandProblem& prob) {
  const std::size_t n = prob.n_users();
  if (active_mask.size() != n) throw std::invalid_argument("update_lagrange: mask size mismatch");
  std::vector<double> lam(n, 0.0);
  std::size_t s = 0;
  while (s < n) {
    if (active_mask[s]) {
      ++s;
      continue;
    }
    std::size_t e = s;
    while (e < n && !active_mask[e]) ++e;
    // inactive run [s, e); bracketed below by active u = e (or the sentinel),
    // above by active v = s-1 when the run does not start at the top
    const std::size_t u = e;
    if (s == 0) {
      for (std::size_t m = s; m < e; ++m)
        lam[m] = prob.vn0 * (prob.inv_gain[m] - prob.inv_gain[u]) +
                 (prob.queue[u] - prob.queue[m]);
    } else {
      const std::size_t v = s - 1;
      const double den = prob.inv_gain[v] - prob.inv_gain[u];
      for (std::size_t m = s; m < e; ++m)
        lam[m] = (prob.queue[v] * (prob.inv_gain[m] - prob.inv_gain[u]) +
                  prob.queue[u] * (prob.inv_gain[v] - prob.inv_gain[m])) /
                     den -
                 prob.queue[m];
    }
    s = e;
  }
  return lam;
}

KktReport kkt_check(std::span<const double> rates, std::span<const double> lambdas,
                    const BandProblem& prob) {
  const std::size_t n = prob.n_users();
  if (rates.size() != n || lambdas.size() != n)
    throw std::invalid_argument("kkt_check: size mismatch");
  KktReport rep;
  const std::vector<double> grad = gradient_f(rates, prob, lambdas);
  rep.min_rate = std::numeric_limits<double>::infinity();
  rep.min_lambda = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < n; ++k) {
    rep.max_stationarity = std::max(rep.max_stationarity, std::abs(grad[k]));
    rep.min_rate = std::min(rep.min_rate, rates[k]);
    rep.min_lambda = std::min(rep.min_lambda, lambdas[k]);
    rep.max_complementarity = std::max(rep.max_complementarity, std::abs(rates[k] * lambdas[k]));
  }
  return rep;
}

SolverSolution solve_band(const BandProblem& prob, SelectionRule rule, std::uint64_t rule_seed) {
  validate_band_problem(prob);
  const std::size_t n = prob.n_users();
  SolverSolution sol;
  std::vector<std::uint8_t> active(n, 1);
  std::vector<double> lam(n, 0.0);

  const bool all_zero =
      std::all_of(prob.queue.begin(), prob.queue.end(), [](double q) { return q == 0.0; });
  ClosedFormRates cf;
  if (all_zero) {
    // nothing to send; every user idles and the multipliers absorb the gradient
    std::fill(active.begin(), active.end(), std::uint8_t{0});
    lam = update_lagrange(active, prob);
    sol.lambda_history.push_back(lam);
    cf = closed_form_rates(active, prob);
  } else {
    Rng rng(rule_seed, "drop-selection");
    std::vector<std::size_t> eligible;
    const auto drop = [&](std::size_t k) {
      active[k] = 0;
      lam = update_lagrange(active, prob);
      sol.lambda_history.push_back(lam);
      if (++sol.iterations > n)
        throw SolverConsistencyError("drop count exceeded user count", std::move(sol));
    };
    while (true) {
      eligible.clear();
      for (std::size_t k = 0; k < n; ++k)
        if (active[k] && inactivity_test(k, lam, prob)) eligible.push_back(k);
      if (!eligible.empty()) {
        std::size_t pick;
        switch (rule) {
          case SelectionRule::kSmallestIndex: pick = eligible.front(); break;
          case SelectionRule::kLargestIndex: pick = eligible.back(); break;
          default: pick = eligible[rng.uniform_index(eligible.size())]; break;
        }
        drop(pick);
        continue;
      }
      // Recheck the would-be rates. A retained user whose stationary rate is
      // negative beyond rounding slack is a drop the eligibility comparison
      // could not resolve - possible when tied gains are split by the tiny tie
      // perturbation AND the queue sits on the activation boundary, which puts
      // the decision margin below even extended precision. Dropping it is the
      // analytically correct continuation, so multiplier monotonicity and the
      // uniqueness of the final set are unaffected.
      cf = closed_form_rates(active, prob);
      std::size_t forced = n;
      for (std::size_t k = 0; k < n; ++k) {
        if (active[k] && (!cf.log_ok[k] || cf.rates[k] < -kSignSlackTol)) {
          forced = k;
          break;
        }
      }
      if (forced == n) break;
      drop(forced);
    }
  }

  sol.lambdas = lam;
  sol.rates.assign(n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    if (!active[k]) {
      sol.inactive.push_back(k);
      continue;
    }
    sol.active.push_back(k);
    // recheck above guarantees log_ok and rate >= -kSignSlackTol here
    sol.rates[k] = std::max(cf.rates[k], 0.0);
  }

  sol.kkt = kkt_check(sol.rates, sol.lambdas, prob);
  sol.objective = objective_f(sol.rates, prob);
  if (sol.kkt.max_stationarity > kStationarityTol || sol.kkt.min_lambda < -kSignSlackTol ||
      sol.kkt.max_complementarity > kSignSlackTol)
    throw SolverConsistencyError("solution failed optimality audit", std::move(sol));
  return sol;
}

}  // namespace mbsched
