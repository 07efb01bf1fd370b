#include "mbsched/oracle.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "mbsched/energy.hpp"

namespace mbsched {

namespace {

constexpr double kStepFloor = 1e-18;

// Line-search objective. Evaluated in long double: the descent loop compares
// values whose difference sits far below double rounding noise at queue scale,
// and stalling early would blow the certification gap. Returns +inf on
// exponent overflow so backtracking treats wild trial points as "worse".
long double objective_ld(std::span<const double> rates, const BandProblem& prob) {
  long double energy = 0.0L, linear = 0.0L, prefix = 0.0L;
  for (std::size_t k = 0; k < rates.size(); ++k) {
    if (prefix + rates[k] > kMaxExponent)
      return std::numeric_limits<long double>::infinity();
    energy += static_cast<long double>(prob.vn0) * prob.inv_gain[k] *
              std::expm1(static_cast<long double>(rates[k])) * std::exp(prefix);
    linear += static_cast<long double>(prob.queue[k]) * rates[k];
    prefix += rates[k];
  }
  return energy - linear;
}

// Guess the support from the current iterate (positive coordinates plus any
// zero coordinate whose gradient wants in), refine it with damped Newton, and
// evict coordinates the subproblem pushes negative - at most n rounds. The
// result is only accepted if the whole point satisfies first-order optimality
// at grad_tol, so a wrong guess just fails the check and PGD keeps going.
// This is what cuts PGD's sublinear tail: a coordinate whose multiplier is
// barely positive chatters around zero for ~1/lambda iterations, while one
// eviction round settles it exactly.
bool try_newton_polish(OracleResult& res, const BandProblem& prob, double grad_tol) {
  const std::size_t n = prob.n_users();
  std::vector<double> point = res.rates, g;
  try {
    g = gradient_f(point, prob);
    std::vector<std::uint8_t> mask(n);
    for (std::size_t k = 0; k < n; ++k) mask[k] = (point[k] > 0 || g[k] < 0) ? 1 : 0;
    for (std::size_t round = 0;; ++round) {
      std::vector<double> refined = newton_refine(point, prob, mask, 40);
      bool evicted = false;
      for (std::size_t k = 0; k < n; ++k) {
        if (mask[k] && refined[k] < 0) {
          refined[k] = 0.0;
          mask[k] = 0;
          evicted = true;
        }
      }
      point = std::move(refined);
      if (!evicted) break;
      if (round == n) return false;  // support never settled; retry later
    }
    g = gradient_f(point, prob);
  } catch (const std::overflow_error&) {
    return false;
  }
  double pg = 0.0;
  for (std::size_t k = 0; k < n; ++k)
    pg = std::max(pg, point[k] > 0 ? std::abs(g[k]) : std::max(0.0, -g[k]));
  if (pg > grad_tol) return false;
  res.rates = std::move(point);
  res.final_pg_norm = pg;
  res.converged = true;
  return true;
}

}  // namespace

OracleResult oracle_solve(const BandProblem& prob, const OracleSettings& settings) {
  validate_band_problem(prob);
  if (!(settings.step_init > 0) || !(settings.shrink > 0) || !(settings.shrink < 1) ||
      !(settings.armijo_c > 0) || !(settings.armijo_c < 1) || !(settings.grad_tol > 0))
    throw std::invalid_argument("oracle_solve: bad settings");

  const std::size_t n = prob.n_users();
  OracleResult res;
  res.rates.assign(n, 0.0);
  std::vector<double> grad = gradient_f(res.rates, prob);
  long double f = objective_ld(res.rates, prob);
  if (settings.record_objective) res.objective_history.push_back(static_cast<double>(f));
  double step = settings.step_init;
  std::vector<double> trial(n);

  while (res.iterations < settings.max_iters) {
    double pg = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const double g = res.rates[k] > 0 ? grad[k] : std::min(grad[k], 0.0);
      pg = std::max(pg, std::abs(g));
    }
    res.final_pg_norm = pg;
    if (pg <= settings.grad_tol) {
      res.converged = true;
      return res;
    }
    // Polish attempts back off geometrically so a stubborn support guess can
    // never dominate the runtime of the plain descent it supplements.
    const std::size_t it = res.iterations;
    if (it >= 8 && (it & (it - 1)) == 0 && try_newton_polish(res, prob, settings.grad_tol))
      return res;

    bool accepted = false;
    while (step >= kStepFloor) {
      long double pred = 0.0L;
      for (std::size_t k = 0; k < n; ++k) {
        trial[k] = std::max(res.rates[k] - step * grad[k], 0.0);
        pred += static_cast<long double>(grad[k]) * (trial[k] - res.rates[k]);
      }
      const long double f_trial = objective_ld(trial, prob);
      if (f_trial <= f + static_cast<long double>(settings.armijo_c) * pred) {
        res.rates.swap(trial);
        f = f_trial;
        accepted = true;
        break;
      }
      step *= settings.shrink;
    }
    if (!accepted) {
      try_newton_polish(res, prob, settings.grad_tol);  // last resort before giving up
      return res;  // converged stays false unless the polish landed
    }

    grad = gradient_f(res.rates, prob);
    if (settings.record_objective) res.objective_history.push_back(static_cast<double>(f));
    step = std::min(step * 2.0, settings.step_init);  // carry momentum between iterations
    ++res.iterations;
  }
  try_newton_polish(res, prob, settings.grad_tol);  // last chance at the budget's edge
  return res;
}

Mat hessian_f(std::span<const double> rates, const BandProblem& prob) {
  const std::size_t n = prob.n_users();
  if (rates.size() != n) throw std::invalid_argument("hessian_f: rate size mismatch");
  // Entry (j,k) = h_{max(j,k)}, where h_k adds the energy terms of users after
  // k to user k's own cumulative term. All summands are positive.
  std::vector<long double> c(n), t(n);
  long double prefix = 0.0L;
  for (std::size_t k = 0; k < n; ++k) {
    if (prefix + rates[k] > kMaxExponent)
      throw std::overflow_error("rate sum exceeds exponent limit in band hessian");
    t[k] = static_cast<long double>(prob.vn0) * prob.inv_gain[k] *
           std::expm1(static_cast<long double>(rates[k])) * std::exp(prefix);
    prefix += rates[k];
    c[k] = std::exp(prefix);
  }
  std::vector<double> h(n);
  long double suffix = 0.0L;
  for (std::size_t k = n; k-- > 0;) {
    h[k] = static_cast<double>(suffix +
                               static_cast<long double>(prob.vn0) * prob.inv_gain[k] * c[k]);
    suffix += t[k];
  }
  Mat out(n, n);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t k = 0; k < n; ++k) out(j, k) = h[std::max(j, k)];
  return out;
}

std::vector<double> newton_refine(std::span<const double> rates, const BandProblem& prob,
                                  const std::vector<std::uint8_t>& active_mask, int max_iters) {
  const std::size_t n = prob.n_users();
  if (rates.size() != n || active_mask.size() != n)
    throw std::invalid_argument("newton_refine: size mismatch");
  std::vector<double> r(rates.begin(), rates.end());
  std::vector<std::size_t> idx;
  for (std::size_t k = 0; k < n; ++k)
    if (active_mask[k]) idx.push_back(k);
  if (idx.empty()) return r;

  long double f = objective_ld(r, prob);
  std::vector<double> trial(r);
  for (int it = 0; it < max_iters; ++it) {
    const std::vector<double> grad = gradient_f(r, prob);
    double residual = 0.0;
    for (std::size_t i : idx) residual = std::max(residual, std::abs(grad[i]));
    if (residual <= 1e-12) break;

    const Mat h = hessian_f(r, prob);
    Eigen::MatrixXd hr(idx.size(), idx.size());
    Eigen::VectorXd gr(idx.size());
    for (std::size_t a = 0; a < idx.size(); ++a) {
      gr(static_cast<Eigen::Index>(a)) = grad[idx[a]];
      for (std::size_t b = 0; b < idx.size(); ++b)
        hr(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = h(idx[a], idx[b]);
    }
    const Eigen::VectorXd delta = hr.ldlt().solve(gr);
    if (!delta.allFinite()) break;

    // Once the predicted decrease drops under the evaluation noise of f, an
    // objective comparison can no longer tell good steps from bad ones and
    // would stall the quadratic tail; the step is tiny there, take it as is.
    long double decrement = 0.0L;
    for (std::size_t a = 0; a < idx.size(); ++a)
      decrement += static_cast<long double>(gr(static_cast<Eigen::Index>(a))) *
                   delta(static_cast<Eigen::Index>(a));
    if (decrement * 0.5L <= 1e-16L * (1.0L + std::abs(static_cast<double>(f)))) {
      for (std::size_t a = 0; a < idx.size(); ++a)
        r[idx[a]] -= delta(static_cast<Eigen::Index>(a));
      f = objective_ld(r, prob);
      continue;
    }

    // Full steps overshoot badly far from the optimum (the objective is a sum
    // of exponentials), so halve until the objective stops increasing.
    double t = 1.0;
    bool moved = false;
    for (int halving = 0; halving < 60 && !moved; ++halving) {
      trial = r;
      for (std::size_t a = 0; a < idx.size(); ++a)
        trial[idx[a]] = r[idx[a]] - t * delta(static_cast<Eigen::Index>(a));
      const long double f_trial = objective_ld(trial, prob);
      if (f_trial <= f) {
        r.swap(trial);
        f = f_trial;
        moved = true;
      }
      t *= 0.5;
    }
    if (!moved) break;  // decrease is below long double noise; we are done
  }
  return r;
}

double min_eigenvalue_sym(const Mat& m) {
  if (m.rows() != m.cols() || m.rows() == 0)
    throw std::invalid_argument("min_eigenvalue_sym: need a nonempty square matrix");
  Eigen::MatrixXd em(m.rows(), m.cols());
  for (std::size_t j = 0; j < m.rows(); ++j)
    for (std::size_t k = 0; k < m.cols(); ++k)
      em(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) = m(j, k);
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(em, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success)
    throw std::runtime_error("min_eigenvalue_sym: eigensolver failed");
  return solver.eigenvalues().minCoeff();
}

}  // namespace mbsched
