#include "mbsched/sim.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "mbsched/energy.hpp"
#include "mbsched/parallel.hpp"
#include "mbsched/solver.hpp"

namespace mbsched {

namespace {

constexpr double kDistributionSumTol = 1e-12;

void check_distribution(std::span<const double> p, const std::string& what) {
  double sum = 0.0;
  for (double v : p) {
    if (!(v >= 0) || !std::isfinite(v))
      throw std::invalid_argument(what + ": probabilities must be finite and >= 0");
    sum += v;
  }
  if (std::abs(sum - 1.0) > kDistributionSumTol)
    throw std::invalid_argument(what + ": probabilities sum to " + std::to_string(sum) +
                                ", expected 1");
}

double mean_total_energy(const SlotSeries& s, std::int64_t burn_in) {
  double acc = 0.0;
  for (std::int64_t t = burn_in; t < s.horizon; ++t)
    for (std::size_t k = 0; k < s.n_users; ++k)
      for (std::size_t m = 0; m < s.n_bands; ++m) acc += s.energy_at(t, k, m);
  return acc / static_cast<double>(s.horizon - burn_in);
}

StabilityReport stability_from_series(const SlotSeries& s, double total_arrival_rate) {
  const std::int64_t t0 = s.horizon / 2;
  const std::int64_t len = s.horizon - t0;
  const std::int64_t windows = std::min<std::int64_t>(kStabilityWindows, len);
  const std::int64_t width = len / windows;

  std::vector<double> x(static_cast<std::size_t>(windows)), y(static_cast<std::size_t>(windows));
  for (std::int64_t w = 0; w < windows; ++w) {
    const std::int64_t lo = t0 + w * width;
    double acc = 0.0;
    for (std::int64_t t = lo; t < lo + width; ++t)
      for (std::size_t k = 0; k < s.n_users; ++k) acc += s.queue_at(t, k);
    x[static_cast<std::size_t>(w)] =
        static_cast<double>(lo) + static_cast<double>(width - 1) / 2.0;
    y[static_cast<std::size_t>(w)] = acc / static_cast<double>(width);
  }

  double xm = 0.0, ym = 0.0;
  for (std::int64_t w = 0; w < windows; ++w) {
    xm += x[static_cast<std::size_t>(w)];
    ym += y[static_cast<std::size_t>(w)];
  }
  xm /= static_cast<double>(windows);
  ym /= static_cast<double>(windows);
  double sxy = 0.0, sxx = 0.0;
  for (std::int64_t w = 0; w < windows; ++w) {
    sxy += (x[static_cast<std::size_t>(w)] - xm) * (y[static_cast<std::size_t>(w)] - ym);
    sxx += (x[static_cast<std::size_t>(w)] - xm) * (x[static_cast<std::size_t>(w)] - xm);
  }

  StabilityReport rep;
  rep.slope = sxx > 0 ? sxy / sxx : 0.0;
  rep.max_mean_queue = *std::max_element(y.begin(), y.end());
  rep.stable = rep.slope <= kStabilitySlopeFraction * total_arrival_rate;
  return rep;
}

}  // namespace

void validate_channel_model(const MarkovChannelModel& model) {
  if (model.n_users < 1 || model.n_bands < 1)
    throw std::invalid_argument("channel model needs n_users >= 1 and n_bands >= 1");
  if (model.chains.size() != model.n_users * model.n_bands)
    throw std::invalid_argument("channel model has " + std::to_string(model.chains.size()) +
                                " chains, expected one per (user, band)");
  for (std::size_t i = 0; i < model.chains.size(); ++i) {
    const MarkovChain& c = model.chains[i];
    const std::string what = "chain " + std::to_string(i);
    const std::size_t ns = c.gains.size();
    if (ns == 0) throw std::invalid_argument(what + ": needs at least one state");
    for (double g : c.gains)
      if (!(g > 0) || !std::isfinite(g))
        throw std::invalid_argument(what + ": state gains must be finite and > 0");
    if (c.transition.rows() != ns || c.transition.cols() != ns)
      throw std::invalid_argument(what + ": transition matrix must be n_states x n_states");
    for (std::size_t r = 0; r < ns; ++r) check_distribution(
        std::span<const double>(c.transition.data() + r * ns, ns), what + " transition row");
    if (c.initial.size() != ns)
      throw std::invalid_argument(what + ": initial distribution has wrong length");
    check_distribution(c.initial, what + " initial distribution");
  }
}

std::vector<double> ArrivalModel::mean_rates() const {
  std::vector<double> out(users.size());
  for (std::size_t k = 0; k < users.size(); ++k)
    out[k] = kind == ArrivalKind::kBernoulliBulk ? users[k].prob * users[k].size
                                                 : users[k].mean;
  return out;
}

void validate_arrival_model(const ArrivalModel& model) {
  if (model.users.empty()) throw std::invalid_argument("arrival model needs at least one user");
  for (std::size_t k = 0; k < model.users.size(); ++k) {
    const ArrivalUserParams& p = model.users[k];
    const std::string what = "arrivals for user " + std::to_string(k);
    if (model.kind == ArrivalKind::kBernoulliBulk) {
      if (!(p.prob >= 0) || !(p.prob <= 1))
        throw std::invalid_argument(what + ": prob must lie in [0,1]");
      if (!(p.size >= 0) || !std::isfinite(p.size))
        throw std::invalid_argument(what + ": size must be finite and >= 0");
    } else if (!(p.mean >= 0) || !std::isfinite(p.mean)) {
      throw std::invalid_argument(what + ": mean must be finite and >= 0");
    }
  }
}

void validate_scenario(const Scenario& sc) {
  if (sc.system.n_users < 1 || sc.system.n_bands < 1)
    throw std::invalid_argument("scenario needs n_users >= 1 and n_bands >= 1");
  if (!(sc.system.noise_psd > 0) || !std::isfinite(sc.system.noise_psd))
    throw std::invalid_argument("noise_psd must be finite and > 0");
  if (!(sc.system.v_param > 0) || !std::isfinite(sc.system.v_param))
    throw std::invalid_argument("v_param must be finite and > 0 to run the scheduler");
  if (!(sc.system.symbols_per_slot > 0) || !std::isfinite(sc.system.symbols_per_slot))
    throw std::invalid_argument("symbols_per_slot must be finite and > 0");
  validate_channel_model(sc.channel);
  if (sc.channel.n_users != sc.system.n_users || sc.channel.n_bands != sc.system.n_bands)
    throw std::invalid_argument("channel model dimensions do not match the system");
  validate_arrival_model(sc.arrivals);
  if (sc.arrivals.users.size() != sc.system.n_users)
    throw std::invalid_argument("arrival model does not cover every user");
  if (sc.horizon < 1) throw std::invalid_argument("horizon must be >= 1");
  if (!(sc.burn_in_fraction >= 0) || !(sc.burn_in_fraction < 1))
    throw std::invalid_argument("burn_in_fraction must lie in [0,1)");
}

ChannelState initial_channel_state(const MarkovChannelModel& model, Rng& rng) {
  ChannelState state(model.chains.size());
  for (std::size_t i = 0; i < model.chains.size(); ++i)
    state[i] = rng.categorical(model.chains[i].initial);
  return state;
}

ChannelState step_channel(const MarkovChannelModel& model, const ChannelState& state, Rng& rng) {
  if (state.size() != model.chains.size())
    throw std::invalid_argument("step_channel: state size mismatch");
  ChannelState next(state.size());
  for (std::size_t i = 0; i < state.size(); ++i) {
    const MarkovChain& c = model.chains[i];
    const std::size_t ns = c.gains.size();
    if (state[i] >= ns) throw std::invalid_argument("step_channel: state index out of range");
    next[i] = rng.categorical(
        std::span<const double>(c.transition.data() + state[i] * ns, ns));
  }
  return next;
}

GainMatrix gains_of_state(const MarkovChannelModel& model, const ChannelState& state) {
  GainMatrix g(model.n_users, model.n_bands);
  for (std::size_t u = 0; u < model.n_users; ++u)
    for (std::size_t b = 0; b < model.n_bands; ++b)
      g(u, b) = model.chain(u, b).gains[state[u * model.n_bands + b]];
  return g;
}

ArrivalVector sample_arrivals(const ArrivalModel& model, Rng& rng) {
  ArrivalVector out;
  out.amount.resize(model.users.size());
  for (std::size_t k = 0; k < model.users.size(); ++k) {
    const ArrivalUserParams& p = model.users[k];
    switch (model.kind) {
      case ArrivalKind::kDeterministic:
        out.amount[k] = p.mean;
        break;
      case ArrivalKind::kBernoulliBulk:
        out.amount[k] = rng.uniform() < p.prob ? p.size : 0.0;
        break;
      case ArrivalKind::kPoisson:
        out.amount[k] = static_cast<double>(rng.poisson(p.mean));
        break;
      case ArrivalKind::kDiscretizedExponential:
        out.amount[k] = static_cast<double>(rng.geometric_from_mean(p.mean));
        break;
    }
  }
  out.mean_rate = model.mean_rates();
  return out;
}

PolicyDecision schedule_slot(const SystemConfig& cfg, const QueueVector& q,
                             const GainMatrix& gains) {
  const ValidationReport rep = validate_config(cfg, gains);
  if (!rep.ok()) throw std::invalid_argument("schedule_slot: " + rep.errors.front());
  if (q.size() != cfg.n_users) throw std::invalid_argument("schedule_slot: queue size mismatch");
  for (double v : q)
    if (!(v >= 0) || !std::isfinite(v))
      throw std::invalid_argument("schedule_slot: queues must be finite and >= 0");
  const double vn0 = cfg.v_param * cfg.noise_psd;
  if (!(vn0 > 0))
    throw std::invalid_argument("schedule_slot: v_param must be > 0 to trade power for delay");

  PolicyDecision dec{RateMatrix(cfg.n_users, cfg.n_bands), EnergyMatrix(cfg.n_users, cfg.n_bands)};
  if (std::all_of(q.begin(), q.end(), [](double v) { return v == 0.0; })) return dec;

  std::vector<double> col(cfg.n_users), sorted_gains(cfg.n_users), sorted_q(cfg.n_users),
      rate_col(cfg.n_users);
  for (std::size_t m = 0; m < cfg.n_bands; ++m) {
    for (std::size_t k = 0; k < cfg.n_users; ++k) col[k] = gains(k, m);
    // ties are nudged apart only for the solve; energies use the true gains
    const std::vector<double> solver_gains = perturb_ties(col);
    const DecodeOrder ord = decode_order(solver_gains);
    for (std::size_t k = 0; k < cfg.n_users; ++k) {
      sorted_gains[k] = solver_gains[ord.order[k]];
      sorted_q[k] = q[ord.order[k]];
    }
    const SolverSolution sol = solve_band(make_band_problem(sorted_gains, sorted_q, vn0));
    for (std::size_t k = 0; k < cfg.n_users; ++k) {
      dec.rates(ord.order[k], m) = sol.rates[k];
      rate_col[ord.order[k]] = sol.rates[k];
    }
    const BandEnergyResult energy = superposition_energies(col, rate_col, cfg.noise_psd);
    for (std::size_t k = 0; k < cfg.n_users; ++k)
      dec.energies(k, m) = energy.per_user_energy[k] * cfg.symbols_per_slot;
  }
  return dec;
}

SimSummary compute_summary(const SlotSeries& s, std::int64_t burn_in_slots) {
  if (s.horizon < 1) throw std::invalid_argument("compute_summary: empty series");
  if (burn_in_slots < 0 || burn_in_slots >= s.horizon)
    throw std::invalid_argument("compute_summary: burn-in must leave at least one slot");
  const double window = static_cast<double>(s.horizon - burn_in_slots);

  SimSummary sum;
  sum.power_efficiency = mean_total_energy(s, burn_in_slots);
  sum.per_user_throughput.assign(s.n_users, 0.0);
  sum.per_user_arrival_mean.assign(s.n_users, 0.0);
  for (std::int64_t t = burn_in_slots; t < s.horizon; ++t) {
    double total_q = 0.0;
    for (std::size_t k = 0; k < s.n_users; ++k) {
      double offered = 0.0;
      for (std::size_t m = 0; m < s.n_bands; ++m) offered += s.rate_at(t, k, m);
      const double backlog = s.queue_at(t, k) + s.arrival_at(t, k);
      sum.per_user_throughput[k] += std::min(backlog, offered);  // what actually left
      sum.per_user_arrival_mean[k] += s.arrival_at(t, k);
      total_q += s.queue_at(t, k);
      sum.max_queue = std::max(sum.max_queue, s.queue_at(t, k));
    }
    sum.mean_queue += total_q;
  }
  for (std::size_t k = 0; k < s.n_users; ++k) {
    sum.per_user_throughput[k] /= window;
    sum.per_user_arrival_mean[k] /= window;
  }
  sum.mean_queue /= window;

  if (s.horizon >= kMinStabilityHorizon) {
    double arr_total = 0.0;
    for (double a : sum.per_user_arrival_mean) arr_total += a;
    sum.stability = stability_from_series(s, arr_total);
  }
  return sum;
}

SimTrace run_simulation(const Scenario& sc) {
  validate_scenario(sc);
  const std::size_t n = sc.system.n_users, nb = sc.system.n_bands;
  const std::int64_t horizon = sc.horizon;

  SimTrace trace;
  trace.system = sc.system;
  trace.horizon = horizon;
  trace.burn_in_slots =
      static_cast<std::int64_t>(std::floor(sc.burn_in_fraction * static_cast<double>(horizon)));
  trace.seed = sc.seed;
  trace.series.n_users = n;
  trace.series.n_bands = nb;
  trace.series.horizon = horizon;
  const std::size_t per_user = static_cast<std::size_t>(horizon) * n;
  const std::size_t per_cell = per_user * nb;
  trace.series.queues.reserve(per_user);
  trace.series.arrivals.reserve(per_user);
  trace.series.rates.reserve(per_cell);
  trace.series.energies.reserve(per_cell);
  trace.gains.reserve(per_cell);
  trace.channel_state.reserve(per_cell);

  Rng channel_rng(sc.seed, "channel");
  Rng arrival_rng(sc.seed, "arrivals");
  ChannelState state = initial_channel_state(sc.channel, channel_rng);
  QueueVector q(n, 0.0);

  for (std::int64_t t = 0; t < horizon; ++t) {
    const GainMatrix gains = gains_of_state(sc.channel, state);
    const PolicyDecision dec = schedule_slot(sc.system, q, gains);
    const ArrivalVector arr = sample_arrivals(sc.arrivals, arrival_rng);

    trace.series.queues.insert(trace.series.queues.end(), q.begin(), q.end());
    trace.series.arrivals.insert(trace.series.arrivals.end(), arr.amount.begin(),
                                 arr.amount.end());
    trace.series.rates.insert(trace.series.rates.end(), dec.rates.flat().begin(),
                              dec.rates.flat().end());
    trace.series.energies.insert(trace.series.energies.end(), dec.energies.flat().begin(),
                                 dec.energies.flat().end());
    trace.gains.insert(trace.gains.end(), gains.flat().begin(), gains.flat().end());
    trace.channel_state.insert(trace.channel_state.end(), state.begin(), state.end());

    q = queue_update(q, arr, dec.rates);
    state = step_channel(sc.channel, state, channel_rng);
  }

  trace.summary = compute_summary(trace.series, trace.burn_in_slots);
  return trace;
}

double power_efficiency(const SimTrace& trace) {
  return mean_total_energy(trace.series, trace.burn_in_slots);
}

StabilityReport stability_diagnostic(const SimTrace& trace) {
  if (trace.horizon < kMinStabilityHorizon)
    throw std::invalid_argument("stability_diagnostic: needs a horizon of at least " +
                                std::to_string(kMinStabilityHorizon) + " slots");
  double arr_total = 0.0;
  for (double a : trace.summary.per_user_arrival_mean) arr_total += a;
  return stability_from_series(trace.series, arr_total);
}

std::vector<SweepRow> run_sweep(const Scenario& base, std::span<const double> v_values,
                                std::span<const std::uint64_t> seeds, unsigned max_threads) {
  if (v_values.empty() || seeds.empty())
    throw std::invalid_argument("run_sweep: need at least one v value and one seed");
  for (double v : v_values)
    if (!(v > 0) || !std::isfinite(v))
      throw std::invalid_argument("run_sweep: v values must be finite and > 0");
  if (base.horizon < kMinStabilityHorizon)
    throw std::invalid_argument("run_sweep: horizon must be >= " +
                                std::to_string(kMinStabilityHorizon) +
                                " so rows carry a stability verdict");
  {
    Scenario probe = base;  // fail fast on a bad scenario before spawning threads
    probe.system.v_param = v_values[0];
    validate_scenario(probe);
  }

  std::vector<SweepRow> rows(v_values.size() * seeds.size());
  parallel_for(rows.size(), max_threads, [&](std::size_t i) {
    Scenario sc = base;
    sc.system.v_param = v_values[i / seeds.size()];
    sc.seed = seeds[i % seeds.size()];
    const SimTrace trace = run_simulation(sc);
    rows[i] = SweepRow{sc.system.v_param, sc.seed, trace.summary.power_efficiency,
                       trace.summary.mean_queue, trace.summary.stability->stable};
  });
  return rows;
}

}  // namespace mbsched
