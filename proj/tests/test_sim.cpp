#include <cmath>
#include <cstdint>
#include <vector>

#include "doctest.h"
#include "mbsched/energy.hpp"
#include "mbsched/rng.hpp"
#include "mbsched/sim.hpp"

using namespace mbsched;

namespace {

MarkovChain symmetric_chain(double g_low, double g_high, double stay) {
  MarkovChain c;
  c.gains = {g_low, g_high};
  c.transition = Mat(2, 2);
  c.transition(0, 0) = stay;
  c.transition(0, 1) = 1.0 - stay;
  c.transition(1, 0) = 1.0 - stay;
  c.transition(1, 1) = stay;
  c.initial = {0.5, 0.5};
  return c;
}

Scenario small_scenario(std::uint64_t seed, std::int64_t horizon) {
  Scenario sc;
  sc.system.n_users = 2;
  sc.system.n_bands = 2;
  sc.system.noise_psd = 1.0;
  sc.system.v_param = 10.0;
  sc.channel.n_users = 2;
  sc.channel.n_bands = 2;
  for (int i = 0; i < 4; ++i) sc.channel.chains.push_back(symmetric_chain(1.0, 4.0, 0.9));
  sc.arrivals.kind = ArrivalKind::kPoisson;
  sc.arrivals.users = {{0.5, 0.0, 0.0}, {0.5, 0.0, 0.0}};
  sc.horizon = horizon;
  sc.burn_in_fraction = 0.1;
  sc.seed = seed;
  return sc;
}

}  // namespace

TEST_CASE("channel model validation rejects malformed chains") {
  MarkovChannelModel m;
  m.n_users = 1;
  m.n_bands = 1;
  m.chains.push_back(symmetric_chain(1.0, 2.0, 0.9));
  CHECK_NOTHROW(validate_channel_model(m));

  MarkovChannelModel wrong_count = m;
  wrong_count.n_bands = 2;
  CHECK_THROWS_AS(validate_channel_model(wrong_count), std::invalid_argument);

  MarkovChannelModel bad_row = m;
  bad_row.chains[0].transition(0, 0) = 0.7;  // row now sums to 0.8
  CHECK_THROWS_AS(validate_channel_model(bad_row), std::invalid_argument);

  MarkovChannelModel bad_gain = m;
  bad_gain.chains[0].gains[1] = 0.0;
  CHECK_THROWS_AS(validate_channel_model(bad_gain), std::invalid_argument);

  MarkovChannelModel bad_init = m;
  bad_init.chains[0].initial = {1.0};
  CHECK_THROWS_AS(validate_channel_model(bad_init), std::invalid_argument);

  MarkovChannelModel no_states = m;
  no_states.chains[0] = MarkovChain{};
  CHECK_THROWS_AS(validate_channel_model(no_states), std::invalid_argument);
}

TEST_CASE("arrival model validation and mean rates") {
  ArrivalModel a;
  a.kind = ArrivalKind::kBernoulliBulk;
  a.users = {{0.0, 0.25, 8.0}};
  CHECK_NOTHROW(validate_arrival_model(a));
  CHECK(a.mean_rates() == std::vector<double>{2.0});

  ArrivalModel empty;
  CHECK_THROWS_AS(validate_arrival_model(empty), std::invalid_argument);

  ArrivalModel bad_prob = a;
  bad_prob.users[0].prob = 1.5;
  CHECK_THROWS_AS(validate_arrival_model(bad_prob), std::invalid_argument);

  ArrivalModel bad_mean;
  bad_mean.kind = ArrivalKind::kPoisson;
  bad_mean.users = {{-1.0, 0.0, 0.0}};
  CHECK_THROWS_AS(validate_arrival_model(bad_mean), std::invalid_argument);
  bad_mean.users[0].mean = 0.75;
  CHECK(bad_mean.mean_rates() == std::vector<double>{0.75});
}

TEST_CASE("scenario validation covers the cross-field constraints") {
  const Scenario good = small_scenario(1, 100);
  CHECK_NOTHROW(validate_scenario(good));

  Scenario sc = good;
  sc.horizon = 0;
  CHECK_THROWS_AS(validate_scenario(sc), std::invalid_argument);

  sc = good;
  sc.burn_in_fraction = 1.0;
  CHECK_THROWS_AS(validate_scenario(sc), std::invalid_argument);

  sc = good;
  sc.system.v_param = 0.0;
  CHECK_THROWS_AS(validate_scenario(sc), std::invalid_argument);

  sc = good;
  sc.channel.n_users = 3;  // no longer matches system or chain count
  CHECK_THROWS_AS(validate_scenario(sc), std::invalid_argument);

  sc = good;
  sc.arrivals.users.pop_back();
  CHECK_THROWS_AS(validate_scenario(sc), std::invalid_argument);
}

TEST_CASE("symmetric two-state chain spends half its time in each state") {
  MarkovChannelModel m;
  m.n_users = 1;
  m.n_bands = 1;
  m.chains.push_back(symmetric_chain(1.0, 4.0, 0.9));
  Rng rng(2024);
  ChannelState st = initial_channel_state(m, rng);
  const int steps = 20000;
  int in_low = 0;
  for (int t = 0; t < steps; ++t) {
    if (st[0] == 0) ++in_low;
    st = step_channel(m, st, rng);
  }
  const double frac = static_cast<double>(in_low) / steps;
  CHECK(frac > 0.44);
  CHECK(frac < 0.56);

  const GainMatrix g = gains_of_state(m, ChannelState{1});
  CHECK(g(0, 0) == 4.0);
}

TEST_CASE("arrival samplers hit their advertised means") {
  Rng rng(5150);
  ArrivalModel det;
  det.kind = ArrivalKind::kDeterministic;
  det.users = {{1.25, 0.0, 0.0}};
  const ArrivalVector one = sample_arrivals(det, rng);
  CHECK(one.amount == std::vector<double>{1.25});
  CHECK(one.mean_rate == std::vector<double>{1.25});

  ArrivalModel bulk;
  bulk.kind = ArrivalKind::kBernoulliBulk;
  bulk.users = {{0.0, 0.3, 5.0}};
  double acc = 0.0;
  const int trials = 20000;
  for (int t = 0; t < trials; ++t) {
    const ArrivalVector a = sample_arrivals(bulk, rng);
    CHECK((a.amount[0] == 0.0 || a.amount[0] == 5.0));
    acc += a.amount[0];
  }
  CHECK(acc / trials == doctest::Approx(1.5).epsilon(0.05));
}

TEST_CASE("zero backlog schedules nothing anywhere") {
  SystemConfig cfg;
  cfg.n_users = 2;
  cfg.n_bands = 2;
  cfg.v_param = 10.0;
  GainMatrix gains(2, 2, 1.0);
  gains(0, 1) = 4.0;
  const PolicyDecision dec = schedule_slot(cfg, QueueVector{0.0, 0.0}, gains);
  for (double r : dec.rates.flat()) CHECK(r == 0.0);
  for (double e : dec.energies.flat()) CHECK(e == 0.0);
}

TEST_CASE("scheduled energies are the superposition energies of the true gains") {
  SystemConfig cfg;
  cfg.n_users = 3;
  cfg.n_bands = 2;
  cfg.noise_psd = 0.5;
  cfg.v_param = 2.0;
  cfg.symbols_per_slot = 3.0;
  Rng rng(2323);
  for (int trial = 0; trial < 50; ++trial) {
    GainMatrix gains(3, 2);
    QueueVector q(3);
    for (std::size_t k = 0; k < 3; ++k) {
      q[k] = 50.0 * rng.uniform();
      for (std::size_t m = 0; m < 2; ++m) gains(k, m) = 0.25 + 4.0 * rng.uniform();
    }
    const PolicyDecision dec = schedule_slot(cfg, q, gains);
    for (std::size_t m = 0; m < 2; ++m) {
      const BandEnergyResult band =
          superposition_energies(gains.col(m), dec.rates.col(m), cfg.noise_psd);
      for (std::size_t k = 0; k < 3; ++k)
        CHECK(dec.energies(k, m) == band.per_user_energy[k] * cfg.symbols_per_slot);
    }
  }
}

TEST_CASE("simulation runs are bitwise reproducible per seed") {
  const Scenario sc = small_scenario(7, 400);
  const SimTrace a = run_simulation(sc);
  const SimTrace b = run_simulation(sc);
  CHECK(a.series.queues == b.series.queues);
  CHECK(a.series.arrivals == b.series.arrivals);
  CHECK(a.series.rates == b.series.rates);
  CHECK(a.series.energies == b.series.energies);
  CHECK(a.gains == b.gains);
  CHECK(a.channel_state == b.channel_state);
  CHECK(a.summary.power_efficiency == b.summary.power_efficiency);

  Scenario other = sc;
  other.seed = 8;
  const SimTrace c = run_simulation(other);
  CHECK(a.series.arrivals != c.series.arrivals);
}

TEST_CASE("recorded queues obey the backlog recursion exactly") {
  const Scenario sc = small_scenario(3, 300);
  const SimTrace tr = run_simulation(sc);
  std::vector<double> q(sc.system.n_users, 0.0);
  for (std::int64_t t = 0; t < tr.horizon; ++t) {
    for (std::size_t k = 0; k < sc.system.n_users; ++k)
      CHECK(tr.series.queue_at(t, k) == q[k]);
    for (std::size_t k = 0; k < sc.system.n_users; ++k) {
      double served = 0.0;
      for (std::size_t m = 0; m < sc.system.n_bands; ++m) served += tr.series.rate_at(t, k, m);
      const double next = q[k] + tr.series.arrival_at(t, k) - served;
      q[k] = next > 0 ? next : 0.0;
    }
  }
}

TEST_CASE("compute_summary on a hand-built series") {
  SlotSeries s;
  s.n_users = 2;
  s.n_bands = 1;
  s.horizon = 3;
  s.queues = {1.0, 0.0, 2.0, 5.0, 0.0, 3.0};
  s.arrivals = {1.0, 1.0, 0.0, 2.0, 4.0, 0.0};
  s.rates = {0.5, 3.0, 5.0, 1.0, 2.0, 2.0};
  s.energies = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6};

  const SimSummary sum = compute_summary(s, 1);
  CHECK(sum.power_efficiency == doctest::Approx(0.9).epsilon(1e-15));
  // user 0: min(2+0, 5) then min(0+4, 2) -> mean 2; user 1: min(5+2,1), min(3+0,2) -> 1.5
  CHECK(sum.per_user_throughput[0] == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(sum.per_user_throughput[1] == doctest::Approx(1.5).epsilon(1e-15));
  CHECK(sum.per_user_arrival_mean[0] == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(sum.per_user_arrival_mean[1] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(sum.mean_queue == doctest::Approx(5.0).epsilon(1e-15));
  CHECK(sum.max_queue == 5.0);
  CHECK(!sum.stability.has_value());  // horizon far below the minimum

  CHECK_THROWS_AS((void)compute_summary(s, 3), std::invalid_argument);
  CHECK_THROWS_AS((void)compute_summary(s, -1), std::invalid_argument);
}

TEST_CASE("stability diagnostic separates draining from drowning") {
  // build synthetic backlog paths directly; only queues matter to the fit
  const auto make = [](double slope_per_slot) {
    SimTrace tr;
    tr.horizon = 2000;
    tr.system.n_users = 1;
    tr.system.n_bands = 1;
    tr.series.n_users = 1;
    tr.series.n_bands = 1;
    tr.series.horizon = 2000;
    tr.series.queues.resize(2000);
    tr.series.arrivals.assign(2000, 1.0);  // total arrival rate 1
    tr.series.rates.assign(2000, 0.0);
    tr.series.energies.assign(2000, 0.0);
    for (int t = 0; t < 2000; ++t) tr.series.queues[t] = 5.0 + slope_per_slot * t;
    tr.summary = compute_summary(tr.series, 0);
    return tr;
  };

  const SimTrace flat = make(0.0);
  const StabilityReport ok = stability_diagnostic(flat);
  CHECK(ok.stable);
  CHECK(ok.slope == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(ok.max_mean_queue == doctest::Approx(5.0).epsilon(1e-12));

  const SimTrace growing = make(0.5);  // drift half the arrival rate: unstable
  const StabilityReport bad = stability_diagnostic(growing);
  CHECK(!bad.stable);
  CHECK(bad.slope == doctest::Approx(0.5).epsilon(1e-9));

  SimTrace tiny = make(0.0);
  tiny.horizon = 500;
  CHECK_THROWS_AS((void)stability_diagnostic(tiny), std::invalid_argument);
}

TEST_CASE("sweep rows come back v-major and thread-count independent") {
  Scenario base = small_scenario(1, 1200);
  const std::vector<double> vs = {1.0, 10.0};
  const std::vector<std::uint64_t> seeds = {4, 9};
  const std::vector<SweepRow> serial = run_sweep(base, vs, seeds, 1);
  REQUIRE(serial.size() == 4);
  CHECK(serial[0].v_param == 1.0);
  CHECK(serial[0].seed == 4);
  CHECK(serial[1].v_param == 1.0);
  CHECK(serial[1].seed == 9);
  CHECK(serial[2].v_param == 10.0);
  CHECK(serial[3].seed == 9);

  const std::vector<SweepRow> threaded = run_sweep(base, vs, seeds, 3);
  for (std::size_t i = 0; i < serial.size(); ++i) {
    CHECK(serial[i].power_efficiency == threaded[i].power_efficiency);
    CHECK(serial[i].mean_queue == threaded[i].mean_queue);
    CHECK(serial[i].stable == threaded[i].stable);
  }

  CHECK_THROWS_AS((void)run_sweep(base, std::vector<double>{}, seeds, 1), std::invalid_argument);
  Scenario short_horizon = base;
  short_horizon.horizon = 100;
  CHECK_THROWS_AS((void)run_sweep(short_horizon, vs, seeds, 1), std::invalid_argument);
}
