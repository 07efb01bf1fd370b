#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mbsched/core.hpp"
#include "mbsched/rng.hpp"

namespace mbsched {

// Finite-state fading chain for one (user, band) pair. States are gain values;
// rows of `transition` are the outgoing distributions.
struct MarkovChain {
  std::vector<double> gains;
  Mat transition;               // n_states x n_states, rows sum to 1
  std::vector<double> initial;  // distribution over states at slot 0
};

struct MarkovChannelModel {
  std::size_t n_users = 0;
  std::size_t n_bands = 0;
  std::vector<MarkovChain> chains;  // user-major: chain(u,b) = chains[u*n_bands+b]

  const MarkovChain& chain(std::size_t u, std::size_t b) const {
    return chains[u * n_bands + b];
  }
};

void validate_channel_model(const MarkovChannelModel& model);

enum class ArrivalKind { kDeterministic, kBernoulliBulk, kPoisson, kDiscretizedExponential };

// Per-user arrival parameters; `prob`/`size` only apply to bernoulli_bulk,
// `mean` to the other kinds.
struct ArrivalUserParams {
  double mean = 0.0;
  double prob = 0.0;
  double size = 0.0;
};

struct ArrivalModel {
  ArrivalKind kind = ArrivalKind::kDeterministic;
  std::vector<ArrivalUserParams> users;

  std::vector<double> mean_rates() const;
};

void validate_arrival_model(const ArrivalModel& model);

struct Scenario {
  SystemConfig system;
  MarkovChannelModel channel;
  ArrivalModel arrivals;
  std::int64_t horizon = 0;
  double burn_in_fraction = 0.1;  // discarded prefix when averaging
  std::uint64_t seed = 0;
};

void validate_scenario(const Scenario& sc);

// Current state index of every chain, user-major like the model.
using ChannelState = std::vector<std::size_t>;

ChannelState initial_channel_state(const MarkovChannelModel& model, Rng& rng);
ChannelState step_channel(const MarkovChannelModel& model, const ChannelState& state, Rng& rng);
GainMatrix gains_of_state(const MarkovChannelModel& model, const ChannelState& state);

ArrivalVector sample_arrivals(const ArrivalModel& model, Rng& rng);

// One slot of the backlog-driven policy: each band solved to optimality with
// weights = current queues, trading queue drain against transmit energy at
// exchange rate v_param. Energies are per slot (scaled by symbols_per_slot)
// and computed from the true gains.
struct PolicyDecision {
  RateMatrix rates;
  EnergyMatrix energies;
};
PolicyDecision schedule_slot(const SystemConfig& cfg, const QueueVector& q,
                             const GainMatrix& gains);

// Flat per-slot records; the unit both summaries and the CSV trace are
// computed from, so the two can never disagree.
struct SlotSeries {
  std::size_t n_users = 0;
  std::size_t n_bands = 0;
  std::int64_t horizon = 0;
  std::vector<double> queues;    // horizon x n_users, backlog at decision time
  std::vector<double> arrivals;  // horizon x n_users
  std::vector<double> rates;     // horizon x n_users x n_bands
  std::vector<double> energies;  // horizon x n_users x n_bands

  double queue_at(std::int64_t t, std::size_t k) const {
    return queues[static_cast<std::size_t>(t) * n_users + k];
  }
  double arrival_at(std::int64_t t, std::size_t k) const {
    return arrivals[static_cast<std::size_t>(t) * n_users + k];
  }
  double rate_at(std::int64_t t, std::size_t k, std::size_t m) const {
    return rates[(static_cast<std::size_t>(t) * n_users + k) * n_bands + m];
  }
  double energy_at(std::int64_t t, std::size_t k, std::size_t m) const {
    return energies[(static_cast<std::size_t>(t) * n_users + k) * n_bands + m];
  }
};

struct StabilityReport {
  bool stable = false;
  double slope = 0.0;           // nats per slot, fitted over late-run windows
  double max_mean_queue = 0.0;  // largest window mean of the total backlog
};

struct SimSummary {
  double power_efficiency = 0.0;  // mean total energy per slot after burn-in
  std::vector<double> per_user_throughput;  // mean served nats per slot
  std::vector<double> per_user_arrival_mean;
  double mean_queue = 0.0;  // time average of the total backlog
  double max_queue = 0.0;   // largest single-user backlog seen
  std::optional<StabilityReport> stability;  // absent when horizon < 1000
};

// The only summary implementation; the CSV round-trip reuses it verbatim so
// recomputed numbers match bit for bit.
SimSummary compute_summary(const SlotSeries& series, std::int64_t burn_in_slots);

struct SimTrace {
  SystemConfig system;
  std::int64_t horizon = 0;
  std::int64_t burn_in_slots = 0;
  std::uint64_t seed = 0;
  SlotSeries series;
  std::vector<double> gains;              // horizon x n_users x n_bands
  std::vector<std::size_t> channel_state; // horizon x n_users x n_bands
  SimSummary summary;

  double gain_at(std::int64_t t, std::size_t k, std::size_t m) const {
    return gains[(static_cast<std::size_t>(t) * system.n_users + k) * system.n_bands + m];
  }
};

SimTrace run_simulation(const Scenario& sc);

double power_efficiency(const SimTrace& trace);

// Least-squares slope of late-run backlog window means; declares the run
// stable when the fitted drift is at most 1% of the total arrival rate.
// Refuses horizons under 1000 slots - too short to call either way.
StabilityReport stability_diagnostic(const SimTrace& trace);

inline constexpr std::int64_t kMinStabilityHorizon = 1000;
inline constexpr int kStabilityWindows = 20;
inline constexpr double kStabilitySlopeFraction = 0.01;

// One grid point of a trade-off sweep.
struct SweepRow {
  double v_param = 0.0;
  std::uint64_t seed = 0;
  double power_efficiency = 0.0;
  double mean_queue = 0.0;
  bool stable = false;
};

// Runs the scenario once per (v, seed) pair, rows ordered v-major. Runs are
// independent and fan out over up to max_threads threads (0 = all cores);
// results do not depend on the thread count.
std::vector<SweepRow> run_sweep(const Scenario& base, std::span<const double> v_values,
                                std::span<const std::uint64_t> seeds, unsigned max_threads);

}  // namespace mbsched
