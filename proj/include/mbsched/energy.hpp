#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace mbsched {

// Exponents above this raise std::overflow_error instead of returning inf.
inline constexpr double kMaxExponent = 700.0;

// Multiplicative nudge applied to exactly-tied gains so downstream sorting and
// gap denominators are well defined.
inline constexpr double kTiePerturbScale = 1e-9;

// Decode sequence for one band: order[k] is the user decoded k-th.
struct DecodeOrder {
  std::vector<std::size_t> order;
};

// Weakest-gain-first sequence; ties broken by original index (stable).
DecodeOrder decode_order(std::span<const double> gains);

// Returns gains with each exact-tie group spread out as d*(1 + j*1e-9),
// j = 0,1,... in original index order within the group. Distinct gains pass
// through untouched.
std::vector<double> perturb_ties(std::span<const double> gains);

struct BandEnergyResult {
  std::vector<double> per_user_energy;  // indexed by original user
  double total = 0.0;
};

// Energy of serving `rates` (nats/symbol) in one band when decoding follows
// `order`: the k-th decoded user pays (n0/d)*(e^R - 1)*e^{sum of earlier rates}.
// Later-decoded users ride on top of everything decoded before them.
BandEnergyResult energy_for_order(std::span<const double> gains, std::span<const double> rates,
                                  std::span<const std::size_t> order, double n0);

// Same with the weakest-first decode order, which minimizes the total.
BandEnergyResult superposition_energies(std::span<const double> gains,
                                        std::span<const double> rates, double n0);

}  // namespace mbsched
