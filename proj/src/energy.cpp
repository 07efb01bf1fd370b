#include "mbsched/energy.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace mbsched {

namespace {

void check_band_inputs(std::span<const double> gains, double n0) {
  if (gains.empty()) throw std::invalid_argument("band must have at least one user");
  for (double d : gains)
    if (!(d > 0) || !std::isfinite(d))
      throw std::invalid_argument("gains must be finite and > 0");
  if (!(n0 > 0) || !std::isfinite(n0))
    throw std::invalid_argument("noise psd must be finite and > 0");
}

}  // namespace

DecodeOrder decode_order(std::span<const double> gains) {
  check_band_inputs(gains, 1.0);
  DecodeOrder out;
  out.order.resize(gains.size());
  std::iota(out.order.begin(), out.order.end(), std::size_t{0});
  std::stable_sort(out.order.begin(), out.order.end(),
                   [&](std::size_t a, std::size_t b) { return gains[a] < gains[b]; });
  return out;
}

std::vector<double> perturb_ties(std::span<const double> gains) {
  check_band_inputs(gains, 1.0);
  std::vector<double> out(gains.begin(), gains.end());
  std::vector<std::size_t> idx(gains.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return gains[a] < gains[b]; });
  for (std::size_t s = 0; s < idx.size();) {
    std::size_t e = s + 1;
    while (e < idx.size() && gains[idx[e]] == gains[idx[s]]) ++e;
    for (std::size_t j = s; j < e; ++j)  // group members are already in index order
      out[idx[j]] = gains[idx[j]] * (1.0 + static_cast<double>(j - s) * kTiePerturbScale);
    s = e;
  }
  return out;
}

BandEnergyResult energy_for_order(std::span<const double> gains, std::span<const double> rates,
                                  std::span<const std::size_t> order, double n0) {
  check_band_inputs(gains, n0);
  const std::size_t n = gains.size();
  if (rates.size() != n || order.size() != n)
    throw std::invalid_argument("energy_for_order: dimension mismatch");
  std::vector<char> seen(n, 0);
  for (std::size_t u : order) {
    if (u >= n || seen[u]) throw std::invalid_argument("energy_for_order: not a permutation");
    seen[u] = 1;
  }
  for (double r : rates)
    if (!(r >= 0) || !std::isfinite(r))
      throw std::invalid_argument("rates must be finite and >= 0");

  BandEnergyResult res;
  res.per_user_energy.assign(n, 0.0);
  double log_prefix = 0.0;  // sum of rates decoded so far
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t u = order[k];
    if (log_prefix + rates[u] > kMaxExponent)
      throw std::overflow_error("superposition energy exponent exceeds " +
                                std::to_string(kMaxExponent));
    const double e = (n0 / gains[u]) * std::expm1(rates[u]) * std::exp(log_prefix);
    res.per_user_energy[u] = e;
    res.total += e;
    log_prefix += rates[u];
  }
  return res;
}

BandEnergyResult superposition_energies(std::span<const double> gains,
                                        std::span<const double> rates, double n0) {
  const DecodeOrder ord = decode_order(gains);
  return energy_for_order(gains, rates, ord.order, n0);
}

}  // namespace mbsched
