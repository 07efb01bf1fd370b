#include "mbsched/core.hpp"

#include <cmath>
#include <stdexcept>

namespace mbsched {

ValidationReport validate_config(const SystemConfig& cfg, const GainMatrix& gains) {
  ValidationReport rep;
  auto err = [&](std::string m) { rep.errors.push_back(std::move(m)); };

  if (cfg.n_users < 1) err("n_users must be >= 1");
  if (cfg.n_bands < 1) err("n_bands must be >= 1");
  if (!(cfg.noise_psd > 0) || !std::isfinite(cfg.noise_psd))
    err("noise_psd must be finite and > 0");
  if (!(cfg.v_param >= 0) || !std::isfinite(cfg.v_param))
    err("v_param must be finite and >= 0");
  if (!(cfg.symbols_per_slot > 0) || !std::isfinite(cfg.symbols_per_slot))
    err("symbols_per_slot must be finite and > 0");

  if (gains.rows() != cfg.n_users || gains.cols() != cfg.n_bands) {
    err("gain matrix is " + std::to_string(gains.rows()) + "x" + std::to_string(gains.cols()) +
        ", expected " + std::to_string(cfg.n_users) + "x" + std::to_string(cfg.n_bands));
    return rep;  // shape is wrong, per-entry checks would be misleading
  }

  for (std::size_t k = 0; k < gains.rows(); ++k)
    for (std::size_t m = 0; m < gains.cols(); ++m) {
      const double d = gains(k, m);
      if (!(d > 0) || !std::isfinite(d))
        err("gain for user " + std::to_string(k) + " band " + std::to_string(m) +
            " must be finite and > 0");
    }
  if (!rep.ok()) return rep;

  for (std::size_t m = 0; m < gains.cols(); ++m)
    for (std::size_t k = 0; k + 1 < gains.rows(); ++k)
      for (std::size_t j = k + 1; j < gains.rows(); ++j)
        if (gains(k, m) == gains(j, m))
          rep.warnings.push_back("band " + std::to_string(m) + ": users " + std::to_string(k) +
                                 " and " + std::to_string(j) +
                                 " have tied gains (deterministic tie-break applies)");
  return rep;
}

QueueVector queue_update(const QueueVector& q, const ArrivalVector& a, const RateMatrix& rates) {
  const std::size_t n = q.size();
  if (a.amount.size() != n || rates.rows() != n)
    throw std::invalid_argument("queue_update: dimension mismatch");
  QueueVector out(n);
  for (std::size_t k = 0; k < n; ++k) {
    if (!(q[k] >= 0) || !std::isfinite(q[k]))
      throw std::invalid_argument("queue_update: queue must be finite and >= 0");
    if (!(a.amount[k] >= 0) || !std::isfinite(a.amount[k]))
      throw std::invalid_argument("queue_update: arrival must be finite and >= 0");
    double served = 0.0;
    for (std::size_t m = 0; m < rates.cols(); ++m) {
      if (!(rates(k, m) >= 0) || !std::isfinite(rates(k, m)))
        throw std::invalid_argument("queue_update: rate must be finite and >= 0");
      served += rates(k, m);
    }
    const double next = q[k] + a.amount[k] - served;
    out[k] = next > 0 ? next : 0.0;
  }
  return out;
}

}  // namespace mbsched
