#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace mbsched {

// Dense row-major matrix of doubles; users are rows, bands are columns.
class Mat {
 public:
  Mat() = default;
  Mat(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  std::span<const double> flat() const { return data_; }

  std::vector<double> col(std::size_t c) const {
    std::vector<double> out(rows_);
    for (std::size_t r = 0; r < rows_; ++r) out[r] = (*this)(r, c);
    return out;
  }

  bool same_shape(const Mat& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

using GainMatrix = Mat;    // channel gains d_km > 0
using RateMatrix = Mat;    // scheduled rates, nats per symbol
using EnergyMatrix = Mat;  // transmit energies per slot

using QueueVector = std::vector<double>;  // backlog in nats

struct SystemConfig {
  std::size_t n_users = 0;
  std::size_t n_bands = 0;
  double noise_psd = 1.0;       // N0 > 0
  double v_param = 1.0;         // delay/power trade-off knob V >= 0
  double symbols_per_slot = 1;  // scales per-slot energy
};

// One slot's arrivals alongside the generating means (used by stability checks).
struct ArrivalVector {
  std::vector<double> amount;
  std::vector<double> mean_rate;
};

struct ValidationReport {
  std::vector<std::string> errors;
  std::vector<std::string> warnings;
  bool ok() const { return errors.empty(); }
};

// Checks config invariants and gain-matrix shape/positivity; tied gains within
// a band are reported as warnings (the solver breaks ties deterministically).
ValidationReport validate_config(const SystemConfig& cfg, const GainMatrix& gains);

// Per-user backlog recursion: Q' = max(Q + A - sum_m R_km, 0).
QueueVector queue_update(const QueueVector& q, const ArrivalVector& a, const RateMatrix& rates);

}  // namespace mbsched
