#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mbsched/energy.hpp"
#include "mbsched/sim.hpp"
#include "mbsched/solver.hpp"

namespace mbsched {

inline constexpr int kSchemaVersion = 1;

// All readers are strict: unknown keys, missing keys, wrong types and a wrong
// schema_version all raise std::invalid_argument naming the offending field.
// Readers never invent defaults beyond the ones documented in the README.

Scenario parse_scenario_text(const std::string& text);
Scenario load_scenario(const std::string& path);

// Standalone one-band allocation problem, in original (unsorted) user order.
struct SolveProblem {
  std::vector<double> gains;
  std::vector<double> queues;
  double v_param = 1.0;
  double noise_psd = 1.0;
};

SolveProblem parse_problem_text(const std::string& text);
SolveProblem load_problem(const std::string& path);

// Doubles in every file this module writes are %.17g: enough digits to
// round-trip the exact bit pattern back through strtod.
std::string format_double(double v);

void write_summary_json(const std::string& path, const SimTrace& trace);
void write_solve_json(const std::string& path, const SolveProblem& input, const DecodeOrder& ord,
                      const SolverSolution& sol);
void write_trace_csv(const std::string& path, const SimTrace& trace);
std::string format_sweep_csv(const std::vector<SweepRow>& rows);
void write_text_file(const std::string& path, const std::string& content);

// Parsed back form of summary.json (metrics bit-identical to what was written).
struct ParsedSummary {
  std::size_t n_users = 0;
  std::size_t n_bands = 0;
  std::int64_t horizon = 0;
  std::int64_t burn_in_slots = 0;
  std::uint64_t seed = 0;
  double v_param = 0.0;
  double noise_psd = 0.0;
  double symbols_per_slot = 0.0;
  SimSummary summary;
};
ParsedSummary load_summary_json(const std::string& path);

// Reads a trace.csv back into per-slot series (plus gains), so summaries can
// be recomputed from the file alone and compared against summary.json.
struct ParsedTrace {
  SlotSeries series;
  std::vector<double> gains;  // horizon x n_users x n_bands
};
ParsedTrace read_trace_csv(const std::string& path);

}  // namespace mbsched
