#include "mbsched/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace mbsched {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& ctx, const std::string& msg) {
  throw std::invalid_argument(ctx + ": " + msg);
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot open " + path + " for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json parse_json(const std::string& text, const std::string& ctx) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    fail(ctx, std::string("JSON parse error: ") + e.what());
  }
}

const json& member(const json& obj, const char* key, const std::string& ctx) {
  if (!obj.is_object()) fail(ctx, "expected an object");
  const auto it = obj.find(key);
  if (it == obj.end()) fail(ctx, std::string("missing required field \"") + key + "\"");
  return *it;
}

// Strictness backbone: every object must list exactly its known keys.
void check_keys(const json& obj, std::initializer_list<const char*> allowed,
                std::initializer_list<const char*> optional, const std::string& ctx) {
  if (!obj.is_object()) fail(ctx, "expected an object");
  for (const auto& [key, value] : obj.items()) {
    (void)value;
    const auto known = [&](std::initializer_list<const char*> list) {
      return std::any_of(list.begin(), list.end(), [&](const char* k) { return key == k; });
    };
    if (!known(allowed) && !known(optional)) fail(ctx, "unknown field \"" + key + "\"");
  }
  for (const char* key : allowed) member(obj, key, ctx);
}

double get_number(const json& obj, const char* key, const std::string& ctx) {
  const json& v = member(obj, key, ctx);
  if (!v.is_number()) fail(ctx, std::string("field \"") + key + "\" must be a number");
  return v.get<double>();
}

std::int64_t get_integer(const json& obj, const char* key, const std::string& ctx) {
  const json& v = member(obj, key, ctx);
  if (!v.is_number_integer()) fail(ctx, std::string("field \"") + key + "\" must be an integer");
  return v.get<std::int64_t>();
}

std::uint64_t get_nonneg_integer(const json& obj, const char* key, const std::string& ctx) {
  const json& v = member(obj, key, ctx);
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0))
    fail(ctx, std::string("field \"") + key + "\" must be an integer >= 0");
  return v.get<std::uint64_t>();
}

std::size_t get_count(const json& obj, const char* key, const std::string& ctx) {
  const std::int64_t v = get_integer(obj, key, ctx);
  if (v < 1) fail(ctx, std::string("field \"") + key + "\" must be >= 1");
  return static_cast<std::size_t>(v);
}

std::vector<double> number_array(const json& v, const std::string& ctx) {
  if (!v.is_array()) fail(ctx, "expected an array of numbers");
  std::vector<double> out;
  out.reserve(v.size());
  for (const json& e : v) {
    if (!e.is_number()) fail(ctx, "expected an array of numbers");
    out.push_back(e.get<double>());
  }
  return out;
}

MarkovChain parse_chain(const json& j, const std::string& ctx) {
  check_keys(j, {"gains", "transition", "initial"}, {}, ctx);
  MarkovChain c;
  c.gains = number_array(member(j, "gains", ctx), ctx + ".gains");
  c.initial = number_array(member(j, "initial", ctx), ctx + ".initial");
  const json& t = member(j, "transition", ctx);
  if (!t.is_array() || t.size() != c.gains.size())
    fail(ctx + ".transition", "expected one row per state");
  c.transition = Mat(c.gains.size(), c.gains.size());
  for (std::size_t r = 0; r < t.size(); ++r) {
    const std::vector<double> row =
        number_array(t[r], ctx + ".transition[" + std::to_string(r) + "]");
    if (row.size() != c.gains.size())
      fail(ctx + ".transition[" + std::to_string(r) + "]", "expected one entry per state");
    for (std::size_t cidx = 0; cidx < row.size(); ++cidx) c.transition(r, cidx) = row[cidx];
  }
  return c;
}

ArrivalKind parse_arrival_kind(const std::string& s, const std::string& ctx) {
  if (s == "deterministic") return ArrivalKind::kDeterministic;
  if (s == "bernoulli_bulk") return ArrivalKind::kBernoulliBulk;
  if (s == "poisson") return ArrivalKind::kPoisson;
  if (s == "discretized_exponential") return ArrivalKind::kDiscretizedExponential;
  fail(ctx, "unknown arrival kind \"" + s + "\"");
}

void require_schema_version(const json& j, const std::string& ctx) {
  if (get_integer(j, "schema_version", ctx) != kSchemaVersion)
    fail(ctx, "unsupported schema_version (expected " + std::to_string(kSchemaVersion) + ")");
}

void ensure_parent_dir(const std::string& path) {
  const std::filesystem::path parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
}

std::string fmt_index_array(std::span<const std::size_t> v) {
  std::string out = "[";
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ", ";
    out += std::to_string(v[i]);
  }
  return out + "]";
}

std::string fmt_double_array(std::span<const double> v) {
  std::string out = "[";
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ", ";
    out += format_double(v[i]);
  }
  return out + "]";
}

}  // namespace

Scenario parse_scenario_text(const std::string& text) {
  const std::string ctx = "scenario";
  const json j = parse_json(text, ctx);
  check_keys(j, {"schema_version", "system", "channel", "arrivals", "horizon"},
             {"burn_in_fraction", "seed"}, ctx);
  require_schema_version(j, ctx);

  Scenario sc;
  {
    const json& sys = member(j, "system", ctx);
    const std::string sctx = ctx + ".system";
    check_keys(sys, {"n_users", "n_bands", "noise_psd", "v_param"}, {"symbols_per_slot"}, sctx);
    sc.system.n_users = get_count(sys, "n_users", sctx);
    sc.system.n_bands = get_count(sys, "n_bands", sctx);
    sc.system.noise_psd = get_number(sys, "noise_psd", sctx);
    sc.system.v_param = get_number(sys, "v_param", sctx);
    if (sys.contains("symbols_per_slot"))
      sc.system.symbols_per_slot = get_number(sys, "symbols_per_slot", sctx);
  }
  {
    const json& ch = member(j, "channel", ctx);
    const std::string cctx = ctx + ".channel";
    if (!ch.is_object()) fail(cctx, "expected an object");
    const bool has_shared = ch.contains("shared"), has_chains = ch.contains("chains");
    if (has_shared == has_chains)
      fail(cctx, "provide exactly one of \"shared\" or \"chains\"");
    sc.channel.n_users = sc.system.n_users;
    sc.channel.n_bands = sc.system.n_bands;
    if (has_shared) {
      check_keys(ch, {"shared"}, {}, cctx);
      // same chain parameters everywhere; each pair still evolves independently
      const MarkovChain proto = parse_chain(ch["shared"], cctx + ".shared");
      sc.channel.chains.assign(sc.system.n_users * sc.system.n_bands, proto);
    } else {
      check_keys(ch, {"chains"}, {}, cctx);
      const json& rows = ch["chains"];
      if (!rows.is_array() || rows.size() != sc.system.n_users)
        fail(cctx + ".chains", "expected one row per user");
      for (std::size_t u = 0; u < rows.size(); ++u) {
        const json& row = rows[u];
        if (!row.is_array() || row.size() != sc.system.n_bands)
          fail(cctx + ".chains[" + std::to_string(u) + "]", "expected one chain per band");
        for (std::size_t b = 0; b < row.size(); ++b)
          sc.channel.chains.push_back(parse_chain(
              row[b], cctx + ".chains[" + std::to_string(u) + "][" + std::to_string(b) + "]"));
      }
    }
  }
  {
    const json& ar = member(j, "arrivals", ctx);
    const std::string actx = ctx + ".arrivals";
    check_keys(ar, {"kind", "users"}, {}, actx);
    const json& kind = member(ar, "kind", actx);
    if (!kind.is_string()) fail(actx, "field \"kind\" must be a string");
    sc.arrivals.kind = parse_arrival_kind(kind.get<std::string>(), actx + ".kind");
    const json& users = member(ar, "users", actx);
    if (!users.is_array() || users.size() != sc.system.n_users)
      fail(actx + ".users", "expected one entry per user");
    for (std::size_t k = 0; k < users.size(); ++k) {
      const std::string uctx = actx + ".users[" + std::to_string(k) + "]";
      ArrivalUserParams p;
      if (sc.arrivals.kind == ArrivalKind::kBernoulliBulk) {
        check_keys(users[k], {"prob", "size"}, {}, uctx);
        p.prob = get_number(users[k], "prob", uctx);
        p.size = get_number(users[k], "size", uctx);
      } else {
        check_keys(users[k], {"mean"}, {}, uctx);
        p.mean = get_number(users[k], "mean", uctx);
      }
      sc.arrivals.users.push_back(p);
    }
  }
  {
    const std::int64_t horizon = get_integer(j, "horizon", ctx);
    if (horizon < 1) fail(ctx, "horizon must be >= 1");
    sc.horizon = horizon;
  }
  if (j.contains("burn_in_fraction")) sc.burn_in_fraction = get_number(j, "burn_in_fraction", ctx);
  if (j.contains("seed")) sc.seed = get_nonneg_integer(j, "seed", ctx);

  validate_scenario(sc);
  return sc;
}

Scenario load_scenario(const std::string& path) { return parse_scenario_text(slurp(path)); }

SolveProblem parse_problem_text(const std::string& text) {
  const std::string ctx = "problem";
  const json j = parse_json(text, ctx);
  check_keys(j, {"schema_version", "gains", "queues", "v_param", "noise_psd"}, {}, ctx);
  require_schema_version(j, ctx);
  SolveProblem p;
  p.gains = number_array(member(j, "gains", ctx), ctx + ".gains");
  p.queues = number_array(member(j, "queues", ctx), ctx + ".queues");
  p.v_param = get_number(j, "v_param", ctx);
  p.noise_psd = get_number(j, "noise_psd", ctx);
  if (p.gains.empty()) fail(ctx, "gains must be nonempty");
  if (p.gains.size() != p.queues.size()) fail(ctx, "gains and queues must have equal length");
  for (double g : p.gains)
    if (!(g > 0) || !std::isfinite(g)) fail(ctx + ".gains", "gains must be finite and > 0");
  for (double q : p.queues)
    if (!(q >= 0) || !std::isfinite(q)) fail(ctx + ".queues", "queues must be finite and >= 0");
  if (!(p.v_param > 0) || !std::isfinite(p.v_param)) fail(ctx, "v_param must be finite and > 0");
  if (!(p.noise_psd > 0) || !std::isfinite(p.noise_psd))
    fail(ctx, "noise_psd must be finite and > 0");
  return p;
}

SolveProblem load_problem(const std::string& path) { return parse_problem_text(slurp(path)); }

std::string format_double(double v) {
  if (!std::isfinite(v)) throw std::logic_error("refusing to serialize a non-finite number");
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_text_file(const std::string& path, const std::string& content) {
  ensure_parent_dir(path);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << content;
  if (!out.flush()) throw std::runtime_error("failed writing " + path);
}

void write_summary_json(const std::string& path, const SimTrace& trace) {
  const SimSummary& s = trace.summary;
  std::string j = "{\n";
  j += "  \"schema_version\": " + std::to_string(kSchemaVersion) + ",\n";
  j += "  \"n_users\": " + std::to_string(trace.system.n_users) + ",\n";
  j += "  \"n_bands\": " + std::to_string(trace.system.n_bands) + ",\n";
  j += "  \"horizon\": " + std::to_string(trace.horizon) + ",\n";
  j += "  \"burn_in_slots\": " + std::to_string(trace.burn_in_slots) + ",\n";
  j += "  \"seed\": " + std::to_string(trace.seed) + ",\n";
  j += "  \"v_param\": " + format_double(trace.system.v_param) + ",\n";
  j += "  \"noise_psd\": " + format_double(trace.system.noise_psd) + ",\n";
  j += "  \"symbols_per_slot\": " + format_double(trace.system.symbols_per_slot) + ",\n";
  j += "  \"power_efficiency\": " + format_double(s.power_efficiency) + ",\n";
  j += "  \"per_user_throughput\": " + fmt_double_array(s.per_user_throughput) + ",\n";
  j += "  \"per_user_arrival_mean\": " + fmt_double_array(s.per_user_arrival_mean) + ",\n";
  j += "  \"mean_queue\": " + format_double(s.mean_queue) + ",\n";
  j += "  \"max_queue\": " + format_double(s.max_queue) + ",\n";
  if (s.stability) {
    j += "  \"stability\": {\n";
    j += std::string("    \"stable\": ") + (s.stability->stable ? "true" : "false") + ",\n";
    j += "    \"slope\": " + format_double(s.stability->slope) + ",\n";
    j += "    \"max_mean_queue\": " + format_double(s.stability->max_mean_queue) + "\n";
    j += "  }\n";
  } else {
    j += "  \"stability\": null\n";
  }
  j += "}\n";
  write_text_file(path, j);
}

void write_solve_json(const std::string& path, const SolveProblem& input, const DecodeOrder& ord,
                      const SolverSolution& sol) {
  const std::size_t n = input.gains.size();
  // solver output is in decode order; report everything in input order
  std::vector<double> rates(n), lambdas(n);
  for (std::size_t k = 0; k < n; ++k) {
    rates[ord.order[k]] = sol.rates[k];
    lambdas[ord.order[k]] = sol.lambdas[k];
  }
  std::vector<std::size_t> active, inactive;
  for (std::size_t k : sol.active) active.push_back(ord.order[k]);
  for (std::size_t k : sol.inactive) inactive.push_back(ord.order[k]);
  std::sort(active.begin(), active.end());
  std::sort(inactive.begin(), inactive.end());

  std::string j = "{\n";
  j += "  \"schema_version\": " + std::to_string(kSchemaVersion) + ",\n";
  j += "  \"n_users\": " + std::to_string(n) + ",\n";
  j += "  \"v_param\": " + format_double(input.v_param) + ",\n";
  j += "  \"noise_psd\": " + format_double(input.noise_psd) + ",\n";
  j += "  \"decode_order\": " + fmt_index_array(ord.order) + ",\n";
  j += "  \"rates\": " + fmt_double_array(rates) + ",\n";
  j += "  \"lambdas\": " + fmt_double_array(lambdas) + ",\n";
  j += "  \"active\": " + fmt_index_array(active) + ",\n";
  j += "  \"inactive\": " + fmt_index_array(inactive) + ",\n";
  j += "  \"iterations\": " + std::to_string(sol.iterations) + ",\n";
  j += "  \"objective\": " + format_double(sol.objective) + ",\n";
  j += "  \"kkt\": {\n";
  j += "    \"max_stationarity\": " + format_double(sol.kkt.max_stationarity) + ",\n";
  j += "    \"min_rate\": " + format_double(sol.kkt.min_rate) + ",\n";
  j += "    \"min_lambda\": " + format_double(sol.kkt.min_lambda) + ",\n";
  j += "    \"max_complementarity\": " + format_double(sol.kkt.max_complementarity) + "\n";
  j += "  },\n";
  j += "  \"lambda_history\": [";
  for (std::size_t i = 0; i < sol.lambda_history.size(); ++i) {
    std::vector<double> row(n);
    for (std::size_t k = 0; k < n; ++k) row[ord.order[k]] = sol.lambda_history[i][k];
    j += (i ? ", " : "") + fmt_double_array(row);
  }
  j += "]\n}\n";
  write_text_file(path, j);
}

void write_trace_csv(const std::string& path, const SimTrace& trace) {
  ensure_parent_dir(path);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << "slot,user,band,queue,arrival,rate,energy,gain\n";
  std::string line;
  for (std::int64_t t = 0; t < trace.horizon; ++t)
    for (std::size_t k = 0; k < trace.system.n_users; ++k)
      for (std::size_t m = 0; m < trace.system.n_bands; ++m) {
        line.clear();
        line += std::to_string(t);
        line += ',';
        line += std::to_string(k);
        line += ',';
        line += std::to_string(m);
        line += ',';
        line += format_double(trace.series.queue_at(t, k));
        line += ',';
        line += format_double(trace.series.arrival_at(t, k));
        line += ',';
        line += format_double(trace.series.rate_at(t, k, m));
        line += ',';
        line += format_double(trace.series.energy_at(t, k, m));
        line += ',';
        line += format_double(trace.gain_at(t, k, m));
        line += '\n';
        out << line;
      }
  if (!out.flush()) throw std::runtime_error("failed writing " + path);
}

std::string format_sweep_csv(const std::vector<SweepRow>& rows) {
  std::string out = "v_param,seed,power_efficiency,mean_queue,stable\n";
  for (const SweepRow& r : rows) {
    out += format_double(r.v_param);
    out += ',';
    out += std::to_string(r.seed);
    out += ',';
    out += format_double(r.power_efficiency);
    out += ',';
    out += format_double(r.mean_queue);
    out += ',';
    out += r.stable ? '1' : '0';
    out += '\n';
  }
  return out;
}

ParsedSummary load_summary_json(const std::string& path) {
  const std::string ctx = "summary";
  const json j = parse_json(slurp(path), ctx);
  check_keys(j,
             {"schema_version", "n_users", "n_bands", "horizon", "burn_in_slots", "seed",
              "v_param", "noise_psd", "symbols_per_slot", "power_efficiency",
              "per_user_throughput", "per_user_arrival_mean", "mean_queue", "max_queue",
              "stability"},
             {}, ctx);
  require_schema_version(j, ctx);
  ParsedSummary p;
  p.n_users = get_count(j, "n_users", ctx);
  p.n_bands = get_count(j, "n_bands", ctx);
  p.horizon = get_integer(j, "horizon", ctx);
  p.burn_in_slots = get_integer(j, "burn_in_slots", ctx);
  p.seed = get_nonneg_integer(j, "seed", ctx);
  p.v_param = get_number(j, "v_param", ctx);
  p.noise_psd = get_number(j, "noise_psd", ctx);
  p.symbols_per_slot = get_number(j, "symbols_per_slot", ctx);
  p.summary.power_efficiency = get_number(j, "power_efficiency", ctx);
  p.summary.per_user_throughput =
      number_array(member(j, "per_user_throughput", ctx), ctx + ".per_user_throughput");
  p.summary.per_user_arrival_mean =
      number_array(member(j, "per_user_arrival_mean", ctx), ctx + ".per_user_arrival_mean");
  p.summary.mean_queue = get_number(j, "mean_queue", ctx);
  p.summary.max_queue = get_number(j, "max_queue", ctx);
  const json& st = member(j, "stability", ctx);
  if (!st.is_null()) {
    const std::string sctx = ctx + ".stability";
    check_keys(st, {"stable", "slope", "max_mean_queue"}, {}, sctx);
    StabilityReport rep;
    const json& flag = member(st, "stable", sctx);
    if (!flag.is_boolean()) fail(sctx, "field \"stable\" must be a boolean");
    rep.stable = flag.get<bool>();
    rep.slope = get_number(st, "slope", sctx);
    rep.max_mean_queue = get_number(st, "max_mean_queue", sctx);
    p.summary.stability = rep;
  }
  return p;
}

ParsedTrace read_trace_csv(const std::string& path) {
  const std::string text = slurp(path);
  const std::string ctx = "trace " + path;
  std::size_t pos = 0;
  auto next_line = [&](std::string_view& line) {
    if (pos >= text.size()) return false;
    const std::size_t e = text.find('\n', pos);
    line = std::string_view(text).substr(pos, e == std::string::npos ? e : e - pos);
    pos = e == std::string::npos ? text.size() : e + 1;
    return true;
  };

  std::string_view line;
  if (!next_line(line) || line != "slot,user,band,queue,arrival,rate,energy,gain")
    fail(ctx, "missing or unexpected header line");

  struct Row {
    std::int64_t slot;
    std::size_t user, band;
    double vals[5];
  };
  std::vector<Row> rows;
  while (next_line(line)) {
    if (line.empty()) continue;
    Row r;
    std::size_t field = 0;
    std::size_t start = 0;
    for (; field < 8; ++field) {
      const std::size_t comma = line.find(',', start);
      if ((comma == std::string_view::npos) != (field == 7))
        fail(ctx, "row " + std::to_string(rows.size()) + " has the wrong number of fields");
      const std::string_view tok =
          line.substr(start, comma == std::string_view::npos ? comma : comma - start);
      const char* b = tok.data();
      const char* e = tok.data() + tok.size();
      std::from_chars_result res{};
      if (field == 0) res = std::from_chars(b, e, r.slot);
      else if (field == 1) res = std::from_chars(b, e, r.user);
      else if (field == 2) res = std::from_chars(b, e, r.band);
      else res = std::from_chars(b, e, r.vals[field - 3]);
      if (res.ec != std::errc{} || res.ptr != e)
        fail(ctx, "row " + std::to_string(rows.size()) + ": bad value \"" + std::string(tok) +
                      "\"");
      start = comma == std::string_view::npos ? line.size() : comma + 1;
    }
    rows.push_back(r);
  }
  if (rows.empty()) fail(ctx, "no data rows");

  std::size_t n_bands = 0;
  while (n_bands < rows.size() && rows[n_bands].slot == 0 && rows[n_bands].user == 0) ++n_bands;
  std::size_t slot0 = 0;
  while (slot0 < rows.size() && rows[slot0].slot == 0) ++slot0;
  if (n_bands == 0 || slot0 % n_bands != 0) fail(ctx, "rows are not a full user x band grid");
  const std::size_t n_users = slot0 / n_bands;
  if (rows.size() % (n_users * n_bands) != 0) fail(ctx, "truncated trace");
  const std::int64_t horizon = static_cast<std::int64_t>(rows.size() / (n_users * n_bands));

  ParsedTrace out;
  out.series.n_users = n_users;
  out.series.n_bands = n_bands;
  out.series.horizon = horizon;
  out.series.queues.resize(static_cast<std::size_t>(horizon) * n_users);
  out.series.arrivals.resize(static_cast<std::size_t>(horizon) * n_users);
  out.series.rates.resize(static_cast<std::size_t>(horizon) * n_users * n_bands);
  out.series.energies.resize(static_cast<std::size_t>(horizon) * n_users * n_bands);
  out.gains.resize(static_cast<std::size_t>(horizon) * n_users * n_bands);

  std::size_t i = 0;
  for (std::int64_t t = 0; t < horizon; ++t)
    for (std::size_t k = 0; k < n_users; ++k)
      for (std::size_t m = 0; m < n_bands; ++m, ++i) {
        const Row& r = rows[i];
        if (r.slot != t || r.user != k || r.band != m)
          fail(ctx, "row " + std::to_string(i) + " is out of order");
        const std::size_t cell = (static_cast<std::size_t>(t) * n_users + k) * n_bands + m;
        const std::size_t user_cell = static_cast<std::size_t>(t) * n_users + k;
        if (m == 0) {
          out.series.queues[user_cell] = r.vals[0];
          out.series.arrivals[user_cell] = r.vals[1];
        } else if (out.series.queues[user_cell] != r.vals[0] ||
                   out.series.arrivals[user_cell] != r.vals[1]) {
          fail(ctx, "row " + std::to_string(i) + ": queue/arrival differ between band rows");
        }
        out.series.rates[cell] = r.vals[2];
        out.series.energies[cell] = r.vals[3];
        out.gains[cell] = r.vals[4];
      }
  return out;
}

}  // namespace mbsched
