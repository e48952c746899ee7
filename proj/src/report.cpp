#include "lipstab/report.hpp"

#include <charconv>
#include <cmath>
#include <ostream>
#include <stdexcept>

#include "lipstab/geometry.hpp"

#ifndef LIPSTAB_VERSION
#define LIPSTAB_VERSION "0.0.0"
#endif

namespace lipstab {

namespace {

using json = nlohmann::ordered_json;

std::string join_coeffs(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ';';
    s += format_double(v[i]);
  }
  return s;
}

json number_or_string(const std::string& s) {
  if (s == "nan" || s == "inf" || s == "-inf") return nullptr;
  if (s == "true") return true;
  if (s == "false") return false;
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec == std::errc() && ptr == s.data() + s.size()) return v;
  return s;
}

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

const char* version() { return LIPSTAB_VERSION; }

Provenance make_provenance(const std::string& command, const ExperimentConfig& c) {
  Provenance p;
  p.command = command;
  p.config_hash = config_hash(c);
  p.seed = c.seed;
  p.fixture = c.fixture;
  p.dim = c.dim;
  p.grid_n = c.grid_n;
  p.fixture_hash = domain_hash(build_augmented_domain(fixture_spec(c), c.h()));
  return p;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw std::runtime_error("cannot format a double");
  return std::string(buf, ptr);
}

void write_provenance(std::ostream& out, const Provenance& p) {
  out << "# tool: lipstab " << version() << "\n";
  out << "# command: " << p.command << "\n";
  out << "# config_hash: " << hex64(p.config_hash) << "\n";
  out << "# seed: " << p.seed << "\n";
  out << "# grid: fixture=" << p.fixture << " dim=" << p.dim << " h=1/" << p.grid_n
      << " fixture_hash=" << hex64(p.fixture_hash) << "\n";
}

json provenance_json(const Provenance& p) {
  json j;
  j["tool"] = "lipstab";
  j["version"] = version();
  j["command"] = p.command;
  j["config_hash"] = hex64(p.config_hash);
  j["seed"] = p.seed;
  j["grid"] = {{"fixture", p.fixture}, {"dim", p.dim}, {"h", "1/" + std::to_string(p.grid_n)},
               {"fixture_hash", hex64(p.fixture_hash)}};
  return j;
}

void Table::add(std::vector<std::string> row) {
  if (row.size() != columns.size()) throw std::invalid_argument("table row has the wrong width");
  rows.push_back(std::move(row));
}

void write_csv(std::ostream& out, const Provenance& p, const Table& t) {
  write_provenance(out, p);
  for (std::size_t i = 0; i < t.columns.size(); ++i) out << (i ? "," : "") << t.columns[i];
  out << "\n";
  for (const auto& row : t.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << row[i];
    out << "\n";
  }
}

json table_json(const Table& t) {
  json a = json::array();
  for (const auto& row : t.rows) {
    json o;
    for (std::size_t i = 0; i < row.size(); ++i) o[t.columns[i]] = number_or_string(row[i]);
    a.push_back(std::move(o));
  }
  return a;
}

Table sweep_table(const SweepResult& r) {
  Table t;
  t.columns = {"index", "kind", "seed", "m", "h", "fixture_hash", "E", "eps0", "eps0_2m", "rel_change", "ratio",
               "stable", "delta", "theta1", "theta2"};
  for (const SweepRecord& s : r.records) {
    t.add({std::to_string(s.index), to_string(s.kind), std::to_string(s.seed), std::to_string(r.options.m),
           format_double(r.h), hex64(r.fixture_hash), format_double(s.e), format_double(s.eps0), format_double(s.eps0_2m),
           format_double(s.rel_change), format_double(s.ratio), s.stable ? "true" : "false", format_double(s.delta),
           join_coeffs(s.theta1), join_coeffs(s.theta2)});
  }
  return t;
}

json sweep_summary_json(const Provenance& p, const SweepResult& r) {
  const SweepSummary& s = r.summary;
  json j;
  j["provenance"] = provenance_json(p);
  j["fixture"] = r.fixture;
  j["h"] = r.h;
  j["m"] = r.options.m;
  j["n_samples"] = r.options.n_samples;
  j["seed"] = r.options.seed;
  j["included"] = s.included;
  j["unstable"] = s.unstable;
  j["max_ratio"] = finite_or_null(s.max_ratio);
  j["min_ratio"] = finite_or_null(s.min_ratio);
  j["median_ratio"] = finite_or_null(s.median_ratio);
  j["spearman"] = finite_or_null(s.spearman);
  j["degenerate_ok"] = s.degenerate_ok;
  j["degenerate_eps0"] = s.degenerate_eps0;
  j["injective"] = s.injective;
  j["scaling_drift"] = finite_or_null(s.scaling_drift);
  j["scaling_monotone"] = s.scaling_monotone;
  j["flags"] = s.flags;
  return j;
}

Table trace_table(const ReconstructionResult& r) {
  Table t;
  t.columns = {"iter", "misfit", "aperture", "coefficient_error", "step"};
  for (const TraceRow& row : r.trace) {
    t.add({std::to_string(row.iter), format_double(row.misfit), format_double(row.aperture),
           format_double(row.coeff_error), format_double(row.step)});
  }
  return t;
}

}  // namespace lipstab
