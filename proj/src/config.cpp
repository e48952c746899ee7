#include "lipstab/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "lipstab/fixtures.hpp"
#include "lipstab/hash.hpp"

namespace lipstab {

namespace {

using json = nlohmann::ordered_json;

std::string join(const std::string& a, const std::string& b) { return a.empty() ? b : a + "." + b; }

void check_keys(const json& obj, const std::string& path, const std::set<std::string>& allowed) {
  if (!obj.is_object()) throw ConfigError(path.empty() ? "<root>" : path, "expected a table");
  for (const auto& [k, v] : obj.items()) {
    if (!allowed.count(k)) throw ConfigError(join(path, k), "unknown key");
  }
}

const json* section(const json& root, const std::string& name, const std::set<std::string>& allowed) {
  auto it = root.find(name);
  if (it == root.end()) return nullptr;
  check_keys(*it, name, allowed);
  return &*it;
}

template <class T>
void read(const json* obj, const std::string& sec, const std::string& key, T& out) {
  if (!obj) return;
  auto it = obj->find(key);
  if (it == obj->end()) return;
  const std::string path = join(sec, key);
  try {
    if constexpr (std::is_same_v<T, std::string>) {
      if (!it->is_string()) throw ConfigError(path, "expected a string");
    } else if constexpr (std::is_integral_v<T>) {
      if (!it->is_number_integer()) throw ConfigError(path, "expected an integer");
      if constexpr (std::is_unsigned_v<T>) {
        if (it->get<long long>() < 0) throw ConfigError(path, "must be non-negative");
      }
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!it->is_number()) throw ConfigError(path, "expected a number");
    } else {
      if (!it->is_array()) throw ConfigError(path, "expected an array");
      for (std::size_t i = 0; i < it->size(); ++i) {
        if (!(*it)[i].is_number()) throw ConfigError(path + "[" + std::to_string(i) + "]", "expected a number");
      }
    }
    out = it->get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path, e.what());
  }
}

void require(bool ok, const std::string& path, const std::string& what) {
  if (!ok) throw ConfigError(path, what);
}

}  // namespace

int parse_grid(const std::string& s) {
  auto bad = [&] { return ConfigError("grid.h", "expected 1/n with an integer n >= 2, got '" + s + "'"); };
  const auto slash = s.find('/');
  double h = 0.0;
  try {
    std::size_t used = 0;
    if (slash != std::string::npos) {
      const double num = std::stod(s.substr(0, slash), &used);
      if (used != slash) throw bad();
      const std::string den = s.substr(slash + 1);
      const double d = std::stod(den, &used);
      if (used != den.size()) throw bad();
      h = num / d;
    } else {
      const double v = std::stod(s, &used);
      if (used != s.size()) throw bad();
      h = v >= 1.0 ? 1.0 / v : v;
    }
  } catch (const std::logic_error&) {
    throw bad();
  }
  if (!(h > 0.0)) throw bad();
  const double n = std::round(1.0 / h);
  if (n < 2 || std::abs(1.0 / h - n) > 1e-9 * n) throw bad();
  return static_cast<int>(n);
}

std::vector<double> default_theta(int dim, std::size_t pieces) {
  if (dim == 3 && pieces == 2) return {1.0, 0.3, -0.2, 0.5, -0.8, 0.2, 0.1, -0.3};
  std::vector<double> th;
  for (std::size_t j = 0; j < pieces; ++j) {
    th.push_back(j % 2 == 0 ? 1.0 - 0.1 * static_cast<double>(j) : -0.8 + 0.1 * static_cast<double>(j));
    for (int c = 0; c < dim; ++c) th.push_back(0.3 * ((c + static_cast<int>(j)) % 2 == 0 ? 1.0 : -1.0) / (c + 1));
  }
  return th;
}

DomainSpec fixture_spec(const ExperimentConfig& c) {
  DomainSpec s;
  try {
    s = fixtures::by_name(c.fixture, c.dim);
  } catch (const std::exception& e) {
    throw ConfigError("fixture.name", e.what());
  }
  if (c.r0 > 0.0) s.r0 = c.r0;
  s.d0_thickness = c.d0_thickness;
  return s;
}

namespace {

PiecewiseLinearPotential potential_from(const ExperimentConfig& c, const std::vector<double>& th) {
  const std::size_t pieces = fixture_spec(c).subdomains.size();
  return PiecewiseLinearPotential::from_coefficients(c.dim, th.empty() ? default_theta(c.dim, pieces) : th, c.e0);
}

void check_theta(const ExperimentConfig& c, const std::vector<double>& th, const std::string& path, bool allow_empty) {
  if (th.empty() && allow_empty) return;
  const std::size_t pieces = fixture_spec(c).subdomains.size();
  const std::size_t want = pieces * static_cast<std::size_t>(c.dim + 1);
  require(th.size() == want, path, "expected " + std::to_string(want) + " coefficients, got " + std::to_string(th.size()));
  for (double x : th) require(std::isfinite(x), path, "coefficients must be finite");
  const auto q = PiecewiseLinearPotential::from_coefficients(c.dim, th, c.e0);
  require(q.coeff_norm() <= c.e0 * (1 + 1e-12), path, "outside the box |||q||| <= run.e0");
}

}  // namespace

PiecewiseLinearPotential potential_1(const ExperimentConfig& c) { return potential_from(c, c.q1); }
PiecewiseLinearPotential potential_2(const ExperimentConfig& c) { return potential_from(c, c.q2.empty() ? c.q1 : c.q2); }

ExperimentConfig parse_config(const json& j) {
  check_keys(j, "", {"fixture", "grid", "run", "potentials", "forward", "green_check", "distance", "sweep", "probe",
                     "three_spheres", "reconstruct", "output"});
  ExperimentConfig c;
  const json* fx = section(j, "fixture", {"name", "dim", "r0", "d0_thickness"});
  read(fx, "fixture", "name", c.fixture);
  read(fx, "fixture", "dim", c.dim);
  read(fx, "fixture", "r0", c.r0);
  read(fx, "fixture", "d0_thickness", c.d0_thickness);
  require(c.dim == 2 || c.dim == 3, "fixture.dim", "must be 2 or 3");
  fixture_spec(c);

  if (const json* g = section(j, "grid", {"h"})) {
    auto it = g->find("h");
    if (it != g->end()) {
      if (it->is_string()) {
        c.grid_n = parse_grid(it->get<std::string>());
      } else if (it->is_number()) {
        std::ostringstream os;
        os.precision(17);
        os << it->get<double>();
        c.grid_n = parse_grid(os.str());
      } else {
        throw ConfigError("grid.h", "expected a number or a string 1/n");
      }
    }
  }

  const json* run = section(j, "run", {"m", "seed", "tau", "e0"});
  read(run, "run", "m", c.m);
  read(run, "run", "seed", c.seed);
  read(run, "run", "tau", c.tau);
  read(run, "run", "e0", c.e0);
  require(c.m >= 1, "run.m", "must be >= 1");
  require(c.tau > 0.0, "run.tau", "must be positive");
  require(c.e0 > 0.0, "run.e0", "must be positive");

  const json* pot = section(j, "potentials", {"q1", "q2"});
  read(pot, "potentials", "q1", c.q1);
  read(pot, "potentials", "q2", c.q2);
  check_theta(c, c.q1, "potentials.q1", true);
  check_theta(c, c.q2, "potentials.q2", true);

  const json* fw = section(j, "forward", {"mode"});
  read(fw, "forward", "mode", c.forward_mode);

  const json* gc = section(j, "green_check", {"pairs", "radii_h"});
  read(gc, "green_check", "pairs", c.green_pairs);
  read(gc, "green_check", "radii_h", c.green_radii);
  require(c.green_pairs >= 1, "green_check.pairs", "must be >= 1");
  for (int r : c.green_radii) require(r >= 1, "green_check.radii_h", "radii must be positive");

  const json* di = section(j, "distance", {"stab_tol", "zero_tol"});
  read(di, "distance", "stab_tol", c.stab_tol);
  read(di, "distance", "zero_tol", c.zero_tol);
  require(c.stab_tol > 0.0, "distance.stab_tol", "must be positive");
  require(c.zero_tol > 0.0, "distance.zero_tol", "must be positive");

  const json* sw = section(j, "sweep", {"n_samples", "scaling_deltas"});
  read(sw, "sweep", "n_samples", c.n_samples);
  read(sw, "sweep", "scaling_deltas", c.scaling_deltas);
  require(c.n_samples >= 1, "sweep.n_samples", "must be >= 1");
  for (double d : c.scaling_deltas) require(d > 0.0, "sweep.scaling_deltas", "shifts must be positive");

  const json* pr = section(j, "probe", {"mode", "k", "radii_h"});
  read(pr, "probe", "mode", c.probe_mode);
  read(pr, "probe", "k", c.probe_k);
  read(pr, "probe", "radii_h", c.probe_radii);
  require(c.probe_mode == "smallness" || c.probe_mode == "boundary", "probe.mode", "must be 'smallness' or 'boundary'");
  require(c.probe_k >= 0, "probe.k", "must be >= 0");
  require(!c.probe_radii.empty(), "probe.radii_h", "must not be empty");
  for (int r : c.probe_radii) require(r >= 4, "probe.radii_h", "radii must be >= 4 (in units of h)");

  const json* ts = section(j, "three_spheres", {"n_samples", "modes", "center", "radii"});
  read(ts, "three_spheres", "n_samples", c.ts_samples);
  read(ts, "three_spheres", "modes", c.ts_modes);
  if (ts) {
    std::vector<double> v;
    if (ts->contains("center")) {
      read(ts, "three_spheres", "center", v);
      require(v.size() == static_cast<std::size_t>(c.dim), "three_spheres.center", "expected dim coordinates");
      c.ts_center = {};
      for (std::size_t i = 0; i < v.size(); ++i) c.ts_center[i] = v[i];
    }
    if (ts->contains("radii")) {
      v.clear();
      read(ts, "three_spheres", "radii", v);
      require(v.size() == 3, "three_spheres.radii", "expected three radii");
      c.ts_radii = {v[0], v[1], v[2]};
    }
  }
  require(c.ts_samples >= 1, "three_spheres.n_samples", "must be >= 1");
  require(c.ts_modes >= 1, "three_spheres.modes", "must be >= 1");
  require(c.ts_radii[0] > 0.0 && c.ts_radii[0] < c.ts_radii[1] && c.ts_radii[1] < c.ts_radii[2], "three_spheres.radii",
          "must satisfy 0 < r1 < r2 < r3");

  const json* rc = section(j, "reconstruct", {"policy", "iterations", "theta_true", "theta0"});
  read(rc, "reconstruct", "policy", c.policy);
  read(rc, "reconstruct", "iterations", c.iterations);
  read(rc, "reconstruct", "theta_true", c.theta_true);
  read(rc, "reconstruct", "theta0", c.theta0);
  require(c.policy == "landweber" || c.policy == "gauss_newton", "reconstruct.policy",
          "must be 'landweber' or 'gauss_newton'");
  require(c.iterations >= 0, "reconstruct.iterations", "must be >= 0");
  check_theta(c, c.theta_true, "reconstruct.theta_true", true);
  if (!c.theta0.empty()) {
    const std::size_t want = fixture_spec(c).subdomains.size() * static_cast<std::size_t>(c.dim + 1);
    require(c.theta0.size() == want, "reconstruct.theta0", "expected " + std::to_string(want) + " coefficients");
  }

  const json* out = section(j, "output", {"dir", "format"});
  read(out, "output", "dir", c.out_dir);
  read(out, "output", "format", c.format);
  require(!c.out_dir.empty(), "output.dir", "must not be empty");
  require(c.format == "csv" || c.format == "json", "output.format", "must be 'csv' or 'json'");
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("<file>", "cannot open " + path);
  json j;
  try {
    j = json::parse(in, nullptr, true, true);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("<file>", e.what());
  }
  return parse_config(j);
}

json to_json(const ExperimentConfig& c) {
  json j;
  j["fixture"] = {{"name", c.fixture}, {"dim", c.dim}, {"r0", fixture_spec(c).r0}, {"d0_thickness", c.d0_thickness}};
  j["grid"] = {{"h", "1/" + std::to_string(c.grid_n)}};
  j["run"] = {{"m", c.m}, {"seed", c.seed}, {"tau", c.tau}, {"e0", c.e0}};
  j["potentials"] = {{"q1", potential_1(c).coefficients()}, {"q2", potential_2(c).coefficients()}};
  j["forward"] = {{"mode", c.forward_mode}};
  j["green_check"] = {{"pairs", c.green_pairs}, {"radii_h", c.green_radii}};
  j["distance"] = {{"stab_tol", c.stab_tol}, {"zero_tol", c.zero_tol}};
  j["sweep"] = {{"n_samples", c.n_samples}, {"scaling_deltas", c.scaling_deltas}};
  j["probe"] = {{"mode", c.probe_mode}, {"k", c.probe_k}, {"radii_h", c.probe_radii}};
  std::vector<double> center(c.ts_center.begin(), c.ts_center.begin() + c.dim);
  j["three_spheres"] = {{"n_samples", c.ts_samples}, {"modes", c.ts_modes}, {"center", center}, {"radii", c.ts_radii}};
  j["reconstruct"] = {{"policy", c.policy}, {"iterations", c.iterations}, {"theta_true", c.theta_true}, {"theta0", c.theta0}};
  j["output"] = {{"dir", c.out_dir}, {"format", c.format}};
  return j;
}

std::uint64_t config_hash(const ExperimentConfig& c) {
  json j = to_json(c);
  j["output"].erase("dir");
  Fnv1a f;
  f.str(j.dump());
  return f.digest();
}

std::string hex64(std::uint64_t v) {
  static const char* d = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) s[static_cast<std::size_t>(i)] = d[v & 15];
  return s;
}

}  // namespace lipstab
