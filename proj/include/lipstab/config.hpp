#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "lipstab/geometry.hpp"
#include "lipstab/potential.hpp"

namespace lipstab {

/// Invalid configuration; `path` is the dotted field path, e.g. "sweep.n_samples".
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string path, const std::string& what)
      : std::runtime_error(path + ": " + what), path_(std::move(path)) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

struct ExperimentConfig {
  // fixture
  std::string fixture = "two_half_cube";
  int dim = 3;
  double r0 = 0.0;            // <= 0 keeps the fixture default
  double d0_thickness = 0.0;  // <= 0 selects r0 / 2
  // grid and run
  int grid_n = 12;  // h = 1 / grid_n
  std::size_t m = 20;
  std::uint64_t seed = 1;
  double tau = 1.0;
  double e0 = 2.0;
  // potentials, packed (a_j, A_j) per subdomain; empty selects the defaults
  std::vector<double> q1, q2;
  // forward
  std::size_t forward_mode = 0;
  // green-check
  std::size_t green_pairs = 10;
  std::vector<int> green_radii{4, 8, 16, 32};
  // distance / sweep
  double stab_tol = 0.05;
  double zero_tol = 1e-10;
  std::size_t n_samples = 50;
  std::vector<double> scaling_deltas{1e-2, 1e-3};
  // probe
  std::string probe_mode = "smallness";  // or "boundary"
  int probe_k = 1;
  std::vector<int> probe_radii{4, 5, 6};
  // three-spheres
  std::size_t ts_samples = 50;
  std::size_t ts_modes = 8;
  Vec ts_center{0.5, 0.5, 0.5};
  std::array<double, 3> ts_radii{1.0 / 12, 2.0 / 12, 4.0 / 12};
  // reconstruct
  std::string policy = "landweber";
  int iterations = 500;
  std::vector<double> theta_true, theta0;
  // output
  std::string out_dir = "out";
  std::string format = "csv";  // "csv" or "json"

  double h() const { return 1.0 / grid_n; }
};

/// Schema-checked parse; unknown keys and out-of-range values raise ConfigError.
ExperimentConfig parse_config(const nlohmann::ordered_json& j);
ExperimentConfig load_config(const std::string& path);

/// Every field, defaults included, in a fixed key order.
nlohmann::ordered_json to_json(const ExperimentConfig& c);

/// FNV-1a over the canonical dump of to_json, output directory excluded.
std::uint64_t config_hash(const ExperimentConfig& c);
std::string hex64(std::uint64_t v);

/// "1/12", "0.0625" or 12 (an integer taken as 1/n); h must be 1/n for an integer n.
int parse_grid(const std::string& s);

DomainSpec fixture_spec(const ExperimentConfig& c);
/// Configured potentials, or the defaults for the fixture.
PiecewiseLinearPotential potential_1(const ExperimentConfig& c);
PiecewiseLinearPotential potential_2(const ExperimentConfig& c);
std::vector<double> default_theta(int dim, std::size_t pieces);

}  // namespace lipstab
