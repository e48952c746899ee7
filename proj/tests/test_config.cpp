#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "doctest.h"

#include "lipstab/config.hpp"
#include "lipstab/report.hpp"

using namespace lipstab;
using json = nlohmann::ordered_json;

namespace {

std::string error_path(const json& j) {
  try {
    parse_config(j);
  } catch (const ConfigError& e) {
    return e.path();
  }
  return "";
}

}  // namespace

TEST_CASE("empty config gives the defaults and round-trips") {
  const ExperimentConfig c = parse_config(json::object());
  CHECK(c.fixture == "two_half_cube");
  CHECK(c.dim == 3);
  CHECK(c.grid_n == 12);
  CHECK(c.m == 20);
  CHECK(c.tau == 1.0);
  CHECK(potential_1(c).coefficients() == default_theta(3, 2));
  CHECK(potential_2(c).coefficients() == potential_1(c).coefficients());
  const ExperimentConfig back = parse_config(to_json(c));
  CHECK(config_hash(back) == config_hash(c));
  CHECK(to_json(back).dump() == to_json(c).dump());
}

TEST_CASE("field paths of schema errors") {
  CHECK(error_path(json::parse(R"({"sweep": {"n_samples": 0}})")) == "sweep.n_samples");
  CHECK(error_path(json::parse(R"({"sweep": {"n_sample": 3}})")) == "sweep.n_sample");
  CHECK(error_path(json::parse(R"({"swep": {}})")) == "swep");
  CHECK(error_path(json::parse(R"({"run": {"m": "ten"}})")) == "run.m");
  CHECK(error_path(json::parse(R"({"run": {"m": -3}})")) == "run.m");
  CHECK(error_path(json::parse(R"({"run": {"tau": 0}})")) == "run.tau");
  CHECK(error_path(json::parse(R"({"grid": {"h": "1/0"}})")) == "grid.h");
  CHECK(error_path(json::parse(R"({"grid": {"h": 0.3}})")) == "grid.h");
  CHECK(error_path(json::parse(R"({"fixture": {"name": "torus"}})")) == "fixture.name");
  CHECK(error_path(json::parse(R"({"fixture": {"dim": 4}})")) == "fixture.dim");
  CHECK(error_path(json::parse(R"({"potentials": {"q1": [1, 2]}})")) == "potentials.q1");
  CHECK(error_path(json::parse(R"({"potentials": {"q2": [3, 0, 0, 0, 0, 0, 0, 0]}})")) == "potentials.q2");
  CHECK(error_path(json::parse(R"({"probe": {"radii_h": [4, 3]}})")) == "probe.radii_h");
  CHECK(error_path(json::parse(R"({"probe": {"mode": "both"}})")) == "probe.mode");
  CHECK(error_path(json::parse(R"({"three_spheres": {"radii": [0.3, 0.2, 0.4]}})")) == "three_spheres.radii");
  CHECK(error_path(json::parse(R"({"reconstruct": {"theta0": [0, 0]}})")) == "reconstruct.theta0");
  CHECK(error_path(json::parse(R"({"output": {"format": "xml"}})")) == "output.format");
  CHECK(error_path(json::parse(R"({"distance": {"stab_tol": [1]}})")) == "distance.stab_tol");
}

TEST_CASE("grid spacing forms") {
  CHECK(parse_grid("1/12") == 12);
  CHECK(parse_grid("0.0625") == 16);
  CHECK(parse_grid("24") == 24);
  CHECK(parse_config(json::parse(R"({"grid": {"h": 0.125}})")).grid_n == 8);
  CHECK_THROWS_AS(parse_grid("1/"), ConfigError);
  CHECK_THROWS_AS(parse_grid("abc"), ConfigError);
  CHECK_THROWS_AS(parse_grid("0.7"), ConfigError);
  CHECK_THROWS_AS(parse_grid("-1/8"), ConfigError);
}

TEST_CASE("config hash ignores the output directory only") {
  ExperimentConfig a = parse_config(json::object());
  ExperimentConfig b = a;
  b.out_dir = "elsewhere";
  CHECK(config_hash(a) == config_hash(b));
  b.seed = 2;
  CHECK(config_hash(a) != config_hash(b));
  b = a;
  b.format = "json";
  CHECK(config_hash(a) != config_hash(b));
  CHECK(hex64(0) == "0000000000000000");
  CHECK(hex64(0xdeadbeefULL) == "00000000deadbeef");
}

TEST_CASE("format_double round-trips") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> e(-300, 300);
  for (int i = 0; i < 2000; ++i) {
    const double v = (i % 2 ? -1.0 : 1.0) * std::pow(10.0, e(rng));
    CHECK(std::strtod(format_double(v).c_str(), nullptr) == v);
  }
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(std::numeric_limits<double>::quiet_NaN()) == "nan");
  CHECK(format_double(-std::numeric_limits<double>::infinity()) == "-inf");
}

TEST_CASE("csv and json tables") {
  Provenance p;
  p.command = "sweep";
  p.seed = 9;
  p.fixture = "two_half_cube";
  p.grid_n = 12;
  Table t;
  t.columns = {"a", "b"};
  t.add({"1", "nan"});
  t.add({"x", "true"});
  CHECK_THROWS(t.add({"1"}));
  std::ostringstream os;
  write_csv(os, p, t);
  std::istringstream in(os.str());
  std::string line;
  int comments = 0;
  std::vector<std::string> body;
  while (std::getline(in, line)) {
    if (line.rfind("# ", 0) == 0) {
      ++comments;
    } else {
      body.push_back(line);
    }
  }
  CHECK(comments == 5);
  CHECK(os.str().find("# command: sweep") != std::string::npos);
  CHECK(os.str().find("# seed: 9") != std::string::npos);
  REQUIRE(body.size() == 3);
  CHECK(body[0] == "a,b");
  CHECK(body[1] == "1,nan");
  const json j = table_json(t);
  CHECK(j[0]["a"] == 1.0);
  CHECK(j[0]["b"].is_null());
  CHECK(j[1]["a"] == "x");
  CHECK(j[1]["b"] == true);
}

TEST_CASE("provenance from a config") {
  const ExperimentConfig c = parse_config(json::parse(R"({"grid": {"h": "1/8"}, "run": {"seed": 3}})"));
  const Provenance p = make_provenance("distance", c);
  CHECK(p.grid_n == 8);
  CHECK(p.seed == 3);
  CHECK(p.config_hash == config_hash(c));
  CHECK(p.fixture_hash == domain_hash(build_augmented_domain(fixture_spec(c), 1.0 / 8)));
  const json j = provenance_json(p);
  CHECK(j["grid"]["h"] == "1/8");
  CHECK(j["config_hash"] == hex64(config_hash(c)));
}
