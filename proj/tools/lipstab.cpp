#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "lipstab/cauchy.hpp"
#include "lipstab/config.hpp"
#include "lipstab/fixtures.hpp"
#include "lipstab/green.hpp"
#include "lipstab/layered.hpp"
#include "lipstab/pde.hpp"
#include "lipstab/probes.hpp"
#include "lipstab/report.hpp"
#include "lipstab/stability.hpp"

using namespace lipstab;
using json = nlohmann::ordered_json;

namespace {

constexpr int kOk = 0;
constexpr int kHardError = 2;
constexpr int kSoftFail = 3;

struct Common {
  std::string config_path;
  std::string h;
  std::size_t m = 0;
  std::uint64_t seed = 0;
  std::string out;
  std::string format;
  bool soft_fail_ok = false;
  bool has_m = false, has_seed = false;
};

ExperimentConfig resolve(const Common& o) {
  ExperimentConfig c = o.config_path.empty() ? parse_config(json::object()) : load_config(o.config_path);
  if (!o.h.empty()) c.grid_n = parse_grid(o.h);
  if (o.has_m) c.m = o.m;
  if (o.has_seed) c.seed = o.seed;
  if (!o.out.empty()) c.out_dir = o.out;
  if (!o.format.empty()) c.format = o.format;
  // flags go through the same schema checks as the file
  return parse_config(to_json(c));
}

/// Rows and a summary, written as <cmd>.csv + <cmd>_summary.json or one <cmd>.json.
struct Output {
  std::string command;
  Table table;
  json summary = json::object();
  bool soft_fail = false;
  std::string soft_reason;
};

void emit(const ExperimentConfig& c, const Output& out) {
  std::filesystem::create_directories(c.out_dir);
  const Provenance p = make_provenance(out.command, c);
  const std::filesystem::path dir(c.out_dir);
  json s;
  s["provenance"] = provenance_json(p);
  for (const auto& [k, v] : out.summary.items()) {
    if (k != "provenance") s[k] = v;
  }
  if (c.format == "json") {
    s["rows"] = table_json(out.table);
    std::ofstream f(dir / (out.command + ".json"), std::ios::binary);
    f << s.dump(2) << "\n";
  } else {
    std::ofstream t(dir / (out.command + ".csv"), std::ios::binary);
    write_csv(t, p, out.table);
    std::ofstream f(dir / (out.command + "_summary.json"), std::ios::binary);
    f << s.dump(2) << "\n";
  }
}

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json fit_json(const stats::LinearFit& f) {
  return {{"slope", finite_or_null(f.slope)}, {"intercept", finite_or_null(f.intercept)}, {"r2", finite_or_null(f.r2)}};
}

std::string coord(const GridDomain& d, std::size_t n, int a) {
  return format_double(d.coords(n)[static_cast<std::size_t>(a)]);
}

std::vector<std::string> coord_columns(int dim) {
  std::vector<std::string> c;
  const char* names[] = {"x", "y", "z"};
  for (int a = 0; a < dim; ++a) c.emplace_back(names[a]);
  return c;
}

Output run_forward(const ExperimentConfig& c) {
  auto dom = make_domain(fixture_spec(c), c.h());
  const auto q = potential_1(c);
  const auto op = assemble(dom, q, BcDescriptor{Region::physical, c.tau});
  const BoundaryMetric metric(*dom);
  if (c.forward_mode >= metric.size()) throw ConfigError("forward.mode", "exceeds the number of Sigma nodes");
  const std::vector<cplx> phi = metric.eigenfunction(c.forward_mode);
  const ComplexField u = solve_generation_problem(*op, phi);
  const auto f = sigma_trace(*dom, u);
  const auto g = normal_derivative(*op, u);

  Output out;
  out.command = "forward";
  out.table.columns = {"node"};
  for (const auto& s : coord_columns(c.dim)) out.table.columns.push_back(s);
  for (const char* s : {"f_re", "f_im", "g_re", "g_im"}) out.table.columns.emplace_back(s);
  double bc_residual = 0.0, scale = 0.0;
  const cplx itau(0.0, c.tau);
  for (std::size_t i = 0; i < f.size(); ++i) {
    const std::size_t n = metric.sigma_nodes()[i];
    std::vector<std::string> row{std::to_string(n)};
    for (int a = 0; a < c.dim; ++a) row.push_back(coord(*dom, n, a));
    for (double v : {f[i].real(), f[i].imag(), g[i].real(), g[i].imag()}) row.push_back(format_double(v));
    out.table.add(std::move(row));
    bc_residual = std::max(bc_residual, std::abs(g[i] + itau * f[i] - phi[i]));
    scale = std::max(scale, std::abs(phi[i]));
  }
  out.summary["mode"] = c.forward_mode;
  out.summary["sigma_nodes"] = f.size();
  out.summary["max_abs_u"] = u.max_abs();
  out.summary["impedance_residual"] = bc_residual / std::max(scale, 1e-300);
  out.summary["finite"] = u.finite();
  if (!u.finite()) {
    out.soft_fail = true;
    out.soft_reason = "non-finite solution";
  }
  return out;
}

Output run_green_check(const ExperimentConfig& c) {
  constexpr double kStackTol = 1e-8;
  constexpr double kSymmetryTol = 1e-10;
  auto dom = make_domain(fixture_spec(c), c.h());
  const auto q = potential_1(c);
  const BcDescriptor bc{Region::augmented, c.tau};
  DiscreteOperator lap(dom, std::vector<double>(dom->node_count(), 0.0), bc);
  const auto full = assemble(dom, q, bc);

  const Box& b = dom->spec().subdomains.front();
  Vec centre{};
  for (int a = 0; a < c.dim; ++a) {
    const auto i = static_cast<std::size_t>(a);
    centre[i] = 0.5 * (b.lo[i] + b.hi[i]);
  }
  const std::size_t y = dom->nearest_node(centre);
  const KernelStack ks = kernel_stack(lap, *full, y);
  const GreenColumn direct = green_column(*full, y, {});
  const double stack_err = (ks.reconstructed - direct.values).max_abs() / direct.values.max_abs();

  Output out;
  out.command = "green-check";
  out.table.columns = {"check", "x", "y", "value", "tolerance", "pass"};
  const auto pass = [](double v, double tol) { return v <= tol ? "true" : "false"; };
  out.table.add({"kernel_stack", "", std::to_string(y), format_double(stack_err), format_double(kStackTol),
                 pass(stack_err, kStackTol)});

  std::vector<std::size_t> inner;
  for (std::size_t n : full->active_nodes()) {
    if (!full->impedance(n)) inner.push_back(n);
  }
  std::mt19937_64 rng(c.seed);
  std::uniform_int_distribution<std::size_t> pick(0, inner.size() - 1);
  double sym_worst = 0.0;
  for (std::size_t t = 0; t < c.green_pairs; ++t) {
    const std::size_t xn = inner[pick(rng)], yn = inner[pick(rng)];
    const auto gy = green_column(*full, yn, {});
    const auto gx = green_column(*full, xn, {});
    const double rel = std::abs(gy.values[xn] - gx.values[yn]) / std::max(std::abs(gy.values[xn]), 1e-300);
    sym_worst = std::max(sym_worst, rel);
    out.table.add({"symmetry", std::to_string(xn), std::to_string(yn), format_double(rel), format_double(kSymmetryTol),
                   pass(rel, kSymmetryTol)});
  }

  out.summary["source"] = y;
  out.summary["layers"] = ks.layers.size();
  out.summary["J"] = ks.J;
  out.summary["kernel_stack_error"] = stack_err;
  out.summary["symmetry_error"] = sym_worst;

  json asym;
  try {
    AsymptoticsOptions opt;
    opt.radii_h = c.green_radii;
    const auto rep = interior_asymptotics(*full, y, 0, opt);
    asym["status"] = "ok";
    asym["radii"] = rep.radii;
    asym["ratio"] = rep.ratio;
    asym["fit_ratio"] = fit_json(rep.fit_ratio);
    asym["fit_gradient"] = fit_json(rep.fit_grad);
    asym["flags"] = rep.flags;
  } catch (const std::exception& e) {
    asym["status"] = "skipped";
    asym["reason"] = e.what();
  }
  out.summary["asymptotics"] = asym;

  if (stack_err > kStackTol || sym_worst > kSymmetryTol) {
    out.soft_fail = true;
    out.soft_reason = "green function oracle outside tolerance";
  }
  return out;
}

Output run_distance(const ExperimentConfig& c) {
  auto dom = make_domain(fixture_spec(c), c.h());
  const BcDescriptor bc{Region::physical, c.tau};
  const auto op1 = assemble(dom, potential_1(c), bc);
  const auto op2 = assemble(dom, potential_2(c), bc);
  const BoundaryMetric metric(*dom);
  const DistanceReport r = distance_with_stabilization(*op1, *op2, metric, c.m, c.stab_tol, c.zero_tol);

  Output out;
  out.command = "distance";
  out.table.columns = {"m", "distance", "gap_12", "gap_21", "unequal_dims"};
  const auto row = [&](std::size_t m, const ApertureResult& a) {
    out.table.add({std::to_string(m), format_double(a.value), format_double(a.gap_12), format_double(a.gap_21),
                   a.unequal_dims ? "true" : "false"});
  };
  row(r.m, r.at_m);
  row(std::min(2 * r.m, metric.size()), r.at_2m);
  out.summary["m"] = r.m;
  out.summary["distance"] = r.at_m.value;
  out.summary["distance_2m"] = r.at_2m.value;
  out.summary["rel_change"] = r.rel_change;
  out.summary["stable"] = r.stable;
  out.summary["E"] = sup_norm(potential_1(c) - potential_2(c), *dom);
  if (!r.stable) {
    out.soft_fail = true;
    out.soft_reason = "distance did not stabilise between m and 2m";
  }
  return out;
}

Output run_sweep(const ExperimentConfig& c) {
  auto dom = make_domain(fixture_spec(c), c.h());
  SweepOptions o;
  o.n_samples = c.n_samples;
  o.seed = c.seed;
  o.m = c.m;
  o.e0 = c.e0;
  o.tau = c.tau;
  o.stab_tol = c.stab_tol;
  o.zero_tol = c.zero_tol;
  o.scaling_deltas = c.scaling_deltas;
  const SweepResult r = stability_sweep(dom, c.fixture, o);

  Output out;
  out.command = "sweep";
  out.table = sweep_table(r);
  out.summary = sweep_summary_json(make_provenance("sweep", c), r);
  if (!r.summary.flags.empty()) {
    out.soft_fail = true;
    out.soft_reason = "sweep flags raised";
  }
  return out;
}

Output run_probe(const ExperimentConfig& c) {
  auto dom = make_domain(fixture_spec(c), c.h());
  const Chain chain = validate_chain(*dom, fixtures::natural_chain(dom->spec()));
  const auto q1 = potential_1(c), q2 = potential_2(c);
  const auto op1 = make_augmented_solver(dom, q1, c.tau);
  const auto op2 = make_augmented_solver(dom, q2, c.tau);

  Output out;
  out.command = "probe";
  constexpr double kMinR2 = 0.9;
  if (c.probe_mode == "boundary") {
    const auto r = boundary_stability_probe(*op1, *op2, q1, q2, chain, c.probe_radii);
    out.table.columns = {"r", "v1_re", "v1_im", "v2_re", "v2_im"};
    for (std::size_t i = 0; i < r.r.size(); ++i) {
      out.table.add({format_double(r.r[i]), format_double(r.v1[i].real()), format_double(r.v1[i].imag()),
                     format_double(r.v2[i].real()), format_double(r.v2[i].imag())});
    }
    out.summary["mode"] = "boundary";
    out.summary["jump"] = r.jump;
    out.summary["slope"] = r.slope;
    out.summary["jump_true"] = r.jump_true;
    out.summary["slope_true"] = r.slope_true;
    out.summary["jump_error"] = r.jump_error;
    out.summary["slope_error"] = r.slope_error;
    out.summary["fit_r2"] = r.fit_r2;
    out.summary["fit_v1"] = fit_json(r.fit_v1);
    out.summary["fit_v2"] = fit_json(r.fit_v2);
    out.summary["fit_ratio"] = fit_json(r.fit_ratio);
    out.summary["low_confidence"] = r.low_confidence;
    out.summary["flags"] = r.flags;
    if (r.low_confidence || r.fit_r2 < kMinR2) {
      out.soft_fail = true;
      out.soft_reason = "low confidence fit";
    }
    return out;
  }
  const ProbeReport r = smallness_propagation_report(*op1, *op2, q1, q2, chain, c.probe_k, c.probe_radii);
  out.table.columns = {"r", "y", "S_re", "S_im", "dS_re", "dS_im", "d2S_re", "d2S_im", "envelope"};
  for (const ProbeRow& row : r.rows) {
    out.table.add({format_double(row.r), std::to_string(row.y), format_double(row.s.real()), format_double(row.s.imag()),
                   format_double(row.ds.real()), format_double(row.ds.imag()), format_double(row.d2s.real()),
                   format_double(row.d2s.imag()), format_double(row.envelope)});
  }
  out.summary["mode"] = "smallness";
  out.summary["k"] = r.k;
  out.summary["axis"] = r.axis;
  out.summary["fit_first"] = fit_json(r.fit_first);
  out.summary["fit_second"] = fit_json(r.fit_second);
  out.summary["pde_residual"] = r.pde_residual;
  out.summary["beta"] = r.beta;
  out.summary["gamma"] = r.gamma;
  out.summary["flags"] = r.flags;
  if (r.fit_first.r2 < kMinR2 || r.fit_second.r2 < kMinR2) {
    out.soft_fail = true;
    out.soft_reason = "low confidence fit";
  }
  return out;
}

Output run_three_spheres(const ExperimentConfig& c) {
  auto dom = make_domain(fixture_spec(c), c.h());
  const auto op = assemble(dom, potential_1(c), BcDescriptor{Region::physical, c.tau});
  const BoundaryMetric metric(*dom);
  const auto samples = random_solutions(*op, metric, c.ts_samples, c.ts_modes, c.seed);
  const ThreeSpheresReport r = three_spheres(*dom, samples, c.ts_center, c.ts_radii);

  Output out;
  out.command = "three-spheres";
  out.table.columns = {"sample", "M1", "M2", "M3", "tau"};
  const bool per_sample = r.tau.size() == r.maxima.size();
  for (std::size_t i = 0; i < r.maxima.size(); ++i) {
    const double t = per_sample ? r.tau[i] : three_spheres_tau(r.maxima[i][0], r.maxima[i][1], r.maxima[i][2]);
    out.table.add({std::to_string(i), format_double(r.maxima[i][0]), format_double(r.maxima[i][1]),
                   format_double(r.maxima[i][2]), format_double(t)});
  }
  out.summary["radii"] = r.radii;
  out.summary["degenerate"] = r.degenerate;
  out.summary["tau_min"] = finite_or_null(r.tau_min);
  out.summary["tau_max"] = finite_or_null(r.tau_max);
  out.summary["half_constant"] = finite_or_null(r.half_constant);
  out.summary["all_in_open_interval"] = r.all_in_open_interval;
  if (!r.all_in_open_interval) {
    out.soft_fail = true;
    out.soft_reason = "an exponent falls outside (0, 1)";
  }
  return out;
}

Output run_reconstruct(const ExperimentConfig& c) {
  auto dom = make_domain(fixture_spec(c), c.h());
  auto metric = std::make_shared<const BoundaryMetric>(*dom);
  const std::size_t pieces = dom->spec().subdomains.size();
  const std::vector<double> truth = c.theta_true.empty() ? default_theta(c.dim, pieces) : c.theta_true;
  const std::vector<double> theta0 = c.theta0.empty() ? std::vector<double>(truth.size(), 0.0) : c.theta0;
  const auto misfit = DataMisfit::from_truth(dom, metric, PiecewiseLinearPotential::from_coefficients(c.dim, truth, c.e0),
                                             c.m, c.tau);
  ReconstructionOptions o;
  o.policy = c.policy == "gauss_newton" ? StepPolicy::gauss_newton : StepPolicy::landweber;
  o.iterations = c.iterations;
  const ReconstructionResult r = reconstruct(misfit, theta0, truth, o);

  Output out;
  out.command = "reconstruct";
  out.table = trace_table(r);
  out.summary["policy"] = to_string(o.policy);
  out.summary["iterations"] = r.iterations;
  out.summary["converged"] = r.converged;
  out.summary["aborted"] = r.aborted;
  out.summary["reason"] = r.reason;
  out.summary["lipschitz"] = finite_or_null(r.lipschitz);
  out.summary["coefficient_error"] = r.coeff_error;
  out.summary["theta"] = r.theta;
  out.summary["theta_true"] = truth;
  if (!r.converged || r.aborted) {
    out.soft_fail = true;
    out.soft_reason = r.aborted ? "iteration aborted: " + r.reason : "not converged: " + r.reason;
  }
  return out;
}

void print_summary(const Output& out) {
  std::cout << out.command << ":";
  for (const auto& [k, v] : out.summary.items()) {
    if (k == "provenance" || v.is_array() || v.is_object()) continue;
    std::cout << " " << k << "=" << v.dump();
  }
  std::cout << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Lipschitz stability experiments for piecewise-linear potentials"};
  app.set_help_flag("--help", "Print this help message and exit");
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(version()));

  using Runner = Output (*)(const ExperimentConfig&);
  const std::vector<std::tuple<std::string, std::string, Runner>> commands{
      {"forward", "Solve one generation problem and write its Cauchy data", run_forward},
      {"green-check", "Kernel-stack, symmetry and asymptotic checks of the discrete Green function", run_green_check},
      {"distance", "Aperture distance between the Cauchy data spaces of q1 and q2", run_distance},
      {"sweep", "Stability constant sweep over random potential pairs", run_sweep},
      {"probe", "Singular-solution probes near an interface", run_probe},
      {"three-spheres", "Three-spheres exponents of random solutions", run_three_spheres},
      {"reconstruct", "Projected reconstruction from boundary data", run_reconstruct},
  };

  Common opt;
  Runner selected = nullptr;
  for (const auto& [name, help, fn] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("config", opt.config_path, "JSON configuration file")->check(CLI::ExistingFile);
    sub->add_option("--h", opt.h, "grid spacing, e.g. 1/12");
    sub->add_option_function<std::size_t>("--m", [&](std::size_t v) { opt.m = v, opt.has_m = true; }, "number of pairs");
    sub->add_option_function<std::uint64_t>("--seed", [&](std::uint64_t v) { opt.seed = v, opt.has_seed = true; },
                                            "random seed");
    sub->add_option("--out", opt.out, "output directory");
    sub->add_option("--format", opt.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
    sub->add_flag("--soft-fail-ok", opt.soft_fail_ok, "exit 0 when a diagnostic soft-fails");
    sub->callback([&selected, fn = fn] { selected = fn; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kHardError;
  }

  try {
    const ExperimentConfig c = resolve(opt);
    const Output out = selected(c);
    emit(c, out);
    print_summary(out);
    if (out.soft_fail) {
      std::cerr << "soft failure: " << out.soft_reason << "\n";
      return opt.soft_fail_ok ? kOk : kSoftFail;
    }
    return kOk;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kHardError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kHardError;
  }
}
