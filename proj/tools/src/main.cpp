// hcw: command-line front end for the hcwalk library.
//
// Exit codes: 0 success, 1 usage or I/O error, 2 invalid input (any library
// error), 3 acceptance thresholds not met (`compare`).

#include <cmath>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hcw/cell.hpp"
#include "hcw/cell_io.hpp"
#include "hcw/corrector.hpp"
#include "hcw/error.hpp"
#include "hcw/macromodel.hpp"
#include "hcw/microsim.hpp"
#include "hcw/observable.hpp"
#include "hcw/validation.hpp"
#include "io.hpp"

namespace fs = std::filesystem;
using hcw::cli::json;

namespace {

struct Common {
  std::string out;
  unsigned threads = 1;
  std::vector<std::string> argv;

  fs::path path(const std::string& name) const {
    return hcw::cli::resolve_output_dir(out) / name;
  }
  void emit(const std::string& name, const json& j) const {
    const fs::path p = path(name);
    hcw::cli::write_json(p, j);
    hcw::cli::write_metadata(p, argv);
  }
};

struct ThresholdFailure {
  std::vector<std::string> failures;
};

hcw::PeriodCell load_cell(const std::string& file) {
  return hcw::build_cell(hcw::load_cell_config(file));
}

std::string fmt_vector(const Eigen::VectorXd& v) {
  std::string s = "(";
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i) s += ", ";
    s += hcw::cli::num(std::abs(v(i)) < 1e-15 ? 0.0 : v(i));
  }
  return s + ")";
}

void print_matrix(const char* name, const Eigen::MatrixXd& m) {
  std::cout << name << " =\n";
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    std::cout << "  ";
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      std::cout << (j ? "  " : "") << hcw::cli::num(std::abs(m(i, j)) < 1e-15 ? 0.0 : m(i, j));
    std::cout << '\n';
  }
}

json point_json(const hcw::Point& p) { return json(p); }

// Gaussian test function shared by simulate-micro, simulate-limit and compare.
struct GaussianFlags {
  std::vector<double> center;
  double width = 1.0;
  double astral_scale = 1.0;
  double absorbed_value = 0.0;

  void add(CLI::App* app) {
    app->add_option("--center", center, "Gaussian centre (comma separated, default origin)")
        ->delimiter(',');
    app->add_option("--width", width, "Gaussian width")->check(CLI::PositiveNumber);
    app->add_option("--astral-scale", astral_scale, "f_j = scale * f_0 on astral labels");
    app->add_option("--absorbed-value", absorbed_value, "F at the absorbing state");
  }
  hcw::Observable make(int dim, std::size_t num_astral) const {
    hcw::Gaussian g;
    g.center = Eigen::VectorXd::Zero(dim);
    if (!center.empty()) {
      if (static_cast<int>(center.size()) != dim)
        hcw::raise(hcw::ErrorKind::InvalidArgument, "--center needs one value per dimension");
      for (int i = 0; i < dim; ++i) g.center(i) = center[static_cast<std::size_t>(i)];
    }
    g.width = width;
    return hcw::gaussian_observable(g, num_astral, astral_scale, absorbed_value);
  }
};

// --------------------------------------------------------------------------

void cmd_validate(const Common& c, const std::string& file) {
  const hcw::PeriodCell cell = load_cell(file);
  json j;
  j["valid"] = true;
  j["dimension"] = cell.dimension();
  j["period"] = cell.period();
  j["num_sites"] = cell.num_sites();
  j["num_bulk"] = cell.num_bulk();
  j["num_astral"] = cell.num_astral();
  j["m"] = cell.m();
  j["range"] = cell.range();
  j["eps_max"] = cell.eps_max();
  j["exchange_complete"] = cell.exchange_complete();
  c.emit("validate.json", j);
  std::cout << "valid cell: " << cell.num_bulk() << " bulk, " << cell.num_astral()
            << " astral sites; eps_max = " << cell.eps_max() << '\n';
}

void cmd_correctors(const Common& c, const std::string& file) {
  const hcw::PeriodCell cell = load_cell(file);
  const hcw::CorrectorSet cs = hcw::solve_correctors(cell);
  const int d = cell.dimension();

  json sites = json::array();
  for (std::size_t i = 0; i < cell.num_bulk(); ++i) {
    const auto bi = static_cast<Eigen::Index>(i);
    json s;
    s["site"] = point_json(cell.site_point(cell.bulk_sites()[i]));
    s["h"] = hcw::cli::to_json(Eigen::VectorXd(cs.h.h.row(bi).transpose()));
    s["g"] = hcw::cli::to_json(cs.g.g[i]);
    json q = json::array();
    for (const auto& qj : cs.q) q.push_back(qj.q(bi));
    s["q"] = std::move(q);
    sites.push_back(std::move(s));
  }
  json j;
  j["gauge"] = "mean-zero";
  j["bulk_sites"] = std::move(sites);
  json alpha0 = json::array();
  double q_res = 0.0, q_fred = 0.0;
  for (const auto& qj : cs.q) {
    alpha0.push_back(qj.alpha_0j);
    q_res = std::max(q_res, qj.residual);
    q_fred = std::max(q_fred, qj.fredholm_residual);
  }
  j["alpha_0j"] = std::move(alpha0);
  j["residuals"] = {{"h", cs.h.residual},         {"h_fredholm", cs.h.fredholm_residual},
                    {"g", cs.g.residual},         {"g_fredholm", cs.g.fredholm_residual},
                    {"q", q_res},                 {"q_fredholm", q_fred}};
  c.emit("correctors.json", j);

  std::ofstream csv(c.path("correctors.csv"));
  csv << "site";
  for (int k = 0; k < d; ++k) csv << ",h" << k;
  for (int k = 0; k < d; ++k)
    for (int m = 0; m < d; ++m) csv << ",g" << k << m;
  for (std::size_t jx = 1; jx <= cell.num_astral(); ++jx) csv << ",q" << jx;
  csv << '\n';
  for (std::size_t i = 0; i < cell.num_bulk(); ++i) {
    const auto bi = static_cast<Eigen::Index>(i);
    const hcw::Point p = cell.site_point(cell.bulk_sites()[i]);
    for (std::size_t k = 0; k < p.size(); ++k) csv << (k ? ";" : "") << p[k];
    for (int k = 0; k < d; ++k) csv << ',' << hcw::cli::num(cs.h.h(bi, k));
    for (int k = 0; k < d; ++k)
      for (int m = 0; m < d; ++m) csv << ',' << hcw::cli::num(cs.g.g[i](k, m));
    for (const auto& qj : cs.q) csv << ',' << hcw::cli::num(qj.q(bi));
    csv << '\n';
  }
  std::cout << "correctors solved; max residual "
            << std::max({cs.h.residual, cs.g.residual, q_res}) << '\n';
}

void cmd_effective(const Common& c, const std::string& file) {
  const hcw::PeriodCell cell = load_cell(file);
  const hcw::EffectiveParameters p = hcw::compute_effective(cell);
  json j = hcw::cli::to_json(p);
  j["theta_min_eigenvalue"] = hcw::min_eigenvalue(p.theta);
  c.emit("effective.json", j);

  std::ofstream csv(c.path("effective.csv"));
  csv << "parameter,i,j,value\n";
  auto mat = [&](const char* name, const Eigen::MatrixXd& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index k = 0; k < m.cols(); ++k)
        csv << name << ',' << i << ',' << k << ',' << hcw::cli::num(m(i, k)) << '\n';
  };
  mat("theta", p.theta);
  for (Eigen::Index i = 0; i < p.b.size(); ++i)
    csv << "b," << i << ",," << hcw::cli::num(p.b(i)) << '\n';
  mat("alpha", p.alpha);
  csv << "m,,," << hcw::cli::num(p.m) << '\n';
  mat("generator", p.generator);

  std::cout << "b = " << fmt_vector(p.b) << '\n';
  print_matrix("Theta", p.theta);
  print_matrix("alpha", p.alpha);
}

struct MicroFlags {
  std::string cell;
  double eps = 0.0;
  double t = 1.0;
  std::size_t paths = 0;
  std::uint64_t seed = 0;
  std::vector<double> checkpoints;
  std::vector<int> start;
  bool uniform_start = false;
  GaussianFlags gauss;
};

void cmd_simulate_micro(const Common& c, const MicroFlags& f) {
  const hcw::PeriodCell cell = load_cell(f.cell);
  hcw::MicroRunOptions o;
  o.epsilon = f.eps;
  o.checkpoints = f.checkpoints.empty() ? std::vector<double>{f.t} : f.checkpoints;
  o.n_paths = f.paths;
  o.seed = f.seed;
  if (!f.start.empty()) o.start = f.start;
  o.start_distribution =
      f.uniform_start ? hcw::StartDistribution::UniformBulk : hcw::StartDistribution::Fixed;
  o.observables = {f.gauss.make(cell.dimension(), cell.num_astral()),
                   hcw::label_indicator(hcw::kAbsorbedLabel, cell.num_astral())};
  o.threads = c.threads;
  const hcw::EnsembleStats stats = hcw::run_paths(cell, o);
  json j = hcw::cli::to_json(stats);
  j["epsilon"] = f.eps;
  j["seed"] = f.seed;
  c.emit("micro.json", j);
  hcw::cli::write_ensemble_csv(c.path("micro.csv"), stats);
  const auto& last = stats.checkpoints.back();
  std::cout << "t = " << last.time << ": mean displacement " << fmt_vector(last.displacement_mean)
            << ", absorbed fraction " << last.absorbed_fraction << '\n';
}

struct LimitFlags {
  std::string params;
  std::string cell;
  double t = 1.0;
  std::size_t paths = 0;
  std::uint64_t seed = 0;
  std::vector<double> checkpoints;
  std::vector<double> start;
  int start_label = 0;
  double dt = 0.0;
  GaussianFlags gauss;
};

hcw::EffectiveParameters effective_from(const std::string& params, const std::string& cell) {
  if (!params.empty()) return hcw::cli::load_effective(params);
  if (!cell.empty()) return hcw::compute_effective(load_cell(cell));
  hcw::raise(hcw::ErrorKind::InvalidArgument, "one of --params or --cell is required");
}

void cmd_simulate_limit(const Common& c, const LimitFlags& f) {
  const hcw::EffectiveParameters eff = effective_from(f.params, f.cell);
  const hcw::LimitProcessParams lp = hcw::make_limit_params(eff);
  hcw::LimitRunOptions o;
  o.checkpoints = f.checkpoints.empty() ? std::vector<double>{f.t} : f.checkpoints;
  o.n_paths = f.paths;
  o.seed = f.seed;
  if (!f.start.empty())
    o.start_position = Eigen::Map<const Eigen::VectorXd>(f.start.data(),
                                                         static_cast<Eigen::Index>(f.start.size()));
  o.start_label = f.start_label;
  o.dt = f.dt;
  o.observables = {f.gauss.make(lp.dimension(), lp.num_astral()),
                   hcw::label_indicator(hcw::kAbsorbedLabel, lp.num_astral())};
  o.threads = c.threads;
  const hcw::EnsembleStats stats = hcw::simulate_limit_process(lp, o);
  json j = hcw::cli::to_json(stats);
  j["params"] = hcw::cli::to_json(eff);
  j["dt"] = o.dt > 0.0 ? o.dt : hcw::max_limit_dt(lp, o.checkpoints);
  j["seed"] = f.seed;
  c.emit("limit.json", j);
  hcw::cli::write_ensemble_csv(c.path("limit.csv"), stats);
  const auto& last = stats.checkpoints.back();
  std::cout << "t = " << last.time << ": mean displacement " << fmt_vector(last.displacement_mean)
            << ", absorbed fraction " << last.absorbed_fraction << '\n';
}

struct FieldFlags {
  std::string params;
  std::string cell;
  std::optional<double> theta, b, lambda0, lambda1, m;
  double length = 10.0;
  std::size_t n = 512;
  double t = 1.0;
  double dt = 1e-3;
  std::string boundary = "periodic";
  std::string scheme = "cn";
  std::string advection = "upwind";
  std::string initial = "gaussian";
  double center = -1.0;  // negative: L / 2
  double width = -1.0;   // negative: L / 20
  double rho1_scale = 0.0;
  double left = 1.0, right = 0.0;
  std::size_t output_every = 0;

  void add(CLI::App* app) {
    app->add_option("--params", params, "effective.json from `hcw effective`")
        ->check(CLI::ExistingFile);
    app->add_option("--cell", cell, "cell file")->check(CLI::ExistingFile);
    app->add_option("--theta", theta, "diffusion along the drift axis");
    app->add_option("--b", b, "drift speed");
    app->add_option("--lambda0", lambda0, "bulk -> astral rate");
    app->add_option("--lambda1", lambda1, "astral -> bulk rate");
    app->add_option("--m", m, "absorption rate");
    app->add_option("--L", length, "domain length")->check(CLI::PositiveNumber);
    app->add_option("--n", n, "grid nodes")->check(CLI::Range(3, 1 << 24));
    app->add_option("--t", t, "final time")->check(CLI::NonNegativeNumber);
    app->add_option("--dt", dt, "time step")->check(CLI::PositiveNumber);
    app->add_option("--boundary", boundary)->check(CLI::IsMember({"periodic", "dirichlet"}));
    app->add_option("--scheme", scheme)->check(CLI::IsMember({"cn", "euler"}));
    app->add_option("--advection", advection)->check(CLI::IsMember({"upwind", "central"}));
    app->add_option("--initial", initial, "initial rho0")
        ->check(CLI::IsMember({"gaussian", "zero"}));
    app->add_option("--center", center, "centre of the initial bump");
    app->add_option("--width", width, "width of the initial bump");
    app->add_option("--rho1-scale", rho1_scale, "initial rho1 (pi_1) = scale * initial bump");
    app->add_option("--left", left, "Dirichlet inlet value");
    app->add_option("--right", right, "Dirichlet outlet value");
    app->add_option("--output-every", output_every, "emit every k steps (0: first and last)");
  }

  hcw::MacroCoefficients coefficients() const {
    hcw::MacroCoefficients mc;
    if (!params.empty() || !cell.empty()) mc = hcw::reduce_to_drift_axis(effective_from(params, cell));
    if (theta) mc.theta = *theta;
    if (b) mc.b = *b;
    if (lambda0) mc.lambda0 = *lambda0;
    if (lambda1) mc.lambda1 = *lambda1;
    if (m) mc.m = *m;
    return mc;
  }

  hcw::MacroFields initial_fields() const {
    hcw::MacroFields f;
    f.grid.length = length;
    f.grid.n = n;
    f.grid.boundary = boundary == "periodic" ? hcw::Boundary::Periodic : hcw::Boundary::Dirichlet;
    const double c0 = center < 0.0 ? 0.5 * length : center;
    const double w = width <= 0.0 ? length / 20.0 : width;
    f.rho0.assign(n, 0.0);
    f.rho1.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double x = f.grid.x(i) - c0;
      const double bump = std::exp(-x * x / (2.0 * w * w)) / (w * std::sqrt(2.0 * M_PI));
      if (initial == "gaussian") f.rho0[i] = bump;
      f.rho1[i] = rho1_scale * bump;
    }
    return f;
  }

  hcw::MacroSolverOptions solver() const {
    hcw::MacroSolverOptions o;
    o.t_end = t;
    o.dt = dt;
    o.scheme = scheme == "cn" ? hcw::TimeScheme::CrankNicolson : hcw::TimeScheme::ExplicitEuler;
    o.advection = advection == "upwind" ? hcw::Advection::Upwind : hcw::Advection::Central;
    o.left_value = left;
    o.right_value = right;
    o.output_every = output_every;
    return o;
  }
};

json coeff_json(const hcw::MacroCoefficients& mc) {
  return {{"theta", mc.theta}, {"b", mc.b}, {"lambda0", mc.lambda0}, {"lambda1", mc.lambda1},
          {"m", mc.m}};
}

void cmd_solve_macro(const Common& c, const FieldFlags& f) {
  const hcw::MacroCoefficients mc = f.coefficients();
  const hcw::MacroFields init = f.initial_fields();
  const auto traj = hcw::solve_macro_system(mc, init, f.solver());
  hcw::cli::write_fields_csv(c.path("macro.csv"), traj);
  json mass = json::array();
  for (const auto& s : traj) mass.push_back({{"t", s.t}, {"total_mass", s.total_mass()}});
  c.emit("macro.json", {{"coefficients", coeff_json(mc)}, {"mass", mass}});
  std::cout << "t = " << traj.back().t << ": total mass " << traj.back().total_mass()
            << " (initial " << traj.front().total_mass() << ")\n";
}

void cmd_memory_form(const Common& c, const FieldFlags& f) {
  const hcw::MacroCoefficients mc = f.coefficients();
  const hcw::MacroFields init = f.initial_fields();
  const auto traj = hcw::solve_memory_form(mc, init, f.solver());
  hcw::cli::write_rho0_csv(c.path("memory.csv"), init.grid, traj);
  json mass = json::array();
  for (const auto& s : traj) mass.push_back({{"t", s.t}, {"rho0_mass", init.grid.integrate(s.rho0)}});
  c.emit("memory.json", {{"coefficients", coeff_json(mc)}, {"rho0_mass", mass}});
  std::cout << "t = " << traj.back().t << ": integral of rho0 "
            << init.grid.integrate(traj.back().rho0) << '\n';
}

struct StationaryFlags {
  double theta = 0.0, b = 0.0, lambda0 = 0.0, lambda1 = 0.0, m = 0.0;
  bool bvp = false;
  double length = 0.0;  // 0: 30 / R_pur
  double dx = 0.0;      // 0: min(1 / R_pur, 1) / 200
};

void cmd_stationary(const Common& c, const StationaryFlags& f) {
  const hcw::StationaryRate r = hcw::stationary_rate(f.theta, f.b, f.lambda0, f.lambda1, f.m);
  json j;
  j["kappa"] = r.kappa;
  j["R_pur"] = r.r_pur;
  j["R_approx"] = r.r_approx ? json(*r.r_approx) : json(nullptr);
  j["fitted_rate"] = nullptr;
  std::cout << "kappa = " << hcw::cli::num(r.kappa) << "\nR_pur = " << hcw::cli::num(r.r_pur)
            << '\n';
  if (r.r_approx) std::cout << "R_approx = " << hcw::cli::num(*r.r_approx) << '\n';
  if (f.bvp) {
    const double scale = r.r_pur > 0.0 ? 1.0 / r.r_pur : 1.0;
    const double length = f.length > 0.0 ? f.length : 30.0 * scale;
    const double dx = f.dx > 0.0 ? f.dx : std::min(scale, 1.0) / 200.0;
    const auto prof = hcw::solve_stationary_bvp(f.theta, f.b, r.kappa, length, dx);
    if (prof.fitted_rate) {
      j["fitted_rate"] = *prof.fitted_rate;
      std::cout << "fitted_rate = " << hcw::cli::num(*prof.fitted_rate) << '\n';
    }
    j["L"] = length;
    j["dx"] = dx;
    std::ofstream csv(c.path("stationary.csv"));
    csv << "x,rho0\n";
    for (std::size_t i = 0; i < prof.x.size(); ++i)
      csv << hcw::cli::num(prof.x[i]) << ',' << hcw::cli::num(prof.rho0[i]) << '\n';
  }
  c.emit("stationary.json", j);
}

struct CompareFlags {
  std::string cell;
  std::vector<double> eps;
  std::vector<double> t;
  std::size_t paths = 0;
  std::uint64_t seed = 0;
  std::vector<int> start;
  double dt = 0.0;
  double error_fraction = 0.05;
  double tv = 0.02;
  GaussianFlags gauss;
};

void cmd_compare(const Common& c, const CompareFlags& f) {
  const hcw::PeriodCell cell = load_cell(f.cell);
  hcw::ConvergenceOptions o;
  o.epsilons = f.eps;
  o.times = f.t;
  o.n_paths = f.paths;
  o.seed = f.seed;
  if (!f.start.empty()) o.start = f.start;
  o.threads = c.threads;
  o.macro_dt = f.dt;
  o.observables = {f.gauss.make(cell.dimension(), cell.num_astral()),
                   hcw::constant_observable(1.0, cell.num_astral()),
                   hcw::label_indicator(hcw::kAbsorbedLabel, cell.num_astral())};
  const hcw::ConvergenceReport rep = hcw::convergence_study(cell, o);
  const hcw::LadderVerdict verdict = hcw::evaluate_ladder(rep, {f.error_fraction, f.tv});
  json j = hcw::cli::to_json(rep);
  j["acceptance"] = {{"passed", verdict.passed}, {"failures", verdict.failures}};
  c.emit("compare.json", j);
  hcw::cli::write_convergence_csv(c.path("compare.csv"), rep);
  for (const auto& r : rep.rows)
    std::cout << "eps = " << r.epsilon << "  " << r.observable_id << "  t = " << r.t
              << "  micro " << r.micro << " +- " << r.micro_stderr << "  macro " << r.macro
              << "  error " << r.error << (r.inconclusive ? "  (inconclusive)" : "") << '\n';
  for (const auto& l : rep.labels)
    std::cout << "eps = " << l.epsilon << "  label TV at t = " << l.t << ": " << l.tv << '\n';
  if (!verdict.passed) throw ThresholdFailure{verdict.failures};
}

void cmd_appendix2(const Common& c, double k) {
  hcw::Appendix2Options o;
  o.drift_k = k;
  const hcw::PeriodCell cell = hcw::build_cell(hcw::appendix2_config(o));
  const hcw::EffectiveParameters p = hcw::compute_effective(cell);
  const Eigen::VectorXd rhs = hcw::linear_rhs(cell, 0);
  json j = hcw::cli::to_json(p);
  j["K"] = k;
  j["corrector_rhs_first_coordinate"] = hcw::cli::to_json(rhs);
  c.emit("appendix2.json", j);
  std::cout << "b = " << fmt_vector(p.b) << '\n';
  print_matrix("Theta", p.theta);
  print_matrix("alpha", p.alpha);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Homogenization and simulation of random walks in high-contrast periodic media"};
  app.require_subcommand(1);
  app.fallthrough();
  Common common;
  common.argv.assign(argv, argv + argc);
  app.add_option("--out", common.out, "output directory (default $HCW_OUTPUT_DIR or .)");
  app.add_option("--threads", common.threads, "worker threads")->check(CLI::Range(1u, 1024u));

  std::string cell_file;
  auto* validate = app.add_subcommand("validate", "check a cell file against all structural conditions");
  validate->add_option("--cell", cell_file)->required()->check(CLI::ExistingFile);

  auto* correctors = app.add_subcommand("correctors", "solve the h, g and q cell problems");
  correctors->add_option("--cell", cell_file)->required()->check(CLI::ExistingFile);
  std::string gauge = "mean-zero";
  correctors->add_option("--gauge", gauge)->check(CLI::IsMember({"mean-zero"}));

  auto* effective = app.add_subcommand("effective", "compute Theta, b, alpha and the label generator");
  effective->add_option("--cell", cell_file)->required()->check(CLI::ExistingFile);

  MicroFlags micro;
  auto* sim_micro = app.add_subcommand("simulate-micro", "Monte Carlo of the rescaled micro walk");
  sim_micro->add_option("--cell", micro.cell)->required()->check(CLI::ExistingFile);
  sim_micro->add_option("--eps", micro.eps)->required()->check(CLI::PositiveNumber);
  sim_micro->add_option("--t", micro.t, "final time (ignored with --checkpoints)")
      ->check(CLI::NonNegativeNumber);
  sim_micro->add_option("--paths", micro.paths)->required()->check(CLI::PositiveNumber);
  sim_micro->add_option("--seed", micro.seed)->required();
  sim_micro->add_option("--checkpoints", micro.checkpoints)->delimiter(',');
  sim_micro->add_option("--start", micro.start, "lattice start point")->delimiter(',');
  sim_micro->add_flag("--uniform-start", micro.uniform_start,
                      "start uniformly over the bulk sites of the start cell");
  micro.gauss.add(sim_micro);

  LimitFlags limit;
  auto* sim_limit = app.add_subcommand("simulate-limit", "Monte Carlo of the limit switching diffusion");
  sim_limit->add_option("--params", limit.params, "effective.json")->check(CLI::ExistingFile);
  sim_limit->add_option("--cell", limit.cell)->check(CLI::ExistingFile);
  sim_limit->add_option("--t", limit.t)->check(CLI::NonNegativeNumber);
  sim_limit->add_option("--paths", limit.paths)->required()->check(CLI::PositiveNumber);
  sim_limit->add_option("--seed", limit.seed)->required();
  sim_limit->add_option("--checkpoints", limit.checkpoints)->delimiter(',');
  sim_limit->add_option("--start", limit.start, "start position")->delimiter(',');
  sim_limit->add_option("--start-label", limit.start_label, "0..M, or -1 for absorbed");
  sim_limit->add_option("--dt", limit.dt, "Euler-Maruyama step (default dt_max)");
  limit.gauss.add(sim_limit);

  FieldFlags macro_flags;
  auto* solve_macro = app.add_subcommand("solve-macro", "three-field system along the drift axis");
  macro_flags.add(solve_macro);
  FieldFlags memory_flags;
  auto* memory = app.add_subcommand("memory-form", "rho0 equation with the exponential memory kernel");
  memory_flags.add(memory);

  StationaryFlags st;
  auto* stationary = app.add_subcommand("stationary", "purification rate of the stationary regime");
  stationary->add_option("--theta", st.theta)->required()->check(CLI::NonNegativeNumber);
  stationary->add_option("--b", st.b)->required()->check(CLI::NonNegativeNumber);
  stationary->add_option("--lambda0", st.lambda0)->required()->check(CLI::NonNegativeNumber);
  stationary->add_option("--lambda1", st.lambda1)->required()->check(CLI::NonNegativeNumber);
  stationary->add_option("--m", st.m)->required()->check(CLI::NonNegativeNumber);
  stationary->add_flag("--bvp", st.bvp, "also solve the boundary value problem and fit the rate");
  stationary->add_option("--L", st.length, "BVP domain length (default 30 / R_pur)");
  stationary->add_option("--dx", st.dx, "BVP grid spacing (default min(1/R_pur, 1) / 200)");

  CompareFlags cmp;
  auto* compare = app.add_subcommand("compare", "micro versus limit semigroup over an epsilon ladder");
  compare->add_option("--cell", cmp.cell)->required()->check(CLI::ExistingFile);
  compare->add_option("--eps", cmp.eps)->required()->delimiter(',');
  compare->add_option("--t", cmp.t)->required()->delimiter(',');
  compare->add_option("--paths", cmp.paths)->required()->check(CLI::PositiveNumber);
  compare->add_option("--seed", cmp.seed)->required();
  compare->add_option("--start", cmp.start, "lattice start point")->delimiter(',');
  compare->add_option("--dt", cmp.dt, "limit-process step (default dt_max)");
  compare->add_option("--error-fraction", cmp.error_fraction, "threshold on error / sup|F|");
  compare->add_option("--tv", cmp.tv, "threshold on label TV distance");
  cmp.gauss.add(compare);

  double k = 1.0;
  auto* appendix2 = app.add_subcommand("appendix2", "worked 3x3 example: print b, Theta, alpha");
  appendix2->add_option("--K", k, "drift constant");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*validate) cmd_validate(common, cell_file);
    else if (*correctors) cmd_correctors(common, cell_file);
    else if (*effective) cmd_effective(common, cell_file);
    else if (*sim_micro) cmd_simulate_micro(common, micro);
    else if (*sim_limit) cmd_simulate_limit(common, limit);
    else if (*solve_macro) cmd_solve_macro(common, macro_flags);
    else if (*memory) cmd_memory_form(common, memory_flags);
    else if (*stationary) cmd_stationary(common, st);
    else if (*compare) cmd_compare(common, cmp);
    else if (*appendix2) cmd_appendix2(common, k);
  } catch (const ThresholdFailure& f) {
    for (const auto& s : f.failures) std::cerr << "threshold not met: " << s << '\n';
    return 3;
  } catch (const hcw::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
