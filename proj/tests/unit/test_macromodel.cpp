#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <numbers>

#include <unsupported/Eigen/MatrixFunctions>

#include "hcw/cell.hpp"
#include "hcw/corrector.hpp"
#include "hcw/error.hpp"
#include "hcw/macromodel.hpp"
#include "hcw/observable.hpp"

namespace {

using hcw::ErrorKind;
constexpr double kPi = std::numbers::pi;

ErrorKind error_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const hcw::Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorKind::InvalidArgument;
}

Eigen::MatrixXd two_state_alpha(double l0, double l1) {
  Eigen::MatrixXd a(2, 2);
  a << 0, l0, l1, 0;
  return a;
}

hcw::MacroFields gaussian_fields(const hcw::Grid1D& grid, double center, double width,
                                 double rho1_scale) {
  hcw::MacroFields f;
  f.grid = grid;
  for (std::size_t i = 0; i < grid.n; ++i) {
    const double z = (grid.x(i) - center) / width;
    f.rho0.push_back(std::exp(-0.5 * z * z));
    f.rho1.push_back(rho1_scale * std::exp(-0.5 * z * z));
  }
  return f;
}

// ---------------------------------------------------------------------------
// Label chain

TEST(LabelChain, ZeroTimeIsIdentity) {
  const Eigen::MatrixXd g = hcw::assemble_generator(two_state_alpha(1.0, 2.0), 0.5);
  const Eigen::Vector3d p(0.2, 0.3, 0.5);
  EXPECT_EQ(hcw::evolve_label_chain(g, p, 0.0), Eigen::VectorXd(p));
}

TEST(LabelChain, TwoStateClosedForm) {
  // m = 0: p0(t) = l1/(l0+l1) + (1 - l1/(l0+l1)) exp(-(l0+l1) t) from bulk.
  const double l0 = 0.7, l1 = 1.9;
  const Eigen::MatrixXd g = hcw::assemble_generator(two_state_alpha(l0, l1), 0.0);
  for (double t : {0.1, 0.5, 2.0, 7.0}) {
    const auto p = hcw::evolve_label_chain(g, Eigen::Vector3d(1, 0, 0), t);
    const double pi0 = l1 / (l0 + l1);
    EXPECT_NEAR(p(0), pi0 + (1 - pi0) * std::exp(-(l0 + l1) * t), 1e-13);
    EXPECT_NEAR(p(2), 0.0, 1e-15);
  }
}

TEST(LabelChain, AbsorbedMassIsKeptAndTotalIsOne) {
  Eigen::MatrixXd a(3, 3);
  a << 0, 0.4, 0.9, 1.3, 0, 0.2, 0.5, 0.6, 0;
  const Eigen::MatrixXd g = hcw::assemble_generator(a, 1.1);
  const auto from_star = hcw::evolve_label_chain(g, Eigen::Vector4d(0, 0, 0, 1), 3.0);
  EXPECT_NEAR(from_star(3), 1.0, 1e-14);
  double prev = 0.0;
  for (double t : {0.25, 0.5, 1.0, 2.0, 4.0}) {
    const auto p = hcw::evolve_label_chain(g, Eigen::Vector4d(1, 0, 0, 0), t);
    EXPECT_NEAR(p.sum(), 1.0, 1e-13);
    EXPECT_GE(p(3), prev);
    prev = p(3);
  }
}

// ---------------------------------------------------------------------------
// Limit process

TEST(LimitProcess, FrozenLabelsGiveExactGaussianMoments) {
  Eigen::Matrix2d theta;
  theta << 0.3, 0.1, 0.1, 0.2;
  const Eigen::Vector2d b(0.4, -0.7);
  const auto params = hcw::make_limit_params(theta, b, two_state_alpha(0, 0), 0.0);
  hcw::LimitRunOptions o;
  o.checkpoints = {0.5, 1.5};
  o.n_paths = 50000;
  o.seed = 12;
  const auto stats = hcw::simulate_limit_process(params, o);
  const double n = static_cast<double>(o.n_paths);
  for (const auto& c : stats.checkpoints) {
    const Eigen::Matrix2d cov = 2.0 * theta * c.time;
    for (int i = 0; i < 2; ++i) {
      EXPECT_NEAR(c.displacement_mean(i), b(i) * c.time, 5.0 * std::sqrt(cov(i, i) / n));
      EXPECT_NEAR(c.displacement_cov(i, i) / cov(i, i), 1.0, 5.0 * std::sqrt(2.0 / n));
    }
    EXPECT_NEAR(c.displacement_cov(0, 1), cov(0, 1), 5.0 * std::sqrt(cov(0, 0) * cov(1, 1) / n));
  }
}

TEST(LimitProcess, LabelOccupancyFollowsTheGenerator) {
  const auto params =
      hcw::make_limit_params(Eigen::Matrix2d::Identity() * 0.1, Eigen::Vector2d(0, -0.75),
                             two_state_alpha(1.0, 1.0), 1.0);
  hcw::LimitRunOptions o;
  o.checkpoints = {0.5, 1.0, 2.0};
  o.n_paths = 40000;
  o.seed = 3;
  const auto stats = hcw::simulate_limit_process(params, o);
  const double n = static_cast<double>(o.n_paths);
  for (const auto& c : stats.checkpoints) {
    const auto p = hcw::evolve_label_chain(params.generator, Eigen::Vector3d(1, 0, 0), c.time);
    for (int k = 0; k < 3; ++k)
      EXPECT_NEAR(c.occupancy[static_cast<std::size_t>(k)], p(k),
                  5.0 * std::sqrt(p(k) * (1 - p(k)) / n) + 1e-12);
  }
}

TEST(LimitProcess, AstralLabelFreezesPosition) {
  const auto params =
      hcw::make_limit_params(Eigen::Matrix2d::Identity(), Eigen::Vector2d(1, 1),
                             two_state_alpha(0.0, 0.0), 0.0);
  hcw::LimitRunOptions o;
  o.checkpoints = {1.0};
  o.n_paths = 100;
  o.seed = 1;
  o.start_label = 1;
  o.start_position = Eigen::Vector2d(0.3, -0.2);
  const auto c = hcw::simulate_limit_process(params, o).checkpoints.front();
  EXPECT_EQ(c.occupancy[1], 1.0);
  EXPECT_EQ(c.displacement_mean.cwiseAbs().maxCoeff(), 0.0);
}

TEST(LimitProcess, CoarseStepAndIndefiniteThetaAreRejected) {
  const auto params =
      hcw::make_limit_params(Eigen::Matrix2d::Identity(), Eigen::Vector2d(0, 0),
                             two_state_alpha(1.0, 1.0), 1.0);
  hcw::LimitRunOptions o;
  o.checkpoints = {1.0};
  o.n_paths = 10;
  o.dt = 0.5;
  EXPECT_EQ(error_of([&] { (void)hcw::simulate_limit_process(params, o); }),
            ErrorKind::StepTooCoarse);
  EXPECT_NEAR(hcw::max_limit_dt(params, {1.0}), 0.01, 1e-15);
  EXPECT_NEAR(hcw::max_limit_dt(params, {10.0}), 0.05, 1e-15);  // 0.1 / |G_11| = 0.1 / 2
  Eigen::Matrix2d bad;
  bad << 1, 2, 2, 1;
  EXPECT_EQ(error_of([&] {
              (void)hcw::make_limit_params(bad, Eigen::Vector2d(0, 0), two_state_alpha(0, 0), 0);
            }),
            ErrorKind::NotPositiveDefinite);
}

TEST(LimitProcess, DriftAxisReduction) {
  const auto eff = hcw::compute_effective(hcw::build_cell(hcw::appendix2_config(
      {.drift_k = 0.5, .hold = 0.5, .bulk_exchange = 2.0, .astral_exchange = 0.25, .absorption = 1})));
  const auto c = hcw::reduce_to_drift_axis(eff);
  EXPECT_NEAR(c.b, 0.75, 1e-12);
  EXPECT_NEAR(c.theta, eff.theta(1, 1), 1e-15);
  EXPECT_DOUBLE_EQ(c.lambda0, eff.alpha(0, 1));
  EXPECT_DOUBLE_EQ(c.lambda1, eff.alpha(1, 0));
  EXPECT_EQ(c.m, 1.0);
}

// ---------------------------------------------------------------------------
// Field system

TEST(FieldSystem, FourierModeMatchesSemiDiscreteExponential) {
  // A single Fourier mode evolves by the 2x2 matrix exponential of the
  // discrete symbol, so Crank-Nicolson must agree to O(dt^2).
  const hcw::MacroCoefficients c{0.4, 0.8, 1.2, 0.6, 0.5};
  const hcw::Grid1D grid{10.0, 128, hcw::Boundary::Periodic};
  const double dx = grid.dx(), k = 2.0 * kPi * 3.0 / grid.length, beta = 0.3;
  hcw::MacroFields init;
  init.grid = grid;
  for (std::size_t i = 0; i < grid.n; ++i) {
    init.rho0.push_back(std::cos(k * grid.x(i)));
    init.rho1.push_back(beta * std::cos(k * grid.x(i)));
  }
  const std::complex<double> I(0.0, 1.0);
  const std::complex<double> sym = c.theta * (std::exp(-I * k * dx) - 2.0 + std::exp(I * k * dx)) /
                                       (dx * dx) -
                                   c.b * (1.0 - std::exp(-I * k * dx)) / dx;
  const double t = 1.0;
  Eigen::Matrix2cd gen;
  gen << sym - c.lambda0, c.lambda1, c.lambda0, -(c.lambda1 + c.m);
  const Eigen::Matrix2cd e = (gen * t).exp();
  const Eigen::Vector2cd amp = e * Eigen::Vector2cd(1.0, beta);

  hcw::MacroSolverOptions o;
  o.t_end = t;
  o.dt = 1e-3;
  const auto out = hcw::solve_macro_system(c, init, o).back();
  double err = 0.0;
  for (std::size_t i = 0; i < grid.n; ++i) {
    const auto ph = std::exp(I * k * grid.x(i));
    err = std::max(err, std::abs(out.rho0[i] - (amp(0) * ph).real()));
    err = std::max(err, std::abs(out.rho1[i] - (amp(1) * ph).real()));
  }
  EXPECT_LT(err, 1e-6);
}

TEST(FieldSystem, HeatKernelOnTheTorus) {
  // b = 0, no exchange: Gaussian of variance s^2 spreads to s^2 + 2 theta t.
  const hcw::MacroCoefficients c{0.5, 0.0, 0.0, 0.0, 0.0};
  const hcw::Grid1D grid{20.0, 512, hcw::Boundary::Periodic};
  const auto init = gaussian_fields(grid, 10.0, 1.0, 0.0);
  hcw::MacroSolverOptions o;
  o.t_end = 1.0;
  o.dt = 1e-3;
  const auto out = hcw::solve_macro_system(c, init, o).back();
  const double var = 1.0 + 2.0 * c.theta * o.t_end;
  double err = 0.0;
  for (std::size_t i = 0; i < grid.n; ++i) {
    const double z = grid.x(i) - 10.0;
    err = std::max(err, std::abs(out.rho0[i] - std::exp(-0.5 * z * z / var) / std::sqrt(var)));
  }
  EXPECT_LT(err, 1e-3);
}

TEST(FieldSystem, CentralAdvectionTranslatesTheGaussian) {
  const hcw::MacroCoefficients c{0.5, 1.5, 0.0, 0.0, 0.0};
  const hcw::Grid1D grid{20.0, 512, hcw::Boundary::Periodic};
  const auto init = gaussian_fields(grid, 8.0, 1.0, 0.0);
  hcw::MacroSolverOptions o;
  o.t_end = 1.0;
  o.dt = 1e-3;
  o.advection = hcw::Advection::Central;
  const auto out = hcw::solve_macro_system(c, init, o).back();
  const double var = 1.0 + 2.0 * c.theta;
  double err = 0.0;
  for (std::size_t i = 0; i < grid.n; ++i) {
    const double z = grid.x(i) - 8.0 - c.b;
    err = std::max(err, std::abs(out.rho0[i] - std::exp(-0.5 * z * z / var) / std::sqrt(var)));
  }
  EXPECT_LT(err, 1e-3);
}

TEST(FieldSystem, TotalMassIsConservedOnTheTorus) {
  const hcw::MacroCoefficients c{0.3, 0.9, 1.5, 0.7, 2.0};
  const hcw::Grid1D grid{15.0, 300, hcw::Boundary::Periodic};
  const auto init = gaussian_fields(grid, 5.0, 1.0, 0.4);
  for (auto scheme : {hcw::TimeScheme::CrankNicolson, hcw::TimeScheme::ExplicitEuler}) {
    hcw::MacroSolverOptions o;
    o.t_end = 2.0;
    o.dt = scheme == hcw::TimeScheme::ExplicitEuler ? 2e-4 : 1e-2;
    o.scheme = scheme;
    o.output_every = 10;
    const auto traj = hcw::solve_macro_system(c, init, o);
    const double m0 = traj.front().total_mass();
    for (const auto& f : traj) EXPECT_NEAR(f.total_mass(), m0, 1e-12 * m0);
    EXPECT_GT(traj.back().rho_star, 0.1);
  }
}

TEST(FieldSystem, DirichletEndsHoldTheirValues) {
  const hcw::MacroCoefficients c{0.2, 1.0, 0.5, 0.5, 1.0};
  hcw::MacroFields init;
  init.grid = {10.0, 201, hcw::Boundary::Dirichlet};
  init.rho0.assign(201, 0.0);
  init.rho1.assign(201, 0.0);
  hcw::MacroSolverOptions o;
  o.t_end = 3.0;
  o.dt = 1e-2;
  o.left_value = 1.0;
  o.right_value = 0.0;
  for (const auto& f : hcw::solve_macro_system(c, init, o)) {
    EXPECT_EQ(f.rho0.front(), 1.0);
    EXPECT_EQ(f.rho0.back(), 0.0);
  }
}

TEST(FieldSystem, StabilityGuards) {
  const hcw::MacroCoefficients c{1.0, 5.0, 0.0, 0.0, 0.0};
  const hcw::Grid1D grid{10.0, 100, hcw::Boundary::Periodic};
  const auto init = gaussian_fields(grid, 5.0, 1.0, 0.0);
  hcw::MacroSolverOptions o;
  o.t_end = 0.1;
  o.dt = 0.01;  // 2 theta / dx^2 = 200, so dt * rate = 2.5
  o.scheme = hcw::TimeScheme::ExplicitEuler;
  EXPECT_EQ(error_of([&] { (void)hcw::solve_macro_system(c, init, o); }), ErrorKind::CFLViolation);
  const hcw::MacroCoefficients steep{0.01, 5.0, 0.0, 0.0, 0.0};  // Peclet 50
  o.scheme = hcw::TimeScheme::CrankNicolson;
  o.advection = hcw::Advection::Central;
  EXPECT_EQ(error_of([&] { (void)hcw::solve_macro_system(steep, init, o); }),
            ErrorKind::GridTooCoarse);
}

// ---------------------------------------------------------------------------
// Memory form

TEST(MemoryForm, IdenticalToSystemWithoutReturnFlow) {
  // lambda1 = 0 removes the memory term; both solvers then share one scheme.
  const hcw::MacroCoefficients c{0.4, 0.6, 1.3, 0.0, 0.8};
  const hcw::Grid1D grid{12.0, 240, hcw::Boundary::Periodic};
  const auto init = gaussian_fields(grid, 4.0, 0.8, 0.5);
  hcw::MacroSolverOptions o;
  o.t_end = 1.0;
  o.dt = 5e-3;
  o.output_every = 20;
  const auto sys = hcw::solve_macro_system(c, init, o);
  const auto mem = hcw::solve_memory_form(c, init, o);
  ASSERT_EQ(sys.size(), mem.size());
  for (std::size_t s = 0; s < sys.size(); ++s)
    for (std::size_t i = 0; i < grid.n; ++i) EXPECT_NEAR(sys[s].rho0[i], mem[s].rho0[i], 1e-12);
}

TEST(MemoryForm, AgreesWithSystemAtSecondOrder) {
  const hcw::MacroCoefficients c{0.3, 0.8, 1.5, 0.9, 0.6};
  const hcw::Grid1D grid{12.0, 128, hcw::Boundary::Periodic};
  const auto init = gaussian_fields(grid, 4.0, 0.8, 0.7);
  auto gap = [&](double dt) {
    hcw::MacroSolverOptions o;
    o.t_end = 1.0;
    o.dt = dt;
    const auto a = hcw::solve_macro_system(c, init, o).back().rho0;
    const auto b = hcw::solve_memory_form(c, init, o).back().rho0;
    double g = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) g = std::max(g, std::abs(a[i] - b[i]));
    return g;
  };
  const double coarse = gap(4e-3), fine = gap(2e-3);
  EXPECT_LT(fine, 1e-5);
  EXPECT_NEAR(coarse / fine, 4.0, 0.6);  // O(dt^2)
}

TEST(MemoryForm, ExplicitSchemeAgreesWithSystem) {
  const hcw::MacroCoefficients c{0.3, 0.8, 1.5, 0.9, 0.6};
  const hcw::Grid1D grid{12.0, 128, hcw::Boundary::Periodic};
  const auto init = gaussian_fields(grid, 4.0, 0.8, 0.7);
  hcw::MacroSolverOptions o;
  o.t_end = 0.5;
  o.dt = 5e-5;
  o.scheme = hcw::TimeScheme::ExplicitEuler;
  const auto a = hcw::solve_macro_system(c, init, o).back().rho0;
  const auto b = hcw::solve_memory_form(c, init, o).back().rho0;
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-4);
}

// ---------------------------------------------------------------------------
// Stationary regime

TEST(Stationary, ClosedFormCases) {
  const auto zero_drift = hcw::stationary_rate(0.5, 0.0, 1.0, 1.0, 1.0);
  EXPECT_DOUBLE_EQ(zero_drift.kappa, 0.5);
  EXPECT_NEAR(zero_drift.r_pur, 1.0, 1e-15);
  EXPECT_FALSE(zero_drift.r_approx.has_value());

  const auto no_absorption = hcw::stationary_rate(0.5, 1.0, 1.0, 1.0, 0.0);
  EXPECT_EQ(no_absorption.kappa, 0.0);
  EXPECT_EQ(no_absorption.r_pur, 0.0);

  const auto pure_advection = hcw::stationary_rate(0.0, 2.0, 1.0, 1.0, 1.0);
  EXPECT_NEAR(pure_advection.r_pur, 0.25, 1e-15);

  EXPECT_EQ(error_of([] { (void)hcw::stationary_rate(0.0, 0.0, 1.0, 1.0, 1.0); }),
            ErrorKind::DegenerateProblem);
  EXPECT_EQ(error_of([] { (void)hcw::stationary_rate(-1.0, 0.0, 1.0, 1.0, 1.0); }),
            ErrorKind::InvalidArgument);
}

TEST(Stationary, RateSolvesTheCharacteristicEquation) {
  for (double theta : {1e-4, 0.01, 0.3, 2.0})
    for (double b : {0.0, 0.1, 1.0, 10.0})
      for (double l0 : {0.2, 3.0}) {
        const auto r = hcw::stationary_rate(theta, b, l0, 0.7, 1.3);
        const double res = theta * r.r_pur * r.r_pur + b * r.r_pur - r.kappa;
        EXPECT_LT(std::abs(res), 1e-12 * std::max(r.kappa, 1.0));
        EXPECT_GT(r.r_pur, 0.0);
      }
}

TEST(Stationary, SensitivityToKappa) {
  // dR / dkappa = 1 / sqrt(b^2 + 4 theta kappa).
  const double theta = 0.3, b = 0.8, l1 = 0.5, m = 1.0;
  const auto at = [&](double l0) { return hcw::stationary_rate(theta, b, l0, l1, m); };
  const double l0 = 2.0, h = 1e-6;
  const auto r = at(l0);
  const double dk = at(l0 + h).kappa - at(l0 - h).kappa;
  const double dr = at(l0 + h).r_pur - at(l0 - h).r_pur;
  EXPECT_NEAR(dr / dk, 1.0 / std::sqrt(b * b + 4 * theta * r.kappa), 1e-6);
}

TEST(Stationary, BoundaryValueFitMatchesClosedForm) {
  for (const auto& [theta, b, kappa] :
       {std::tuple{0.5, 0.0, 0.5}, std::tuple{0.2, 1.0, 0.8}, std::tuple{1.0, 3.0, 0.1}}) {
    const double r = (std::sqrt(b * b + 4 * theta * kappa) - b) / (2 * theta);
    const double len = 30.0 / r;
    const double dx = std::min(1.0 / r, 1.0) / 200.0;
    const auto prof = hcw::solve_stationary_bvp(theta, b, kappa, len, dx);
    ASSERT_TRUE(prof.fitted_rate.has_value());
    EXPECT_NEAR(*prof.fitted_rate / r, 1.0, 1e-3);
    for (std::size_t i = 1; i < prof.rho0.size(); ++i) EXPECT_LE(prof.rho0[i], prof.rho0[i - 1]);
    EXPECT_EQ(prof.rho0.front(), 1.0);
  }
}

TEST(Stationary, SmallThetaApproachesKappaOverB) {
  const double b = 1.0, kappa = 0.5, theta = 5e-3 * b * b / kappa;
  const auto r = hcw::stationary_rate(theta, b, kappa * 2.0, 1.0, 1.0);  // kappa = l0 m/(l1+m)
  ASSERT_NEAR(r.kappa, kappa, 1e-15);
  EXPECT_NEAR(r.r_pur / *r.r_approx, 1.0, 0.01);
  const double dx = theta / b;  // Peclet 1
  const auto prof = hcw::solve_stationary_bvp(theta, b, kappa, 30.0 / r.r_pur, dx);
  EXPECT_NEAR(*prof.fitted_rate / *r.r_approx, 1.0, 0.01);
}

TEST(Stationary, GuardsOnDomainAndGrid) {
  EXPECT_EQ(error_of([] { (void)hcw::solve_stationary_bvp(0.5, 0.0, 0.5, 2.0, 0.01); }),
            ErrorKind::DomainTooShort);
  EXPECT_EQ(error_of([] { (void)hcw::solve_stationary_bvp(0.01, 1.0, 0.5, 100.0, 0.1); }),
            ErrorKind::GridTooCoarse);
  const auto flat = hcw::solve_stationary_bvp(0.5, 1.0, 0.0, 10.0, 0.05);
  EXPECT_FALSE(flat.fitted_rate.has_value());
}

}  // namespace
