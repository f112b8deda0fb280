#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "hcw/corrector.hpp"
#include "hcw/ensemble.hpp"
#include "hcw/observable.hpp"

namespace hcw {

// ---------------------------------------------------------------------------
// Label chain and limit process

/// p0 * exp(t G) by scaling and squaring. States 0..M, then the absorbing one.
Eigen::VectorXd evolve_label_chain(const Eigen::MatrixXd& generator, const Eigen::VectorXd& p0,
                                   double t);

/// Parameters of the switching diffusion: diffuses with (Theta, b) while the
/// label is 0, frozen while the label is astral, stopped once absorbed.
struct LimitProcessParams {
  Eigen::MatrixXd theta;
  Eigen::VectorXd b;
  Eigen::MatrixXd alpha;
  double m = 0.0;
  Eigen::MatrixXd generator;
  Eigen::MatrixXd theta_sqrt;  // symmetric square root of 2 Theta

  std::size_t num_astral() const { return static_cast<std::size_t>(alpha.rows()) - 1; }
  int dimension() const { return static_cast<int>(b.size()); }
};

/// Builds the generator and sqrt(2 Theta); throws NotPositiveDefinite.
LimitProcessParams make_limit_params(const Eigen::MatrixXd& theta, const Eigen::VectorXd& b,
                                     const Eigen::MatrixXd& alpha, double m);
LimitProcessParams make_limit_params(const EffectiveParameters& effective);

struct LimitRunOptions {
  std::vector<double> checkpoints;
  std::size_t n_paths = 0;
  std::uint64_t seed = 0;
  Eigen::VectorXd start_position;  // empty means the origin
  int start_label = 0;
  double dt = 0.0;  // Euler-Maruyama step; 0 selects max_limit_dt()
  std::vector<Observable> observables;
  unsigned threads = 1;
};

/// Largest admissible Euler-Maruyama step: 0.1 / max|G_kk| and one hundredth
/// of the smallest gap between checkpoint times (starting from 0).
double max_limit_dt(const LimitProcessParams& params, const std::vector<double>& checkpoints);

/// Holding times of the label chain are sampled exactly; only the diffusion
/// between jumps is discretised. Throws StepTooCoarse when dt > max_limit_dt.
EnsembleStats simulate_limit_process(const LimitProcessParams& params,
                                     const LimitRunOptions& options);

// ---------------------------------------------------------------------------
// One-dimensional three-field system along the drift direction (M = 1)

/// theta d_xx rho0 - b d_x rho0 with exchange rates lambda0 (bulk -> astral),
/// lambda1 (astral -> bulk) and absorption m.
struct MacroCoefficients {
  double theta = 0.0;
  double b = 0.0;
  double lambda0 = 0.0;
  double lambda1 = 0.0;
  double m = 0.0;
};

/// Projects effective parameters with one astral site onto the drift axis:
/// theta = n' Theta n and b = |b| with n = b / |b| (the last axis when b = 0),
/// lambda0 = alpha_01, lambda1 = alpha_10.
MacroCoefficients reduce_to_drift_axis(const EffectiveParameters& effective);

enum class Boundary { Periodic, Dirichlet };
enum class TimeScheme { CrankNicolson, ExplicitEuler };
enum class Advection { Upwind, Central };

/// Uniform grid on [0, L]. Periodic: n nodes at i L / n. Dirichlet: n nodes
/// at i L / (n - 1) with the end nodes held at the boundary values.
struct Grid1D {
  double length = 1.0;
  std::size_t n = 0;
  Boundary boundary = Boundary::Periodic;

  double dx() const;
  double x(std::size_t i) const { return static_cast<double>(i) * dx(); }
  /// Rectangle rule on the torus, trapezoid rule with Dirichlet ends.
  double integrate(const std::vector<double>& f) const;
};

struct MacroFields {
  Grid1D grid;
  std::vector<double> rho0;
  std::vector<double> rho1;
  double rho_star = 0.0;
  double t = 0.0;

  /// integral of (rho0 + rho1) plus the absorbed mass.
  double total_mass() const;
};

struct MacroSolverOptions {
  double t_end = 1.0;
  double dt = 1e-3;  // shortened so that t_end is an integer number of steps
  TimeScheme scheme = TimeScheme::CrankNicolson;
  Advection advection = Advection::Upwind;
  double left_value = 1.0;   // Dirichlet inlet rho0(0)
  double right_value = 0.0;  // Dirichlet outlet rho0(L)
  std::size_t output_every = 0;  // 0: only initial and final states
};

/// Advances (rho0, rho1, rho_star). Throws CFLViolation (explicit scheme) and
/// GridTooCoarse (central advection with cell Peclet number above 2).
std::vector<MacroFields> solve_macro_system(const MacroCoefficients& coeffs,
                                            const MacroFields& initial,
                                            const MacroSolverOptions& options);

struct Rho0Snapshot {
  double t = 0.0;
  std::vector<double> rho0;
};

/// Same dynamics with rho1 eliminated: the exponential memory integral is
/// carried by u(t) = int_0^t exp(-lambda_m (t - s)) rho0(s) ds, advanced by the
/// exact recurrence for piecewise-linear rho0. `initial.rho1` is pi_1.
std::vector<Rho0Snapshot> solve_memory_form(const MacroCoefficients& coeffs,
                                            const MacroFields& initial,
                                            const MacroSolverOptions& options);

// ---------------------------------------------------------------------------
// Stationary regime

struct StationaryRate {
  double kappa = 0.0;
  double r_pur = 0.0;
  std::optional<double> r_approx;  // kappa / b, defined for b > 0
};

/// Decay rate of theta r'' - b r' - kappa r = 0, r(0) = 1, r(inf) = 0, with
/// kappa = lambda0 m / (lambda1 + m). Throws DegenerateProblem when
/// theta = b = 0 and kappa > 0.
StationaryRate stationary_rate(double theta, double b, double lambda0, double lambda1, double m);

struct StationaryProfile {
  std::vector<double> x;
  std::vector<double> rho0;
  std::optional<double> fitted_rate;  // absent when kappa = 0
};

/// Second-order finite differences with rho0(0) = 1, rho0(L) = 0; the decay
/// rate is fitted by least squares on log rho0 over x in (0, L/3]. Throws
/// DomainTooShort when kappa > 0 and L R_pur < 5, GridTooCoarse when the
/// cell Peclet number b dx / theta exceeds 2.
StationaryProfile solve_stationary_bvp(double theta, double b, double kappa, double length,
                                       double dx);

}  // namespace hcw
