#include "hcw/macromodel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/Sparse>
#include <unsupported/Eigen/MatrixFunctions>

#include "hcw/error.hpp"
#include "hcw/rng.hpp"

namespace hcw {

Eigen::VectorXd evolve_label_chain(const Eigen::MatrixXd& generator, const Eigen::VectorXd& p0,
                                   double t) {
  if (generator.rows() != generator.cols() || generator.rows() != p0.size())
    raise(ErrorKind::InvalidArgument, "generator and initial distribution sizes differ");
  if (!(t >= 0.0)) raise(ErrorKind::InvalidArgument, "t must be >= 0");
  if (t == 0.0) return p0;
  const Eigen::MatrixXd e = (t * generator).exp();
  Eigen::VectorXd p = e.transpose() * p0;
  for (Eigen::Index i = 0; i < p.size(); ++i) p(i) = std::max(p(i), 0.0);
  return p;
}

LimitProcessParams make_limit_params(const Eigen::MatrixXd& theta, const Eigen::VectorXd& b,
                                     const Eigen::MatrixXd& alpha, double m) {
  const Eigen::Index d = b.size();
  if (d < 1 || theta.rows() != d || theta.cols() != d)
    raise(ErrorKind::InvalidArgument, "theta must be d x d with d = size of b");
  LimitProcessParams p;
  p.theta = 0.5 * (theta + theta.transpose());
  p.b = b;
  p.alpha = alpha;
  p.m = m;
  p.generator = assemble_generator(alpha, m);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(2.0 * p.theta);
  if (es.info() != Eigen::Success || !(es.eigenvalues().minCoeff() > 0.0))
    raise(ErrorKind::NotPositiveDefinite, "theta is not positive definite");
  p.theta_sqrt = es.eigenvectors() * es.eigenvalues().cwiseSqrt().asDiagonal() *
                 es.eigenvectors().transpose();
  return p;
}

LimitProcessParams make_limit_params(const EffectiveParameters& effective) {
  return make_limit_params(effective.theta, effective.b, effective.alpha, effective.m);
}

double max_limit_dt(const LimitProcessParams& params, const std::vector<double>& checkpoints) {
  double dt = std::numeric_limits<double>::infinity();
  const double rate = params.generator.diagonal().cwiseAbs().maxCoeff();
  if (rate > 0.0) dt = 0.1 / rate;
  std::vector<double> times = checkpoints;
  times.push_back(0.0);
  std::sort(times.begin(), times.end());
  double gap = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < times.size(); ++i)
    if (times[i] > times[i - 1]) gap = std::min(gap, times[i] - times[i - 1]);
  dt = std::min(dt, 0.01 * gap);
  if (!std::isfinite(dt)) dt = 0.01;
  return dt;
}

EnsembleStats simulate_limit_process(const LimitProcessParams& params,
                                     const LimitRunOptions& options) {
  const int d = params.dimension();
  const std::size_t n_labels = params.num_astral() + 1;
  const auto star = static_cast<Eigen::Index>(n_labels);
  if (options.n_paths < 1) raise(ErrorKind::InvalidArgument, "n_paths must be >= 1");
  if (options.start_label != kAbsorbedLabel &&
      (options.start_label < 0 || options.start_label >= static_cast<int>(n_labels)))
    raise(ErrorKind::InvalidArgument, "start label out of range");
  if (options.start_position.size() != 0 && options.start_position.size() != d)
    raise(ErrorKind::InvalidArgument, "start position has wrong dimension");
  for (const auto& o : options.observables)
    if (o.components.size() != n_labels)
      raise(ErrorKind::InvalidArgument, "observable " + o.id + " has the wrong number of components");
  for (double t : options.checkpoints)
    if (!(t >= 0.0)) raise(ErrorKind::InvalidArgument, "checkpoint times must be >= 0");

  const double dt_max = max_limit_dt(params, options.checkpoints);
  const double dt = options.dt > 0.0 ? options.dt : dt_max;
  if (dt > dt_max * (1.0 + 1e-12)) {
    std::ostringstream os;
    os << "dt = " << dt << " exceeds dt_max = " << dt_max;
    raise(ErrorKind::StepTooCoarse, os.str());
  }

  std::vector<double> times = options.checkpoints;
  std::sort(times.begin(), times.end());
  const Eigen::VectorXd x_start =
      options.start_position.size() == 0 ? Eigen::VectorXd::Zero(d) : options.start_position;
  const std::size_t n_obs = options.observables.size();
  const Eigen::MatrixXd& g = params.generator;

  auto make = [&] {
    return std::vector<CheckpointAccumulator>(times.size(),
                                              CheckpointAccumulator(d, params.num_astral(), n_obs));
  };
  auto path = [&](std::size_t index, std::vector<CheckpointAccumulator>& acc) {
    Rng rng = make_stream(options.seed, index);
    std::normal_distribution<double> normal;
    Eigen::VectorXd x = x_start;
    Eigen::VectorXd noise(d);
    int label = options.start_label;
    double t = 0.0;
    std::vector<double> disp(d), z(d), values(n_obs);

    auto diffuse = [&](double span) {
      if (span <= 0.0) return;
      const auto n = static_cast<long>(std::ceil(span / dt - 1e-9));
      const double h = span / static_cast<double>(n);
      const double sh = std::sqrt(h);
      for (long s = 0; s < n; ++s) {
        for (int i = 0; i < d; ++i) noise(i) = normal(rng);
        x += params.b * h + params.theta_sqrt * noise * sh;
      }
    };
    auto record = [&](std::size_t c) {
      for (int i = 0; i < d; ++i) {
        z[i] = x(i);
        disp[i] = x(i) - x_start(i);
      }
      for (std::size_t k = 0; k < n_obs; ++k) values[k] = options.observables[k](z, label);
      acc[c].add(label, disp, values);
    };

    std::size_t c = 0;
    while (c < times.size()) {
      double jump = std::numeric_limits<double>::infinity();
      Eigen::Index row = 0;
      if (label != kAbsorbedLabel) {
        row = label;
        const double rate = -g(row, row);
        if (rate > 0.0) jump = t + exponential(rng, rate);
      }
      while (c < times.size() && times[c] <= jump) {
        if (label == 0) diffuse(times[c] - t);
        t = times[c];
        record(c++);
      }
      if (c == times.size()) break;
      if (label == 0) diffuse(jump - t);
      t = jump;
      // Next label drawn from the off-diagonal row of G.
      const double rate = -g(row, row);
      double u = uniform01(rng) * rate;
      Eigen::Index next = -1;
      for (Eigen::Index j = 0; j <= star; ++j) {
        if (j == row || g(row, j) <= 0.0) continue;
        next = j;
        u -= g(row, j);
        if (u < 0.0) break;
      }
      label = next == star ? kAbsorbedLabel : static_cast<int>(next);
    }
  };
  auto total = run_chunked(options.n_paths, options.threads, make, path);

  EnsembleStats out;
  out.dimension = d;
  out.num_astral = params.num_astral();
  for (const auto& o : options.observables) out.observable_ids.push_back(o.id);
  for (std::size_t c = 0; c < times.size(); ++c) out.checkpoints.push_back(total[c].finish(times[c]));
  return out;
}

MacroCoefficients reduce_to_drift_axis(const EffectiveParameters& effective) {
  if (effective.num_astral() != 1)
    raise(ErrorKind::InvalidArgument, "the field system is defined for exactly one astral site");
  const Eigen::Index d = effective.b.size();
  Eigen::VectorXd n = Eigen::VectorXd::Zero(d);
  const double speed = effective.b.norm();
  if (speed > 1e-14)
    n = effective.b / speed;
  else
    n(d - 1) = 1.0;
  MacroCoefficients c;
  c.theta = n.dot(effective.theta * n);
  c.b = speed > 1e-14 ? speed : 0.0;
  c.lambda0 = effective.alpha(0, 1);
  c.lambda1 = effective.alpha(1, 0);
  c.m = effective.m;
  return c;
}

double Grid1D::dx() const {
  if (n < 2) raise(ErrorKind::InvalidArgument, "grid needs at least two nodes");
  return boundary == Boundary::Periodic ? length / static_cast<double>(n)
                                        : length / static_cast<double>(n - 1);
}

double Grid1D::integrate(const std::vector<double>& f) const {
  if (f.size() != n) raise(ErrorKind::InvalidArgument, "grid function has the wrong size");
  double s = 0.0;
  for (double v : f) s += v;
  if (boundary == Boundary::Dirichlet) s -= 0.5 * (f.front() + f.back());
  return s * dx();
}

double MacroFields::total_mass() const {
  return grid.integrate(rho0) + grid.integrate(rho1) + rho_star;
}

namespace {

using Sparse = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

void check_coefficients(const MacroCoefficients& c) {
  if (!(c.theta >= 0.0) || !(c.lambda0 >= 0.0) || !(c.lambda1 >= 0.0) || !(c.m >= 0.0) ||
      !std::isfinite(c.b))
    raise(ErrorKind::InvalidArgument, "theta, lambda0, lambda1 and m must be >= 0");
}

void check_fields(const MacroFields& f, bool need_rho1) {
  if (f.grid.n < 3) raise(ErrorKind::InvalidArgument, "grid needs at least three nodes");
  if (!(f.grid.length > 0.0)) raise(ErrorKind::InvalidArgument, "grid length must be positive");
  if (f.rho0.size() != f.grid.n || (need_rho1 && f.rho1.size() != f.grid.n))
    raise(ErrorKind::InvalidArgument, "field sizes do not match the grid");
}

// theta d_xx - b d_x as a sparse matrix; Dirichlet end rows are left empty.
Sparse transport_operator(const MacroCoefficients& c, const Grid1D& grid, Advection adv) {
  const double dx = grid.dx();
  if (adv == Advection::Central && c.b != 0.0) {
    const double peclet = std::abs(c.b) * dx / c.theta;
    if (!(peclet <= 2.0)) {
      std::ostringstream os;
      os << "cell Peclet number " << peclet << " exceeds 2 with central advection";
      raise(ErrorKind::GridTooCoarse, os.str());
    }
  }
  const auto n = static_cast<long>(grid.n);
  const bool periodic = grid.boundary == Boundary::Periodic;
  const double diff = c.theta / (dx * dx);
  double lo = diff, mid = -2.0 * diff, hi = diff;
  if (adv == Advection::Central) {
    lo += c.b / (2.0 * dx);
    hi -= c.b / (2.0 * dx);
  } else if (c.b > 0.0) {
    lo += c.b / dx;
    mid -= c.b / dx;
  } else {
    mid += c.b / dx;
    hi -= c.b / dx;
  }
  std::vector<Triplet> t;
  for (long i = 0; i < n; ++i) {
    if (!periodic && (i == 0 || i == n - 1)) continue;
    t.emplace_back(i, (i - 1 + n) % n, lo);
    t.emplace_back(i, i, mid);
    t.emplace_back(i, (i + 1) % n, hi);
  }
  Sparse a(n, n);
  a.setFromTriplets(t.begin(), t.end());
  return a;
}

std::size_t step_count(double t_end, double dt) {
  if (!(t_end >= 0.0) || !(dt > 0.0))
    raise(ErrorKind::InvalidArgument, "t_end must be >= 0 and dt > 0");
  return static_cast<std::size_t>(std::ceil(t_end / dt - 1e-9));
}

void check_cfl(const MacroCoefficients& c, const Grid1D& grid, double dt) {
  const double dx = grid.dx();
  const double r0 = 2.0 * c.theta / (dx * dx) + std::abs(c.b) / dx + c.lambda0;
  const double r1 = c.lambda1 + c.m;
  if (dt * std::max(r0, r1) > 1.0) {
    std::ostringstream os;
    os << "explicit step dt = " << dt << " exceeds the stability bound "
       << 1.0 / std::max(r0, r1);
    raise(ErrorKind::CFLViolation, os.str());
  }
}

// Solver for (I - s A) x = y with Dirichlet rows pinned.
class ImplicitSystem {
 public:
  ImplicitSystem(const Sparse& a, double s, double shift, bool dirichlet) {
    const auto n = a.rows();
    Sparse id(n, n);
    id.setIdentity();
    Sparse m = id * (1.0 + shift) - s * a;
    if (dirichlet) {
      m.coeffRef(0, 0) = 1.0;
      m.coeffRef(n - 1, n - 1) = 1.0;
    }
    m.makeCompressed();
    lu_.compute(m);
    if (lu_.info() != Eigen::Success) raise(ErrorKind::SingularSystem, "implicit step is singular");
  }
  Eigen::VectorXd solve(const Eigen::VectorXd& y) const { return lu_.solve(y); }

 private:
  Eigen::SparseLU<Sparse> lu_;
};

Eigen::VectorXd to_eigen(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

// Weights of int_0^h exp(-mu (h - s)) r(s) ds for r linear from r0 to r1.
std::pair<double, double> kernel_weights(double mu, double h) {
  const double z = mu * h;
  if (z < 1e-3) {
    const double w0 = 0.5 - z / 3.0 + z * z / 8.0 - z * z * z / 30.0;
    const double w1 = 0.5 - z / 6.0 + z * z / 24.0 - z * z * z / 120.0;
    return {w0 * h, w1 * h};
  }
  const double e = std::exp(-z);
  const double w0 = (1.0 - e * (1.0 + z)) / (z * z);
  const double w1 = -std::expm1(-z) / z - w0;
  return {w0 * h, w1 * h};
}

}  // namespace

std::vector<MacroFields> solve_macro_system(const MacroCoefficients& coeffs,
                                            const MacroFields& initial,
                                            const MacroSolverOptions& options) {
  check_coefficients(coeffs);
  check_fields(initial, true);
  const Grid1D& grid = initial.grid;
  const bool dirichlet = grid.boundary == Boundary::Dirichlet;
  const std::size_t steps = step_count(options.t_end, options.dt);
  const double dt = steps == 0 ? 0.0 : options.t_end / static_cast<double>(steps);
  const Sparse a = transport_operator(coeffs, grid, options.advection);
  const double l0 = coeffs.lambda0, l1 = coeffs.lambda1, lm = coeffs.lambda1 + coeffs.m;
  const auto n = static_cast<Eigen::Index>(grid.n);

  MacroFields cur = initial;
  if (dirichlet) {
    cur.rho0.front() = options.left_value;
    cur.rho0.back() = options.right_value;
  }
  std::vector<MacroFields> out{cur};
  if (steps == 0) return out;

  Eigen::VectorXd r0 = to_eigen(cur.rho0), r1 = to_eigen(cur.rho1);
  double star = cur.rho_star;

  if (options.scheme == TimeScheme::ExplicitEuler) {
    check_cfl(coeffs, grid, dt);
    for (std::size_t s = 1; s <= steps; ++s) {
      Eigen::VectorXd n0 = r0 + dt * (a * r0 - l0 * r0 + l1 * r1);
      Eigen::VectorXd n1 = r1 + dt * (l0 * r0 - lm * r1);
      if (dirichlet) {
        n0(0) = options.left_value;
        n0(n - 1) = options.right_value;
      }
      star += dt * coeffs.m * grid.integrate(to_std(r1));
      r0 = std::move(n0);
      r1 = std::move(n1);
      const bool emit = s == steps || (options.output_every > 0 && s % options.output_every == 0);
      if (emit) out.push_back({grid, to_std(r0), to_std(r1), star, dt * static_cast<double>(s)});
    }
    return out;
  }

  // Crank-Nicolson with rho1 eliminated pointwise:
  //   rho1' = ra rho1 + rc (rho0 + rho0')
  const double h = 0.5 * dt;
  const double ra = (1.0 - h * lm) / (1.0 + h * lm);
  const double rc = h * l0 / (1.0 + h * lm);
  const double shift = h * l0 - h * l1 * rc;
  const ImplicitSystem sys(a, h, shift, dirichlet);
  double int1 = grid.integrate(to_std(r1));
  for (std::size_t s = 1; s <= steps; ++s) {
    Eigen::VectorXd rhs = r0 + h * (a * r0) - (h * l0 - h * l1 * rc) * r0 + h * l1 * (1.0 + ra) * r1;
    if (dirichlet) {
      rhs(0) = options.left_value;
      rhs(n - 1) = options.right_value;
    }
    Eigen::VectorXd n0 = sys.solve(rhs);
    Eigen::VectorXd n1 = ra * r1 + rc * (r0 + n0);
    const double next_int1 = grid.integrate(to_std(n1));
    star += h * coeffs.m * (int1 + next_int1);
    int1 = next_int1;
    r0 = std::move(n0);
    r1 = std::move(n1);
    const bool emit = s == steps || (options.output_every > 0 && s % options.output_every == 0);
    if (emit) out.push_back({grid, to_std(r0), to_std(r1), star, dt * static_cast<double>(s)});
  }
  return out;
}

std::vector<Rho0Snapshot> solve_memory_form(const MacroCoefficients& coeffs,
                                            const MacroFields& initial,
                                            const MacroSolverOptions& options) {
  check_coefficients(coeffs);
  check_fields(initial, false);
  const Grid1D& grid = initial.grid;
  const bool dirichlet = grid.boundary == Boundary::Dirichlet;
  const std::size_t steps = step_count(options.t_end, options.dt);
  const double dt = steps == 0 ? 0.0 : options.t_end / static_cast<double>(steps);
  const Sparse a = transport_operator(coeffs, grid, options.advection);
  const double l0 = coeffs.lambda0, l1 = coeffs.lambda1, lm = coeffs.lambda1 + coeffs.m;
  const auto n = static_cast<Eigen::Index>(grid.n);

  Eigen::VectorXd r0 = to_eigen(initial.rho0);
  const Eigen::VectorXd pi1 =
      initial.rho1.empty() ? Eigen::VectorXd::Zero(n) : to_eigen(initial.rho1);
  if (pi1.size() != n) raise(ErrorKind::InvalidArgument, "pi_1 has the wrong size");
  if (dirichlet) {
    r0(0) = options.left_value;
    r0(n - 1) = options.right_value;
  }
  std::vector<Rho0Snapshot> out{{0.0, to_std(r0)}};
  if (steps == 0) return out;

  Eigen::VectorXd u = Eigen::VectorXd::Zero(n);
  const double decay = std::exp(-lm * dt);
  const auto [w0, w1] = kernel_weights(lm, dt);
  const double k = l0 * l1;  // memory coefficient

  if (options.scheme == TimeScheme::ExplicitEuler) {
    check_cfl(coeffs, grid, dt);
    for (std::size_t s = 1; s <= steps; ++s) {
      const double t = dt * static_cast<double>(s - 1);
      Eigen::VectorXd n0 =
          r0 + dt * (a * r0 - l0 * r0 + k * u + l1 * std::exp(-lm * t) * pi1);
      if (dirichlet) {
        n0(0) = options.left_value;
        n0(n - 1) = options.right_value;
      }
      u = decay * u + w0 * r0 + w1 * n0;
      r0 = std::move(n0);
      const bool emit = s == steps || (options.output_every > 0 && s % options.output_every == 0);
      if (emit) out.push_back({dt * static_cast<double>(s), to_std(r0)});
    }
    return out;
  }

  const double h = 0.5 * dt;
  const ImplicitSystem sys(a, h, h * l0 - h * k * w1, dirichlet);
  for (std::size_t s = 1; s <= steps; ++s) {
    const double t0 = dt * static_cast<double>(s - 1);
    const double src = h * l1 * (std::exp(-lm * t0) + std::exp(-lm * (t0 + dt)));
    Eigen::VectorXd rhs = r0 + h * (a * r0) - h * l0 * r0 + h * k * w0 * r0 +
                          h * k * (1.0 + decay) * u + src * pi1;
    if (dirichlet) {
      rhs(0) = options.left_value;
      rhs(n - 1) = options.right_value;
    }
    Eigen::VectorXd n0 = sys.solve(rhs);
    u = decay * u + w0 * r0 + w1 * n0;
    r0 = std::move(n0);
    const bool emit = s == steps || (options.output_every > 0 && s % options.output_every == 0);
    if (emit) out.push_back({dt * static_cast<double>(s), to_std(r0)});
  }
  return out;
}

StationaryRate stationary_rate(double theta, double b, double lambda0, double lambda1, double m) {
  if (!(theta >= 0.0) || !(b >= 0.0) || !(lambda0 >= 0.0) || !(lambda1 >= 0.0) || !(m >= 0.0))
    raise(ErrorKind::InvalidArgument, "theta, b and all rates must be >= 0");
  StationaryRate r;
  r.kappa = (m == 0.0 || lambda0 == 0.0) ? 0.0 : lambda0 * m / (lambda1 + m);
  if (b > 0.0) r.r_approx = r.kappa / b;
  if (r.kappa == 0.0) return r;
  if (theta == 0.0 && b == 0.0)
    raise(ErrorKind::DegenerateProblem, "theta = b = 0 with kappa > 0 has no decaying solution");
  // Rationalised root, free of cancellation when theta kappa << b^2.
  r.r_pur = 2.0 * r.kappa / (std::sqrt(b * b + 4.0 * theta * r.kappa) + b);
  return r;
}

StationaryProfile solve_stationary_bvp(double theta, double b, double kappa, double length,
                                       double dx) {
  if (!(theta > 0.0)) raise(ErrorKind::InvalidArgument, "theta must be positive");
  if (!(b >= 0.0) || !(kappa >= 0.0)) raise(ErrorKind::InvalidArgument, "b and kappa must be >= 0");
  if (!(length > 0.0) || !(dx > 0.0) || dx * 4.0 > length)
    raise(ErrorKind::InvalidArgument, "need length > 0 and at least four intervals");
  if (kappa > 0.0) {
    const double rate = 2.0 * kappa / (std::sqrt(b * b + 4.0 * theta * kappa) + b);
    if (length * rate < 5.0) {
      std::ostringstream os;
      os << "L R_pur = " << length * rate << " < 5";
      raise(ErrorKind::DomainTooShort, os.str());
    }
  }
  if (b * dx / theta > 2.0) {
    std::ostringstream os;
    os << "cell Peclet number " << b * dx / theta << " exceeds 2";
    raise(ErrorKind::GridTooCoarse, os.str());
  }

  const auto intervals = static_cast<std::size_t>(std::llround(length / dx));
  const double h = length / static_cast<double>(intervals);
  const std::size_t n = intervals + 1;
  StationaryProfile out;
  out.x.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.x[i] = h * static_cast<double>(i);

  // Tridiagonal (Thomas) solve over interior nodes 1..n-2.
  const double lo = theta / (h * h) + b / (2.0 * h);
  const double mid = -2.0 * theta / (h * h) - kappa;
  const double hi = theta / (h * h) - b / (2.0 * h);
  const std::size_t m = n - 2;
  std::vector<double> cp(m), dp(m);
  for (std::size_t k = 0; k < m; ++k) {
    const double rhs = k == 0 ? -lo * 1.0 : 0.0;  // rho0(0) = 1, rho0(L) = 0
    const double denom = k == 0 ? mid : mid - lo * cp[k - 1];
    cp[k] = hi / denom;
    dp[k] = (k == 0 ? rhs : rhs - lo * dp[k - 1]) / denom;
  }
  out.rho0.assign(n, 0.0);
  out.rho0.front() = 1.0;
  for (std::size_t k = m; k-- > 0;)
    out.rho0[k + 1] = dp[k] - (k + 1 < m ? cp[k] * out.rho0[k + 2] : 0.0);

  if (kappa > 0.0) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    std::size_t cnt = 0;
    for (std::size_t i = 1; i < n && out.x[i] <= length / 3.0; ++i) {
      if (!(out.rho0[i] > 0.0)) break;
      const double y = std::log(out.rho0[i]);
      sx += out.x[i];
      sy += y;
      sxx += out.x[i] * out.x[i];
      sxy += out.x[i] * y;
      ++cnt;
    }
    if (cnt >= 2) {
      const double c = static_cast<double>(cnt);
      out.fitted_rate = -(c * sxy - sx * sy) / (c * sxx - sx * sx);
    }
  }
  return out;
}

}  // namespace hcw
