#include "hcw/validation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "hcw/error.hpp"
#include "hcw/microsim.hpp"

namespace hcw {

ConvergenceReport convergence_study(const PeriodCell& cell, const ConvergenceOptions& options) {
  return convergence_study(cell, make_limit_params(compute_effective(cell)), options);
}

ConvergenceReport convergence_study(const PeriodCell& cell, const LimitProcessParams& params,
                                    const ConvergenceOptions& options) {
  if (options.epsilons.empty() || options.times.empty())
    raise(ErrorKind::InvalidArgument, "need at least one epsilon and one time");
  if (params.num_astral() != cell.num_astral() || params.dimension() != cell.dimension())
    raise(ErrorKind::InvalidArgument, "limit parameters do not match the cell");

  std::vector<double> eps = options.epsilons;
  std::sort(eps.begin(), eps.end(), std::greater<>());
  const Point start = options.start.value_or(cell.site_point(cell.bulk_sites().front()));
  const int start_label = cell.label(cell.site_index(std::span<const int>(start)));
  const auto n_states = static_cast<Eigen::Index>(cell.num_astral()) + 2;
  Eigen::VectorXd p0 = Eigen::VectorXd::Zero(n_states);
  p0(start_label == kAbsorbedLabel ? n_states - 1 : start_label) = 1.0;

  std::vector<Observable> mc_obs;
  for (const auto& o : options.observables)
    if (!o.label_only) mc_obs.push_back(o);

  ConvergenceReport report;
  for (double e : eps) {
    MicroRunOptions mo;
    mo.epsilon = e;
    mo.checkpoints = options.times;
    mo.n_paths = options.n_paths;
    mo.seed = options.seed;
    mo.start = start;
    mo.observables = options.observables;
    mo.threads = options.threads;
    const EnsembleStats micro = run_paths(cell, mo);

    std::vector<double> snapped;
    for (const auto& c : micro.checkpoints) snapped.push_back(c.time);

    EnsembleStats macro;
    if (!mc_obs.empty()) {
      LimitRunOptions lo;
      lo.checkpoints = snapped;
      lo.n_paths = options.n_paths;
      lo.seed = options.seed;
      lo.start_position.resize(cell.dimension());
      for (int i = 0; i < cell.dimension(); ++i) lo.start_position(i) = e * start[i];
      lo.start_label = start_label;
      lo.dt = options.macro_dt;
      lo.observables = mc_obs;
      lo.threads = options.threads;
      macro = simulate_limit_process(params, lo);
    }

    for (std::size_t c = 0; c < micro.checkpoints.size(); ++c) {
      const auto& mc = micro.checkpoints[c];
      const Eigen::VectorXd chain = evolve_label_chain(params.generator, p0, mc.time);

      LabelRow lr;
      lr.epsilon = e;
      lr.t = mc.time;
      lr.micro = mc.occupancy;
      lr.macro.assign(chain.data(), chain.data() + chain.size());
      for (std::size_t k = 0; k < lr.micro.size(); ++k) lr.tv += std::abs(lr.micro[k] - lr.macro[k]);
      lr.tv *= 0.5;
      report.labels.push_back(std::move(lr));

      std::size_t mc_index = 0;
      for (std::size_t k = 0; k < options.observables.size(); ++k) {
        const Observable& o = options.observables[k];
        ConvergenceRow row;
        row.epsilon = e;
        row.observable_id = o.id;
        row.t = mc.time;
        row.micro = mc.observable_mean[k];
        row.micro_stderr = mc.observable_stderr[k];
        row.sup_norm = o.sup_norm;
        row.label_only = o.label_only;
        if (o.label_only) {
          row.macro = chain.dot(o.label_values());
        } else {
          row.macro = macro.checkpoints[c].observable_mean[mc_index];
          row.macro_stderr = macro.checkpoints[c].observable_stderr[mc_index];
          ++mc_index;
        }
        row.error = std::abs(row.micro - row.macro);
        const double se = std::hypot(row.micro_stderr, row.macro_stderr);
        row.inconclusive = se > 0.5 * row.error;
        if (row.inconclusive && options.strict) {
          std::ostringstream os;
          os << "observable " << o.id << " at eps = " << e << ", t = " << mc.time
             << ": standard error " << se << " exceeds half the error " << row.error;
          raise(ErrorKind::InconclusiveStatistics, os.str());
        }
        report.rows.push_back(std::move(row));
      }
    }
  }

  auto max_error = [&](double e) {
    double m = 0.0;
    for (const auto& r : report.rows)
      if (r.epsilon == e && !r.label_only) m = std::max(m, r.error);
    return m;
  };
  report.summary.smallest_epsilon = eps.back();
  report.summary.max_error_at_smallest = max_error(eps.back());
  for (const auto& l : report.labels)
    if (l.epsilon == eps.back())
      report.summary.max_tv_at_smallest = std::max(report.summary.max_tv_at_smallest, l.tv);
  for (std::size_t i = 0; i + 1 < eps.size(); ++i) {
    const double coarse = max_error(eps[i]);
    report.summary.error_ratios.push_back(coarse > 0.0 ? max_error(eps[i + 1]) / coarse : 0.0);
  }
  return report;
}

LadderVerdict evaluate_ladder(const ConvergenceReport& report, const LadderCriteria& criteria) {
  LadderVerdict v;
  if (report.rows.empty() && report.labels.empty()) {
    v.passed = false;
    v.failures.push_back("empty report");
    return v;
  }
  double coarse = 0.0, fine = std::numeric_limits<double>::infinity();
  for (const auto& r : report.rows) {
    coarse = std::max(coarse, r.epsilon);
    fine = std::min(fine, r.epsilon);
  }
  for (const auto& l : report.labels) {
    coarse = std::max(coarse, l.epsilon);
    fine = std::min(fine, l.epsilon);
  }
  auto fail = [&](const std::string& s) {
    v.passed = false;
    v.failures.push_back(s);
  };
  for (const auto& r : report.rows) {
    if (r.label_only || r.epsilon != fine) continue;
    std::ostringstream tag;
    tag << r.observable_id << " at t = " << r.t;
    if (r.error >= criteria.error_fraction * r.sup_norm) {
      std::ostringstream os;
      os << tag.str() << ": error " << r.error << " >= " << criteria.error_fraction << " * sup|F|";
      fail(os.str());
    }
    if (coarse != fine) {
      for (const auto& c : report.rows) {
        if (c.epsilon != coarse || c.observable_id != r.observable_id) continue;
        if (std::abs(c.t - r.t) > 1e-9 * std::max(1.0, r.t)) continue;
        if (!(r.error < c.error)) {
          std::ostringstream os;
          os << tag.str() << ": error " << r.error << " at eps = " << fine
             << " is not below error " << c.error << " at eps = " << coarse;
          fail(os.str());
        }
      }
    }
  }
  for (const auto& l : report.labels) {
    if (l.epsilon != fine) continue;
    if (l.tv >= criteria.tv_threshold) {
      std::ostringstream os;
      os << "label TV " << l.tv << " at t = " << l.t << " >= " << criteria.tv_threshold;
      fail(os.str());
    }
  }
  return v;
}

AnsatzFunction ansatz_gaussian(const Gaussian& g, std::size_t num_astral, double astral_scale,
                               double absorbed_value) {
  AnsatzFunction f;
  f.f0 = [g](std::span<const double> z) { return g.value(z); };
  f.gradient = [g](std::span<const double> z) { return g.gradient(z); };
  f.hessian = [g](std::span<const double> z) { return g.hessian(z); };
  for (std::size_t j = 0; j < num_astral; ++j)
    f.astral.push_back(
        [g, astral_scale](std::span<const double> z) { return astral_scale * g.value(z); });
  f.absorbed_value = absorbed_value;
  f.window_center = g.center;
  f.window_radius = 6.0 * g.width;
  return f;
}

AnsatzFunction ansatz_constant(double value, std::size_t num_astral,
                               const Eigen::VectorXd& center, double radius) {
  const Eigen::Index d = center.size();
  AnsatzFunction f;
  f.f0 = [value](std::span<const double>) { return value; };
  f.gradient = [d](std::span<const double>) { return Eigen::VectorXd::Zero(d).eval(); };
  f.hessian = [d](std::span<const double>) { return Eigen::MatrixXd::Zero(d, d).eval(); };
  for (std::size_t j = 0; j < num_astral; ++j)
    f.astral.push_back([value](std::span<const double>) { return value; });
  f.absorbed_value = value;
  f.window_center = center;
  f.window_radius = radius;
  return f;
}

namespace {

// r with (P0 - I) r_c = b_c - b_c(y) on B; |B| x d.
Eigen::MatrixXd drift_corrector(const PeriodCell& cell, const Eigen::MatrixXd& h,
                                const Eigen::VectorXd& b) {
  const int d = cell.dimension();
  const auto nb = static_cast<Eigen::Index>(cell.num_bulk());
  Eigen::MatrixXd local = Eigen::MatrixXd::Zero(nb, d);
  for (Eigen::Index i = 0; i < nb; ++i) {
    for (const auto& e : cell.stencil(cell.bulk_sites()[static_cast<std::size_t>(i)])) {
      if (e.d == 0.0) continue;
      const auto t = static_cast<Eigen::Index>(cell.bulk_index(e.target));
      for (int c = 0; c < d; ++c) local(i, c) += e.d * (e.offset[static_cast<std::size_t>(c)] + h(t, c));
    }
  }
  const Eigen::MatrixXd op = bulk_operator(cell);
  Eigen::MatrixXd r(nb, d);
  for (int c = 0; c < d; ++c) {
    Eigen::VectorXd rhs = b(c) - local.col(c).array();
    rhs.array() -= rhs.mean();  // removes rounding in the cell average
    r.col(c) = solve_cell_problem(op, rhs).u;
  }
  return r;
}

}  // namespace

AnsatzReport ansatz_diagnostic(const PeriodCell& cell, double epsilon, const AnsatzFunction& f,
                               const AnsatzOptions& options) {
  const int d = cell.dimension();
  const std::size_t n_astral = cell.num_astral();
  if (f.astral.size() != n_astral)
    raise(ErrorKind::InvalidArgument, "test function needs one component per astral site");
  if (f.window_center.size() != d || !(f.window_radius > 0.0))
    raise(ErrorKind::InvalidArgument, "window must have the cell dimension and positive radius");

  const AssembledTransition q = assemble_transition(cell, epsilon);
  const EffectiveParameters eff = compute_effective(cell);
  const CorrectorSet cs = solve_correctors(cell);
  const Eigen::MatrixXd r = options.drift_corrector
                                ? drift_corrector(cell, cs.h.h, eff.b)
                                : Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(cell.num_bulk()), d);
  const double e2 = epsilon * epsilon;

  std::vector<double> z(d);
  auto to_macro = [&](const std::vector<std::int64_t>& x) {
    for (int i = 0; i < d; ++i) z[i] = epsilon * static_cast<double>(x[i]);
  };
  auto f_k = [&](int k) -> double {
    return k == 0 ? f.f0(z) : f.astral[static_cast<std::size_t>(k - 1)](z);
  };
  // F_eps at lattice point x (z must already hold epsilon * x).
  auto f_eps = [&](std::size_t site) -> double {
    const int k = cell.label(site);
    if (k != 0) return f_k(k);
    const auto bi = static_cast<Eigen::Index>(cell.bulk_index(site));
    const Eigen::VectorXd grad = f.gradient(z);
    const Eigen::MatrixXd hess = f.hessian(z);
    const double v0 = f.f0(z);
    double val = v0 + epsilon * grad.dot(cs.h.h.row(bi).transpose()) +
                 e2 * (hess.cwiseProduct(cs.g.g[static_cast<std::size_t>(bi)])).sum() +
                 e2 * grad.dot(r.row(bi).transpose());
    for (std::size_t j = 0; j < n_astral; ++j)
      val += e2 * cs.q[j].q(bi) * (v0 - f.astral[j](z));
    return val;
  };

  std::vector<std::int64_t> lo(d), hi(d), x(d), y(d);
  for (int i = 0; i < d; ++i) {
    lo[i] = static_cast<std::int64_t>(std::floor((f.window_center(i) - f.window_radius) / epsilon));
    hi[i] = static_cast<std::int64_t>(std::ceil((f.window_center(i) + f.window_radius) / epsilon));
  }
  x = lo;

  AnsatzReport rep;
  rep.epsilon = epsilon;
  for (;;) {
    to_macro(x);
    double dist2 = 0.0;
    for (int i = 0; i < d; ++i) dist2 += (z[i] - f.window_center(i)) * (z[i] - f.window_center(i));
    if (dist2 <= f.window_radius * f.window_radius) {
      const std::size_t site = cell.site_index(std::span<const std::int64_t>(x));
      const int k = cell.label(site);
      const double here = f_eps(site);
      const double pi_f = f_k(k);

      // Reference (pi_eps L F)(z, k).
      double lf = 0.0;
      if (k == 0) {
        lf = (eff.theta.cwiseProduct(f.hessian(z))).sum() + eff.b.dot(f.gradient(z));
        for (std::size_t j = 1; j <= n_astral; ++j)
          lf += eff.alpha(0, static_cast<Eigen::Index>(j)) * (f_k(static_cast<int>(j)) - pi_f);
      } else {
        for (std::size_t j = 0; j <= n_astral; ++j)
          if (static_cast<int>(j) != k)
            lf += eff.alpha(k, static_cast<Eigen::Index>(j)) * (f_k(static_cast<int>(j)) - pi_f);
        lf += eff.m * (f.absorbed_value - pi_f);
      }

      double acc = q.absorption(site) * (f.absorbed_value - here);
      for (const auto& e : q.row(site)) {
        for (int i = 0; i < d; ++i) y[i] = x[i] + e.offset[static_cast<std::size_t>(i)];
        to_macro(y);
        acc += e.prob * (f_eps(e.target) - here);
      }
      to_macro(x);
      const double res = std::abs(acc / e2 - lf);
      if (k == 0)
        rep.sup_bulk = std::max(rep.sup_bulk, res);
      else
        rep.sup_astral = std::max(rep.sup_astral, res);
      rep.approximation = std::max(rep.approximation, std::abs(here - pi_f));
      ++rep.n_sites;
    }
    int i = d - 1;
    while (i >= 0 && x[i] == hi[i]) {
      x[i] = lo[i];
      --i;
    }
    if (i < 0) break;
    ++x[i];
  }
  return rep;
}

}  // namespace hcw
