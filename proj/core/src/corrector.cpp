#include "hcw/corrector.hpp"

#include <cmath>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include "hcw/error.hpp"

namespace hcw {

Eigen::MatrixXd bulk_operator(const PeriodCell& cell) {
  const auto n = static_cast<Eigen::Index>(cell.num_bulk());
  Eigen::MatrixXd a = -Eigen::MatrixXd::Identity(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const std::size_t site = cell.bulk_sites()[static_cast<std::size_t>(i)];
    for (const auto& e : cell.stencil(site)) {
      if (e.p0 == 0.0) continue;
      a(i, static_cast<Eigen::Index>(cell.bulk_index(e.target))) += e.p0;
    }
  }
  return a;
}

CellSolution solve_cell_problem(const Eigen::MatrixXd& op, const Eigen::VectorXd& rhs) {
  const Eigen::Index n = op.rows();
  if (op.cols() != n || rhs.size() != n)
    raise(ErrorKind::InvalidArgument, "cell problem dimensions do not match");

  CellSolution out;
  out.fredholm_residual = std::abs(rhs.sum()) / static_cast<double>(n);
  if (out.fredholm_residual > kFredholmTolerance) {
    std::ostringstream os;
    os << "right-hand side is not orthogonal to 1_B (mean " << out.fredholm_residual << ")";
    raise(ErrorKind::SolvabilityViolated, os.str());
  }

  Eigen::MatrixXd bordered = Eigen::MatrixXd::Zero(n + 1, n + 1);
  bordered.topLeftCorner(n, n) = op;
  bordered.col(n).head(n).setOnes();
  bordered.row(n).head(n).setOnes();
  Eigen::VectorXd b = Eigen::VectorXd::Zero(n + 1);
  b.head(n) = rhs;

  Eigen::FullPivLU<Eigen::MatrixXd> lu(bordered);
  if (!lu.isInvertible())
    raise(ErrorKind::SingularSystem,
          "(P0 - I) on B has a kernel larger than the constants (rank " +
              std::to_string(lu.rank()) + " of bordered size " + std::to_string(n + 1) + ")");
  const Eigen::VectorXd sol = lu.solve(b);
  out.u = sol.head(n);
  out.residual = (op * out.u - rhs).lpNorm<Eigen::Infinity>();
  if (!(out.residual <= kCorrectorResidualTolerance)) {
    std::ostringstream os;
    os << "cell problem residual " << out.residual << " exceeds " << kCorrectorResidualTolerance;
    raise(ErrorKind::SingularSystem, os.str());
  }
  return out;
}

Eigen::VectorXd linear_rhs(const PeriodCell& cell, int coordinate) {
  const auto n = static_cast<Eigen::Index>(cell.num_bulk());
  Eigen::VectorXd f = Eigen::VectorXd::Zero(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (const auto& e : cell.stencil(cell.bulk_sites()[static_cast<std::size_t>(i)]))
      f(i) -= e.p0 * e.offset[static_cast<std::size_t>(coordinate)];
  }
  return f;
}

HCorrector solve_corrector_h(const PeriodCell& cell) {
  const Eigen::MatrixXd op = bulk_operator(cell);
  HCorrector out;
  out.h.resize(op.rows(), cell.dimension());
  for (int c = 0; c < cell.dimension(); ++c) {
    const CellSolution s = solve_cell_problem(op, linear_rhs(cell, c));
    out.h.col(c) = s.u;
    out.residual = std::max(out.residual, s.residual);
    out.fredholm_residual = std::max(out.fredholm_residual, s.fredholm_residual);
  }
  return out;
}

Eigen::MatrixXd flux_matrix(const PeriodCell& cell, const Eigen::MatrixXd& h,
                            std::size_t bulk_index) {
  const int d = cell.dimension();
  Eigen::MatrixXd phi = Eigen::MatrixXd::Zero(d, d);
  Eigen::VectorXd xi(d);
  for (const auto& e : cell.stencil(cell.bulk_sites()[bulk_index])) {
    if (e.p0 == 0.0) continue;
    for (int k = 0; k < d; ++k) xi(k) = e.offset[static_cast<std::size_t>(k)];
    const Eigen::VectorXd a =
        0.5 * xi + h.row(static_cast<Eigen::Index>(cell.bulk_index(e.target))).transpose();
    phi += e.p0 * xi * a.transpose();
  }
  return phi;
}

Eigen::MatrixXd compute_theta(const PeriodCell& cell, const Eigen::MatrixXd& h) {
  const int d = cell.dimension();
  Eigen::MatrixXd theta = Eigen::MatrixXd::Zero(d, d);
  for (std::size_t i = 0; i < cell.num_bulk(); ++i) theta += flux_matrix(cell, h, i);
  theta /= static_cast<double>(cell.num_bulk());
  return 0.5 * (theta + theta.transpose());
}

Eigen::VectorXd compute_drift(const PeriodCell& cell, const Eigen::MatrixXd& h) {
  const int d = cell.dimension();
  Eigen::VectorXd b = Eigen::VectorXd::Zero(d);
  Eigen::VectorXd xi(d);
  for (std::size_t site : cell.bulk_sites()) {
    for (const auto& e : cell.stencil(site)) {
      if (e.d == 0.0) continue;
      for (int k = 0; k < d; ++k) xi(k) = e.offset[static_cast<std::size_t>(k)];
      b += e.d * (xi + h.row(static_cast<Eigen::Index>(cell.bulk_index(e.target))).transpose());
    }
  }
  return b / static_cast<double>(cell.num_bulk());
}

namespace {

// sum over y in {x_j}# of v(x, y), for every bulk x.
Eigen::VectorXd exchange_into(const PeriodCell& cell, std::size_t j) {
  const std::size_t target = cell.astral_site(j);
  Eigen::VectorXd f = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(cell.num_bulk()));
  for (std::size_t i = 0; i < cell.num_bulk(); ++i)
    for (const auto& e : cell.stencil(cell.bulk_sites()[i]))
      if (e.target == target) f(static_cast<Eigen::Index>(i)) += e.v;
  return f;
}

}  // namespace

QCorrector solve_corrector_q(const PeriodCell& cell, std::size_t j) {
  if (j < 1 || j > cell.num_astral())
    raise(ErrorKind::InvalidArgument, "astral index out of range");
  Eigen::VectorXd f = exchange_into(cell, j);
  QCorrector out;
  out.alpha_0j = f.mean();
  f.array() -= out.alpha_0j;
  const CellSolution s = solve_cell_problem(bulk_operator(cell), f);
  out.q = s.u;
  out.residual = s.residual;
  out.fredholm_residual = s.fredholm_residual;
  return out;
}

Eigen::MatrixXd compute_alpha_table(const PeriodCell& cell) {
  const auto m = static_cast<Eigen::Index>(cell.num_astral());
  Eigen::MatrixXd alpha = Eigen::MatrixXd::Zero(m + 1, m + 1);
  for (Eigen::Index j = 1; j <= m; ++j)
    alpha(0, j) = solve_corrector_q(cell, static_cast<std::size_t>(j)).alpha_0j;
  for (Eigen::Index k = 1; k <= m; ++k) {
    const std::size_t from = cell.astral_site(static_cast<std::size_t>(k));
    for (const auto& e : cell.stencil(from)) {
      const int lbl = cell.label(e.target);
      if (lbl == 0)
        alpha(k, 0) += e.v;
      else if (lbl != k)
        alpha(k, lbl) += e.v;
    }
  }
  for (Eigen::Index k = 0; k <= m; ++k)
    for (Eigen::Index j = 0; j <= m; ++j)
      if (k != j && alpha(k, j) < 0.0) {
        std::ostringstream os;
        os << "alpha(" << k << "," << j << ") = " << alpha(k, j) << " is negative";
        raise(ErrorKind::NegativeRate, os.str());
      }
  return alpha;
}

Eigen::MatrixXd assemble_generator(const Eigen::MatrixXd& alpha, double m) {
  const Eigen::Index n = alpha.rows();
  if (alpha.cols() != n || n < 1) raise(ErrorKind::InvalidArgument, "alpha must be square");
  if (!(m >= 0.0)) raise(ErrorKind::InvalidArgument, "m must be >= 0");
  const Eigen::Index star = n;
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(n + 1, n + 1);
  for (Eigen::Index k = 0; k < n; ++k) {
    double out = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j == k) continue;
      g(k, j) = alpha(k, j);
      out += alpha(k, j);
    }
    if (k > 0) {
      g(k, star) = m;
      out += m;
    }
    g(k, k) = -out;
  }
  return g;
}

GCorrector solve_corrector_g(const PeriodCell& cell, const Eigen::MatrixXd& h,
                             const Eigen::MatrixXd& theta) {
  const int d = cell.dimension();
  const std::size_t nb = cell.num_bulk();
  const Eigen::MatrixXd op = bulk_operator(cell);
  std::vector<Eigen::MatrixXd> phi(nb);
  for (std::size_t i = 0; i < nb; ++i) phi[i] = flux_matrix(cell, h, i);

  GCorrector out;
  out.g.assign(nb, Eigen::MatrixXd::Zero(d, d));
  Eigen::VectorXd rhs(static_cast<Eigen::Index>(nb));
  for (int k = 0; k < d; ++k) {
    for (int m = 0; m < d; ++m) {
      for (std::size_t i = 0; i < nb; ++i)
        rhs(static_cast<Eigen::Index>(i)) = theta(k, m) - phi[i](k, m);
      const CellSolution s = solve_cell_problem(op, rhs);
      for (std::size_t i = 0; i < nb; ++i) out.g[i](k, m) = s.u(static_cast<Eigen::Index>(i));
      Eigen::VectorXd total = op * s.u;
      for (std::size_t i = 0; i < nb; ++i)
        total(static_cast<Eigen::Index>(i)) += phi[i](k, m) - theta(k, m);
      out.residual = std::max(out.residual, total.lpNorm<Eigen::Infinity>());
      out.fredholm_residual = std::max(out.fredholm_residual, s.fredholm_residual);
    }
  }
  return out;
}

CorrectorSet solve_correctors(const PeriodCell& cell) {
  CorrectorSet set;
  set.h = solve_corrector_h(cell);
  set.g = solve_corrector_g(cell, set.h.h, compute_theta(cell, set.h.h));
  for (std::size_t j = 1; j <= cell.num_astral(); ++j)
    set.q.push_back(solve_corrector_q(cell, j));
  return set;
}

double min_eigenvalue(const Eigen::MatrixXd& m) {
  const Eigen::MatrixXd sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

EffectiveParameters compute_effective(const PeriodCell& cell) {
  const HCorrector h = solve_corrector_h(cell);
  EffectiveParameters p;
  p.theta = compute_theta(cell, h.h);
  if (!(min_eigenvalue(p.theta) > 0.0))
    raise(ErrorKind::NotPositiveDefinite, "effective diffusion matrix is not positive definite");
  p.b = compute_drift(cell, h.h);
  p.alpha = compute_alpha_table(cell);
  p.m = cell.m();
  p.generator = assemble_generator(p.alpha, p.m);
  return p;
}

}  // namespace hcw
