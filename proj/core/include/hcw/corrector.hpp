#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "hcw/cell.hpp"

namespace hcw {

/// Tolerance on the orthogonality of a right-hand side to 1_B.
inline constexpr double kFredholmTolerance = 1e-12;
/// Required sup-norm residual of every corrector solve.
inline constexpr double kCorrectorResidualTolerance = 1e-10;

/// Solution of one periodic cell problem (P0 - I) u = f on B.
struct CellSolution {
  Eigen::VectorXd u;             // indexed by bulk index, mean zero over B
  double residual = 0.0;         // |(P0 - I) u - f|_inf
  double fredholm_residual = 0.0;  // |<f, 1_B>| / |B|
};

/// (P0 - I) restricted to the bulk sites with periodic wrap; |B| x |B|.
Eigen::MatrixXd bulk_operator(const PeriodCell& cell);

/// Solves (P0 - I) u = f on B in the mean-zero gauge via the bordered system
///   [ A  1 ] [u]   [f]
///   [ 1' 0 ] [mu] = [0].
/// Throws SolvabilityViolated when <f, 1_B> / |B| exceeds kFredholmTolerance and
/// SingularSystem when the kernel of A is larger than span{1_B}.
CellSolution solve_cell_problem(const Eigen::MatrixXd& op, const Eigen::VectorXd& rhs);

/// -(P0 - I) l_c on B, where l_c(x) = x_c.
Eigen::VectorXd linear_rhs(const PeriodCell& cell, int coordinate);

struct HCorrector {
  Eigen::MatrixXd h;  // |B| x d
  double residual = 0.0;
  double fredholm_residual = 0.0;
};

HCorrector solve_corrector_h(const PeriodCell& cell);

/// Phi(h)(y) = sum_xi p_xi(y) xi (x) (xi / 2 + h(y + xi)) at one bulk site.
Eigen::MatrixXd flux_matrix(const PeriodCell& cell, const Eigen::MatrixXd& h,
                            std::size_t bulk_index);

/// Cell average of Phi(h), symmetrised.
Eigen::MatrixXd compute_theta(const PeriodCell& cell, const Eigen::MatrixXd& h);

/// b = |B|^-1 sum_{y in B} sum_xi d(y, y + xi) (xi + h(y + xi)).
Eigen::VectorXd compute_drift(const PeriodCell& cell, const Eigen::MatrixXd& h);

struct QCorrector {
  Eigen::VectorXd q;  // indexed by bulk index
  double alpha_0j = 0.0;
  double residual = 0.0;
  double fredholm_residual = 0.0;
};

/// Exchange corrector for astral site j (1-based).
QCorrector solve_corrector_q(const PeriodCell& cell, std::size_t j);

/// (M+1) x (M+1) table of exchange rates alpha_kj, index 0 = bulk. The
/// diagonal is unused and left at zero. Throws NegativeRate.
Eigen::MatrixXd compute_alpha_table(const PeriodCell& cell);

/// Generator of the label chain on {0, 1..M, absorbed}; (M+2) x (M+2).
Eigen::MatrixXd assemble_generator(const Eigen::MatrixXd& alpha, double m);

struct GCorrector {
  std::vector<Eigen::MatrixXd> g;  // one d x d matrix per bulk site
  double residual = 0.0;           // |Phi(h) + (P0 - I) g - Theta|_inf
  double fredholm_residual = 0.0;
};

GCorrector solve_corrector_g(const PeriodCell& cell, const Eigen::MatrixXd& h,
                             const Eigen::MatrixXd& theta);

struct CorrectorSet {
  HCorrector h;
  GCorrector g;
  std::vector<QCorrector> q;  // q[j - 1] for astral site j
};

struct EffectiveParameters {
  Eigen::MatrixXd theta;
  Eigen::VectorXd b;
  Eigen::MatrixXd alpha;
  double m = 0.0;
  Eigen::MatrixXd generator;

  std::size_t num_astral() const { return static_cast<std::size_t>(alpha.rows()) - 1; }
};

CorrectorSet solve_correctors(const PeriodCell& cell);

/// Runs the h and q problems and assembles Theta, b, alpha and the generator.
/// Throws NotPositiveDefinite if Theta fails the SPD check.
EffectiveParameters compute_effective(const PeriodCell& cell);

/// Smallest eigenvalue of the symmetric part of a square matrix.
double min_eigenvalue(const Eigen::MatrixXd& m);

}  // namespace hcw
