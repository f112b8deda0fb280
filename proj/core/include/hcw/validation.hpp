#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hcw/cell.hpp"
#include "hcw/corrector.hpp"
#include "hcw/macromodel.hpp"
#include "hcw/observable.hpp"

namespace hcw {

// ---------------------------------------------------------------------------
// Micro versus limit semigroup across an epsilon ladder

struct ConvergenceRow {
  double epsilon = 0.0;
  std::string observable_id;
  double t = 0.0;  // snapped to a multiple of epsilon^2
  double micro = 0.0;
  double micro_stderr = 0.0;
  double macro = 0.0;
  double macro_stderr = 0.0;  // 0 when the macro side is exact
  double error = 0.0;         // |micro - macro|
  double sup_norm = 1.0;      // sup |F| of the observable
  bool label_only = false;
  /// Combined standard error exceeds half the observed error.
  bool inconclusive = false;
};

/// Label occupancy of the micro walk against p0 exp(tG).
struct LabelRow {
  double epsilon = 0.0;
  double t = 0.0;
  std::vector<double> micro;  // labels 0..M, then absorbed
  std::vector<double> macro;
  double tv = 0.0;  // total variation distance
};

struct ConvergenceSummary {
  double smallest_epsilon = 0.0;
  double max_error_at_smallest = 0.0;  // over non-label-only observables and times
  double max_tv_at_smallest = 0.0;
  /// max error at epsilon[i + 1] divided by max error at epsilon[i], ladder sorted
  /// from coarse to fine.
  std::vector<double> error_ratios;
};

struct ConvergenceReport {
  std::vector<ConvergenceRow> rows;
  std::vector<LabelRow> labels;
  ConvergenceSummary summary;
};

struct ConvergenceOptions {
  std::vector<double> epsilons;
  std::vector<Observable> observables;
  std::vector<double> times;
  std::size_t n_paths = 0;
  std::uint64_t seed = 0;
  std::optional<Point> start;  // lattice point; default: first bulk site
  unsigned threads = 1;
  double macro_dt = 0.0;  // 0 selects max_limit_dt()
  /// Throw InconclusiveStatistics instead of flagging rows.
  bool strict = false;
};

/// Runs the micro walk at each epsilon and compares with the limit process
/// started from epsilon * start: exactly via exp(tG) for label-only
/// observables, by Monte Carlo otherwise (same seed at every rung).
ConvergenceReport convergence_study(const PeriodCell& cell, const ConvergenceOptions& options);
ConvergenceReport convergence_study(const PeriodCell& cell, const LimitProcessParams& params,
                                    const ConvergenceOptions& options);

struct LadderCriteria {
  double error_fraction = 0.05;  // final error < error_fraction * sup|F|
  double tv_threshold = 0.02;
};

struct LadderVerdict {
  bool passed = true;
  std::vector<std::string> failures;
};

/// For every position observable and time: error at the finest epsilon below
/// the error at the coarsest and below error_fraction * sup|F|. For every
/// time: label TV at the finest epsilon below tv_threshold.
LadderVerdict evaluate_ladder(const ConvergenceReport& report, const LadderCriteria& criteria = {});

// ---------------------------------------------------------------------------
// Generator residual of the corrector ansatz

/// f_0 with derivatives; f_1..f_M and F(absorbed) need only values.
struct AnsatzFunction {
  std::function<double(std::span<const double>)> f0;
  std::function<Eigen::VectorXd(std::span<const double>)> gradient;
  std::function<Eigen::MatrixXd(std::span<const double>)> hessian;
  std::vector<std::function<double(std::span<const double>)>> astral;  // f_1..f_M
  double absorbed_value = 0.0;
  Eigen::VectorXd window_center;
  double window_radius = 1.0;
};

/// f_0 = g, f_j = astral_scale * g; window of radius 6 widths around the centre.
AnsatzFunction ansatz_gaussian(const Gaussian& g, std::size_t num_astral, double astral_scale = 1.0,
                               double absorbed_value = 0.0);
/// Constant f_0 = f_j = value on the window |z - center| <= radius.
AnsatzFunction ansatz_constant(double value, std::size_t num_astral,
                               const Eigen::VectorXd& center, double radius);

struct AnsatzReport {
  double epsilon = 0.0;
  double sup_bulk = 0.0;    // sup over eps B# in the window of |L_eps F_eps - pi_eps L F|
  double sup_astral = 0.0;  // same over eps A#
  double approximation = 0.0;  // sup |F_eps - pi_eps F|
  std::size_t n_sites = 0;
};

struct AnsatzOptions {
  /// Adds eps^2 (grad f_0, r(z / eps)) with (P0 - I) r = b - b(y), which
  /// cancels the O(1) residual left by a spatially varying local drift b(y).
  bool drift_corrector = true;
};

AnsatzReport ansatz_diagnostic(const PeriodCell& cell, double epsilon, const AnsatzFunction& f,
                               const AnsatzOptions& options = {});

}  // namespace hcw
