#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "hcw/cell.hpp"
#include "hcw/ensemble.hpp"
#include "hcw/observable.hpp"
#include "hcw/rng.hpp"

namespace hcw {

/// State of the extended micro walk. The position is kept in integer lattice
/// coordinates; the macroscopic position is epsilon * position.
struct MicroState {
  std::vector<std::int64_t> position;
  std::size_t site = 0;  // cell site of `position`
  int label = 0;         // 0..M, or kAbsorbedLabel

  bool absorbed() const noexcept { return label == kAbsorbedLabel; }
};

/// Samples the rescaled walk with transition matrix Q. Rows repeat with the
/// period, so one alias table per cell site covers the whole lattice.
class MicroWalker {
 public:
  explicit MicroWalker(AssembledTransition transition);
  ~MicroWalker();
  MicroWalker(MicroWalker&&) noexcept;
  MicroWalker& operator=(MicroWalker&&) noexcept;

  const AssembledTransition& transition() const noexcept { return transition_; }
  const PeriodCell& cell() const noexcept { return transition_.cell(); }
  double epsilon() const noexcept { return transition_.epsilon(); }

  MicroState make_state(std::span<const int> lattice_point) const;
  /// k(z) for a lattice point.
  int label_of(std::span<const std::int64_t> lattice_point) const;

  void advance(MicroState& state, Rng& rng) const;
  MicroState step(const MicroState& state, Rng& rng) const;

  /// Macroscopic coordinates epsilon * position.
  void macro_position(const MicroState& state, std::span<double> out) const;

 private:
  struct Tables;
  AssembledTransition transition_;
  std::unique_ptr<Tables> tables_;
};

enum class StartDistribution {
  Fixed,        // every path starts at MicroRunOptions::start
  UniformBulk,  // uniform over the bulk sites of the cell containing `start`
};

struct MicroRunOptions {
  double epsilon = 0.0;
  std::vector<double> checkpoints;  // macroscopic times, snapped to multiples of eps^2
  std::size_t n_paths = 0;
  std::uint64_t seed = 0;
  std::optional<Point> start;  // lattice point; default: first bulk site
  StartDistribution start_distribution = StartDistribution::Fixed;
  std::vector<Observable> observables;
  unsigned threads = 1;
};

/// Number of micro steps taken by macroscopic time t: floor(t / eps^2).
std::int64_t micro_steps(double t, double epsilon);

EnsembleStats run_paths(const PeriodCell& cell, const MicroRunOptions& options);
EnsembleStats run_paths(const MicroWalker& walker, const MicroRunOptions& options);

struct SemigroupEstimate {
  double mean = 0.0;
  double standard_error = 0.0;
};

/// Monte Carlo estimate of (T_eps^[t/eps^2] pi_eps F)(start).
SemigroupEstimate empirical_semigroup(const PeriodCell& cell, double epsilon,
                                      const Observable& observable, double t,
                                      std::size_t n_paths, std::uint64_t seed,
                                      const Point& start, unsigned threads = 1);

}  // namespace hcw
