#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace hcw {

/// Integer lattice point or offset in Z^d.
using Point = std::vector<int>;

/// One sparse kernel entry: kernel(site, site + offset) = value.
struct KernelRecord {
  Point site;
  Point offset;
  double value = 0.0;
};

/// Raw description of a periodicity cell, as read from a cell file.
struct CellConfig {
  int dimension = 0;
  std::vector<int> period;
  std::vector<Point> astral_sites;
  std::vector<KernelRecord> p0;
  std::vector<KernelRecord> d;
  std::vector<KernelRecord> v;
  double m = 0.0;
  std::optional<int> range;
};

/// Per-site stencil entry combining the three kernels on a shared offset.
struct StencilEntry {
  Point offset;
  std::size_t target = 0;  // site index of (site + offset) reduced to the torus
  double p0 = 0.0;
  double d = 0.0;
  double v = 0.0;
};

/// Validated periodic high-contrast medium. Immutable after build_cell().
///
/// Sites of the torus Y are indexed row-major (last coordinate fastest).
/// Labels: 0 for bulk sites, j in 1..M for the j-th astral site.
class PeriodCell {
 public:
  int dimension() const noexcept { return dimension_; }
  std::span<const int> period() const noexcept { return period_; }
  std::size_t num_sites() const noexcept { return labels_.size(); }
  std::size_t num_astral() const noexcept { return astral_.size(); }
  std::size_t num_bulk() const noexcept { return bulk_sites_.size(); }

  const std::vector<Point>& astral_sites() const noexcept { return astral_; }
  /// Bulk sites in site-index order; position in this list is the bulk index.
  const std::vector<std::size_t>& bulk_sites() const noexcept { return bulk_sites_; }
  /// Site index of the j-th astral site (j is 1-based).
  std::size_t astral_site(std::size_t j) const { return astral_site_index_.at(j - 1); }

  std::size_t site_index(std::span<const int> x) const;
  std::size_t site_index(std::span<const std::int64_t> x) const;
  Point site_point(std::size_t site) const;

  int label(std::size_t site) const { return labels_[site]; }
  bool is_bulk(std::size_t site) const { return labels_[site] == 0; }
  /// Position of a bulk site in bulk_sites(); throws for astral sites.
  std::size_t bulk_index(std::size_t site) const;

  std::span<const StencilEntry> stencil(std::size_t site) const { return stencils_[site]; }

  double m() const noexcept { return m_; }
  int range() const noexcept { return range_; }
  /// Largest epsilon (capped at 1) for which every entry of
  /// P0 + eps D + eps^2 (V + W) stays in [0, 1] on all of (0, eps_max].
  double eps_max() const noexcept { return eps_max_; }
  /// True when every astral site has a positive V-channel both to and from the
  /// bulk, i.e. the perturbed walk is irreducible on the whole lattice.
  bool exchange_complete() const noexcept { return exchange_complete_; }

  friend PeriodCell build_cell(const CellConfig& config);

 private:
  PeriodCell() = default;

  int dimension_ = 0;
  std::vector<int> period_;
  std::vector<std::size_t> strides_;
  std::vector<Point> astral_;
  std::vector<std::size_t> astral_site_index_;
  std::vector<std::size_t> bulk_sites_;
  std::vector<std::size_t> bulk_index_;
  std::vector<int> labels_;
  std::vector<std::vector<StencilEntry>> stencils_;
  double m_ = 0.0;
  int range_ = 1;
  double eps_max_ = 0.0;
  bool exchange_complete_ = false;
};

/// Validates a configuration and builds the cell. Throws hcw::Error with kind
/// EmptySet, StructuralViolation or DisconnectedBulk.
PeriodCell build_cell(const CellConfig& config);

/// Tolerance used for row-sum, symmetry and structural-zero checks.
inline constexpr double kCellTolerance = 1e-12;

struct TransitionEntry {
  Point offset;
  std::size_t target = 0;
  double prob = 0.0;
};

/// Q = P0 + eps D + eps^2 (V + W) over one period plus the absorbing column.
class AssembledTransition {
 public:
  const PeriodCell& cell() const noexcept { return cell_; }
  double epsilon() const noexcept { return epsilon_; }
  double eps_max() const noexcept { return cell_.eps_max(); }
  std::span<const TransitionEntry> row(std::size_t site) const { return rows_[site]; }
  /// q(site, absorbed): eps^2 m on astral sites, 0 on bulk sites.
  double absorption(std::size_t site) const { return star_[site]; }
  /// Sum of a row including the absorbing column.
  double row_sum(std::size_t site) const;

  friend AssembledTransition assemble_transition(const PeriodCell& cell, double epsilon);

 private:
  AssembledTransition(PeriodCell cell, double epsilon)
      : cell_(std::move(cell)), epsilon_(epsilon) {}

  PeriodCell cell_;
  double epsilon_;
  std::vector<std::vector<TransitionEntry>> rows_;
  std::vector<double> star_;
};

/// Throws EpsilonTooLarge (message carries eps_max) unless 0 < eps <= eps_max.
AssembledTransition assemble_transition(const PeriodCell& cell, double epsilon);

/// The bundled worked example: a 3x3 cell with a central astral site.
///
/// `drift_k` is the drift constant K. `hold` mixes a holding probability into
/// every bulk row, (1 - hold) P0 + hold I, which leaves the correctors unchanged
/// and scales the effective diffusion by (1 - hold); it has to be positive for
/// any bulk-to-astral exchange `bulk_exchange` (v from each of the four
/// neighbours of the centre) to be admissible. `astral_exchange` is v from the
/// centre to each of its four neighbours, `absorption` is m.
struct Appendix2Options {
  double drift_k = 1.0;
  double hold = 0.0;
  double bulk_exchange = 0.0;
  double astral_exchange = 0.0;
  double absorption = 0.0;
};

CellConfig appendix2_config(const Appendix2Options& options = {});

}  // namespace hcw
