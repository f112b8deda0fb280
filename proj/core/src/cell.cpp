#include "hcw/cell.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

#include "hcw/error.hpp"

namespace hcw {
namespace {

std::string fmt_point(std::span<const int> p) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < p.size(); ++i) os << (i ? "," : "") << p[i];
  os << ')';
  return os.str();
}

int floor_mod(std::int64_t a, int n) {
  auto r = static_cast<int>(a % n);
  return r < 0 ? r + n : r;
}

std::int64_t floor_div(std::int64_t a, int n) {
  std::int64_t q = a / n;
  if ((a % n != 0) && ((a < 0) != (n < 0))) --q;
  return q;
}

int linf(std::span<const int> p) {
  int r = 0;
  for (int c : p) r = std::max(r, std::abs(c));
  return r;
}

bool is_zero_offset(std::span<const int> p) {
  return std::all_of(p.begin(), p.end(), [](int c) { return c == 0; });
}

// Smallest eps > 0 at which a eps^2 + b eps + c drops below zero (infinity if
// it never does). c is the value at eps = 0.
double first_negative(double a, double b, double c) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  constexpr double tiny = 1e-15;
  if (c < -tiny) return 0.0;
  if (std::abs(c) <= tiny) {
    if (b > 0) return a < 0 ? -b / a : inf;
    if (b < 0) return 0.0;
    return a < 0 ? 0.0 : inf;
  }
  if (a == 0.0) return b < 0 ? -c / b : inf;
  const double disc = b * b - 4 * a * c;
  if (disc < 0) return inf;
  const double sq = std::sqrt(disc);
  // Stable roots.
  const double qv = -0.5 * (b + std::copysign(sq, b));
  double r1 = qv / a;
  double r2 = qv != 0.0 ? c / qv : r1;
  double best = inf;
  for (double r : {r1, r2})
    if (r > 0) best = std::min(best, r);
  return best;
}

double first_exit(double a, double b, double c) {
  return std::min(first_negative(a, b, c), first_negative(-a, -b, 1.0 - c));
}

// Hermite-style integer row reduction; returns true when the rows generate Z^d.
bool generates_full_lattice(std::vector<std::vector<std::int64_t>> rows, int dim) {
  std::size_t r = 0;
  for (int col = 0; col < dim; ++col) {
    // Euclid on column `col` across rows r..end until one nonzero remains.
    while (true) {
      std::size_t pivot = rows.size();
      for (std::size_t i = r; i < rows.size(); ++i) {
        if (rows[i][col] != 0 &&
            (pivot == rows.size() || std::abs(rows[i][col]) < std::abs(rows[pivot][col])))
          pivot = i;
      }
      if (pivot == rows.size()) return false;  // rank deficient
      std::swap(rows[r], rows[pivot]);
      bool reduced = true;
      for (std::size_t i = r + 1; i < rows.size(); ++i) {
        if (rows[i][col] == 0) continue;
        const std::int64_t q = rows[i][col] / rows[r][col];
        for (int c = 0; c < dim; ++c) rows[i][c] -= q * rows[r][c];
        if (rows[i][col] != 0) reduced = false;
      }
      if (reduced) break;
    }
    if (std::abs(rows[r][col]) != 1) return false;
    ++r;
  }
  return true;
}

}  // namespace

std::size_t PeriodCell::site_index(std::span<const int> x) const {
  std::size_t idx = 0;
  for (int i = 0; i < dimension_; ++i)
    idx += static_cast<std::size_t>(floor_mod(x[i], period_[i])) * strides_[i];
  return idx;
}

std::size_t PeriodCell::site_index(std::span<const std::int64_t> x) const {
  std::size_t idx = 0;
  for (int i = 0; i < dimension_; ++i)
    idx += static_cast<std::size_t>(floor_mod(x[i], period_[i])) * strides_[i];
  return idx;
}

Point PeriodCell::site_point(std::size_t site) const {
  Point p(dimension_);
  for (int i = 0; i < dimension_; ++i) {
    p[i] = static_cast<int>(site / strides_[i]);
    site %= strides_[i];
  }
  return p;
}

std::size_t PeriodCell::bulk_index(std::size_t site) const {
  if (!is_bulk(site))
    raise(ErrorKind::InvalidArgument, "site " + fmt_point(site_point(site)) + " is astral");
  return bulk_index_[site];
}

PeriodCell build_cell(const CellConfig& config) {
  PeriodCell cell;
  const int dim = config.dimension;
  if (dim < 1) raise(ErrorKind::InvalidArgument, "dimension must be >= 1");
  if (static_cast<int>(config.period.size()) != dim)
    raise(ErrorKind::InvalidArgument, "period must have `dimension` entries");
  for (int p : config.period)
    if (p < 1) raise(ErrorKind::InvalidArgument, "period entries must be positive");
  if (!(config.m >= 0.0) || !std::isfinite(config.m))
    raise(ErrorKind::InvalidArgument, "absorption intensity m must be finite and >= 0");

  cell.dimension_ = dim;
  cell.period_ = config.period;
  cell.strides_.assign(dim, 1);
  for (int i = dim - 2; i >= 0; --i)
    cell.strides_[i] = cell.strides_[i + 1] * static_cast<std::size_t>(config.period[i + 1]);
  const std::size_t n_sites = cell.strides_[0] * static_cast<std::size_t>(config.period[0]);
  cell.m_ = config.m;

  auto check_in_cell = [&](const Point& x, const char* what) {
    if (static_cast<int>(x.size()) != dim)
      raise(ErrorKind::InvalidArgument, std::string(what) + " has wrong dimension");
    for (int i = 0; i < dim; ++i)
      if (x[i] < 0 || x[i] >= config.period[i])
        raise(ErrorKind::InvalidArgument,
              std::string(what) + " " + fmt_point(x) + " lies outside the cell");
  };

  // Partition Y = A u B.
  if (config.astral_sites.empty()) raise(ErrorKind::EmptySet, "astral set A is empty");
  cell.labels_.assign(n_sites, 0);
  for (std::size_t j = 0; j < config.astral_sites.size(); ++j) {
    const Point& x = config.astral_sites[j];
    check_in_cell(x, "astral site");
    const std::size_t s = cell.site_index(std::span<const int>(x));
    if (cell.labels_[s] != 0)
      raise(ErrorKind::StructuralViolation, "astral site " + fmt_point(x) + " listed twice");
    cell.labels_[s] = static_cast<int>(j + 1);
    cell.astral_.push_back(x);
    cell.astral_site_index_.push_back(s);
  }
  cell.bulk_index_.assign(n_sites, std::numeric_limits<std::size_t>::max());
  for (std::size_t s = 0; s < n_sites; ++s) {
    if (cell.labels_[s] == 0) {
      cell.bulk_index_[s] = cell.bulk_sites_.size();
      cell.bulk_sites_.push_back(s);
    }
  }
  if (cell.bulk_sites_.empty()) raise(ErrorKind::EmptySet, "bulk set B is empty");

  // Merge the three sparse kernels into per-site stencils keyed by offset.
  std::vector<std::map<Point, StencilEntry>> merged(n_sites);
  auto ingest = [&](const std::vector<KernelRecord>& records, double StencilEntry::*field,
                    const char* name) {
    for (const auto& r : records) {
      check_in_cell(r.site, (std::string(name) + " site").c_str());
      if (static_cast<int>(r.offset.size()) != dim)
        raise(ErrorKind::InvalidArgument, std::string(name) + " offset has wrong dimension");
      if (!std::isfinite(r.value))
        raise(ErrorKind::InvalidArgument, std::string(name) + " value is not finite");
      auto& slot = merged[cell.site_index(std::span<const int>(r.site))][r.offset];
      if (slot.*field != 0.0)
        raise(ErrorKind::StructuralViolation, std::string(name) + " entry at site " +
                                                  fmt_point(r.site) + " offset " +
                                                  fmt_point(r.offset) + " given twice");
      slot.*field = r.value;
    }
  };
  ingest(config.p0, &StencilEntry::p0, "p0");
  ingest(config.d, &StencilEntry::d, "D");
  ingest(config.v, &StencilEntry::v, "V");

  int range = 0;
  cell.stencils_.resize(n_sites);
  for (std::size_t s = 0; s < n_sites; ++s) {
    const Point x = cell.site_point(s);
    for (auto& [offset, e] : merged[s]) {
      if (e.p0 == 0.0 && e.d == 0.0 && e.v == 0.0) continue;
      e.offset = offset;
      Point y = x;
      for (int i = 0; i < dim; ++i) y[i] += offset[i];
      e.target = cell.site_index(std::span<const int>(y));
      range = std::max(range, linf(offset));
      cell.stencils_[s].push_back(e);
    }
  }
  if (config.range) {
    if (*config.range < 1) raise(ErrorKind::InvalidArgument, "range must be positive");
    if (range > *config.range)
      raise(ErrorKind::StructuralViolation,
            "kernel entry beyond declared range " + std::to_string(*config.range));
    cell.range_ = *config.range;
  } else {
    cell.range_ = std::max(range, 1);
  }

  constexpr double tol = kCellTolerance;
  auto where = [&](std::size_t s, const Point& off) {
    return " at site " + fmt_point(cell.site_point(s)) + " offset " + fmt_point(off);
  };
  auto find_entry = [&](std::size_t s, const Point& off) -> const StencilEntry* {
    for (const auto& e : cell.stencils_[s])
      if (e.offset == off) return &e;
    return nullptr;
  };

  for (std::size_t s = 0; s < n_sites; ++s) {
    const bool astral = !cell.is_bulk(s);
    double p_sum = 0.0, d_sum = 0.0, v_sum = 0.0;
    for (const auto& e : cell.stencils_[s]) {
      const bool zero = is_zero_offset(e.offset);
      const bool target_astral = !cell.is_bulk(e.target);
      if (e.p0 < -tol || e.p0 > 1.0 + tol)
        raise(ErrorKind::StructuralViolation, "p0 outside [0,1]" + where(s, e.offset));
      if (astral && !zero && std::abs(e.p0) > tol)
        raise(ErrorKind::StructuralViolation,
              "p0 must vanish off the diagonal on astral sites" + where(s, e.offset));
      if (!astral && target_astral && std::abs(e.p0) > tol)
        raise(ErrorKind::StructuralViolation,
              "p0 from bulk into an astral site must vanish" + where(s, e.offset));
      if ((astral || target_astral) && std::abs(e.d) > tol)
        raise(ErrorKind::StructuralViolation,
              "D must vanish on transitions touching A" + where(s, e.offset));
      if (!astral && !target_astral && !zero && std::abs(e.v) > tol)
        raise(ErrorKind::StructuralViolation,
              "V must vanish between distinct bulk points" + where(s, e.offset));
      if ((astral || target_astral) && !zero && e.v < -tol)
        raise(ErrorKind::StructuralViolation,
              "V must be non-negative on transitions touching A" + where(s, e.offset));
      p_sum += e.p0;
      d_sum += e.d;
      v_sum += e.v;

      // Symmetry p_xi(x) = p_{-xi}(x + xi).
      if (e.p0 != 0.0) {
        Point back = e.offset;
        for (int& c : back) c = -c;
        const StencilEntry* rev = find_entry(e.target, back);
        const double p_rev = rev ? rev->p0 : 0.0;
        if (std::abs(p_rev - e.p0) > tol)
          raise(ErrorKind::StructuralViolation,
                "p0 is not symmetric" + where(s, e.offset));
      }
    }
    if (std::abs(p_sum - 1.0) > tol)
      raise(ErrorKind::StructuralViolation,
            "p0 row at site " + fmt_point(cell.site_point(s)) + " sums to " +
                std::to_string(p_sum) + ", not 1");
    if (astral) {
      const StencilEntry* diag = find_entry(s, Point(dim, 0));
      if (!diag || std::abs(diag->p0 - 1.0) > tol)
        raise(ErrorKind::StructuralViolation,
              "astral site " + fmt_point(cell.site_point(s)) + " must have p0(x,x) = 1");
    }
    if (std::abs(d_sum) > tol)
      raise(ErrorKind::StructuralViolation,
            "D row at site " + fmt_point(cell.site_point(s)) + " does not sum to 0");
    if (std::abs(v_sum) > tol)
      raise(ErrorKind::StructuralViolation,
            "V row at site " + fmt_point(cell.site_point(s)) + " does not sum to 0");
  }

  // Connectivity of the periodic extension of B under p0 > 0. Breadth-first
  // search over B with a lift of each site to Z^d; every edge closing a cycle
  // contributes a winding vector (in units of periods). B# is connected iff the
  // torus graph is connected and the windings generate Z^d.
  {
    const std::size_t nb = cell.bulk_sites_.size();
    std::vector<std::vector<std::int64_t>> lift(nb);
    std::vector<std::vector<std::int64_t>> windings;
    std::deque<std::size_t> queue;
    lift[0].assign(dim, 0);
    {
      const Point x0 = cell.site_point(cell.bulk_sites_[0]);
      for (int i = 0; i < dim; ++i) lift[0][i] = x0[i];
    }
    queue.push_back(0);
    while (!queue.empty()) {
      const std::size_t bi = queue.front();
      queue.pop_front();
      const std::size_t s = cell.bulk_sites_[bi];
      for (const auto& e : cell.stencils_[s]) {
        if (e.p0 <= 0.0 || !cell.is_bulk(e.target)) continue;
        const std::size_t bt = cell.bulk_index_[e.target];
        std::vector<std::int64_t> y(dim);
        for (int i = 0; i < dim; ++i) y[i] = lift[bi][i] + e.offset[i];
        if (lift[bt].empty()) {
          lift[bt] = y;
          queue.push_back(bt);
        } else {
          std::vector<std::int64_t> w(dim);
          bool nonzero = false;
          for (int i = 0; i < dim; ++i) {
            w[i] = floor_div(y[i] - lift[bt][i], config.period[i]);
            nonzero = nonzero || w[i] != 0;
          }
          if (nonzero) windings.push_back(std::move(w));
        }
      }
    }
    for (std::size_t bi = 0; bi < nb; ++bi)
      if (lift[bi].empty())
        raise(ErrorKind::DisconnectedBulk,
              "bulk site " + fmt_point(cell.site_point(cell.bulk_sites_[bi])) +
                  " is not reachable under p0 within the cell torus");
    if (!generates_full_lattice(windings, dim))
      raise(ErrorKind::DisconnectedBulk,
            "periodic extension of B splits into several components");
  }

  // Admissible epsilon range.
  double eps_max = 1.0;
  std::string binding;
  for (std::size_t s = 0; s < n_sites; ++s) {
    const bool astral = !cell.is_bulk(s);
    for (const auto& e : cell.stencils_[s]) {
      const double w = (astral && is_zero_offset(e.offset)) ? -config.m : 0.0;
      const double bound = first_exit(e.v + w, e.d, e.p0);
      if (bound < eps_max) {
        eps_max = bound;
        binding = where(s, e.offset);
      }
    }
    if (astral && config.m > 0) {
      const double bound = first_exit(config.m, 0.0, 0.0);
      if (bound < eps_max) {
        eps_max = bound;
        binding = " at absorption of site " + fmt_point(cell.site_point(s));
      }
    }
  }
  if (!(eps_max > 0.0))
    raise(ErrorKind::StructuralViolation,
          "no epsilon > 0 keeps the transition entries in [0,1]" + binding);
  cell.eps_max_ = eps_max;

  bool complete = true;
  for (std::size_t j = 0; j < cell.astral_site_index_.size(); ++j) {
    const std::size_t a = cell.astral_site_index_[j];
    bool out = false, in = false;
    for (const auto& e : cell.stencils_[a])
      if (e.v > 0 && cell.is_bulk(e.target)) out = true;
    for (std::size_t s : cell.bulk_sites_)
      for (const auto& e : cell.stencils_[s])
        if (e.v > 0 && e.target == a) in = true;
    complete = complete && out && in;
  }
  cell.exchange_complete_ = complete;
  return cell;
}

double AssembledTransition::row_sum(std::size_t site) const {
  double s = star_[site];
  for (const auto& e : rows_[site]) s += e.prob;
  return s;
}

AssembledTransition assemble_transition(const PeriodCell& cell, double epsilon) {
  if (!(epsilon > 0.0))
    raise(ErrorKind::InvalidArgument, "epsilon must be positive");
  if (epsilon > cell.eps_max())
    raise(ErrorKind::EpsilonTooLarge, "epsilon " + std::to_string(epsilon) +
                                          " exceeds eps_max = " + std::to_string(cell.eps_max()));
  AssembledTransition q(cell, epsilon);
  const double e2 = epsilon * epsilon;
  const std::size_t n = cell.num_sites();
  q.rows_.resize(n);
  q.star_.assign(n, 0.0);
  auto clamp01 = [](double p) { return std::clamp(p, 0.0, 1.0); };
  for (std::size_t s = 0; s < n; ++s) {
    const bool astral = !cell.is_bulk(s);
    for (const auto& e : cell.stencil(s)) {
      double w = 0.0;
      if (astral && is_zero_offset(e.offset)) w = -cell.m();
      const double p = e.p0 + epsilon * e.d + e2 * (e.v + w);
      q.rows_[s].push_back({e.offset, e.target, clamp01(p)});
    }
    if (astral) q.star_[s] = clamp01(e2 * cell.m());
  }
  return q;
}

CellConfig appendix2_config(const Appendix2Options& o) {
  if (o.hold < 0.0 || o.hold >= 1.0)
    raise(ErrorKind::InvalidArgument, "hold must lie in [0, 1)");
  CellConfig c;
  c.dimension = 2;
  c.period = {3, 3};
  c.astral_sites = {{1, 1}};
  c.m = o.absorption;

  const Point e1p{1, 0}, e1m{-1, 0}, e2p{0, 1}, e2m{0, -1}, zero{0, 0};
  const double scale = 1.0 - o.hold;
  auto add_p = [&](const Point& site, const Point& off, double p) {
    c.p0.push_back({site, off, scale * p});
  };
  // Corners s1, s3, s6, s8.
  for (const Point& s : {Point{0, 2}, Point{2, 2}, Point{0, 0}, Point{2, 0}})
    for (const Point& off : {e1p, e1m, e2p, e2m}) add_p(s, off, 0.25);
  // s2 (top middle), s7 (bottom middle), s4 (middle left), s5 (middle right).
  add_p({1, 2}, e1p, 0.25), add_p({1, 2}, e1m, 0.25), add_p({1, 2}, e2p, 0.5);
  add_p({1, 0}, e1p, 0.25), add_p({1, 0}, e1m, 0.25), add_p({1, 0}, e2m, 0.5);
  add_p({0, 1}, e2p, 0.25), add_p({0, 1}, e2m, 0.25), add_p({0, 1}, e1m, 0.5);
  add_p({2, 1}, e2p, 0.25), add_p({2, 1}, e2m, 0.25), add_p({2, 1}, e1p, 0.5);
  if (o.hold > 0.0) {
    for (int x = 0; x < 3; ++x)
      for (int y = 0; y < 3; ++y)
        if (!(x == 1 && y == 1)) c.p0.push_back({{x, y}, zero, o.hold});
  }
  c.p0.push_back({{1, 1}, zero, 1.0});

  if (o.drift_k != 0.0) {
    for (const Point& s :
         {Point{0, 2}, Point{2, 2}, Point{0, 1}, Point{2, 1}, Point{0, 0}, Point{2, 0}}) {
      c.d.push_back({s, e2p, -o.drift_k});
      c.d.push_back({s, e2m, o.drift_k});
    }
  }

  if (o.bulk_exchange != 0.0) {
    const std::pair<Point, Point> into_centre[] = {
        {{1, 2}, e2m}, {{1, 0}, e2p}, {{0, 1}, e1p}, {{2, 1}, e1m}};
    for (const auto& [site, off] : into_centre) {
      c.v.push_back({site, off, o.bulk_exchange});
      c.v.push_back({site, zero, -o.bulk_exchange});
    }
  }
  if (o.astral_exchange != 0.0) {
    for (const Point& off : {e1p, e1m, e2p, e2m})
      c.v.push_back({{1, 1}, off, o.astral_exchange});
    c.v.push_back({{1, 1}, zero, -4.0 * o.astral_exchange});
  }
  return c;
}

}  // namespace hcw
