#include "hcw/microsim.hpp"

#include <algorithm>
#include <cmath>

#include <boost/random/discrete_distribution.hpp>

#include "hcw/error.hpp"

namespace hcw {

struct MicroWalker::Tables {
  struct Site {
    boost::random::discrete_distribution<int, double> dist;
    std::vector<int> offsets;  // n_moves x d, flattened
    std::vector<std::size_t> targets;
    int absorb_outcome = -1;
  };
  std::vector<Site> sites;
};

MicroWalker::MicroWalker(AssembledTransition transition)
    : transition_(std::move(transition)), tables_(std::make_unique<Tables>()) {
  const PeriodCell& c = transition_.cell();
  tables_->sites.resize(c.num_sites());
  for (std::size_t s = 0; s < c.num_sites(); ++s) {
    auto& site = tables_->sites[s];
    std::vector<double> weights;
    for (const auto& e : transition_.row(s)) {
      weights.push_back(e.prob);
      site.offsets.insert(site.offsets.end(), e.offset.begin(), e.offset.end());
      site.targets.push_back(e.target);
    }
    if (transition_.absorption(s) > 0.0) {
      site.absorb_outcome = static_cast<int>(weights.size());
      weights.push_back(transition_.absorption(s));
    }
    if (weights.empty())
      raise(ErrorKind::StructuralViolation, "transition row with no outcomes");
    site.dist = boost::random::discrete_distribution<int, double>(weights.begin(), weights.end());
  }
}

MicroWalker::~MicroWalker() = default;
MicroWalker::MicroWalker(MicroWalker&&) noexcept = default;
MicroWalker& MicroWalker::operator=(MicroWalker&&) noexcept = default;

MicroState MicroWalker::make_state(std::span<const int> lattice_point) const {
  const PeriodCell& c = cell();
  if (static_cast<int>(lattice_point.size()) != c.dimension())
    raise(ErrorKind::InvalidArgument, "start point has wrong dimension");
  MicroState st;
  st.position.assign(lattice_point.begin(), lattice_point.end());
  st.site = c.site_index(lattice_point);
  st.label = c.label(st.site);
  return st;
}

int MicroWalker::label_of(std::span<const std::int64_t> lattice_point) const {
  return cell().label(cell().site_index(lattice_point));
}

void MicroWalker::advance(MicroState& st, Rng& rng) const {
  if (st.absorbed()) return;
  const auto& site = tables_->sites[st.site];
  const int k = site.dist(rng);
  if (k == site.absorb_outcome) {
    st.label = kAbsorbedLabel;
    return;
  }
  const std::size_t d = st.position.size();
  const int* off = site.offsets.data() + static_cast<std::size_t>(k) * d;
  for (std::size_t i = 0; i < d; ++i) st.position[i] += off[i];
  st.site = site.targets[static_cast<std::size_t>(k)];
  st.label = cell().label(st.site);
}

MicroState MicroWalker::step(const MicroState& state, Rng& rng) const {
  MicroState next = state;
  advance(next, rng);
  return next;
}

void MicroWalker::macro_position(const MicroState& state, std::span<double> out) const {
  const double eps = epsilon();
  for (std::size_t i = 0; i < state.position.size(); ++i)
    out[i] = eps * static_cast<double>(state.position[i]);
}

std::int64_t micro_steps(double t, double epsilon) {
  if (!(t >= 0.0)) raise(ErrorKind::InvalidArgument, "checkpoint times must be >= 0");
  // The tiny slack keeps t = n eps^2 from rounding down to n - 1.
  return static_cast<std::int64_t>(std::floor(t / (epsilon * epsilon) * (1.0 + 1e-12)));
}

EnsembleStats run_paths(const PeriodCell& cell, const MicroRunOptions& options) {
  return run_paths(MicroWalker(assemble_transition(cell, options.epsilon)), options);
}

EnsembleStats run_paths(const MicroWalker& walker, const MicroRunOptions& options) {
  const PeriodCell& cell = walker.cell();
  if (options.n_paths < 1) raise(ErrorKind::InvalidArgument, "n_paths must be >= 1");
  if (options.epsilon != walker.epsilon())
    raise(ErrorKind::InvalidArgument, "walker was assembled for a different epsilon");
  const int d = cell.dimension();
  const std::size_t n_obs = options.observables.size();
  for (const auto& o : options.observables)
    if (o.components.size() != cell.num_astral() + 1)
      raise(ErrorKind::InvalidArgument, "observable " + o.id + " has the wrong number of components");

  std::vector<double> times = options.checkpoints;
  std::sort(times.begin(), times.end());
  std::vector<std::int64_t> steps;
  for (double t : times) steps.push_back(micro_steps(t, walker.epsilon()));

  Point start = options.start.value_or(cell.site_point(cell.bulk_sites().front()));
  if (static_cast<int>(start.size()) != d)
    raise(ErrorKind::InvalidArgument, "start point has wrong dimension");
  Point origin_cell(d);
  for (int i = 0; i < d; ++i) {
    const int p = cell.period()[static_cast<std::size_t>(i)];
    origin_cell[i] = start[i] - ((start[i] % p) + p) % p;
  }

  auto make = [&] {
    return std::vector<CheckpointAccumulator>(times.size(),
                                              CheckpointAccumulator(d, cell.num_astral(), n_obs));
  };
  auto path = [&](std::size_t index, std::vector<CheckpointAccumulator>& acc) {
    Rng rng = make_stream(options.seed, index);
    Point x0 = start;
    if (options.start_distribution == StartDistribution::UniformBulk) {
      const auto nb = cell.num_bulk();
      const auto pick = std::min<std::size_t>(
          static_cast<std::size_t>(uniform01(rng) * static_cast<double>(nb)), nb - 1);
      const Point local = cell.site_point(cell.bulk_sites()[pick]);
      for (int i = 0; i < d; ++i) x0[i] = origin_cell[i] + local[i];
    }
    MicroState st = walker.make_state(x0);
    std::vector<double> z0(d), z(d), disp(d), values(n_obs);
    walker.macro_position(st, z0);
    std::int64_t taken = 0;
    for (std::size_t c = 0; c < steps.size(); ++c) {
      while (taken < steps[c] && !st.absorbed()) {
        walker.advance(st, rng);
        ++taken;
      }
      if (!st.absorbed()) {
        walker.macro_position(st, z);
        for (int i = 0; i < d; ++i) disp[i] = z[i] - z0[i];
      }
      for (std::size_t k = 0; k < n_obs; ++k) values[k] = options.observables[k](z, st.label);
      acc[c].add(st.label, disp, values);
    }
  };
  auto total = run_chunked(options.n_paths, options.threads, make, path);

  EnsembleStats out;
  out.dimension = d;
  out.num_astral = cell.num_astral();
  for (const auto& o : options.observables) out.observable_ids.push_back(o.id);
  const double e2 = walker.epsilon() * walker.epsilon();
  for (std::size_t c = 0; c < times.size(); ++c)
    out.checkpoints.push_back(total[c].finish(static_cast<double>(steps[c]) * e2));
  return out;
}

SemigroupEstimate empirical_semigroup(const PeriodCell& cell, double epsilon,
                                      const Observable& observable, double t,
                                      std::size_t n_paths, std::uint64_t seed,
                                      const Point& start, unsigned threads) {
  MicroRunOptions o;
  o.epsilon = epsilon;
  o.checkpoints = {t};
  o.n_paths = n_paths;
  o.seed = seed;
  o.start = start;
  o.observables = {observable};
  o.threads = threads;
  const auto stats = run_paths(cell, o);
  const auto& c = stats.checkpoints.front();
  return {c.observable_mean.front(), c.observable_stderr.front()};
}

}  // namespace hcw
