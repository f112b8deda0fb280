#include <gtest/gtest.h>

#include <random>

#include "hcw/cell.hpp"
#include "hcw/corrector.hpp"
#include "hcw/microsim.hpp"
#include "hcw/observable.hpp"
#include "oracles.hpp"
#include "random_cells.hpp"

namespace {

namespace ht = hcw::testing;

constexpr int kCases = 40;

hcw::CellConfig shifted(const hcw::CellConfig& c, const hcw::Point& by) {
  hcw::CellConfig out = c;
  auto move = [&](hcw::Point p) {
    for (std::size_t i = 0; i < p.size(); ++i) p[i] += by[i];
    return ht::wrap_point(p, c.period);
  };
  for (auto& a : out.astral_sites) a = move(a);
  for (auto* list : {&out.p0, &out.d, &out.v})
    for (auto& r : *list) r.site = move(r.site);
  return out;
}

TEST(Properties, CorrectorInvariantsOnRandomCells) {
  std::mt19937_64 rng(2024);
  for (int i = 0; i < kCases; ++i) {
    ht::RandomCellSpec spec;
    spec.dimension = 1 + i % 3;
    spec.max_period = spec.dimension == 3 ? 3 : 5;
    const auto c = ht::random_cell_config(rng, spec);
    const auto cell = hcw::build_cell(c);
    const auto set = hcw::solve_correctors(cell);
    const auto eff = hcw::compute_effective(cell);
    SCOPED_TRACE("case " + std::to_string(i));
    EXPECT_LT(set.h.residual, 1e-10);
    EXPECT_LT(set.h.fredholm_residual, 1e-12);
    EXPECT_LT(set.g.residual, 1e-10);
    for (const auto& q : set.q) {
      EXPECT_LT(q.residual, 1e-10);
      EXPECT_LT(q.fredholm_residual, 1e-12);
      EXPECT_NEAR(q.q.mean(), 0.0, 1e-12);
    }
    for (Eigen::Index k = 0; k < set.h.h.cols(); ++k) EXPECT_NEAR(set.h.h.col(k).mean(), 0.0, 1e-12);
    EXPECT_GT(hcw::min_eigenvalue(eff.theta), 0.0);
    EXPECT_LT((eff.theta - eff.theta.transpose()).cwiseAbs().maxCoeff(), 1e-15);
    for (Eigen::Index r = 0; r < eff.alpha.rows(); ++r)
      for (Eigen::Index s = 0; s < eff.alpha.cols(); ++s)
        if (r != s) {
          EXPECT_GE(eff.alpha(r, s), 0.0);
        }
    for (Eigen::Index r = 0; r < eff.generator.rows(); ++r)
      EXPECT_NEAR(eff.generator.row(r).sum(), 0.0, 1e-12);
  }
}

TEST(Properties, SmallCellsMatchLeastSquaresOracle) {
  std::mt19937_64 rng(77);
  int checked = 0;
  for (int i = 0; i < 200 && checked < kCases; ++i) {
    ht::RandomCellSpec spec;
    spec.dimension = 1 + i % 2;
    spec.max_period = spec.dimension == 1 ? 11 : 4;
    spec.max_bulk = 10;
    const auto c = ht::random_cell_config(rng, spec);
    const auto cell = hcw::build_cell(c);
    const auto dense = ht::dense_cell(c);
    const Eigen::MatrixXd op =
        dense.p0 - Eigen::MatrixXd::Identity(dense.p0.rows(), dense.p0.cols());
    const auto h = hcw::solve_corrector_h(cell);
    for (int k = 0; k < c.dimension; ++k) {
      const Eigen::VectorXd ref = ht::least_squares_oracle(op, ht::dense_linear_rhs(c, dense, k));
      for (std::size_t b = 0; b < dense.bulk.size(); ++b) {
        const auto site = cell.site_index(std::span<const int>(dense.bulk[b]));
        EXPECT_NEAR(h.h(static_cast<Eigen::Index>(cell.bulk_index(site)), k),
                    ref(static_cast<Eigen::Index>(b)), 1e-10);
      }
    }
    ++checked;
  }
  EXPECT_EQ(checked, kCases);
}

TEST(Properties, EffectiveParametersAreTranslationInvariant) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 15; ++i) {
    const auto c = ht::random_cell_config(rng);
    const auto a = hcw::compute_effective(hcw::build_cell(c));
    const auto b = hcw::compute_effective(hcw::build_cell(shifted(c, {1 + i % 2, 2})));
    EXPECT_LT((a.theta - b.theta).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((a.b - b.b).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((a.alpha - b.alpha).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Properties, HoldingScalesThetaAndKeepsDrift) {
  std::mt19937_64 rng(9);
  for (int i = 0; i < 15; ++i) {
    auto c = ht::random_cell_config(rng);
    const auto base = hcw::compute_effective(hcw::build_cell(c));
    const double hold = 0.25;
    std::set<hcw::Point> astral(c.astral_sites.begin(), c.astral_sites.end());
    for (auto& r : c.p0)
      if (!astral.count(r.site)) r.value *= 1.0 - hold;
    const hcw::Point zero(static_cast<std::size_t>(c.dimension), 0);
    for (auto& r : c.p0)
      if (!astral.count(r.site) && r.offset == zero) r.value += hold;
    const auto held = hcw::compute_effective(hcw::build_cell(c));
    EXPECT_LT((held.theta - (1.0 - hold) * base.theta).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((held.b - base.b).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Properties, RandomRingsMatchSeriesFormula) {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(0.02, 0.45);
  std::uniform_int_distribution<int> len(2, 12);
  for (int i = 0; i < kCases; ++i) {
    std::vector<double> cond(static_cast<std::size_t>(len(rng)));
    for (auto& x : cond) x = u(rng);
    const auto eff = hcw::compute_effective(hcw::build_cell(ht::ring_cell(cond)));
    EXPECT_NEAR(eff.theta(0, 0) / ht::ring_theta(cond), 1.0, 1e-12);
  }
}

TEST(Properties, AssembledRowsAreStochasticUpToEpsMax) {
  std::mt19937_64 rng(13);
  for (int i = 0; i < kCases; ++i) {
    const auto cell = hcw::build_cell(ht::random_cell_config(rng));
    for (double f : {1.0, 0.5, 0.01}) {
      const auto q = hcw::assemble_transition(cell, f * cell.eps_max());
      for (std::size_t s = 0; s < cell.num_sites(); ++s) {
        EXPECT_NEAR(q.row_sum(s), 1.0, 1e-12);
        for (const auto& e : q.row(s)) {
          EXPECT_GE(e.prob, 0.0);
          EXPECT_LE(e.prob, 1.0);
        }
      }
    }
  }
}

TEST(Properties, MicroSemigroupIsAContraction) {
  std::mt19937_64 rng(17);
  for (int i = 0; i < 5; ++i) {
    const auto cell = hcw::build_cell(ht::random_cell_config(rng));
    const double eps = std::min(0.25, cell.eps_max());
    hcw::Gaussian g{Eigen::Vector2d(0.1, 0.0), 0.4, 1.0};
    const auto obs = hcw::gaussian_observable(g, cell.num_astral(), -0.8, 0.6);
    const auto start = cell.site_point(cell.bulk_sites().front());
    const auto est = hcw::empirical_semigroup(cell, eps, obs, 0.5, 500, 100 + i, start);
    EXPECT_LE(std::abs(est.mean), obs.sup_norm);
  }
}

}  // namespace
