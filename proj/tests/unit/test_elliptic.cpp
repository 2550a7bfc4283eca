#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "fml/elliptic/conformal_solve.hpp"
#include "fml/elliptic/green.hpp"
#include "fml/elliptic/sobolev.hpp"
#include "fml/geometry/golden.hpp"

using namespace fml;

namespace {

constexpr double kPi = std::numbers::pi;

ChartPtr chart(double rmax, int nr, int nt = 8, int nf = 4, double rmin = 1.0) {
  return build_chart(3, 4, FiberSpec::circle(2 * kPi, nf), RadialSpec{rmin, rmax, nr}, AngularSpec{nt, 2 * nt});
}

std::vector<double> bump_potential(const FiberedChart& c, double amp = 0.1) {
  std::vector<double> f(c.size());
  for (std::size_t i = 0; i < f.size(); ++i) {
    const Point p = c.point(i);
    const double t = (p.radius() - 2.0) / 2.0;
    f[i] = std::abs(t) < 1.0 ? amp * std::pow(1 - t * t, 3) * (1.0 + 0.5 * std::cos(p.y[0])) : 0.0;
  }
  return f;
}

std::vector<double> random_compact(const FiberedChart& c, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> U(-1, 1);
  std::vector<double> v(c.size(), 0.0);
  for (std::size_t i = 0; i < c.size(); ++i) {
    const int ir = c.decompose(i).ir;
    if (ir >= 2 && ir < c.nr() - 3) v[i] = U(rng);
  }
  return v;
}

}  // namespace

TEST(AssembleOperator, AnnihilatesConstantsInInterior) {
  const auto c = chart(50, 24);
  const auto op = assemble_operator(flat_metric(c), std::vector<double>(c->size(), 0.0));
  const auto lu = op.apply(std::vector<double>(c->size(), 1.0));
  for (std::size_t i = 0; i < c->size(); ++i) EXPECT_NEAR(lu[i], 0.0, 1e-12);
}

TEST(AssembleOperator, SymmetricAndNegativeSemidefinite) {
  const auto c = chart(50, 24);
  const auto m = sample_golden(c, "compact_bump", {{"amplitude", 0.2}});
  const auto op = assemble_operator(m, bump_potential(*c));
  const auto u = random_compact(*c, 1), v = random_compact(*c, 2);
  const auto lu = op.apply(u), lv = op.apply(v);
  const auto& w = op.laplace.weights;
  const double a = weighted_inner(w, lu, v), b = weighted_inner(w, u, lv);
  EXPECT_LE(std::abs(a - b), 1e-10 * std::max(std::abs(a), 1.0));
  EXPECT_LE(weighted_inner(w, lu, u), 0.0);
  EXPECT_EQ(op.system.max_asymmetry(), 0.0);
}

TEST(AssembleOperator, RejectsMismatchedPotential) {
  const auto c = chart(50, 24);
  EXPECT_THROW(assemble_operator(flat_metric(c), std::vector<double>(3, 0.0)), Error);
}

TEST(AssembleOperator, CoercivityBoundedAwayFromZero) {
  const auto c = chart(50, 24);
  const auto op = assemble_operator(flat_metric(c), bump_potential(*c));
  const double lambda = smallest_generalized_eigenvalue(op.system, op.laplace.weights);
  EXPECT_GT(lambda, 1e-6);
}

TEST(SolveConformal, ZeroPotentialGivesUnit) {
  const auto c = chart(50, 24);
  const auto s = solve_conformal(flat_metric(c), std::vector<double>(c->size(), 0.0));
  for (double v : s.u.values) EXPECT_EQ(v, 1.0);
  EXPECT_EQ(s.A, 0.0);
  EXPECT_FALSE(s.decay_valid);
}

TEST(SolveConformal, MaximumPrincipleAndPositiveA) {
  const auto c = chart(100, 48);
  ConformalOptions opt;
  opt.support_radius = 4.0;
  const auto s = solve_conformal(flat_metric(c), bump_potential(*c), opt);
  for (double v : s.u.values) {
    EXPECT_GT(v, 0.0);
    EXPECT_LE(v, 1.0 + 1e-8);
  }
  EXPECT_GT(s.A, 0.0);
  EXPECT_LE(s.residual_norm, 1e-10);
  ASSERT_TRUE(s.decay_valid);
  EXPECT_NEAR(s.decay.exponent, 1.0, 0.15);
}

TEST(SolveConformal, FluxAndFitAgree) {
  const auto c = chart(100, 48);
  ConformalOptions opt;
  opt.support_radius = 4.0;
  const auto s = solve_conformal(flat_metric(c), bump_potential(*c), opt);
  EXPECT_NEAR(s.A_fit / s.A_flux, 1.0, 0.03);
}

TEST(SolveConformal, LinearInSmallPotential) {
  const auto c = chart(100, 48);
  const auto f = bump_potential(*c, 1.0);
  auto scaled = [&](double s) {
    std::vector<double> g(f);
    for (double& v : g) v *= s;
    return solve_conformal(flat_metric(c), g).A / s;
  };
  // A(sf)/s = C int f + O(s); the linear coefficient is the flux of f against u = 1
  std::vector<double> w = assemble_laplace(flat_metric(c)).weights;
  double lin = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) lin += w[i] * f[i];
  lin *= flux_constant(*c);
  const double e2 = std::abs(scaled(1e-2) - lin), e3 = std::abs(scaled(1e-3) - lin);
  EXPECT_LT(e3, e2);
  EXPECT_LT(e3, 0.2 * e2);
}

TEST(SolveConformal, RobinAndDirichletConverge) {
  auto gap = [](double rmax, int nr) {
    const auto c = chart(rmax, nr);
    const auto f = bump_potential(*c);
    ConformalOptions rob, dir;
    dir.solver.outer = OuterCondition::kDirichlet;
    return std::abs(solve_conformal(flat_metric(c), f, rob).A - solve_conformal(flat_metric(c), f, dir).A);
  };
  const double g1 = gap(50, 40), g2 = gap(100, 46);
  EXPECT_LE(g2, 0.5 * g1 * 1.05);
}

TEST(SolveConformal, OuterRadiusDoublingStable) {
  const auto a = chart(100, 48), b = chart(200, 56);
  const double A1 = solve_conformal(flat_metric(a), bump_potential(*a)).A;
  const double A2 = solve_conformal(flat_metric(b), bump_potential(*b)).A;
  EXPECT_NEAR(A2 / A1, 1.0, 0.01);
}

TEST(SolveConformal, Errors) {
  const auto c = chart(50, 24);
  const auto f = bump_potential(*c);
  ConformalOptions narrow;
  narrow.support_radius = 3.0;
  EXPECT_THROW(solve_conformal(flat_metric(c), f, narrow), Error);
  ConformalOptions neumann;
  neumann.solver.outer = OuterCondition::kNeumann;
  EXPECT_THROW(solve_conformal(flat_metric(c), f, neumann), Error);
  std::vector<double> neg(f);
  for (double& v : neg) v = -v;
  ConformalOptions small;
  small.epsilon0 = 1e-6;
  try {
    solve_conformal(flat_metric(c), neg, small);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kNumerical);
  }
}

TEST(GreenFunction, FlatProductAsymptotics) {
  const double L = 2 * kPi;
  const auto c = build_chart(3, 4, FiberSpec::circle(L, 8), RadialSpec{0.5, 100, 64}, AngularSpec{16, 32});
  int irs = 0;
  while (c->radius(irs) < 2.0) ++irs;
  const std::size_t src = c->index(irs, 8, 0, 0);
  const GreenField g = green_function(flat_metric(c), src);
  EXPECT_GE(g.fit.exponent, 0.95);
  EXPECT_LE(g.fit.exponent, 1.05);
  EXPECT_GE(g.gradient_fit.exponent, 2.0 - 0.1);
  EXPECT_FALSE(g.negativity_flag);
  const Point ps = c->point(src);
  double worst = 0.0;
  for (std::size_t i = 0; i < c->size(); ++i) {
    const int ir = c->decompose(i).ir;
    if (c->radius(ir) < 8.0 || c->radius(ir) > 60.0) continue;
    const Point p = c->point(i);
    double rho2 = 0.0;
    for (int a = 0; a < 3; ++a) rho2 += (p.x[a] - ps.x[a]) * (p.x[a] - ps.x[a]);
    const double oracle = periodic_green_closed_form(std::sqrt(rho2), p.y[0] - ps.y[0], L);
    worst = std::max(worst, std::abs(g.G[i] / oracle - 1.0));
  }
  EXPECT_LT(worst, 0.02);
}

TEST(GreenFunction, ClosedFormMatchesImageSum) {
  const double L = 2 * kPi;
  for (double rho : {0.5, 2.0, 7.0})
    for (double t : {0.0, 1.0, 3.0}) {
      double sum = 0.0;
      for (int m = -20000; m <= 20000; ++m) {
        const double d2 = rho * rho + (t + m * L) * (t + m * L);
        sum += 1.0 / (4.0 * kPi * kPi * d2);
      }
      // tail of the image sum beyond |m| = M is about 2 / (4 pi^2 L^2 M)
      sum += 2.0 / (4.0 * kPi * kPi * L * L * 20000.0);
      EXPECT_NEAR(periodic_green_closed_form(rho, t, L) / sum, 1.0, 1e-6);
    }
}

TEST(GreenFunction, SymmetricInSourcePairs) {
  const auto c = chart(50, 24);
  const auto m = sample_golden(c, "compact_bump", {{"amplitude", 0.2}});
  const std::size_t p = c->index(6, 2, 3, 1), q = c->index(6, 5, 11, 2);
  const GreenField gp = green_function(m, p), gq = green_function(m, q);
  EXPECT_NEAR(gp.G[q] / gq.G[p], 1.0, 1e-6);
}

TEST(GreenFunction, SourceNearBoundaryRejected) {
  const auto c = chart(50, 24);
  EXPECT_THROW(green_function(flat_metric(c), c->index(2, 0, 0, 0)), Error);
  EXPECT_THROW(green_function(flat_metric(c), c->index(21, 0, 0, 0)), Error);
}

TEST(RoughDecay, SyntheticProfiles) {
  std::vector<double> r, slow, fast;
  for (int i = 0; i < 30; ++i) {
    r.push_back(std::pow(10.0, 0.1 * i));
    slow.push_back(std::pow(r.back(), -0.5));
    fast.push_back(std::pow(r.back(), -2.0));
  }
  EXPECT_FALSE(rough_decay_check(r, slow, 3, 0.1, {10, 30}).holds);
  const auto ok = rough_decay_check(r, fast, 3, 0.1, {10, 30});
  EXPECT_TRUE(ok.holds);
  EXPECT_GT(ok.constant, 0.0);
}

TEST(RoughDecay, FlatGreenFunction) {
  const auto c = chart(100, 48, 8, 4, 0.5);
  const GreenField g = green_function(flat_metric(c), c->index(12, 4, 0, 0));
  EXPECT_TRUE(rough_decay_check(g, 0.1).holds);
}

TEST(Sobolev, RatioPositiveAndHomogeneous) {
  const auto c = chart(30, 32);
  const auto op = assemble_laplace(flat_metric(c), OuterCondition::kNeumann);
  std::mt19937 rng(3);
  SobolevTrials t;
  t.domain_radius = 5.0;
  std::vector<double> f;
  do f = sobolev_trial(*c, rng, t);
  while (f[0] != 0.0);
  const double a = sobolev_ratio(op, f, 4);
  for (double& v : f) v *= 2.0;
  EXPECT_GT(a, 0.0);
  EXPECT_TRUE(std::isfinite(a));
  EXPECT_NEAR(sobolev_ratio(op, f, 4), a, 1e-12 * a);
}

TEST(Sobolev, BoxQuadratureMatchesGridOnResolvedTrial) {
  const auto c = chart(10, 80, 24, 8, 0.5);
  const auto m = flat_metric(c);
  SobolevTrial tr;
  tr.center = {0.0, 0.0, 4.0};
  tr.width = 2.5;
  tr.mode = 1;
  tr.amplitude = 0.3;
  std::vector<double> f(c->size());
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = tr.value(c->point(i), 2 * kPi);
  const double grid = sobolev_ratio(assemble_laplace(m, OuterCondition::kNeumann), f, 4);
  EXPECT_NEAR(sobolev_ratio(m, tr, 32, 16) / grid, 1.0, 0.03);
}

TEST(Sobolev, IndependentOfBallRadius) {
  const auto c = chart(60, 16, 4, 4, 0.5);
  for (const char* name : {"flat_product", "schwarzschild_product"}) {
    const auto m = sample_golden(c, name, {});
    SobolevTrials t;
    t.count = 12;
    t.domain_radius = 8.0;
    const auto small = estimate_sobolev_constant(m, t);
    t.domain_radius = 16.0;
    const auto large = estimate_sobolev_constant(m, t);
    EXPECT_GT(small.constant, 0.0);
    for (std::size_t i = 1; i < small.running_max.size(); ++i)
      EXPECT_GE(small.running_max[i], small.running_max[i - 1]);
    EXPECT_NEAR(large.constant / small.constant, 1.0, 0.05) << name;
  }
  EXPECT_NEAR(epsilon0_from_sobolev(2.0), 0.125, 1e-15);
}
