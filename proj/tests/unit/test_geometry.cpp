#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "fml/geometry/conformal.hpp"
#include "fml/geometry/curvature.hpp"
#include "fml/geometry/golden.hpp"
#include "fml/geometry/laplace.hpp"

using namespace fml;

namespace {

constexpr double kPi = std::numbers::pi;

ChartPtr standard_chart() {
  return build_chart(3, 4, FiberSpec::circle(2 * kPi, 12), RadialSpec{1.0, 100.0, 48}, AngularSpec{16, 32});
}

ChartPtr small_chart(int nr = 48, double rmin = 1.0, double rmax = 100.0, int nt = 8, int nf = 4) {
  return build_chart(3, 4, FiberSpec::circle(2 * kPi, nf), RadialSpec{rmin, rmax, nr}, AngularSpec{nt, 2 * nt});
}

double interior_max(const FiberedChart& c, const std::vector<double>& f) {
  double m = 0.0;
  for (std::size_t i = 0; i < c.size(); ++i)
    if (interior_shell(c, c.decompose(i).ir)) m = std::max(m, std::abs(f[i]));
  return m;
}

}  // namespace

TEST(BuildChart, PointCountMatchesGridProduct) {
  const auto c = standard_chart();
  EXPECT_EQ(c->size(), 48u * 512u * 12u);
  EXPECT_EQ(c->n(), 4);
  EXPECT_NEAR(c->fiber_volume(), 2 * kPi, 1e-15);
  EXPECT_NEAR(c->radius(0), 1.0, 1e-15);
  EXPECT_NEAR(c->radius(47), 100.0, 1e-12);
  for (int i = 1; i < c->nr(); ++i) EXPECT_GT(c->radius(i), c->radius(i - 1));
}

TEST(BuildChart, RejectsSmallEuclideanRank) {
  try {
    build_chart(2, 4, FiberSpec::torus({1, 1}, {4, 4}), RadialSpec{}, AngularSpec{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_STREQ(e.what(), "k must be >= 3");
    EXPECT_EQ(e.kind(), ErrorKind::kDomain);
  }
}

TEST(BuildChart, RejectsUnsupportedRequests) {
  EXPECT_THROW(build_chart(4, 5, FiberSpec::circle(1, 4), RadialSpec{}, AngularSpec{}), Error);
  EXPECT_THROW(build_chart(3, 3, FiberSpec{}, RadialSpec{}, AngularSpec{}), Error);
  FiberSpec curved = FiberSpec::circle(1, 4);
  curved.flat = false;
  EXPECT_THROW(build_chart(3, 4, curved, RadialSpec{}, AngularSpec{}), Error);
  EXPECT_THROW(build_chart(3, 4, FiberSpec::circle(1, 3), RadialSpec{}, AngularSpec{}), Error);
  EXPECT_THROW(build_chart(3, 4, FiberSpec::circle(1, 4), RadialSpec{1, 10, 3}, AngularSpec{}), Error);
  EXPECT_THROW(build_chart(3, 4, FiberSpec::circle(1, 4), RadialSpec{}, AngularSpec{8, 15}), Error);
}

TEST(BuildChart, TorusFiberGivesFiveDimensions) {
  const auto c = build_chart(3, 5, FiberSpec::torus({2 * kPi, 2 * kPi}, {4, 6}), RadialSpec{1, 10, 8},
                             AngularSpec{4, 8});
  EXPECT_EQ(c->n(), 5);
  EXPECT_EQ(c->fiber_dim(), 2);
  EXPECT_EQ(c->size(), 8u * 32u * 24u);
  EXPECT_NEAR(c->fiber_volume(), 4 * kPi * kPi, 1e-12);
}

TEST(BuildChart, IndexRoundTrip) {
  const auto c = small_chart(6);
  for (std::size_t i = 0; i < c->size(); i += 7) {
    const NodeIndex idx = c->decompose(i);
    EXPECT_EQ(c->index(idx.ir, idx.it, idx.ip, idx.fiber), i);
  }
}

TEST(EvalMetric, FlatIsIdentity) {
  const auto c = small_chart(8, 1, 10);
  const auto m = flat_metric(c);
  const SmallMatrix g = eval_metric(m, ChartPoint{3.3, 0.7, 1.2, {0.4}});
  EXPECT_TRUE(g.isApprox(SmallMatrix::Identity(4, 4)));
}

TEST(EvalMetric, SchwarzschildProductClosedForm) {
  const auto c = small_chart(8, 1, 10);
  const auto m = sample_golden(c, "schwarzschild_product", {{"m0", 0.1}});
  const SmallMatrix g = eval_metric(m, ChartPoint{2.0, 0.3, 0.1, {0.0}});
  // (1 + 0.1/2)^{4/(4-2)}
  EXPECT_NEAR(g(0, 0), 1.05 * 1.05, 1e-14);
  EXPECT_NEAR(g(3, 3), 1.1025, 1e-14);
  EXPECT_NEAR(g(0, 1), 0.0, 1e-15);
}

TEST(EvalMetric, CoordinatePerturbation) {
  const auto c = small_chart(8, 1, 20);
  ClosedForm form{"h11", {}, [](const Point& p) {
                    SmallMatrix g = SmallMatrix::Identity(4, 4);
                    g(0, 0) += 1.0 / p.radius();
                    return g;
                  }};
  const auto m = sample_metric(c, form, 1.0);
  EXPECT_NEAR(eval_metric(m, ChartPoint{10.0, 1.0, 2.0, {0.5}})(0, 0), 1.1, 1e-14);
}

TEST(EvalMetric, InterpolationAndHull) {
  const auto c = small_chart(64, 1, 20, 16, 8);
  auto m = sample_golden(c, "schwarzschild_product", {{"m0", 0.1}});
  m.closed_form.reset();
  const ChartPoint p{3.7, 0.05, 1.9, {1.3}};
  const double exact = std::pow(1.0 + 0.1 / 3.7, 2);
  EXPECT_NEAR(eval_metric(m, p)(1, 1), exact, 2e-4);
  EXPECT_THROW(eval_metric(m, ChartPoint{30.0, 1.0, 1.0, {0.0}}), Error);
  EXPECT_THROW(eval_metric(m, ChartPoint{0.5, 1.0, 1.0, {0.0}}), Error);
}

TEST(EvalMetric, PositiveDefiniteAndDecayAudit) {
  const auto c = small_chart(48);
  const auto m = sample_golden(c, "schwarzschild_product", {{"m0", 0.05}});
  EXPECT_GT(min_eigenvalue(m), 0.0);
  const DecayFit f = decay_audit(m);
  EXPECT_GE(f.exponent, m.tau - 0.1);
}

TEST(Christoffel, FlatVanishesExactly) {
  const auto c = small_chart(12, 1, 10);
  const auto cf = christoffel(flat_metric(c));
  for (const auto& comp : cf.christoffel.data)
    for (double v : comp) EXPECT_EQ(v, 0.0);
}

TEST(Christoffel, ConformalTraceMatchesAnalytic) {
  // g = u^2 g_hat (n = 4): Gamma_c = g^{ab} Gamma_abc = (2 - n) d_c u / u
  const double m0 = 0.05;
  const auto c = small_chart(96, 2, 40, 16, 4);
  const auto m = sample_golden(c, "schwarzschild_product", {{"m0", m0}});
  const auto cf = christoffel(m).christoffel;
  double worst = 0.0, scale = 0.0;
  for (std::size_t i = 0; i < c->size(); i += 3) {
    const int ir = c->decompose(i).ir;
    if (!interior_shell(*c, ir)) continue;
    const Point p = c->point(i);
    const double r = p.radius(), u = 1 + m0 / r;
    for (int cc = 0; cc < 3; ++cc) {
      double tr = 0.0;
      for (int a = 0; a < 4; ++a) tr += cf(a, a, cc)[i] / (u * u);
      const double du = -m0 * p.x[cc] / (r * r * r);
      const double oracle = (2.0 - 4.0) * du / u;
      worst = std::max(worst, std::abs(tr - oracle));
      scale = std::max(scale, std::abs(oracle));
    }
  }
  EXPECT_LT(worst, 2e-3 * scale);
}

TEST(Christoffel, SingleComponentBox) {
  // g_11 = 1 + eps sin(x^2): Gamma_112 = 1/2 d_2 g_11... with the lowered-first-two
  // convention Gamma_{11,2} = -1/2 g_11,2 and Gamma_{12,1} = 1/2 g_11,2.
  const int N = 40;
  const double h = 2 * kPi / N, eps = 0.1;
  BoxDifferentiator d({N, N, N}, {h, h, h}, {true, true, true});
  PackedTensor g(6, std::vector<double>(d.size(), 0.0));
  for (std::size_t i = 0; i < d.size(); ++i) {
    const int j = static_cast<int>((i / d.stride(1)) % N);
    g[sym_index(0, 0, 3)][i] = 1.0 + eps * std::sin(j * h);
    g[sym_index(1, 1, 3)][i] = 1.0;
    g[sym_index(2, 2, 3)][i] = 1.0;
  }
  const auto cf = christoffel(g, 3, d);
  for (std::size_t i = 0; i < d.size(); i += 97) {
    const int j = static_cast<int>((i / d.stride(1)) % N);
    const double dg = eps * std::cos(j * h);
    EXPECT_NEAR(cf(0, 1, 0)[i], 0.5 * dg, 3e-3 * eps);
    EXPECT_NEAR(cf(0, 0, 1)[i], -0.5 * dg, 3e-3 * eps);
    EXPECT_EQ(cf(1, 1, 0)[i], 0.0);
  }
}

TEST(ScalarCurvature, FlatIsExactlyZero) {
  const auto c = small_chart(16, 1, 10);
  for (double v : scalar_curvature(flat_metric(c)).values) EXPECT_EQ(v, 0.0);
}

TEST(ScalarCurvature, SchwarzschildProductIsScalarFlat) {
  const auto c = small_chart(200, 2, 40, 8, 4);
  const auto sc = scalar_curvature(sample_golden(c, "schwarzschild_product", {{"m0", 0.05}}));
  EXPECT_LT(interior_max(*c, sc.values), 1e-6);
}

TEST(ScalarCurvature, RoundSphereFixture) {
  const int nt = 64, np = 64;
  const double t0 = 0.2, t1 = kPi - 0.2, ht = (t1 - t0) / (nt - 1), hp = 2 * kPi / np;
  BoxDifferentiator d({nt, np}, {ht, hp}, {false, true});
  PackedTensor g(3, std::vector<double>(d.size()));
  for (int i = 0; i < nt; ++i)
    for (int j = 0; j < np; ++j) {
      const double s = std::sin(t0 + i * ht);
      g[0][i * np + j] = 1.0;
      g[1][i * np + j] = 0.0;
      g[2][i * np + j] = s * s;
    }
  const auto sc = scalar_curvature(g, 2, d);
  for (int i = 2; i < nt - 2; ++i) EXPECT_NEAR(sc[i * np + 5], 2.0, 0.02);
}

TEST(ScalarCurvature, SecondOrderConvergence) {
  // ricci_probe has angular structure, so both radial and angular stencils matter
  auto run = [](int nr, int nt) {
    const auto c = build_chart(3, 4, FiberSpec::circle(2 * kPi, 4), RadialSpec{2, 20, nr}, AngularSpec{nt, 2 * nt});
    const auto sc = scalar_curvature(sample_golden(c, "ricci_probe", {{"m0", 0.05}, {"d", 0.05}}));
    double worst = 0.0;
    for (std::size_t i = 0; i < c->size(); ++i) {
      const int ir = c->decompose(i).ir;
      if (c->radius(ir) >= 3.0 && c->radius(ir) <= 15.0) worst = std::max(worst, std::abs(sc[i]));
    }
    return worst;
  };
  const double coarse = run(24, 8), fine = run(47, 16);
  EXPECT_GT(coarse / fine, 3.0);
}

TEST(Ricci, FlatVanishes) {
  const auto c = small_chart(12, 1, 10);
  for (const auto& comp : ricci(flat_metric(c)).ricci)
    for (double v : comp) EXPECT_EQ(v, 0.0);
}

TEST(Ricci, TraceMatchesScalarCurvature) {
  const auto c = standard_chart();
  const auto m = sample_golden(c, "schwarzschild_product", {{"m0", 0.05}});
  const auto ric = ricci(m).ricci;
  const auto tr = ricci_trace(m.g.components, ric, 4);
  const auto sc = scalar_curvature(m);
  double gap = 0.0, scale = 0.0;
  for (std::size_t i = 0; i < c->size(); ++i) {
    if (!interior_shell(*c, c->decompose(i).ir)) continue;
    gap = std::max(gap, std::abs(tr[i] - sc[i]));
    for (const auto& comp : ric) scale = std::max(scale, std::abs(comp[i]));
  }
  EXPECT_LT(gap, 1e-3 * scale);
}

TEST(Ricci, OuterShellDecay) {
  const auto c = small_chart(64, 1, 200, 8, 4);
  const auto ric = ricci(sample_golden(c, "schwarzschild_product", {{"m0", 0.05}})).ricci;
  std::vector<double> shell(c->nr(), 0.0);
  for (std::size_t i = 0; i < c->size(); ++i) {
    const int ir = c->decompose(i).ir;
    for (const auto& comp : ric) shell[ir] = std::max(shell[ir], std::abs(comp[i]));
  }
  const DecayFit f = fit_decay(c->radii(), shell);
  EXPECT_GE(f.exponent, 1.0 + 2.0 - 0.1);
}

TEST(LaplaceBeltrami, HarmonicFunctionsOnFlatChart) {
  const auto c = standard_chart();
  const auto m = flat_metric(c);
  const auto inv_r = laplace_beltrami(m, sample_scalar(c, [](const Point& p) { return 1.0 / p.radius(); }));
  for (std::size_t i = 0; i < c->size(); ++i) {
    const int ir = c->decompose(i).ir;
    if (ir == 0 || ir == c->nr() - 1) continue;
    const double r = c->radius(ir);
    EXPECT_NEAR(inv_r[i] * r * r * r, 0.0, 1e-9);
  }
  // x^1 is harmonic up to the angular truncation, first order on the pole rows
  // and second order in the volume-weighted mean
  auto lap_x = [](int nt) {
    const auto cc = build_chart(3, 4, FiberSpec::circle(2 * kPi, 4), RadialSpec{1, 10, 64}, AngularSpec{nt, 2 * nt});
    const auto m = flat_metric(cc);
    const auto op = assemble_laplace(m, OuterCondition::kNeumann);
    const auto l = laplace_beltrami(m, sample_scalar(cc, [](const Point& p) { return p.x[0]; }));
    double s = 0.0, w = 0.0;
    for (std::size_t i = 0; i < cc->size(); ++i) {
      const int ir = cc->decompose(i).ir;
      if (ir == 0 || ir == cc->nr() - 1) continue;
      const double v = l[i] * cc->radius(ir);
      s += op.weights[i] * v * v;
      w += op.weights[i];
    }
    return std::sqrt(s / w);
  };
  const double e8 = lap_x(8), e16 = lap_x(16);
  EXPECT_LT(e16, 0.02);
  EXPECT_GT(e8 / e16, 3.0);
}

TEST(LaplaceBeltrami, PowerLawMatchesLemmaFormula) {
  const auto c = standard_chart();
  const double eps = 0.3;
  const auto l = laplace_beltrami(flat_metric(c),
                                  sample_scalar(c, [&](const Point& p) { return std::pow(p.radius(), -1 + eps); }));
  for (int ir = 1; ir < c->nr() - 1; ++ir) {
    const double r = c->radius(ir);
    const double oracle = -eps * (1 - eps) * std::pow(r, -3 + eps);
    EXPECT_NEAR(l[c->index(ir, 3, 5, 1)] / oracle, 1.0, 5e-3);
  }
}

TEST(LaplaceBeltrami, SelfAdjointForVolumeProduct) {
  const auto c = small_chart(24, 1, 10, 8, 6);
  for (const char* name : {"schwarzschild_product", "compact_bump"}) {
    const auto m = sample_golden(c, name, {{"amplitude", 0.2}, {"radius", 6.0}});
    const LaplaceOperator op = assemble_laplace(m, OuterCondition::kNeumann);
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> U(-1, 1);
    std::vector<double> f(c->size(), 0.0), g(c->size(), 0.0);
    for (std::size_t i = 0; i < c->size(); ++i) {
      const int ir = c->decompose(i).ir;
      if (ir > 2 && ir < 20) {
        f[i] = U(rng);
        g[i] = U(rng);
      }
    }
    const auto lf = laplace_beltrami(m, ScalarField(c, f));
    const auto lg = laplace_beltrami(m, ScalarField(c, g));
    const double a = weighted_inner(op.weights, lf.values, g);
    const double b = weighted_inner(op.weights, f, lg.values);
    const double nf = std::sqrt(weighted_inner(op.weights, f, f));
    const double ng = std::sqrt(weighted_inner(op.weights, g, g));
    EXPECT_LE(std::abs(a - b), 1e-10 * nf * ng * 1e3) << name;  // normalized by W-norms
    EXPECT_EQ(op.stiffness.max_asymmetry(), 0.0);
  }
}

TEST(ConformalRescale, UnitFactorIsIdentity) {
  const auto c = small_chart(12, 1, 10);
  const auto m = sample_golden(c, "schwarzschild_product", {{"m0", 0.05}});
  const auto out = conformal_rescale(m, ScalarField(c, 1.0));
  for (std::size_t s = 0; s < out.metric.g.components.size(); ++s)
    EXPECT_EQ(out.metric.g.components[s], m.g.components[s]);
}

TEST(ConformalRescale, RejectsNonPositiveFactor) {
  const auto c = small_chart(12, 1, 10);
  EXPECT_THROW(conformal_rescale(flat_metric(c), ScalarField(c, 0.0)), Error);
}

TEST(ConformalRescale, HarmonicFactorPredictsScalarFlat) {
  const auto c = small_chart(200, 2, 40, 8, 4);
  const double m0 = 0.05;
  const auto u = sample_scalar(c, [&](const Point& p) { return 1.0 + m0 / p.radius(); });
  const auto out = conformal_rescale(flat_metric(c), u);
  const auto direct = scalar_curvature(out.metric);
  EXPECT_LT(interior_max(*c, out.predicted.values), 1e-6);
  EXPECT_LT(interior_max(*c, direct.values), 1e-6);
}

TEST(ConformalRescale, DirectAndPredictedAgree) {
  // a non-harmonic factor, so the identity is tested on nonzero curvature
  const auto c = small_chart(200, 2, 40, 16, 4);
  const auto u = sample_scalar(c, [](const Point& p) {
    const double r = p.radius();
    return 1.0 + 0.05 * std::exp(-(r - 6) * (r - 6) / 4.0) + 0.01 * p.x[2] / (r * r);
  });
  const auto out = conformal_rescale(flat_metric(c), u);
  const auto direct = scalar_curvature(out.metric);
  double gap = 0.0, scale = 0.0;
  for (std::size_t i = 0; i < c->size(); ++i) {
    if (!interior_shell(*c, c->decompose(i).ir)) continue;
    gap = std::max(gap, std::abs(direct[i] - out.predicted[i]));
    scale = std::max(scale, std::abs(out.predicted[i]));
  }
  EXPECT_LT(gap, 1e-2 * scale);
}
