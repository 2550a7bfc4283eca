#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "fml/compactify/pipeline.hpp"
#include "fml/geometry/golden.hpp"

using namespace fml;

namespace {

constexpr double kPi = std::numbers::pi;

ChartPtr chart(int nr, double rmax, int nt = 8, double rmin = 1.0) {
  return build_chart(3, 4, FiberSpec::circle(2 * kPi, 4), RadialSpec{rmin, rmax, nr}, AngularSpec{nt, 2 * nt});
}

MetricField conformal_flat(const ChartPtr& c, const std::function<double(double)>& u) {
  ClosedForm form{"conformal", {}, [u](const Point& p) {
                    const double w = u(p.radius());
                    return SmallMatrix(w * w * SmallMatrix::Identity(4, 4));
                  }};
  return sample_metric(c, form, 1.0);
}

double max_abs_on(const FiberedChart& c, const ScalarField& f, double lo, double hi) {
  double m = 0.0;
  for (int ir = 2; ir <= c.nr() - 3; ++ir) {
    if (c.radius(ir) < lo || c.radius(ir) > hi) continue;
    for (std::size_t j = c.index(ir, 0, 0, 0); j < c.index(ir, 0, 0, 0) + c.shell_size(); ++j)
      m = std::max(m, std::abs(f[j]));
  }
  return m;
}

}  // namespace

TEST(Cutoffs, PhiAndVarphiSupports) {
  for (double t : {0.0, 1.0, 2.0}) EXPECT_EQ(phi_cutoff(t), 1.0);
  for (double t : {3.0, 3.5, 10.0}) EXPECT_EQ(phi_cutoff(t), 0.0);
  EXPECT_NEAR(phi_cutoff(2.5), 0.5, 1e-15);
  const double s = 5.0;
  for (double r : {0.5, 3.0, 5.0, 20.0, 30.0}) EXPECT_EQ(varphi_cutoff(r, s), 0.0) << r;
  for (double r : {10.0, 12.0, 15.0}) EXPECT_EQ(varphi_cutoff(r, s), 1.0) << r;
  for (double r = 5.0; r < 20.0; r += 0.37) {
    EXPECT_GE(varphi_cutoff(r, s), 0.0);
    EXPECT_LE(varphi_cutoff(r, s), 1.0);
  }
}

TEST(Cutoffs, ZetaProfileProperties) {
  for (double eps : {0.001, 0.05, 0.3, 0.9}) {
    const ZetaProfile z(eps);
    double prev = -1e300;
    for (int i = 0; i <= 4000; ++i) {
      const double t = 1.0 - 1.2 * eps + 1.4 * eps * i / 4000.0;
      const double v = z(t);
      EXPECT_GE(v, prev);
      prev = v;
      EXPECT_GE(z.derivative(t), 0.0);
      EXPECT_LE(z.second_derivative(t), 0.0);
      if (t <= z.lower()) {
        EXPECT_EQ(v, t);
      }
      if (t >= z.upper()) {
        EXPECT_EQ(v, 1.0 - eps / 2);
      }
    }
    // C^2 matching at both joins
    for (double t : {z.lower(), z.upper()}) {
      const double h = 1e-7 * eps;
      EXPECT_NEAR(z(t + h), z(t - h) + (z.derivative(t - h) + z.derivative(t + h)) * h, 1e-12);
      EXPECT_NEAR(z.derivative(t + h), z.derivative(t - h), 1e-6);
      EXPECT_NEAR(z.second_derivative(t + h), z.second_derivative(t - h), 1e-5 / eps);
    }
  }
  EXPECT_THROW(ZetaProfile(0.0), Error);
  EXPECT_THROW(ZetaProfile(1.5), Error);
}

TEST(Decompose, MassCoefficient) {
  const auto c = chart(48, 100);
  const Decomposition flat = decompose_metric(flat_metric(c), 0.0);
  EXPECT_EQ(flat.m1, 0.0);
  for (const auto& comp : flat.g_bar)
    for (double v : comp) EXPECT_EQ(v, 0.0);
  EXPECT_NEAR(decompose_metric(flat_metric(c), -0.3).m1, -0.05, 1e-15);
}

TEST(Decompose, SchwarzschildRemainderCarriesNoMass) {
  const auto c = chart(48, 100);
  const auto m = sample_golden(c, "fiber_trace_perturbation", {{"a", 0.05}});
  const double mass = adm_mass(m).extrapolated;
  const Decomposition d = decompose_metric(m, mass);
  EXPECT_NEAR(d.m1, mass / 6, 1e-15);
  EXPECT_LE(std::abs(d.residual), 0.01 * std::abs(mass));
  const auto s = sample_golden(c, "schwarzschild_product", {{"m0", 0.05}});
  EXPECT_LE(std::abs(decompose_metric(s, adm_mass(s).extrapolated).residual), 0.01 * 0.3);
}

TEST(Truncate, PureConformalInputIsUnchanged) {
  const auto c = chart(48, 100);
  const double m0 = 0.05;
  const auto m = sample_golden(c, "schwarzschild_product", {{"m0", m0}});
  const Decomposition d = decompose_metric(m, 6 * m0);
  const MetricField gs = truncate_metric(m, d, 5.0);
  for (std::size_t q = 0; q < gs.g.components.size(); ++q)
    for (std::size_t i = 0; i < c->size(); ++i) EXPECT_NEAR(gs.g.components[q][i], m.g.components[q][i], 1e-14);
  ASSERT_TRUE(gs.closed_form.has_value());
  EXPECT_THROW(truncate_metric(m, d, 30.0), Error);
}

TEST(Truncate, ScalarCurvatureCaseTable) {
  const auto c = chart(120, 200);
  const auto m = sample_golden(c, "fiber_trace_perturbation", {{"a", 0.05}});
  const Decomposition d = decompose_metric(m, adm_mass(m).extrapolated);
  const ScalarField sc = scalar_curvature(m);
  std::vector<double> band;
  for (double sigma : {10.0, 20.0, 40.0}) {
    const MetricField gs = truncate_metric(m, d, sigma);
    const ScalarField sgs = scalar_curvature(gs);
    // r <= 2 sigma: the original metric
    for (int ir = 2; c->radius(ir + 2) <= 2 * sigma; ++ir)
      for (std::size_t j = c->index(ir, 0, 0, 0); j < c->index(ir + 1, 0, 0, 0); ++j)
        EXPECT_NEAR(sgs[j], sc[j], 1e-12);
    // r > 3 sigma: the conformal leading part is scalar-flat up to truncation
    const double band_sc = max_abs_on(*c, sgs, 2 * sigma, 3 * sigma);
    EXPECT_LT(max_abs_on(*c, sgs, 3.3 * sigma, 1e9), 0.05 * band_sc);
    band.push_back(band_sc);
  }
  const double slope = std::log(band[0] / band[2]) / std::log(4.0);
  EXPECT_GE(slope, 1.0 + 2.0 - 0.2);
}

TEST(Step1, ScalarFlatInputIsUntouched) {
  const auto c = chart(64, 200);
  const auto m = sample_golden(c, "schwarzschild_product", {{"m0", 0.05}});
  const Decomposition d = decompose_metric(m, 0.3);
  PipelineOptions opt;
  opt.epsilon0 = 1.0;
  opt.sc_floor = 1e-5;
  const Step1Result r = step1_flatten(truncate_metric(m, d, 4.0), 4.0, opt);
  double dev = 0.0;
  for (double v : r.u.values) dev = std::max(dev, std::abs(v - 1.0));
  EXPECT_LT(dev, 1e-6);
  EXPECT_NEAR(r.A_sigma, 0.0, 1e-6);
}

TEST(Step1, MassBookkeepingAndDecreasingA) {
  const auto c = chart(160, 128);
  const auto m = sample_golden(c, "plummer_product");
  PipelineOptions opt;
  opt.epsilon0 = 1.0;
  const double mass = adm_mass(m).extrapolated;
  const Decomposition d = decompose_metric(m, mass);
  const MetricField gs = truncate_metric(m, d, 4.0);
  const Step1Result r = step1_flatten(gs, 4.0, opt);
  EXPECT_GT(r.A_sigma, 0.0);
  EXPECT_NEAR(r.A_fit / r.A_sigma, 1.0, 0.03);
  const double before = adm_mass(gs).extrapolated;
  const double after = adm_mass(r.g_tilde).extrapolated;
  EXPECT_NEAR(after, before - 6 * r.A_sigma, 0.02 * std::abs(before));
  const auto sweep = sigma_sweep(m, {4, 8, 16, 32}, opt);
  for (std::size_t i = 1; i < sweep.size(); ++i) EXPECT_LT(std::abs(sweep[i].A_sigma), std::abs(sweep[i - 1].A_sigma));
}

TEST(Step1, SmallnessViolationFails) {
  const auto c = chart(64, 200);
  const auto m = sample_golden(c, "plummer_product", {{"M", 0.02}});
  const Decomposition d = decompose_metric(m, adm_mass(m).extrapolated);
  PipelineOptions opt;
  opt.epsilon0 = 1e-12;
  EXPECT_THROW(step1_flatten(truncate_metric(m, d, 4.0), 4.0, opt), Error);
}

TEST(Step2, LohkampCutoffOnHarmonicFactor) {
  const auto c = chart(96, 200);
  const auto m = conformal_flat(c, [](double r) { return 1.0 - 0.1 / r; });
  PipelineOptions opt;
  const Step2Result r = step2_lohkamp(m, 1.0, opt);
  EXPECT_EQ(r.is1, 2);
  EXPECT_NEAR(r.epsilon, 0.1 / c->radius(2), 1e-12);
  EXPECT_NEAR(r.m_tilde, -0.1, 1e-3);
  EXPECT_NEAR(r.decay_exponent, 1.0, 0.01);
  EXPECT_GT(r.s2, r.s1);
  EXPECT_TRUE(r.product_beyond_s2);
  EXPECT_LE(r.lap_v_max, 1e-8);
  EXPECT_LT(r.lap_v_min, 0.0);
  EXPECT_EQ(r.conformal_defect, 0.0);
  // inside s1 the metric is a constant multiple of the input, so its Sc floor
  // is the input's discretization floor times that constant
  const ScalarField sc = scalar_curvature(r.metric);
  const auto range = detail::interior_range(*c, sc.values);
  const double floor_in = detail::interior_range(*c, scalar_curvature(m).values).first;
  EXPECT_GE(range.first, std::min(floor_in, 0.0) * r.constant * 1.001 - 1e-12);
  const auto outside = detail::interior_range(*c, sc.values, r.s1 + 1.0);
  EXPECT_GE(outside.first, -1e-6);
  EXPECT_GT(range.second, 1e-6);

  // without normalization the far metric is the constant (1 - eps/2)^2 times the product
  opt.normalize = false;
  const Step2Result raw = step2_lohkamp(m, 1.0, opt);
  const double cst = std::pow(1.0 - r.epsilon / 2, 2);
  const std::size_t far = c->index(c->nr() - 1, 0, 0, 0);
  EXPECT_EQ(raw.metric.g(0, 0)[far], std::pow(1.0 - r.epsilon / 2, 2.0));
  EXPECT_NEAR(raw.metric.g(3, 3)[far], cst, 1e-15);
  EXPECT_EQ(raw.metric.g(0, 1)[far], 0.0);
}

TEST(Step2, PositiveMassHasNoStartingShell) {
  const auto c = chart(64, 200);
  const auto m = conformal_flat(c, [](double r) { return 1.0 + 0.1 / r; });
  try {
    step2_lohkamp(m, 1.0, PipelineOptions{});
    FAIL() << "expected a domain error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kDomain);
  }
}

TEST(BoxCheck, FlatPasses) {
  const auto c = chart(32, 100);
  const BoxReport rep = periodic_box_check(flat_metric(c), 40.0);
  ASSERT_EQ(rep.pairs.size(), 3u);
  EXPECT_TRUE(rep.ok);
}

TEST(BoxCheck, RawTailFailsWithTailMagnitude) {
  const auto c = chart(64, 100);
  const double m0 = 0.05, h = 20.0;
  const auto m = sample_golden(c, "schwarzschild_product", {{"m0", m0}});
  const BoxReport rep = periodic_box_check(m, 2 * h);
  EXPECT_FALSE(rep.ok);
  for (const auto& p : rep.pairs) {
    EXPECT_FALSE(p.ok);
    // largest deviation is at the face centre, r = h: u^2 - 1 = 2 m0/h + m0^2/h^2
    EXPECT_NEAR(p.deviation_plus, 2 * m0 / h + m0 * m0 / (h * h), 1e-12);
    EXPECT_NEAR(p.mismatch, 0.0, 1e-12);
  }
  EXPECT_THROW(periodic_box_check(m, 150.0), Error);
}

TEST(Pipeline, EndToEndOnCoarseChart) {
  const auto c = chart(240, 400);
  const auto m = sample_golden(c, "schwarzschild_bump", {{"m0", -0.03}, {"M", 0.005}, {"a", 3}, {"b", 6}});
  PipelineOptions opt;
  opt.sigma = 3.0;
  const PipelineState st = run_pipeline(m, opt);
  EXPECT_EQ(st.sigma, 3.0);
  EXPECT_NEAR(st.m, -0.15, 1e-3);
  ASSERT_EQ(st.ledger.size(), 2u);
  for (const auto& e : st.ledger) EXPECT_TRUE(e.ok) << e.step << " " << e.rel_error;
  EXPECT_TRUE(st.step2.product_beyond_s2);
  ASSERT_TRUE(st.box.has_value());
  EXPECT_TRUE(st.box->ok);
  EXPECT_GT(st.sc_max, 1e-4);
  // the Sc floor at this resolution is discretization noise near the bump
  EXPECT_GT(st.sc_min, -1e-5);
}

TEST(Pipeline, NonnegativeMassFailsLoudly) {
  const auto c = chart(96, 200);
  PipelineOptions opt;
  opt.epsilon0 = 1.0;
  EXPECT_THROW(run_pipeline(sample_golden(c, "plummer_product"), opt), Error);
}
