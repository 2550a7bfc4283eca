#pragma once

#include <cmath>
#include <vector>

#include "fml/geometry/fields.hpp"
#include "fml/geometry/metric.hpp"
#include "fml/parallel.hpp"
#include "fml/sparse.hpp"

namespace fml {

enum class OuterCondition { kNeumann, kRobin, kDirichlet };

/// Symmetric discretization of -div(sqrt|g| g^{-1} grad) in chart coordinates:
/// Delta_g f ~ -W^{-1} K f, where W holds the node volumes. The outer
/// condition adds a diagonal B on the last shell; the matching right-hand
/// side for a far-field value u_inf is B u_inf. The inner shell is Neumann.
struct LaplaceOperator {
  ChartPtr chart;
  CsrMatrix stiffness;           // K + B
  std::vector<double> weights;   // W
  std::vector<double> boundary;  // diagonal of B
  OuterCondition outer = OuterCondition::kRobin;
};

namespace detail {

/// Chart-frame conductivity A_q = |det J| (dq/dx) P (dq/dx)^T at every node,
/// P = sqrt|g| g^{-1}; packed symmetric over the 3 + (n-k) chart axes.
inline std::vector<std::vector<double>> chart_conductivity(const MetricField& metric,
                                                           std::vector<double>& weights) {
  const FiberedChart& c = *metric.chart;
  const int n = c.n(), k = c.k(), nq = 3 + c.fiber_dim();
  const std::size_t nf = c.nfiber();
  double cell = c.ds() * c.dtheta() * c.dphi();
  for (int a = 0; a < c.fiber_dim(); ++a) cell *= c.dy(a);
  std::vector<std::vector<double>> A(sym_size(nq), std::vector<double>(c.size()));
  weights.assign(c.size(), 0.0);
  parallel_for(static_cast<std::size_t>(c.nr()), [&](std::size_t irr) {
    const int ir = static_cast<int>(irr);
    const double r = c.radius(ir);
    SmallMatrix jinv = SmallMatrix::Zero(nq, n);
    for (int it = 0; it < c.ntheta(); ++it)
      for (int ip = 0; ip < c.nphi(); ++ip) {
        const auto nv = c.normal(it, ip);
        const auto et = c.e_theta(it, ip);
        const auto ep = c.e_phi(ip);
        const double st = c.sin_theta(it);
        for (int j = 0; j < k; ++j) {
          jinv(0, j) = nv[j] / r;
          jinv(1, j) = et[j] / r;
          jinv(2, j) = ep[j] / (r * st);
        }
        for (int a = 0; a < n - k; ++a) jinv(3 + a, k + a) = 1.0;
        const double detj = r * r * r * st;
        for (std::size_t fi = 0; fi < nf; ++fi) {
          const std::size_t i = c.index(ir, it, ip, fi);
          const SmallMatrix g = metric.at(i);
          const double root = std::sqrt(g.determinant());
          const SmallMatrix P = root * g.inverse();
          const SmallMatrix Aq = detj * jinv * P * jinv.transpose();
          for (int p = 0; p < nq; ++p)
            for (int q = p; q < nq; ++q) A[sym_index(p, q, nq)][i] = Aq(p, q);
          weights[i] = root * detj * cell;
        }
      }
  });
  return A;
}

struct AxisStep {
  std::size_t node;
  bool valid;
};

/// Neighbor of node (ir, it, ip, fi) one step along chart axis q; theta
/// steps never cross a pole and radial steps never leave the grid.
inline AxisStep step(const FiberedChart& c, int ir, int it, int ip, std::size_t fi, int q) {
  switch (q) {
    case 0:
      if (ir + 1 >= c.nr()) return {0, false};
      return {c.index(ir + 1, it, ip, fi), true};
    case 1:
      if (it + 1 >= c.ntheta()) return {0, false};
      return {c.index(ir, it + 1, ip, fi), true};
    case 2:
      return {c.index(ir, it, (ip + 1) % c.nphi(), fi), true};
    default: {
      const int a = q - 3;
      const int ya = c.fiber_component(fi, a);
      const std::size_t nfi = fi - ya * c.fiber_stride(a) +
                              ((ya + 1) % c.fiber().counts[a]) * c.fiber_stride(a);
      return {c.index(ir, it, ip, nfi), true};
    }
  }
}

inline double axis_spacing(const FiberedChart& c, int q) {
  switch (q) {
    case 0: return c.ds();
    case 1: return c.dtheta();
    case 2: return c.dphi();
    default: return c.dy(q - 3);
  }
}

}  // namespace detail

inline LaplaceOperator assemble_laplace(const MetricField& metric,
                                        OuterCondition outer = OuterCondition::kRobin) {
  const FiberedChart& c = *metric.chart;
  const int nq = 3 + c.fiber_dim();
  const int k = c.k();
  LaplaceOperator op;
  op.chart = metric.chart;
  op.outer = outer;
  const auto A = detail::chart_conductivity(metric, op.weights);
  double cell = 1.0;
  for (int q = 0; q < nq; ++q) cell *= detail::axis_spacing(c, q);

  // mixed pairs that are identically zero are skipped entirely
  std::vector<bool> mixed(sym_size(nq), false);
  for (int p = 0; p < nq; ++p) {
    double diag = 0.0;
    for (double v : A[sym_index(p, p, nq)]) diag = std::max(diag, std::abs(v));
    for (int q = p + 1; q < nq; ++q) {
      double off = 0.0;
      for (double v : A[sym_index(p, q, nq)]) off = std::max(off, std::abs(v));
      mixed[sym_index(p, q, nq)] = off > 1e-12 * diag;
    }
  }

  std::vector<Triplet> trip;
  trip.reserve(c.size() * (1 + 4 * nq));
  auto add = [&](std::size_t i, std::size_t j, double v) {
    trip.push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j), v});
  };
  for (int ir = 0; ir < c.nr(); ++ir)
    for (int it = 0; it < c.ntheta(); ++it)
      for (int ip = 0; ip < c.nphi(); ++ip)
        for (std::size_t fi = 0; fi < c.nfiber(); ++fi) {
          const std::size_t i = c.index(ir, it, ip, fi);
          add(i, i, 0.0);
          for (int q = 0; q < nq; ++q) {
            const auto nb = detail::step(c, ir, it, ip, fi, q);
            if (!nb.valid) continue;
            const double h = detail::axis_spacing(c, q);
            const int s = sym_index(q, q, nq);
            const double w = 0.5 * (A[s][i] + A[s][nb.node]) * cell / (h * h);
            add(i, i, w);
            add(nb.node, nb.node, w);
            add(i, nb.node, -w);
            add(nb.node, i, -w);
          }
          for (int p = 0; p < nq; ++p)
            for (int q = p + 1; q < nq; ++q) {
              if (!mixed[sym_index(p, q, nq)]) continue;
              const auto e10 = detail::step(c, ir, it, ip, fi, p);
              const auto e01 = detail::step(c, ir, it, ip, fi, q);
              if (!e10.valid || !e01.valid) continue;
              const auto d11 = c.decompose(e10.node);
              const auto e11 = detail::step(c, d11.ir, d11.it, d11.ip, d11.fiber, q);
              if (!e11.valid) continue;
              const std::size_t corner[4] = {i, e10.node, e01.node, e11.node};
              const int s = sym_index(p, q, nq);
              double apq = 0.0;
              for (std::size_t v : corner) apq += 0.25 * A[s][v];
              const double coef = 2.0 * apq * cell /
                                  (detail::axis_spacing(c, p) * detail::axis_spacing(c, q));
              static constexpr double alpha[4] = {-0.5, 0.5, -0.5, 0.5};
              static constexpr double beta[4] = {-0.5, -0.5, 0.5, 0.5};
              for (int m = 0; m < 4; ++m)
                for (int l = 0; l < 4; ++l)
                  add(corner[m], corner[l],
                      0.5 * coef * (alpha[m] * beta[l] + beta[m] * alpha[l]));
            }
        }

  op.boundary.assign(c.size(), 0.0);
  if (outer != OuterCondition::kNeumann) {
    const int ir = c.nr() - 1;
    const double h = c.ds();
    const double area = cell / h;
    const double face = std::exp(0.5 * h);  // A^{ss} scales like r near the face
    const double robin = (k - 2) / (1.0 + 0.5 * (k - 2) * h);
    const std::size_t base = c.index(ir, 0, 0, 0);
    for (std::size_t i = base; i < base + c.shell_size(); ++i) {
      const double ass = A[0][i] * face;
      op.boundary[i] = outer == OuterCondition::kRobin ? area * ass * robin : 2.0 * area * ass / h;
      add(i, i, op.boundary[i]);
    }
  }
  op.stiffness = CsrMatrix::from_triplets(c.size(), std::move(trip));
  return op;
}

/// Delta_g f = -W^{-1} K f with zero-flux radial ends. Values on the first
/// and last shell are one-sided boundary rows rather than interior estimates.
inline ScalarField laplace_beltrami(const MetricField& metric, const ScalarField& f) {
  const LaplaceOperator op = assemble_laplace(metric, OuterCondition::kNeumann);
  std::vector<double> kf;
  op.stiffness.multiply(f.values, kf);
  ScalarField out(metric.chart);
  for (std::size_t i = 0; i < kf.size(); ++i) out.values[i] = -kf[i] / op.weights[i];
  return out;
}

/// Volume-weighted inner product sum_i W_i f_i g_i.
inline double weighted_inner(const std::vector<double>& w, const std::vector<double>& f,
                             const std::vector<double>& g) {
  double s = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) s += w[i] * f[i] * g[i];
  return s;
}

}  // namespace fml
