#pragma once

#include <algorithm>
#include <concepts>
#include <cstddef>
#include <vector>

#include "fml/error.hpp"
#include "fml/geometry/chart.hpp"
#include "fml/geometry/fields.hpp"
#include "fml/parallel.hpp"

namespace fml {

/// Anything that differentiates node-sampled scalars along coordinate
/// direction a of an n-dimensional frame.
template <class D>
concept Differentiator = requires(const D& d, const std::vector<double>& f, int a,
                                  std::vector<double>& out) {
  { d.size() } -> std::convertible_to<std::size_t>;
  { d.dim() } -> std::convertible_to<int>;
  d.partial(f, a, out);
};

/// Second-order differences on the fibered chart, returned as partials in the
/// Cartesian product frame (x^1..x^k, y^1..y^{n-k}). stride = 2 gives the
/// same stencils on the coarsened lattice (spacing 2h).
class ChartDifferentiator {
 public:
  explicit ChartDifferentiator(ChartPtr chart, int stride = 1)
      : chart_(std::move(chart)), stride_(stride) {
    require(chart_->nr() > 2 * stride_, ErrorKind::kDomain, "too few radii for the stencil");
  }

  std::size_t size() const { return chart_->size(); }
  int dim() const { return chart_->n(); }
  const FiberedChart& chart() const { return *chart_; }
  int stride() const { return stride_; }

  /// Derivative along chart axis q: 0 = s, 1 = theta, 2 = phi, 3 + alpha = y^alpha.
  void chart_partial(const std::vector<double>& f, int q, std::vector<double>& out) const {
    const FiberedChart& c = *chart_;
    out.resize(c.size());
    const int st = stride_;
    const int nr = c.nr(), nt = c.ntheta(), np = c.nphi();
    const std::size_t nf = c.nfiber();
    if (q == 0) {
      const double h = c.ds() * st;
      parallel_for(static_cast<std::size_t>(nr), [&](std::size_t irr) {
        const int ir = static_cast<int>(irr);
        for (std::size_t j = 0; j < c.shell_size(); ++j) {
          const std::size_t base = c.shell_size();
          const std::size_t i = ir * base + j;
          double d;
          if (ir - st >= 0 && ir + st < nr) {
            d = (f[i + st * base] - f[i - st * base]) / (2.0 * h);
          } else if (ir - st < 0) {
            d = (-3.0 * f[i] + 4.0 * f[i + st * base] - f[i + 2 * st * base]) / (2.0 * h);
          } else {
            d = (3.0 * f[i] - 4.0 * f[i - st * base] + f[i - 2 * st * base]) / (2.0 * h);
          }
          out[i] = d;
        }
      });
      return;
    }
    if (q == 1) {
      const double h = c.dtheta() * st;
      parallel_for(static_cast<std::size_t>(nr), [&](std::size_t ir) {
        for (int it = 0; it < nt; ++it)
          for (int ip = 0; ip < np; ++ip)
            for (std::size_t fi = 0; fi < nf; ++fi) {
              const double up = f[neighbor_theta(ir, it + st, ip, fi)];
              const double dn = f[neighbor_theta(ir, it - st, ip, fi)];
              out[c.index(static_cast<int>(ir), it, ip, fi)] = (up - dn) / (2.0 * h);
            }
      });
      return;
    }
    if (q == 2) {
      const double h = c.dphi() * st;
      parallel_for(static_cast<std::size_t>(nr), [&](std::size_t ir) {
        for (int it = 0; it < nt; ++it)
          for (int ip = 0; ip < np; ++ip) {
            const int pu = (ip + st) % np, pd = (ip - st + np) % np;
            for (std::size_t fi = 0; fi < nf; ++fi)
              out[c.index(static_cast<int>(ir), it, ip, fi)] =
                  (f[c.index(static_cast<int>(ir), it, pu, fi)] -
                   f[c.index(static_cast<int>(ir), it, pd, fi)]) / (2.0 * h);
          }
      });
      return;
    }
    const int alpha = q - 3;
    require(alpha >= 0 && alpha < c.fiber_dim(), ErrorKind::kDomain, "chart axis out of range");
    const double h = c.dy(alpha) * st;
    const int count = c.fiber().counts[alpha];
    const std::size_t fs = c.fiber_stride(alpha);
    parallel_for(c.size() / nf, [&](std::size_t cell) {
      const std::size_t base = cell * nf;
      for (std::size_t fi = 0; fi < nf; ++fi) {
        const int ya = c.fiber_component(fi, alpha);
        const std::size_t rest = fi - ya * fs;
        const std::size_t up = rest + ((ya + st) % count) * fs;
        const std::size_t dn = rest + ((ya - st + count) % count) * fs;
        out[base + fi] = (f[base + up] - f[base + dn]) / (2.0 * h);
      }
    });
  }

  /// Cartesian partial along frame direction a.
  void partial(const std::vector<double>& f, int a, std::vector<double>& out) const {
    const int k = chart_->k();
    if (a >= k) {
      chart_partial(f, 3 + (a - k), out);
      return;
    }
    std::vector<double> ds, dt, dp;
    chart_partial(f, 0, ds);
    chart_partial(f, 1, dt);
    chart_partial(f, 2, dp);
    combine(ds, dt, dp, a, out);
  }

  /// Divergence sum_a d_a V^a of a Cartesian-frame vector field, evaluated as
  /// J^{-1} d_q(J V^q) with J = r^3 sin(theta) in the (s, theta, phi) block.
  /// Radially symmetric fields pick up no angular truncation error this way.
  std::vector<double> divergence(const std::vector<std::vector<double>>& v) const {
    const FiberedChart& c = *chart_;
    const int k = c.k(), n = c.n();
    const std::size_t N = c.size(), nf = c.nfiber();
    std::vector<double> js(N), jt(N), jp(N);
    parallel_for(static_cast<std::size_t>(c.nr()), [&](std::size_t irr) {
      const int ir = static_cast<int>(irr);
      const double r = c.radius(ir);
      for (int it = 0; it < c.ntheta(); ++it)
        for (int ip = 0; ip < c.nphi(); ++ip) {
          const auto nrm = c.normal(it, ip);
          const auto eth = c.e_theta(it, ip);
          const auto eph = c.e_phi(ip);
          const double st = c.sin_theta(it);
          const double jac = r * r * r * st;
          const std::size_t base = c.index(ir, it, ip, 0);
          for (std::size_t fi = 0; fi < nf; ++fi) {
            const std::size_t i = base + fi;
            double vs = 0.0, vt = 0.0, vp = 0.0;
            for (int a = 0; a < k; ++a) {
              vs += nrm[a] * v[a][i];
              vt += eth[a] * v[a][i];
              vp += eph[a] * v[a][i];
            }
            js[i] = jac * vs / r;
            jt[i] = jac * vt / r;
            jp[i] = jac * vp / (r * st);
          }
        }
    });
    std::vector<double> ds, dt, dp, out(N);
    chart_partial(js, 0, ds);
    chart_partial(jt, 1, dt);
    chart_partial(jp, 2, dp);
    parallel_for(static_cast<std::size_t>(c.nr()), [&](std::size_t irr) {
      const int ir = static_cast<int>(irr);
      const double r = c.radius(ir);
      for (int it = 0; it < c.ntheta(); ++it) {
        const double inv = 1.0 / (r * r * r * c.sin_theta(it));
        const std::size_t base = c.index(ir, it, 0, 0);
        for (std::size_t j = 0; j < static_cast<std::size_t>(c.nphi()) * nf; ++j) {
          const std::size_t i = base + j;
          out[i] = (ds[i] + dt[i] + dp[i]) * inv;
        }
      }
    });
    std::vector<double> tmp;
    for (int a = k; a < n; ++a) {
      chart_partial(v[a], 3 + (a - k), tmp);
      for (std::size_t i = 0; i < N; ++i) out[i] += tmp[i];
    }
    return out;
  }

  /// Cartesian Hessian d_i d_j f, packed symmetric. Chart second differences
  /// are combined with exact derivatives of the Jacobian dq/dx, so the
  /// angular frame rotation is never differenced.
  std::vector<std::vector<double>> hessian(const std::vector<double>& f) const {
    const FiberedChart& c = *chart_;
    const int k = c.k(), n = c.n(), nq = 3 + c.fiber_dim();
    const std::size_t N = c.size(), nf = c.nfiber();
    std::vector<std::vector<double>> d1(nq), d2(static_cast<std::size_t>(nq) * nq);
    for (int q = 0; q < nq; ++q) chart_partial(f, q, d1[q]);
    for (int q = 0; q < nq; ++q)
      for (int p = q; p < nq; ++p) {
        chart_partial(d1[q], p, d2[q * nq + p]);
      }
    std::vector<std::vector<double>> out(sym_size(n), std::vector<double>(N));
    parallel_for(static_cast<std::size_t>(c.nr()), [&](std::size_t irr) {
      const int ir = static_cast<int>(irr);
      const double r = c.radius(ir);
      double jac[kMaxDim][kMaxDim];          // jac[q][j] = dq/dx^j
      double djac[kMaxDim][kMaxDim][kMaxDim];  // djac[p][q][j] = d_p (dq/dx^j)
      for (int it = 0; it < c.ntheta(); ++it)
        for (int ip = 0; ip < c.nphi(); ++ip) {
          const auto nv = c.normal(it, ip);
          const auto et = c.e_theta(it, ip);
          const auto ep = c.e_phi(ip);
          const double st = c.sin_theta(it), ct = c.cos_theta(it);
          for (int p = 0; p < nq; ++p)
            for (int q = 0; q < nq; ++q)
              for (int j = 0; j < n; ++j) djac[p][q][j] = 0.0;
          for (int q = 0; q < nq; ++q)
            for (int j = 0; j < n; ++j) jac[q][j] = 0.0;
          for (int j = 0; j < k; ++j) {
            jac[0][j] = nv[j] / r;
            jac[1][j] = et[j] / r;
            jac[2][j] = ep[j] / (r * st);
            djac[0][0][j] = -nv[j] / r;
            djac[1][0][j] = et[j] / r;
            djac[2][0][j] = st * ep[j] / r;
            djac[0][1][j] = -et[j] / r;
            djac[1][1][j] = -nv[j] / r;
            djac[2][1][j] = ct * ep[j] / r;
            djac[0][2][j] = -ep[j] / (r * st);
            djac[1][2][j] = -ct * ep[j] / (r * st * st);
            djac[2][2][j] = -(st * nv[j] + ct * et[j]) / (r * st);
          }
          for (int a = 0; a < n - k; ++a) jac[3 + a][k + a] = 1.0;
          const std::size_t base = c.index(ir, it, ip, 0);
          for (std::size_t fi = 0; fi < nf; ++fi) {
            const std::size_t node = base + fi;
            double hf[kMaxDim][kMaxDim];
            for (int i = 0; i < n; ++i)
              for (int j = 0; j < n; ++j) {
                double h = 0.0;
                for (int p = 0; p < nq; ++p) {
                  if (jac[p][i] == 0.0) continue;
                  double inner = 0.0;
                  for (int q = 0; q < nq; ++q) {
                    inner += djac[p][q][j] * d1[q][node];
                    const int lo = std::min(p, q), hi = std::max(p, q);
                    inner += jac[q][j] * d2[lo * nq + hi][node];
                  }
                  h += jac[p][i] * inner;
                }
                hf[i][j] = h;
              }
            for (int i = 0; i < n; ++i)
              for (int j = i; j < n; ++j) out[sym_index(i, j, n)][node] = 0.5 * (hf[i][j] + hf[j][i]);
          }
        }
    });
    return out;
  }

  /// All n Cartesian partials of f.
  std::vector<std::vector<double>> gradient(const std::vector<double>& f) const {
    const int n = chart_->n(), k = chart_->k();
    std::vector<std::vector<double>> g(n);
    std::vector<double> ds, dt, dp;
    chart_partial(f, 0, ds);
    chart_partial(f, 1, dt);
    chart_partial(f, 2, dp);
    for (int a = 0; a < k; ++a) combine(ds, dt, dp, a, g[a]);
    for (int a = k; a < n; ++a) chart_partial(f, 3 + (a - k), g[a]);
    return g;
  }

 private:
  std::size_t neighbor_theta(std::size_t ir, int it, int ip, std::size_t fi) const {
    const FiberedChart& c = *chart_;
    const int nt = c.ntheta();
    if (it < 0 || it >= nt) {
      it = it < 0 ? -1 - it : 2 * nt - 1 - it;
      ip = (ip + c.nphi() / 2) % c.nphi();
    }
    return c.index(static_cast<int>(ir), it, ip, fi);
  }

  void combine(const std::vector<double>& ds, const std::vector<double>& dt,
               const std::vector<double>& dp, int a, std::vector<double>& out) const {
    const FiberedChart& c = *chart_;
    out.resize(c.size());
    const std::size_t nf = c.nfiber();
    parallel_for(static_cast<std::size_t>(c.nr()), [&](std::size_t irr) {
      const int ir = static_cast<int>(irr);
      const double inv_r = 1.0 / c.radius(ir);
      for (int it = 0; it < c.ntheta(); ++it)
        for (int ip = 0; ip < c.nphi(); ++ip) {
          const auto nrm = c.normal(it, ip);
          const auto eth = c.e_theta(it, ip);
          const auto eph = c.e_phi(ip);
          const double cs = nrm[a] * inv_r;
          const double ct = eth[a] * inv_r;
          const double cp = eph[a] * inv_r / c.sin_theta(it);
          const std::size_t base = c.index(ir, it, ip, 0);
          for (std::size_t fi = 0; fi < nf; ++fi) {
            const std::size_t i = base + fi;
            out[i] = cs * ds[i] + ct * dt[i] + cp * dp[i];
          }
        }
    });
  }

  ChartPtr chart_;
  int stride_;
};

/// Uniform tensor-product grid, row-major with the last axis fastest.
/// Periodic axes wrap; others use one-sided second-order stencils at the ends.
class BoxDifferentiator {
 public:
  BoxDifferentiator(std::vector<int> counts, std::vector<double> spacing, std::vector<bool> periodic)
      : counts_(std::move(counts)), spacing_(std::move(spacing)), periodic_(std::move(periodic)) {
    strides_.assign(counts_.size(), 1);
    for (int a = static_cast<int>(counts_.size()) - 2; a >= 0; --a)
      strides_[a] = strides_[a + 1] * counts_[a + 1];
    size_ = strides_[0] * counts_[0];
  }

  std::size_t size() const { return size_; }
  int dim() const { return static_cast<int>(counts_.size()); }
  std::size_t stride(int a) const { return strides_[a]; }
  int count(int a) const { return counts_[a]; }

  void partial(const std::vector<double>& f, int a, std::vector<double>& out) const {
    out.resize(size_);
    const std::size_t s = strides_[a];
    const int n = counts_[a];
    const double h = spacing_[a];
    for (std::size_t i = 0; i < size_; ++i) {
      const int j = static_cast<int>((i / s) % n);
      if (periodic_[a]) {
        const std::size_t up = i - j * s + ((j + 1) % n) * s;
        const std::size_t dn = i - j * s + ((j - 1 + n) % n) * s;
        out[i] = (f[up] - f[dn]) / (2.0 * h);
      } else if (j == 0) {
        out[i] = (-3.0 * f[i] + 4.0 * f[i + s] - f[i + 2 * s]) / (2.0 * h);
      } else if (j == n - 1) {
        out[i] = (3.0 * f[i] - 4.0 * f[i - s] + f[i - 2 * s]) / (2.0 * h);
      } else {
        out[i] = (f[i + s] - f[i - s]) / (2.0 * h);
      }
    }
  }

 private:
  std::vector<int> counts_;
  std::vector<double> spacing_;
  std::vector<bool> periodic_;
  std::vector<std::size_t> strides_;
  std::size_t size_ = 0;
};

}  // namespace fml
