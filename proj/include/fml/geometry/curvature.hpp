#pragma once

#include <cmath>
#include <vector>

#include "fml/geometry/differentiation.hpp"
#include "fml/geometry/fields.hpp"
#include "fml/geometry/metric.hpp"
#include "fml/parallel.hpp"

namespace fml {

using PackedTensor = std::vector<std::vector<double>>;

/// Christoffel symbols of the first kind, Gamma_abc = 1/2 (g_bc,a + g_ac,b - g_ab,c),
/// symmetric in (a, b); stored as data[sym_index(a, b) * n + c].
struct ChristoffelField {
  int dim = 0;
  PackedTensor data;
  const std::vector<double>& operator()(int a, int b, int c) const {
    return data[sym_index(a, b, dim) * dim + c];
  }
};

/// Curvature outputs; unrequested members stay empty.
struct CurvatureFields {
  ChristoffelField christoffel;
  std::vector<double> scalar;
  PackedTensor ricci;
};

namespace detail {

template <class D>
std::vector<std::vector<double>> all_partials(const D& d, const std::vector<double>& f) {
  if constexpr (requires { d.gradient(f); }) {
    return d.gradient(f);
  } else {
    std::vector<std::vector<double>> out(d.dim());
    for (int a = 0; a < d.dim(); ++a) d.partial(f, a, out[a]);
    return out;
  }
}

template <class D>
std::vector<double> divergence(const D& d, const PackedTensor& v) {
  if constexpr (requires { d.divergence(v); }) {
    return d.divergence(v);
  } else {
    std::vector<double> out(d.size(), 0.0), tmp;
    for (int a = 0; a < d.dim(); ++a) {
      d.partial(v[a], a, tmp);
      for (std::size_t i = 0; i < out.size(); ++i) out[i] += tmp[i];
    }
    return out;
  }
}

/// dg[c * S + s] = partial_c of packed component s.
template <Differentiator D>
PackedTensor metric_gradient(const PackedTensor& g, int n, const D& d) {
  const int S = sym_size(n);
  PackedTensor dg(static_cast<std::size_t>(n) * S);
  for (int s = 0; s < S; ++s) {
    auto grad = all_partials(d, g[s]);
    for (int c = 0; c < n; ++c) dg[c * S + s] = std::move(grad[c]);
  }
  return dg;
}

inline double det_at(const PackedTensor& gp, int n, std::size_t i) {
  SmallMatrix g(n, n);
  for (int a = 0; a < n; ++a)
    for (int b = a; b < n; ++b) g(a, b) = g(b, a) = gp[sym_index(a, b, n)][i];
  return g.determinant();
}

/// Pointwise quantities shared by the curvature kernels.
struct LocalGeometry {
  int n = 0;
  SmallMatrix g, ginv;
  double det = 1.0;
  double gam[kMaxDim][kMaxDim][kMaxDim];  // Gamma_abc (first kind)
  double dlog[kMaxDim];                   // partial_b log|g|
  double trace[kMaxDim];                  // Gamma_c = g^{ab} Gamma_abc

  void load(const PackedTensor& gp, const PackedTensor& dg, int dim, std::size_t i) {
    n = dim;
    const int S = sym_size(n);
    g.resize(n, n);
    for (int a = 0; a < n; ++a)
      for (int b = a; b < n; ++b) g(a, b) = g(b, a) = gp[sym_index(a, b, n)][i];
    ginv = g.inverse();
    det = g.determinant();
    auto dG = [&](int c, int a, int b) { return dg[c * S + sym_index(a, b, n)][i]; };
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        for (int c = 0; c < n; ++c)
          gam[a][b][c] = 0.5 * (dG(a, b, c) + dG(b, a, c) - dG(c, a, b));
    for (int c = 0; c < n; ++c) {
      double t = 0.0, l = 0.0;
      for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) {
          t += ginv(a, b) * gam[a][b][c];
          l += ginv(a, b) * dG(c, a, b);
        }
      trace[c] = t;
      dlog[c] = l;
    }
  }

  /// Gamma^a_bc = g^{ad} Gamma_bcd.
  double second_kind(int a, int b, int c) const {
    double s = 0.0;
    for (int d = 0; d < n; ++d) s += ginv(a, d) * gam[b][c][d];
    return s;
  }
};

}  // namespace detail

template <Differentiator D>
ChristoffelField christoffel(const PackedTensor& g, int n, const D& d) {
  const int S = sym_size(n);
  const PackedTensor dg = detail::metric_gradient(g, n, d);
  ChristoffelField out{n, PackedTensor(static_cast<std::size_t>(S) * n, std::vector<double>(d.size()))};
  for (int a = 0; a < n; ++a)
    for (int b = a; b < n; ++b)
      for (int c = 0; c < n; ++c) {
        auto& dst = out.data[sym_index(a, b, n) * n + c];
        const auto& gbc = dg[a * S + sym_index(b, c, n)];
        const auto& gac = dg[b * S + sym_index(a, c, n)];
        const auto& gab = dg[c * S + sym_index(a, b, n)];
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = 0.5 * (gbc[i] + gac[i] - gab[i]);
      }
  return out;
}

/// Sc = |g|^{-1/2} d_a(|g|^{1/2} g^{ab}(Gamma_b - 1/2 d_b log|g|))
///      - 1/2 g^{ab} Gamma_a d_b log|g| + g^{ab} g^{cd} g^{ef} Gamma_ace Gamma_bfd.
template <Differentiator D>
std::vector<double> scalar_curvature(const PackedTensor& g, int n, const D& d) {
  const std::size_t N = d.size();
  const PackedTensor dg = detail::metric_gradient(g, n, d);
  PackedTensor flux(n, std::vector<double>(N));
  std::vector<double> local(N), root(N);
  parallel_for(N, [&](std::size_t i) {
    detail::LocalGeometry L;
    L.load(g, dg, n, i);
    const double sq = std::sqrt(L.det);
    root[i] = sq;
    for (int a = 0; a < n; ++a) {
      double v = 0.0;
      for (int b = 0; b < n; ++b) v += L.ginv(a, b) * (L.trace[b] - 0.5 * L.dlog[b]);
      flux[a][i] = sq * v;
    }
    double t2 = 0.0;
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) t2 += L.ginv(a, b) * L.trace[a] * L.dlog[b];
    // raise the three indices of Gamma one at a time
    double t1[kMaxDim][kMaxDim][kMaxDim], t3[kMaxDim][kMaxDim][kMaxDim];
    for (int x = 0; x < n; ++x)
      for (int y = 0; y < n; ++y)
        for (int z = 0; z < n; ++z) {
          double s = 0.0;
          for (int p = 0; p < n; ++p) s += L.ginv(x, p) * L.gam[p][y][z];
          t1[x][y][z] = s;
        }
    for (int x = 0; x < n; ++x)
      for (int y = 0; y < n; ++y)
        for (int z = 0; z < n; ++z) {
          double s = 0.0;
          for (int p = 0; p < n; ++p) s += L.ginv(y, p) * t1[x][p][z];
          t3[x][y][z] = s;
        }
    double t4 = 0.0;
    for (int a = 0; a < n; ++a)
      for (int e = 0; e < n; ++e)
        for (int c = 0; c < n; ++c) {
          double s = 0.0;
          for (int p = 0; p < n; ++p) s += L.ginv(c, p) * t3[a][e][p];
          t4 += L.gam[a][c][e] * s;
        }
    local[i] = -0.5 * t2 + t4;
  });
  const std::vector<double> div = detail::divergence(d, flux);
  std::vector<double> sc(N);
  for (std::size_t i = 0; i < N; ++i) sc[i] = div[i] / root[i] + local[i];
  return sc;
}

/// R_bd = d_a Gamma^a_bd - d_d Gamma^a_ab + Gamma^a_ae Gamma^e_bd - Gamma^a_de Gamma^e_ab.
template <Differentiator D>
PackedTensor ricci(const PackedTensor& g, int n, const D& d) {
  const std::size_t N = d.size();
  const int S = sym_size(n);
  const PackedTensor dg = detail::metric_gradient(g, n, d);
  PackedTensor up(static_cast<std::size_t>(n) * S, std::vector<double>(N));
  PackedTensor half_log(n, std::vector<double>(N));
  PackedTensor quad(S, std::vector<double>(N));
  parallel_for(N, [&](std::size_t i) {
    detail::LocalGeometry L;
    L.load(g, dg, n, i);
    double G2[kMaxDim][kMaxDim][kMaxDim];
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        for (int c = b; c < n; ++c) G2[a][b][c] = G2[a][c][b] = L.second_kind(a, b, c);
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        for (int c = b; c < n; ++c) up[a * S + sym_index(b, c, n)][i] = G2[a][b][c];
    for (int b = 0; b < n; ++b) half_log[b][i] = 0.5 * L.dlog[b];
    for (int b = 0; b < n; ++b)
      for (int dd = b; dd < n; ++dd) {
        double s = 0.0;
        for (int a = 0; a < n; ++a)
          for (int e = 0; e < n; ++e) s += G2[a][a][e] * G2[e][b][dd] - G2[a][dd][e] * G2[e][a][b];
        quad[sym_index(b, dd, n)][i] = s;
      }
  });
  PackedTensor ric = quad;
  PackedTensor column(n);
  for (int s = 0; s < S; ++s) {
    for (int a = 0; a < n; ++a) column[a] = std::move(up[a * S + s]);
    const std::vector<double> div = detail::divergence(d, column);
    for (std::size_t i = 0; i < N; ++i) ric[s][i] += div[i];
  }
  if constexpr (requires { d.hessian(half_log[0]); }) {
    // d_b d_d log sqrt|g| from one scalar Hessian
    std::vector<double> psi(N);
    for (std::size_t i = 0; i < N; ++i) psi[i] = 0.5 * std::log(std::abs(detail::det_at(g, n, i)));
    const PackedTensor hess = d.hessian(psi);
    for (int s = 0; s < S; ++s)
      for (std::size_t i = 0; i < N; ++i) ric[s][i] -= hess[s][i];
  } else {
    for (int b = 0; b < n; ++b) {
      auto grad = detail::all_partials(d, half_log[b]);
      for (int dd = 0; dd < n; ++dd) {
        // symmetrized Hessian of log sqrt|g|
        const int s = sym_index(b, dd, n);
        const double w = (b == dd) ? 1.0 : 0.5;
        for (std::size_t i = 0; i < N; ++i) ric[s][i] -= w * grad[dd][i];
      }
    }
  }
  return ric;
}

/// g^{bd} R_bd.
inline std::vector<double> ricci_trace(const PackedTensor& g, const PackedTensor& ric, int n) {
  const std::size_t N = g[0].size();
  std::vector<double> out(N);
  parallel_for(N, [&](std::size_t i) {
    SmallMatrix G(n, n);
    for (int a = 0; a < n; ++a)
      for (int b = a; b < n; ++b) G(a, b) = G(b, a) = g[sym_index(a, b, n)][i];
    const SmallMatrix gi = G.inverse();
    double s = 0.0;
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) s += gi(a, b) * ric[sym_index(a, b, n)][i];
    out[i] = s;
  });
  return out;
}

inline CurvatureFields christoffel(const MetricField& metric, int stride = 1) {
  CurvatureFields out;
  out.christoffel = christoffel(metric.g.components, metric.dim(), ChartDifferentiator(metric.chart, stride));
  return out;
}

inline ScalarField scalar_curvature(const MetricField& metric, int stride = 1) {
  return ScalarField(metric.chart, scalar_curvature(metric.g.components, metric.dim(),
                                                    ChartDifferentiator(metric.chart, stride)));
}

inline CurvatureFields ricci(const MetricField& metric, int stride = 1) {
  CurvatureFields out;
  out.ricci = ricci(metric.g.components, metric.dim(), ChartDifferentiator(metric.chart, stride));
  return out;
}

}  // namespace fml
