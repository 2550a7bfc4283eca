#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <vector>

#include "fml/geometry/curvature.hpp"
#include "fml/geometry/differentiation.hpp"
#include "fml/geometry/metric.hpp"
#include "fml/geometry/shells.hpp"
#include "fml/rigidity/harmonic.hpp"

namespace fml {

/// kChart reads g^{ij} off the inverse metric in the x^i; kHarmonic uses
/// <dy^i, dy^j>_g for the harmonic coordinates.
enum class CoefficientFrame { kChart, kHarmonic };

inline const char* frame_name(CoefficientFrame f) { return f == CoefficientFrame::kChart ? "chart" : "harmonic"; }

struct CoefficientFit {
  CoefficientFrame frame = CoefficientFrame::kChart;
  Eigen::MatrixXd c;          // c_ij
  Eigen::VectorXd c_diag;     // eigenvalues, descending
  Eigen::MatrixXd rotation;   // columns are eigenvectors, first nonzero entry positive
  Eigen::MatrixXd subleading; // d_ij in the two-term fit c r^{2-k} + d r^{1-k}
  double asymmetry = 0.0;     // max |c_ij - c_ji|
  double fit_residual = 0.0;  // RMS of the two-term fit relative to max |c_ij|
  DecayFit v_residual;        // shell max of |g^{ij} - delta_ij + c_ij r^{2-k}|
  bool flagged = false;
};

/// Packed k x k field of the inverse metric in the requested frame.
inline PackedTensor inverse_metric_block(const MetricField& metric, const HarmonicCoordinates* coords,
                                         CoefficientFrame frame) {
  const FiberedChart& c = *metric.chart;
  const int k = c.k(), n = c.n();
  const std::size_t N = c.size();
  std::vector<std::vector<std::vector<double>>> grads;
  if (frame == CoefficientFrame::kHarmonic) {
    require(coords != nullptr && static_cast<int>(coords->y.size()) == k, ErrorKind::kDomain,
            "harmonic frame needs harmonic coordinates");
    for (int i = 0; i < k; ++i) grads.push_back(coordinate_gradient(*coords, i));
  }
  PackedTensor out(sym_size(k), std::vector<double>(N));
  parallel_for(N, [&](std::size_t j) {
    const SmallMatrix gi = metric.at(j).inverse();
    for (int a = 0; a < k; ++a)
      for (int b = a; b < k; ++b) {
        double v = 0.0;
        if (frame == CoefficientFrame::kChart) {
          v = gi(a, b);
        } else {
          for (int p = 0; p < n; ++p)
            for (int q = 0; q < n; ++q) v += gi(p, q) * grads[a][p][j] * grads[b][q][j];
        }
        out[sym_index(a, b, k)][j] = v;
      }
  });
  return out;
}

/// Fits delta_ij - g^{ij} = c_ij r^{2-k} + d_ij r^{1-k} to shell means on the
/// default window, then diagonalizes c by an orthogonal rotation.
inline CoefficientFit fit_inverse_metric_coefficients(const MetricField& metric, const HarmonicCoordinates* coords,
                                                      CoefficientFrame frame = CoefficientFrame::kChart) {
  const FiberedChart& c = *metric.chart;
  const int k = c.k();
  const ShellQuadrature quad(c);
  const ShellRange win = default_fit_window(c.nr());
  const PackedTensor ginv = inverse_metric_block(metric, coords, frame);

  CoefficientFit fit;
  fit.frame = frame;
  fit.c = Eigen::MatrixXd::Zero(k, k);
  fit.subleading = Eigen::MatrixXd::Zero(k, k);
  double rss = 0.0;
  int count = 0;
  for (int a = 0; a < k; ++a)
    for (int b = a; b < k; ++b) {
      std::vector<double> dev(c.size());
      const auto& comp = ginv[sym_index(a, b, k)];
      for (std::size_t j = 0; j < c.size(); ++j) dev[j] = (a == b ? 1.0 : 0.0) - comp[j];
      const auto prof = quad.mean_profile(dev);
      // regress R^{k-2} a(R) on [1, 1/R]
      Eigen::MatrixXd X(win.end - win.begin, 2);
      Eigen::VectorXd Y(win.end - win.begin);
      for (int s = win.begin; s < win.end; ++s) {
        const double R = c.radius(s);
        X(s - win.begin, 0) = 1.0;
        X(s - win.begin, 1) = 1.0 / R;
        Y(s - win.begin) = std::pow(R, k - 2) * prof[s];
      }
      const Eigen::Vector2d beta = X.colPivHouseholderQr().solve(Y);
      fit.c(a, b) = fit.c(b, a) = beta(0);
      fit.subleading(a, b) = fit.subleading(b, a) = beta(1);
      const Eigen::VectorXd e = Y - X * beta;
      rss += e.squaredNorm();
      count += static_cast<int>(e.size());
    }
  fit.asymmetry = (fit.c - fit.c.transpose()).cwiseAbs().maxCoeff();
  const double lead = fit.c.cwiseAbs().maxCoeff();
  const double rms = std::sqrt(rss / std::max(count, 1));
  fit.fit_residual = lead > 0.0 ? rms / lead : rms;
  fit.flagged = lead > 1e-14 && fit.fit_residual > 0.2;

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(fit.c);
  fit.c_diag = es.eigenvalues().reverse();
  fit.rotation = es.eigenvectors().rowwise().reverse();
  for (int col = 0; col < k; ++col)
    for (int row = 0; row < k; ++row)
      if (std::abs(fit.rotation(row, col)) > 1e-12) {
        if (fit.rotation(row, col) < 0.0) fit.rotation.col(col) *= -1.0;
        break;
      }

  std::vector<double> vmax(c.nr(), 0.0);
  for (int s = 0; s < c.nr(); ++s) {
    const double rk = std::pow(c.radius(s), 2 - k);
    const std::size_t base = c.index(s, 0, 0, 0);
    for (std::size_t j = base; j < base + c.shell_size(); ++j)
      for (int a = 0; a < k; ++a)
        for (int b = a; b < k; ++b)
          vmax[s] = std::max(vmax[s], std::abs(ginv[sym_index(a, b, k)][j] - (a == b ? 1.0 : 0.0) + fit.c(a, b) * rk));
  }
  bool positive = true;
  for (int s = win.begin; s < win.end; ++s) positive = positive && vmax[s] > 1e-300;
  if (positive) {
    fit.v_residual = fit_decay(c.radii(), vmax, win);
  } else {
    fit.v_residual.exponent = std::numeric_limits<double>::infinity();
  }
  return fit;
}

/// Components of g in the coordinates (y^1..y^k, fiber), sampled at the chart
/// nodes: g' = J^{-T} g J^{-1} with J = d(y, fiber)/d(x, fiber).
inline MetricField metric_in_harmonic_coordinates(const MetricField& metric, const HarmonicCoordinates& hc) {
  const FiberedChart& c = *metric.chart;
  const int k = c.k(), n = c.n();
  std::vector<std::vector<std::vector<double>>> grads;
  for (int i = 0; i < k; ++i) grads.push_back(coordinate_gradient(hc, i));
  MetricField out{metric.chart, SymmetricTensorField(metric.chart, n), metric.tau, std::nullopt};
  parallel_for(c.size(), [&](std::size_t j) {
    SmallMatrix J = SmallMatrix::Identity(n, n);
    for (int i = 0; i < k; ++i)
      for (int a = 0; a < n; ++a) J(i, a) = grads[i][a][j];
    const SmallMatrix Ji = J.inverse();
    const SmallMatrix g = Ji.transpose() * metric.at(j) * Ji;
    for (int a = 0; a < n; ++a)
      for (int b = a; b < n; ++b) out.g(a, b)[j] = g(a, b);
  });
  return out;
}

struct MassEquationResidual {
  std::vector<double> profile;  // shell mean of |R| with R_i the left-hand side below
  DecayFit decay;
  double threshold = 0.0;       // k - 1 - 0.2
  double leading = 0.0;         // fitted r^{k-1} |R| on the window
  double leading_relative = 0.0;  // leading / ((k-2) max |c_i - tr c / 2|), 0 if that vanishes
  bool ok = false;
};

/// R_i = (k-2)(c_ij - tr c delta_ij / 2) y^j / |y|^k + sum_a d_a g_ia + (1/2) sum_a d_i g_aa,
/// a over fiber directions, g in the harmonic frame.
inline MassEquationResidual massequation_residual(const MetricField& metric, const HarmonicCoordinates& hc,
                                                  const CoefficientFit& fit) {
  const FiberedChart& c = *metric.chart;
  const int k = c.k(), n = c.n();
  const MetricField gy = metric_in_harmonic_coordinates(metric, hc);
  const ChartDifferentiator d(metric.chart, 1);
  std::vector<std::vector<std::vector<double>>> grad(sym_size(n));
  for (int a = 0; a < n; ++a)
    for (int b = a; b < n; ++b)
      if ((a < k) != (b < k) || (a >= k && b >= k && a == b)) grad[sym_index(a, b, n)] = d.gradient(gy.g(a, b));
  Eigen::MatrixXd cm = fit.c;
  const double half_tr = 0.5 * cm.trace();
  for (int i = 0; i < k; ++i) cm(i, i) -= half_tr;
  std::vector<double> norm(c.size());
  parallel_for(c.size(), [&](std::size_t j) {
    double yy = 0.0;
    for (int i = 0; i < k; ++i) yy += hc.y[i].values[j] * hc.y[i].values[j];
    const double ry = std::sqrt(yy);
    double s = 0.0;
    for (int i = 0; i < k; ++i) {
      double R = 0.0;
      for (int l = 0; l < k; ++l) R += (k - 2) * cm(i, l) * hc.y[l].values[j] / std::pow(ry, k);
      for (int a = k; a < n; ++a) {
        R += grad[sym_index(i, a, n)][a][j];
        R += 0.5 * grad[sym_index(a, a, n)][i][j];
      }
      s += R * R;
    }
    norm[j] = std::sqrt(s);
  });
  MassEquationResidual out;
  const ShellQuadrature quad(c);
  out.profile = quad.mean_profile(norm);
  out.threshold = k - 1 - 0.2;
  const ShellRange win = default_fit_window(c.nr());
  double lead = 0.0;
  for (int s = win.begin; s < win.end; ++s) lead += std::pow(c.radius(s), k - 1) * out.profile[s];
  out.leading = lead / (win.end - win.begin);
  double cscale = 0.0;
  for (int i = 0; i < k; ++i) cscale = std::max(cscale, std::abs(fit.c_diag(i) - 0.5 * fit.c_diag.sum()));
  if (cscale > 0.0) out.leading_relative = out.leading / ((k - 2) * cscale);
  bool positive = true;
  for (int s = win.begin; s < win.end; ++s) positive = positive && out.profile[s] > 0.0;
  if (positive) {
    out.decay = fit_decay(c.radii(), out.profile, win);
    out.ok = out.decay.exponent >= out.threshold;
  } else {
    out.ok = true;  // identically zero on the window
  }
  return out;
}

/// m = (k-2)/2 sum_i c_i.
inline double mass_from_coefficients(const Eigen::VectorXd& c_diag, int k) {
  return 0.5 * (k - 2) * c_diag.sum();
}
inline double mass_from_coefficients(const CoefficientFit& fit) {
  return mass_from_coefficients(fit.c_diag, static_cast<int>(fit.c_diag.size()));
}

}  // namespace fml
