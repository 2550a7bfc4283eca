#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <memory>
#include <numbers>
#include <string>
#include <vector>

#include "fml/error.hpp"

namespace fml {

/// Largest total dimension n the fixed-capacity small matrices support.
inline constexpr int kMaxDim = 6;

/// Flat torus T^{n-k}: side lengths and periodic grid counts per circle.
struct FiberSpec {
  std::vector<double> lengths;
  std::vector<int> counts;
  // Curved fibers are outside the model; the flag exists so callers can be
  // rejected explicitly rather than silently treated as flat.
  bool flat = true;

  int dim() const { return static_cast<int>(lengths.size()); }

  double volume() const {
    double v = 1.0;
    for (double l : lengths) v *= l;
    return v;
  }

  std::size_t point_count() const {
    std::size_t c = 1;
    for (int m : counts) c *= static_cast<std::size_t>(m);
    return c;
  }

  static FiberSpec circle(double length, int count) {
    return FiberSpec{{length}, {count}, true};
  }
  static FiberSpec torus(std::vector<double> lengths, std::vector<int> counts) {
    return FiberSpec{std::move(lengths), std::move(counts), true};
  }
};

/// Log-spaced radii r_0 < ... < r_{count-1} spanning [r_min, r_max].
struct RadialSpec {
  double r_min = 1.0;
  double r_max = 100.0;
  int count = 48;
};

/// Latitude-longitude grid on S^2 with half-offset latitude nodes
/// theta_j = (j + 1/2) pi / n_theta and phi_l = 2 pi l / n_phi.
struct AngularSpec {
  int n_theta = 16;
  int n_phi = 32;
};

/// A point of the product end in chart coordinates.
struct ChartPoint {
  double r = 1.0;
  double theta = 0.0;
  double phi = 0.0;
  std::array<double, kMaxDim> fiber{};
};

/// Cartesian view of a point: Euclidean coordinates x^1..x^k and fiber
/// coordinates y^1..y^{n-k}.
struct Point {
  int k = 3;
  int m = 1;
  std::array<double, kMaxDim> x{};
  std::array<double, kMaxDim> y{};

  double radius() const {
    double s = 0.0;
    for (int i = 0; i < k; ++i) s += x[i] * x[i];
    return std::sqrt(s);
  }
};

/// Grid multi-index of a node.
struct NodeIndex {
  int ir = 0;
  int it = 0;
  int ip = 0;
  std::size_t fiber = 0;
};

/// Discretized product end (R^k minus a ball) x T^{n-k}. Radial nodes are
/// uniform in s = log r; node ir is the centre of the cell
/// [s_ir - ds/2, s_ir + ds/2]. Storage order is row-major over
/// (radius, theta, phi, fiber...), fiber fastest.
class FiberedChart {
 public:
  FiberedChart(int k, int n, FiberSpec fiber, RadialSpec radial,
               AngularSpec angular, double inner_radius)
      : k_(k),
        n_(n),
        fiber_(std::move(fiber)),
        radial_(radial),
        angular_(angular),
        inner_radius_(inner_radius) {
    const double s0 = std::log(radial_.r_min);
    const double s1 = std::log(radial_.r_max);
    ds_ = (s1 - s0) / (radial_.count - 1);
    s_.resize(radial_.count);
    r_.resize(radial_.count);
    for (int i = 0; i < radial_.count; ++i) {
      s_[i] = s0 + i * ds_;
      r_[i] = std::exp(s_[i]);
    }
    r_.back() = radial_.r_max;
    dtheta_ = std::numbers::pi / angular_.n_theta;
    dphi_ = 2.0 * std::numbers::pi / angular_.n_phi;
    for (int j = 0; j < angular_.n_theta; ++j) {
      const double th = (j + 0.5) * dtheta_;
      sin_theta_.push_back(std::sin(th));
      cos_theta_.push_back(std::cos(th));
    }
    for (int l = 0; l < angular_.n_phi; ++l) {
      const double ph = l * dphi_;
      sin_phi_.push_back(std::sin(ph));
      cos_phi_.push_back(std::cos(ph));
    }
    nfiber_ = fiber_.point_count();
    fiber_stride_.assign(fiber_.dim(), 1);
    for (int a = fiber_.dim() - 2; a >= 0; --a)
      fiber_stride_[a] = fiber_stride_[a + 1] * fiber_.counts[a + 1];
    shell_size_ = static_cast<std::size_t>(angular_.n_theta) * angular_.n_phi * nfiber_;
  }

  int k() const { return k_; }
  int n() const { return n_; }
  int fiber_dim() const { return n_ - k_; }
  const FiberSpec& fiber() const { return fiber_; }
  const RadialSpec& radial_spec() const { return radial_; }
  const AngularSpec& angular_spec() const { return angular_; }
  double inner_radius() const { return inner_radius_; }
  double fiber_volume() const { return fiber_.volume(); }

  int nr() const { return radial_.count; }
  int ntheta() const { return angular_.n_theta; }
  int nphi() const { return angular_.n_phi; }
  std::size_t nfiber() const { return nfiber_; }
  std::size_t shell_size() const { return shell_size_; }
  std::size_t size() const { return shell_size_ * radial_.count; }

  double ds() const { return ds_; }
  double dtheta() const { return dtheta_; }
  double dphi() const { return dphi_; }
  double dy(int alpha) const { return fiber_.lengths[alpha] / fiber_.counts[alpha]; }

  double s(int ir) const { return s_[ir]; }
  double radius(int ir) const { return r_[ir]; }
  const std::vector<double>& radii() const { return r_; }
  double theta(int it) const { return (it + 0.5) * dtheta_; }
  double phi(int ip) const { return ip * dphi_; }
  double sin_theta(int it) const { return sin_theta_[it]; }
  double cos_theta(int it) const { return cos_theta_[it]; }
  double sin_phi(int ip) const { return sin_phi_[ip]; }
  double cos_phi(int ip) const { return cos_phi_[ip]; }

  std::size_t fiber_stride(int alpha) const { return fiber_stride_[alpha]; }
  int fiber_component(std::size_t f, int alpha) const {
    return static_cast<int>((f / fiber_stride_[alpha]) % fiber_.counts[alpha]);
  }
  double fiber_coord(std::size_t f, int alpha) const {
    return fiber_component(f, alpha) * dy(alpha);
  }

  std::size_t index(int ir, int it, int ip, std::size_t f) const {
    return ((static_cast<std::size_t>(ir) * angular_.n_theta + it) * angular_.n_phi + ip) *
               nfiber_ + f;
  }

  NodeIndex decompose(std::size_t node) const {
    NodeIndex idx;
    idx.fiber = node % nfiber_;
    node /= nfiber_;
    idx.ip = static_cast<int>(node % angular_.n_phi);
    node /= angular_.n_phi;
    idx.it = static_cast<int>(node % angular_.n_theta);
    idx.ir = static_cast<int>(node / angular_.n_theta);
    return idx;
  }

  /// Unit radial direction n(theta, phi) at node angles.
  std::array<double, 3> normal(int it, int ip) const {
    return {sin_theta_[it] * cos_phi_[ip], sin_theta_[it] * sin_phi_[ip], cos_theta_[it]};
  }
  std::array<double, 3> e_theta(int it, int ip) const {
    return {cos_theta_[it] * cos_phi_[ip], cos_theta_[it] * sin_phi_[ip], -sin_theta_[it]};
  }
  std::array<double, 3> e_phi(int ip) const { return {-sin_phi_[ip], cos_phi_[ip], 0.0}; }

  ChartPoint chart_point(std::size_t node) const {
    const NodeIndex idx = decompose(node);
    ChartPoint p;
    p.r = r_[idx.ir];
    p.theta = theta(idx.it);
    p.phi = phi(idx.ip);
    for (int a = 0; a < fiber_dim(); ++a) p.fiber[a] = fiber_coord(idx.fiber, a);
    return p;
  }

  Point point(std::size_t node) const { return to_point(chart_point(node)); }

  Point to_point(const ChartPoint& c) const {
    Point p;
    p.k = k_;
    p.m = fiber_dim();
    const double st = std::sin(c.theta);
    p.x[0] = c.r * st * std::cos(c.phi);
    p.x[1] = c.r * st * std::sin(c.phi);
    p.x[2] = c.r * std::cos(c.theta);
    for (int a = 0; a < p.m; ++a) p.y[a] = c.fiber[a];
    return p;
  }

  /// Lower edge of the radial cell owned by the first shell.
  double r_lower() const { return std::exp(s_.front() - 0.5 * ds_); }
  /// Upper edge of the radial cell owned by the last shell.
  double r_upper() const { return std::exp(s_.back() + 0.5 * ds_); }

 private:
  int k_;
  int n_;
  FiberSpec fiber_;
  RadialSpec radial_;
  AngularSpec angular_;
  double inner_radius_;
  double ds_ = 0.0;
  double dtheta_ = 0.0;
  double dphi_ = 0.0;
  std::vector<double> s_;
  std::vector<double> r_;
  std::vector<double> sin_theta_, cos_theta_, sin_phi_, cos_phi_;
  std::size_t nfiber_ = 1;
  std::vector<std::size_t> fiber_stride_;
  std::size_t shell_size_ = 0;
};

using ChartPtr = std::shared_ptr<const FiberedChart>;

/// Validates the request and builds a chart. Only the S^2 angular builder
/// ships, so k is restricted to 3 even though the data model carries k.
inline ChartPtr build_chart(int k, int n, const FiberSpec& fiber, const RadialSpec& radial,
                            const AngularSpec& angular, double inner_radius = -1.0) {
  require(k >= 3, ErrorKind::kDomain, "k must be >= 3");
  require(k == 3, ErrorKind::kDomain,
          "only the k = 3 angular quadrature is available (k = " + std::to_string(k) + ")");
  require(n > k, ErrorKind::kDomain, "n must exceed k");
  require(n <= kMaxDim, ErrorKind::kDomain, "n exceeds the supported maximum dimension");
  require(fiber.dim() == n - k, ErrorKind::kDomain, "fiber dimension must equal n - k");
  require(fiber.counts.size() == fiber.lengths.size(), ErrorKind::kDomain,
          "fiber lengths and counts differ in size");
  require(fiber.flat, ErrorKind::kDomain, "only flat torus fibers are supported");
  for (std::size_t a = 0; a < fiber.lengths.size(); ++a) {
    require(fiber.lengths[a] > 0.0, ErrorKind::kDomain, "fiber lengths must be positive");
    require(fiber.counts[a] >= 4, ErrorKind::kDomain, "fiber grid counts must be >= 4");
  }
  require(radial.r_min > 0.0 && radial.r_max > radial.r_min, ErrorKind::kDomain,
          "radii must be positive and strictly increasing");
  require(radial.count >= 4, ErrorKind::kDomain, "radial grid count must be >= 4");
  require(angular.n_theta >= 4 && angular.n_phi >= 4, ErrorKind::kDomain,
          "angular grid counts must be >= 4");
  require(angular.n_phi % 2 == 0, ErrorKind::kDomain,
          "n_phi must be even (pole crossing pairs phi with phi + pi)");
  const double inner = inner_radius > 0.0 ? inner_radius : radial.r_min;
  return std::make_shared<const FiberedChart>(k, n, fiber, radial, angular, inner);
}

}  // namespace fml
