#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "fml/error.hpp"
#include "fml/geometry/chart.hpp"
#include "fml/parallel.hpp"

namespace fml {

/// Position of (a, b) in the packed upper triangle of an n x n symmetric
/// matrix, row-major: (0,0) (0,1) ... (0,n-1) (1,1) ...
constexpr int sym_index(int a, int b, int n) {
  if (a > b) {
    const int t = a;
    a = b;
    b = t;
  }
  return a * n - a * (a - 1) / 2 + (b - a);
}

constexpr int sym_size(int n) { return n * (n + 1) / 2; }

/// Grid function sampled at every chart node.
struct ScalarField {
  ChartPtr chart;
  std::vector<double> values;

  ScalarField() = default;
  ScalarField(ChartPtr c, double fill = 0.0)
      : chart(std::move(c)), values(chart->size(), fill) {}
  ScalarField(ChartPtr c, std::vector<double> v) : chart(std::move(c)), values(std::move(v)) {
    require(values.size() == chart->size(), ErrorKind::kDomain, "field size does not match chart");
  }

  std::size_t size() const { return values.size(); }
  double& operator[](std::size_t i) { return values[i]; }
  double operator[](std::size_t i) const { return values[i]; }
};

/// Fills a scalar field from a function of the Cartesian point.
inline ScalarField sample_scalar(const ChartPtr& chart, const std::function<double(const Point&)>& f) {
  ScalarField out(chart);
  parallel_for(chart->size(), [&](std::size_t i) { out.values[i] = f(chart->point(i)); });
  return out;
}

/// Symmetric (0,2)-tensor field in the Cartesian product frame, one array per
/// packed component.
struct SymmetricTensorField {
  ChartPtr chart;
  int dim = 0;
  std::vector<std::vector<double>> components;

  SymmetricTensorField() = default;
  SymmetricTensorField(ChartPtr c, int n)
      : chart(std::move(c)),
        dim(n),
        components(sym_size(n), std::vector<double>(chart->size(), 0.0)) {}

  std::vector<double>& operator()(int a, int b) { return components[sym_index(a, b, dim)]; }
  const std::vector<double>& operator()(int a, int b) const {
    return components[sym_index(a, b, dim)];
  }
  double at(std::size_t node, int a, int b) const { return components[sym_index(a, b, dim)][node]; }
};

}  // namespace fml
