#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "fml/error.hpp"
#include "fml/geometry/chart.hpp"
#include "fml/geometry/fields.hpp"
#include "fml/geometry/metric.hpp"

// FMLB1 layout, all little-endian:
//   "FMLB1"                          5 bytes
//   u32 kind                         1 metric (packed g_ab, a <= b), 2 scalar fields
//   u32 k, n, nr, n_theta, n_phi
//   per fiber circle: u32 count, f64 length
//   f64 r_min, r_max, inner_radius, tau
//   u32 arrays; per array: u32 name length, name bytes
//   u64 nodes
//   arrays x nodes f64, each array row-major in the chart node order

namespace fml {

enum class ContainerKind : std::uint32_t { kMetric = 1, kFields = 2 };

struct Container {
  ContainerKind kind = ContainerKind::kFields;
  ChartPtr chart;
  double tau = 0.0;
  std::vector<std::string> names;
  std::vector<std::vector<double>> arrays;
};

namespace detail {

template <class T>
T to_little(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
    std::reverse(bytes.begin(), bytes.end());
    return std::bit_cast<T>(bytes);
  }
  return v;
}

class ByteWriter {
 public:
  explicit ByteWriter(const std::string& path) : out_(path, std::ios::binary) {
    require(static_cast<bool>(out_), ErrorKind::kIo, "cannot open '" + path + "' for writing");
  }
  template <class T>
  void put(T v) {
    v = to_little(v);
    out_.write(reinterpret_cast<const char*>(&v), sizeof(T));
  }
  void bytes(const std::string& s) { out_.write(s.data(), static_cast<std::streamsize>(s.size())); }
  void finish(const std::string& path) {
    out_.flush();
    require(static_cast<bool>(out_), ErrorKind::kIo, "write to '" + path + "' failed");
  }

 private:
  std::ofstream out_;
};

class ByteReader {
 public:
  explicit ByteReader(const std::string& path) : path_(path), in_(path, std::ios::binary) {
    require(static_cast<bool>(in_), ErrorKind::kIo, "cannot open container '" + path + "'");
  }
  template <class T>
  T get() {
    T v;
    in_.read(reinterpret_cast<char*>(&v), sizeof(T));
    require(in_.gcount() == static_cast<std::streamsize>(sizeof(T)), ErrorKind::kIo,
            "truncated container '" + path_ + "'");
    return to_little(v);
  }
  std::string bytes(std::size_t n) {
    std::string s(n, '\0');
    in_.read(s.data(), static_cast<std::streamsize>(n));
    require(in_.gcount() == static_cast<std::streamsize>(n), ErrorKind::kIo, "truncated container '" + path_ + "'");
    return s;
  }
  bool at_end() { return in_.peek() == std::char_traits<char>::eof(); }

 private:
  std::string path_;
  std::ifstream in_;
};

inline std::string component_name(int a, int b) { return "g" + std::to_string(a + 1) + std::to_string(b + 1); }

}  // namespace detail

inline void write_container(const std::string& path, const Container& box) {
  require(box.chart != nullptr, ErrorKind::kDomain, "container without a chart");
  require(box.names.size() == box.arrays.size(), ErrorKind::kDomain, "array names and arrays differ in count");
  const FiberedChart& c = *box.chart;
  for (const auto& a : box.arrays) require(a.size() == c.size(), ErrorKind::kDomain, "array size does not match chart");
  detail::ByteWriter w(path);
  w.bytes("FMLB1");
  w.put(static_cast<std::uint32_t>(box.kind));
  for (int v : {c.k(), c.n(), c.nr(), c.ntheta(), c.nphi()}) w.put(static_cast<std::uint32_t>(v));
  for (int a = 0; a < c.fiber_dim(); ++a) {
    w.put(static_cast<std::uint32_t>(c.fiber().counts[a]));
    w.put(c.fiber().lengths[a]);
  }
  w.put(c.radial_spec().r_min);
  w.put(c.radial_spec().r_max);
  w.put(c.inner_radius());
  w.put(box.tau);
  w.put(static_cast<std::uint32_t>(box.names.size()));
  for (const auto& name : box.names) {
    w.put(static_cast<std::uint32_t>(name.size()));
    w.bytes(name);
  }
  w.put(static_cast<std::uint64_t>(c.size()));
  for (const auto& a : box.arrays)
    for (double v : a) w.put(v);
  w.finish(path);
}

inline Container read_container(const std::string& path) {
  detail::ByteReader r(path);
  require(r.bytes(5) == "FMLB1", ErrorKind::kIo, "'" + path + "' is not an FMLB1 container");
  Container box;
  const auto kind = r.get<std::uint32_t>();
  require(kind == 1 || kind == 2, ErrorKind::kIo, "unknown container kind " + std::to_string(kind));
  box.kind = static_cast<ContainerKind>(kind);
  int dims[5];
  for (int& d : dims) d = static_cast<int>(r.get<std::uint32_t>());
  const int k = dims[0], n = dims[1];
  require(n > k && n <= kMaxDim, ErrorKind::kIo, "container dimensions out of range");
  FiberSpec fiber;
  for (int a = 0; a < n - k; ++a) {
    fiber.counts.push_back(static_cast<int>(r.get<std::uint32_t>()));
    fiber.lengths.push_back(r.get<double>());
  }
  RadialSpec radial;
  radial.r_min = r.get<double>();
  radial.r_max = r.get<double>();
  radial.count = dims[2];
  const double inner = r.get<double>();
  box.tau = r.get<double>();
  try {
    box.chart = build_chart(k, n, fiber, radial, AngularSpec{dims[3], dims[4]}, inner);
  } catch (const Error& e) {
    fail(ErrorKind::kIo, std::string("container chart is invalid: ") + e.what());
  }
  const auto count = r.get<std::uint32_t>();
  require(count <= 1024, ErrorKind::kIo, "implausible array count in container");
  for (std::uint32_t q = 0; q < count; ++q) {
    const auto len = r.get<std::uint32_t>();
    require(len <= 4096, ErrorKind::kIo, "implausible array name length in container");
    box.names.push_back(r.bytes(len));
  }
  const auto nodes = r.get<std::uint64_t>();
  require(nodes == box.chart->size(), ErrorKind::kIo, "container node count does not match its chart");
  box.arrays.assign(count, std::vector<double>(nodes));
  for (auto& a : box.arrays)
    for (double& v : a) v = r.get<double>();
  require(r.at_end(), ErrorKind::kIo, "trailing bytes after container payload");
  return box;
}

inline void write_metric(const std::string& path, const MetricField& metric) {
  const int n = metric.chart->n();
  Container box{ContainerKind::kMetric, metric.chart, metric.tau, {}, {}};
  for (int a = 0; a < n; ++a)
    for (int b = a; b < n; ++b) {
      box.names.push_back(detail::component_name(a, b));
      box.arrays.push_back(metric.g(a, b));
    }
  write_container(path, box);
}

/// The closed form, when there was one, is not stored; the result is sampled data.
inline MetricField read_metric(const std::string& path) {
  Container box = read_container(path);
  require(box.kind == ContainerKind::kMetric, ErrorKind::kIo, "'" + path + "' holds fields, not a metric");
  const int n = box.chart->n();
  require(box.arrays.size() == static_cast<std::size_t>(sym_size(n)), ErrorKind::kIo,
          "metric container has the wrong number of components");
  MetricField m{box.chart, SymmetricTensorField(box.chart, n), box.tau, std::nullopt};
  for (int a = 0; a < n; ++a)
    for (int b = a; b < n; ++b) {
      const std::size_t q = static_cast<std::size_t>(sym_index(a, b, n));
      require(box.names[q] == detail::component_name(a, b), ErrorKind::kIo, "unexpected component order in container");
      m.g(a, b) = std::move(box.arrays[q]);
    }
  return m;
}

inline void write_fields(const std::string& path, const ChartPtr& chart, const std::vector<std::string>& names,
                         const std::vector<std::vector<double>>& arrays) {
  write_container(path, Container{ContainerKind::kFields, chart, 0.0, names, arrays});
}

}  // namespace fml
