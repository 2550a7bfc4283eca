#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "fml/error.hpp"
#include "fml/weighted/decay_fit.hpp"

namespace fml {

/// 17 significant digits: the printed value reads back to the same double.
inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

  void add(const std::vector<std::string>& row) {
    require(row.size() == header_.size(), ErrorKind::kDomain, "CSV row width does not match the header");
    rows_.push_back(row);
  }
  void add(const std::vector<double>& row) {
    std::vector<std::string> s;
    for (double v : row) s.push_back(format_double(v));
    add(s);
  }

  std::string str() const {
    std::string out;
    auto line = [&](const std::vector<std::string>& r) {
      for (std::size_t i = 0; i < r.size(); ++i) {
        if (i) out += ',';
        out += r[i];
      }
      out += '\n';
    };
    line(header_);
    for (const auto& r : rows_) line(r);
    return out;
  }

  std::size_t size() const { return rows_.size(); }

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

/// Writes to path.tmp and renames, so a file that exists is complete.
inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    require(static_cast<bool>(out), ErrorKind::kIo, "cannot open '" + tmp.string() + "' for writing");
    out << text;
    out.flush();
    require(static_cast<bool>(out), ErrorKind::kIo, "write to '" + tmp.string() + "' failed");
  }
  std::filesystem::rename(tmp, path);
}

inline void write_csv(const std::filesystem::path& path, const CsvTable& t) { write_text(path, t.str()); }

inline void write_json(const std::filesystem::path& path, const nlohmann::json& j) { write_text(path, j.dump(2) + "\n"); }

inline nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::kIo, "cannot open '" + path.string() + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorKind::kConfig, "'" + path.string() + "' is not valid JSON: " + e.what());
  }
}

inline nlohmann::json to_json(const DecayFit& f) {
  return {{"coefficient", f.coefficient}, {"exponent", f.exponent}, {"residual", f.residual},
          {"r_min", f.r_min},             {"r_max", f.r_max},       {"shells", f.shells}};
}

}  // namespace fml
