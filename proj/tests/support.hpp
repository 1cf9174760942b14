#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "towerdebias/csv.hpp"
#include "towerdebias/data.hpp"

namespace tdb::test {

struct ColumnDef {
  std::string name;
  ColumnRole role;
  std::vector<double> values;
};

// Numeric dataset with row ids 0..n-1.
inline Dataset make_dataset(std::vector<ColumnDef> defs) {
  std::vector<Column> cols;
  const std::size_t n = defs.empty() ? 0 : defs.front().values.size();
  for (auto& d : defs) {
    Column c;
    c.name = d.name;
    c.source = d.name;
    c.role = d.role;
    c.kind = ColumnKind::Numeric;
    c.values = std::move(d.values);
    cols.push_back(std::move(c));
  }
  std::vector<std::size_t> ids(n);
  for (std::size_t i = 0; i < n; ++i) ids[i] = i;
  return Dataset(std::move(cols), {}, std::move(ids));
}

inline Dataset encode_text(const std::string& text, const Schema& schema,
                           const LoadOptions& options = {}) {
  std::istringstream in(text);
  const auto table = csv::parse(in);
  return encode(table.header, table.rows, schema, options);
}

inline std::vector<double> normals(std::size_t n, std::mt19937_64& rng, double sd = 1.0) {
  std::normal_distribution<double> dist(0.0, sd);
  std::vector<double> out(n);
  for (auto& v : out) v = dist(rng);
  return out;
}

inline std::vector<double> uniforms(std::size_t n, std::mt19937_64& rng, double lo = 0.0,
                                    double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> out(n);
  for (auto& v : out) v = dist(rng);
  return out;
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("tdb-" + tag + "-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace tdb::test
