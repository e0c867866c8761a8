#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "prodsc/clustering.hpp"
#include "prodsc/matrix.hpp"
#include "prodsc/rng.hpp"

namespace prodsc {

enum class SyntheticCase { TwoManifold, TwoBlobManifold, TwoBlobs, CrossedCurves };

struct SyntheticSpec {
  SyntheticCase tag = SyntheticCase::TwoManifold;
  std::size_t points = 100;  // per component
  double sigma = 0.05;
  std::uint64_t seed = 0;
};

// Samples live in columns: X is D x N.
struct Dataset {
  Matrix X;
  std::optional<LabelVector> labels;
  std::string provenance;
};

namespace detail {

// closed curve on the sphere: [cos(s)cos(phi), cos(s)sin(phi), sin(s)] with
// s = (1/5) sin(5 phi)
inline void curve_point(double phi, double* out, bool vertical) {
  const double s = 0.2 * std::sin(5.0 * phi);
  if (!vertical) {
    out[0] = std::cos(s) * std::cos(phi);
    out[1] = std::cos(s) * std::sin(phi);
    out[2] = std::sin(s);
  } else {
    const double sv = 0.2 * std::cos(5.0 * phi);
    out[0] = std::cos(s) * std::cos(phi);
    out[1] = std::sin(sv);
    out[2] = std::cos(s) * std::sin(phi);
  }
}

inline void append_curve(std::vector<std::vector<double>>& cols, LabelVector& labels,
                         std::size_t count, double sigma, std::size_t label, bool vertical,
                         RngState& rng) {
  for (std::size_t i = 0; i < count; ++i) {
    const double phi = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
    std::vector<double> p(3);
    curve_point(phi, p.data(), vertical);
    for (double& v : p) v += sigma * rng.gaussian();
    cols.push_back(std::move(p));
    labels.push_back(label);
  }
}

inline void append_blob(std::vector<std::vector<double>>& cols, LabelVector& labels,
                        std::size_t count, double sigma, std::size_t label, double cx, double cy,
                        double cz, RngState& rng) {
  for (std::size_t i = 0; i < count; ++i) {
    std::vector<double> p = {cx + sigma * rng.gaussian(), cy + sigma * rng.gaussian(),
                             cz + sigma * rng.gaussian()};
    cols.push_back(std::move(p));
    labels.push_back(label);
  }
}

}  // namespace detail

inline Dataset gen_synthetic(const SyntheticSpec& spec) {
  RngState rng(spec.seed);
  std::vector<std::vector<double>> cols;
  LabelVector labels;
  const std::size_t m = spec.points;
  switch (spec.tag) {
    case SyntheticCase::TwoManifold:
      detail::append_curve(cols, labels, m, spec.sigma, 0, false, rng);
      detail::append_blob(cols, labels, m, spec.sigma, 1, 0.0, 0.0, 1.0, rng);
      break;
    case SyntheticCase::TwoBlobManifold:
      detail::append_curve(cols, labels, m, spec.sigma, 0, false, rng);
      detail::append_blob(cols, labels, m / 2, spec.sigma, 1, 0.0, 0.0, 1.0, rng);
      detail::append_blob(cols, labels, m - m / 2, spec.sigma, 1, 0.0, 0.0, -1.0, rng);
      break;
    case SyntheticCase::TwoBlobs: {
      const double c = 1.0 / std::sqrt(2.0);
      detail::append_blob(cols, labels, m, spec.sigma, 0, c, 0.0, c, rng);
      detail::append_blob(cols, labels, m, spec.sigma, 1, -c, 0.0, c, rng);
      break;
    }
    case SyntheticCase::CrossedCurves:
      detail::append_curve(cols, labels, m, spec.sigma, 0, false, rng);
      detail::append_curve(cols, labels, m, spec.sigma, 1, true, rng);
      break;
  }
  Dataset ds;
  ds.X = Matrix(3, cols.size());
  for (std::size_t j = 0; j < cols.size(); ++j)
    for (std::size_t i = 0; i < 3; ++i) ds.X(i, j) = cols[j][i];
  ds.labels = std::move(labels);
  ds.provenance = "synthetic";
  return ds;
}

inline const char* synthetic_case_name(SyntheticCase tag) {
  switch (tag) {
    case SyntheticCase::TwoManifold: return "two_manifold";
    case SyntheticCase::TwoBlobManifold: return "two_blob_manifold";
    case SyntheticCase::TwoBlobs: return "two_blobs";
    case SyntheticCase::CrossedCurves: return "crossed_curves";
  }
  return "?";
}

inline SyntheticCase parse_synthetic_case(const std::string& s) {
  if (s == "two_manifold") return SyntheticCase::TwoManifold;
  if (s == "two_blob_manifold") return SyntheticCase::TwoBlobManifold;
  if (s == "two_blobs") return SyntheticCase::TwoBlobs;
  if (s == "crossed_curves") return SyntheticCase::CrossedCurves;
  throw ConfigError("unknown synthetic case: " + s);
}

// ---- file formats -------------------------------------------------------

inline constexpr char kFeatureMagic[8] = {'P', 'R', 'O', 'D', 'S', 'C', '0', '1'};

namespace detail {

inline void write_u64le(std::ostream& os, std::uint64_t v) {
  unsigned char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
  os.write(reinterpret_cast<const char*>(buf), 8);
}

inline std::uint64_t read_u64le(std::istream& is) {
  unsigned char buf[8];
  is.read(reinterpret_cast<char*>(buf), 8);
  if (!is) throw TruncatedFile("feature file: truncated header");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return v;
}

}  // namespace detail

// Binary feature file: magic, N and D as u64 LE, then N*D f64 LE values
// sample-major (one sample's D coordinates contiguous).
inline void save_features_binary(const Dataset& ds, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoFailure("cannot open for writing: " + path);
  os.write(kFeatureMagic, 8);
  detail::write_u64le(os, ds.X.cols());
  detail::write_u64le(os, ds.X.rows());
  for (std::size_t j = 0; j < ds.X.cols(); ++j)
    for (std::size_t i = 0; i < ds.X.rows(); ++i) {
      const double v = ds.X(i, j);
      os.write(reinterpret_cast<const char*>(&v), 8);
    }
  if (!os) throw IoFailure("write failed: " + path);
}

inline Dataset load_features_binary(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoFailure("cannot open: " + path);
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kFeatureMagic, 8) != 0) throw BadMagic("feature file: bad magic");
  const std::uint64_t n = detail::read_u64le(is);
  const std::uint64_t d = detail::read_u64le(is);
  Dataset ds;
  ds.X = Matrix(d, n);
  for (std::uint64_t j = 0; j < n; ++j)
    for (std::uint64_t i = 0; i < d; ++i) {
      double v;
      is.read(reinterpret_cast<char*>(&v), 8);
      if (!is) throw TruncatedFile("feature file: truncated data");
      ds.X(i, j) = v;
    }
  ds.provenance = path;
  return ds;
}

// CSV: no header, one sample per row; ingestion transposes to columns.
inline Dataset load_features_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoFailure("cannot open: " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    if (!rows.empty() && row.size() != rows.front().size())
      throw NonRectangularCsv("csv: ragged rows in " + path);
    rows.push_back(std::move(row));
  }
  Dataset ds;
  const std::size_t n = rows.size();
  const std::size_t d = n ? rows.front().size() : 0;
  ds.X = Matrix(d, n);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = 0; i < d; ++i) ds.X(i, j) = rows[j][i];
  ds.provenance = path;
  return ds;
}

inline LabelVector load_labels(const std::string& path, std::size_t expected_n) {
  std::ifstream is(path);
  if (!is) throw IoFailure("cannot open: " + path);
  LabelVector labels;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const long v = std::stol(line);
    if (v < 0) throw ConfigError("labels must be non-negative: " + path);
    labels.push_back(static_cast<std::size_t>(v));
  }
  if (labels.size() != expected_n)
    throw LabelLengthMismatch("labels file has " + std::to_string(labels.size()) +
                              " entries, expected " + std::to_string(expected_n));
  return labels;
}

inline void save_labels(const LabelVector& labels, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw IoFailure("cannot open for writing: " + path);
  for (std::size_t v : labels) os << v << "\n";
  if (!os) throw IoFailure("write failed: " + path);
}

// Matrix CSV: entries rendered with 17 significant digits so a round-trip
// is value-exact.
inline void save_matrix_csv(const Matrix& m, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw IoFailure("cannot open for writing: " + path);
  char buf[64];
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", m(i, j));
      os << (j ? "," : "") << buf;
    }
    os << "\n";
  }
  if (!os) throw IoFailure("write failed: " + path);
}

inline Matrix load_matrix_csv(const std::string& path) {
  Dataset ds = load_features_csv(path);
  return transpose(ds.X);  // undo the samples-as-columns transpose
}

}  // namespace prodsc
