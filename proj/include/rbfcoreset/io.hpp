#pragma once

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include "rbfcoreset/sampling.hpp"
#include "rbfcoreset/sensitivity.hpp"
#include "rbfcoreset/types.hpp"

namespace rbfcoreset {

/// File could not be opened, read, or parsed.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class DataFormat { Csv, Bin };

namespace io_detail {

inline std::string format_double(Real value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

inline Real parse_double(std::string_view text, const std::string& context) {
  Real value = 0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  const auto res = std::from_chars(first, last, value);
  if (res.ec != std::errc() || res.ptr != last)
    throw IoError("failed to parse number '" + std::string(text) + "' in " + context);
  return value;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::stringstream stream(line);
  while (std::getline(stream, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

template <typename T>
void write_raw(std::ostream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_raw(std::istream& in, const std::string& context) {
  T value;
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw IoError("unexpected end of file in " + context);
  return value;
}

}  // namespace io_detail

/// CSV layout: header "x1,...,xd[,weight][,label]"; a missing weight column
/// means unit weights, a missing label column means no labels. Values are
/// written with shortest-round-trip formatting, so doubles survive exactly.
inline WeightedPointSet read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw IoError("empty file " + path.string());
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = io_detail::split_csv_line(line);

  Index d = 0;
  bool has_weight = false;
  bool has_label = false;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == "weight") {
      if (has_label || has_weight) throw IoError("malformed header in " + path.string());
      has_weight = true;
    } else if (header[i] == "label") {
      if (has_label) throw IoError("malformed header in " + path.string());
      has_label = true;
    } else if (header[i] == "x" + std::to_string(i + 1) && !has_weight && !has_label) {
      ++d;
    } else {
      throw IoError("unexpected column '" + header[i] + "' in " + path.string());
    }
  }
  if (d < 1) throw IoError("no coordinate columns in " + path.string());

  std::vector<Real> points;
  std::vector<Real> weights;
  std::vector<Real> labels;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    ++row;
    const auto fields = io_detail::split_csv_line(line);
    if (fields.size() != header.size())
      throw IoError("row " + std::to_string(row) + " has " +
                    std::to_string(fields.size()) + " fields, expected " +
                    std::to_string(header.size()) + " in " + path.string());
    const std::string context = path.string() + ":" + std::to_string(row);
    std::size_t col = 0;
    for (Index j = 0; j < d; ++j)
      points.push_back(io_detail::parse_double(fields[col++], context));
    weights.push_back(has_weight ? io_detail::parse_double(fields[col++], context) : 1.0);
    if (has_label) labels.push_back(io_detail::parse_double(fields[col++], context));
  }
  const Index n = static_cast<Index>(weights.size());
  if (n < 1) throw IoError("no data rows in " + path.string());

  WeightedPointSet set;
  set.points.resize(n, d);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < d; ++j)
      set.points(i, j) = points[static_cast<std::size_t>(i * d + j)];
  set.weights = Eigen::Map<const Vector>(weights.data(), n);
  if (has_label) set.labels = Eigen::Map<const Vector>(labels.data(), n);
  return set;
}

inline void write_csv(const std::filesystem::path& path, const WeightedPointSet& set) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  for (Index j = 0; j < set.dim(); ++j) out << (j ? "," : "") << "x" << (j + 1);
  out << ",weight";
  if (set.labels) out << ",label";
  out << "\n";
  for (Index i = 0; i < set.size(); ++i) {
    for (Index j = 0; j < set.dim(); ++j)
      out << (j ? "," : "") << io_detail::format_double(set.points(i, j));
    out << "," << io_detail::format_double(set.weights(i));
    if (set.labels) out << "," << io_detail::format_double((*set.labels)(i));
    out << "\n";
  }
  if (!out) throw IoError("write failed for " + path.string());
}

/// Binary layout: magic "RBFC", u32 version, u64 n, u64 d, u8 flags
/// (bit 0 weights present, bit 1 labels present), then row-major
/// little-endian f64 points, weights, labels.
inline void write_bin(const std::filesystem::path& path, const WeightedPointSet& set) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write("RBFC", 4);
  io_detail::write_raw<std::uint32_t>(out, 1);
  io_detail::write_raw<std::uint64_t>(out, static_cast<std::uint64_t>(set.size()));
  io_detail::write_raw<std::uint64_t>(out, static_cast<std::uint64_t>(set.dim()));
  const std::uint8_t flags =
      static_cast<std::uint8_t>(1u | (set.labels ? 2u : 0u));
  io_detail::write_raw(out, flags);
  for (Index i = 0; i < set.size(); ++i)
    for (Index j = 0; j < set.dim(); ++j) io_detail::write_raw(out, set.points(i, j));
  for (Index i = 0; i < set.size(); ++i) io_detail::write_raw(out, set.weights(i));
  if (set.labels)
    for (Index i = 0; i < set.size(); ++i) io_detail::write_raw(out, (*set.labels)(i));
  if (!out) throw IoError("write failed for " + path.string());
}

inline WeightedPointSet read_bin(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "RBFC", 4) != 0)
    throw IoError("bad magic in " + path.string());
  const auto version = io_detail::read_raw<std::uint32_t>(in, path.string());
  if (version != 1) throw IoError("unsupported version in " + path.string());
  const auto n64 = io_detail::read_raw<std::uint64_t>(in, path.string());
  const auto d64 = io_detail::read_raw<std::uint64_t>(in, path.string());
  const auto flags = io_detail::read_raw<std::uint8_t>(in, path.string());
  if (n64 < 1 || d64 < 1 || n64 > (1ull << 32) || d64 > (1ull << 20))
    throw IoError("implausible dimensions in " + path.string());
  const Index n = static_cast<Index>(n64);
  const Index d = static_cast<Index>(d64);

  WeightedPointSet set;
  set.points.resize(n, d);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < d; ++j)
      set.points(i, j) = io_detail::read_raw<Real>(in, path.string());
  if (flags & 1u) {
    set.weights.resize(n);
    for (Index i = 0; i < n; ++i)
      set.weights(i) = io_detail::read_raw<Real>(in, path.string());
  } else {
    set.weights = Vector::Ones(n);
  }
  if (flags & 2u) {
    Vector labels(n);
    for (Index i = 0; i < n; ++i)
      labels(i) = io_detail::read_raw<Real>(in, path.string());
    set.labels = std::move(labels);
  }
  return set;
}

inline WeightedPointSet read_points(const std::filesystem::path& path, DataFormat format) {
  return format == DataFormat::Csv ? read_csv(path) : read_bin(path);
}

/// Coreset files are CSV with header "index,weight", indices ascending.
inline void write_coreset_csv(const std::filesystem::path& path, const Coreset& coreset) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "index,weight\n";
  for (std::size_t i = 0; i < coreset.indices.size(); ++i)
    out << coreset.indices[i] << "," << io_detail::format_double(coreset.weights[i]) << "\n";
  if (!out) throw IoError("write failed for " + path.string());
}

inline Coreset read_coreset_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw IoError("empty file " + path.string());
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "index,weight") throw IoError("bad coreset header in " + path.string());
  Coreset coreset;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    ++row;
    const auto fields = io_detail::split_csv_line(line);
    if (fields.size() != 2)
      throw IoError("bad coreset row " + std::to_string(row) + " in " + path.string());
    const std::string context = path.string() + ":" + std::to_string(row);
    coreset.indices.push_back(
        static_cast<Index>(io_detail::parse_double(fields[0], context)));
    coreset.weights.push_back(io_detail::parse_double(fields[1], context));
  }
  return coreset;
}

/// FNV-1a over a byte buffer; used to key sensitivity caches by content.
inline std::uint64_t fnv1a(const void* data, std::size_t size,
                           std::uint64_t hash = 0xcbf29ce484222325ULL) {
  const auto* bytes = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < size; ++i) {
    hash ^= bytes[i];
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

/// Hash of the raw input bytes plus every configuration field that affects the
/// sensitivity bounds. Changing the input file or the bound configuration
/// changes the cache key.
inline std::uint64_t sensitivity_cache_key(const std::filesystem::path& input,
                                           Loss loss, SensitivityMode mode,
                                           Real radius, bool normalize) {
  std::ifstream in(input, std::ios::binary);
  if (!in) throw IoError("cannot open " + input.string());
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  char buffer[65536];
  while (in) {
    in.read(buffer, sizeof(buffer));
    hash = fnv1a(buffer, static_cast<std::size_t>(in.gcount()), hash);
  }
  const std::uint8_t loss_tag = loss == Loss::Rbf ? 0 : 1;
  const std::uint8_t mode_tag = mode == SensitivityMode::Lemma ? 0 : 1;
  const std::uint8_t norm_tag = normalize ? 1 : 0;
  hash = fnv1a(&loss_tag, 1, hash);
  hash = fnv1a(&mode_tag, 1, hash);
  hash = fnv1a(&radius, sizeof(radius), hash);
  hash = fnv1a(&norm_tag, 1, hash);
  return hash;
}

inline std::filesystem::path sensitivity_cache_path(const std::filesystem::path& input,
                                                    std::uint64_t key) {
  char name[32];
  std::snprintf(name, sizeof(name), "%016llx.sens.bin",
                static_cast<unsigned long long>(key));
  return input.parent_path() / name;
}

/// Cache payload: magic "RBFS", u32 version, loss u8, mode u8, radius f64,
/// distortion f64, saturated u8, u64 n, bounds, total.
inline void write_sensitivity_cache(const std::filesystem::path& path,
                                    const SensitivityProfile& profile) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write("RBFS", 4);
    io_detail::write_raw<std::uint32_t>(out, 1);
    io_detail::write_raw<std::uint8_t>(out, profile.loss == Loss::Rbf ? 0 : 1);
    io_detail::write_raw<std::uint8_t>(out, profile.mode == SensitivityMode::Lemma ? 0 : 1);
    io_detail::write_raw(out, profile.radius);
    io_detail::write_raw(out, profile.conditioner_distortion);
    io_detail::write_raw<std::uint8_t>(out, profile.saturated ? 1 : 0);
    io_detail::write_raw<std::uint64_t>(out, static_cast<std::uint64_t>(profile.bounds.size()));
    for (Index i = 0; i < profile.bounds.size(); ++i)
      io_detail::write_raw(out, profile.bounds(i));
    io_detail::write_raw(out, profile.total);
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);  // atomic publish
  if (ec) throw IoError("cannot publish cache " + path.string() + ": " + ec.message());
}

inline SensitivityProfile read_sensitivity_cache(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "RBFS", 4) != 0)
    throw IoError("bad magic in " + path.string());
  if (io_detail::read_raw<std::uint32_t>(in, path.string()) != 1)
    throw IoError("unsupported cache version in " + path.string());
  SensitivityProfile profile;
  profile.loss = io_detail::read_raw<std::uint8_t>(in, path.string()) == 0
                     ? Loss::Rbf
                     : Loss::Laplacian;
  profile.mode = io_detail::read_raw<std::uint8_t>(in, path.string()) == 0
                     ? SensitivityMode::Lemma
                     : SensitivityMode::Algorithm1;
  profile.radius = io_detail::read_raw<Real>(in, path.string());
  profile.conditioner_distortion = io_detail::read_raw<Real>(in, path.string());
  profile.saturated = io_detail::read_raw<std::uint8_t>(in, path.string()) != 0;
  const auto n = io_detail::read_raw<std::uint64_t>(in, path.string());
  profile.bounds.resize(static_cast<Index>(n));
  for (Index i = 0; i < profile.bounds.size(); ++i)
    profile.bounds(i) = io_detail::read_raw<Real>(in, path.string());
  profile.total = io_detail::read_raw<Real>(in, path.string());
  return profile;
}

}  // namespace rbfcoreset
