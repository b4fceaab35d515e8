#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "hypergrid/binio.hpp"
#include "hypergrid/tensor.hpp"

namespace hypergrid {

/// h x w x b reflectance volume stored band-sequential: (band, row, col).
struct HyperCube {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t bands = 0;
  std::vector<float> values;

  HyperCube() = default;
  HyperCube(std::size_t h, std::size_t w, std::size_t b, float fill = 0.0f)
      : height(h), width(w), bands(b), values(h * w * b, fill) {
    if (h == 0 || w == 0 || b == 0) throw DimensionError("cube dimensions must be positive");
  }

  float& at(std::size_t band, std::size_t row, std::size_t col) {
    return values[(band * height + row) * width + col];
  }
  float at(std::size_t band, std::size_t row, std::size_t col) const {
    return values[(band * height + row) * width + col];
  }
  std::size_t pixels() const { return height * width; }

  friend bool operator==(const HyperCube&, const HyperCube&) = default;
};

struct BandStats {
  std::vector<double> mean;
  std::vector<double> stddev;  // population standard deviation
};

/// h x w class assignment; 0 means unlabeled.
struct LabelMap {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint16_t> labels;

  LabelMap() = default;
  LabelMap(std::size_t h, std::size_t w, std::uint16_t fill = 0) : height(h), width(w), labels(h * w, fill) {
    if (h == 0 || w == 0) throw DimensionError("label map dimensions must be positive");
  }

  std::uint16_t& at(std::size_t row, std::size_t col) { return labels[row * width + col]; }
  std::uint16_t at(std::size_t row, std::size_t col) const { return labels[row * width + col]; }

  std::size_t class_count() const {
    return labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end());
  }

  /// Distinct nonzero labels, ascending.
  std::vector<std::uint16_t> present_labels() const {
    std::set<std::uint16_t> s(labels.begin(), labels.end());
    s.erase(0);
    return {s.begin(), s.end()};
  }

  friend bool operator==(const LabelMap&, const LabelMap&) = default;
};

struct Pixel {
  std::size_t row = 0;
  std::size_t col = 0;
  friend auto operator<=>(const Pixel&, const Pixel&) = default;
};

struct Patch {
  Pixel center;
  Tensor<float> window;  // (bands, side, side)
};

// ---------------------------------------------------------------- native cube format

enum class CubeFormat { native, envi };

inline void write_cube(std::ostream& os, const HyperCube& cube) {
  binio::write_magic(os, "HSC1");
  binio::write_u32(os, static_cast<std::uint32_t>(cube.height));
  binio::write_u32(os, static_cast<std::uint32_t>(cube.width));
  binio::write_u32(os, static_cast<std::uint32_t>(cube.bands));
  for (float v : cube.values) binio::write_f32(os, v);
}

namespace detail {
inline void check_finite(const HyperCube& cube) {
  for (std::size_t i = 0; i < cube.values.size(); ++i)
    if (!std::isfinite(cube.values[i]))
      throw DataError("non-finite value in cube at band-sequential offset " + std::to_string(i));
}
}  // namespace detail

inline HyperCube read_cube(std::istream& is) {
  binio::expect_magic(is, "HSC1");
  const auto h = binio::read_u32(is, "HSC1 header");
  const auto w = binio::read_u32(is, "HSC1 header");
  const auto b = binio::read_u32(is, "HSC1 header");
  if (h == 0 || w == 0 || b == 0) throw FormatError("HSC1: zero dimension in header");
  HyperCube cube(h, w, b);
  for (auto& v : cube.values) v = binio::read_f32(is, "HSC1 payload");
  detail::check_finite(cube);
  return cube;
}

inline void save_cube(const HyperCube& cube, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path + " for writing");
  write_cube(os, cube);
}

// ---------------------------------------------------------------- ENVI

namespace detail {

inline std::string lower_trim(std::string s) {
  auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

inline std::map<std::string, std::string> parse_envi_header(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || lower_trim(line).rfind("envi", 0) != 0)
    throw FormatError("ENVI header must start with \"ENVI\"");
  std::map<std::string, std::string> kv;
  while (std::getline(is, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    std::string key = lower_trim(line.substr(0, eq));
    std::string value = line.substr(eq + 1);
    if (value.find('{') != std::string::npos) {
      while (value.find('}') == std::string::npos && std::getline(is, line)) value += "\n" + line;
    }
    kv[key] = lower_trim(value);
  }
  return kv;
}

inline std::size_t envi_int(const std::map<std::string, std::string>& kv, const std::string& key,
                            std::optional<std::size_t> fallback = std::nullopt) {
  auto it = kv.find(key);
  if (it == kv.end()) {
    if (fallback) return *fallback;
    throw FormatError("ENVI header missing \"" + key + "\"");
  }
  try {
    std::size_t pos = 0;
    const long long v = std::stoll(it->second, &pos);
    if (v < 0 || pos != it->second.size()) throw FormatError("");
    return static_cast<std::size_t>(v);
  } catch (const std::exception&) {
    throw FormatError("ENVI header: \"" + key + "\" is not a nonnegative integer");
  }
}

inline std::pair<std::filesystem::path, std::filesystem::path> envi_paths(const std::filesystem::path& p) {
  namespace fs = std::filesystem;
  if (p.extension() == ".hdr") {
    fs::path stem = p;
    stem.replace_extension();
    for (const char* ext : {"", ".img", ".raw", ".dat", ".bsq", ".bil", ".bip"}) {
      fs::path data = stem;
      data += ext;
      if (fs::exists(data)) return {p, data};
    }
    throw IoError("no data file found next to " + p.string());
  }
  fs::path hdr = p;
  hdr += ".hdr";
  if (fs::exists(hdr)) return {hdr, p};
  hdr = p;
  hdr.replace_extension(".hdr");
  if (fs::exists(hdr)) return {hdr, p};
  throw IoError("no ENVI header found for " + p.string());
}

}  // namespace detail

/// Reads an ENVI cube; `path` may name either the .hdr file or the data file.
inline HyperCube load_envi(const std::string& path) {
  const auto [hdr_path, data_path] = detail::envi_paths(path);
  std::ifstream hs(hdr_path);
  if (!hs) throw IoError("cannot open " + hdr_path.string());
  const auto kv = detail::parse_envi_header(hs);
  const auto w = detail::envi_int(kv, "samples");
  const auto h = detail::envi_int(kv, "lines");
  const auto b = detail::envi_int(kv, "bands");
  const auto dtype = detail::envi_int(kv, "data type");
  const auto order = detail::envi_int(kv, "byte order", 0);
  const auto offset = detail::envi_int(kv, "header offset", 0);
  const std::string interleave = kv.count("interleave") ? kv.at("interleave") : "bsq";
  if (h == 0 || w == 0 || b == 0) throw FormatError("ENVI: zero dimension");
  if (dtype != 4 && dtype != 12) throw FormatError("ENVI: unsupported data type " + std::to_string(dtype));
  if (order != 0) throw FormatError("ENVI: unsupported byte order " + std::to_string(order));
  if (interleave != "bsq" && interleave != "bil" && interleave != "bip")
    throw FormatError("ENVI: unsupported interleave \"" + interleave + "\"");

  std::ifstream ds(data_path, std::ios::binary);
  if (!ds) throw IoError("cannot open " + data_path.string());
  ds.seekg(static_cast<std::streamoff>(offset));
  HyperCube cube(h, w, b);
  for (std::size_t i = 0; i < h * w * b; ++i) {
    // i enumerates the file's sample order; map it to (band,row,col).
    std::size_t band, row, col;
    if (interleave == "bsq") {
      band = i / (h * w);
      row = (i / w) % h;
      col = i % w;
    } else if (interleave == "bil") {
      row = i / (b * w);
      band = (i / w) % b;
      col = i % w;
    } else {
      row = i / (w * b);
      col = (i / b) % w;
      band = i % b;
    }
    cube.at(band, row, col) =
        dtype == 4 ? binio::read_f32(ds, "ENVI payload") : static_cast<float>(binio::read_u16(ds, "ENVI payload"));
  }
  detail::check_finite(cube);
  return cube;
}

inline HyperCube load_cube(const std::string& path, CubeFormat format = CubeFormat::native) {
  if (format == CubeFormat::envi) return load_envi(path);
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path);
  return read_cube(is);
}

// ---------------------------------------------------------------- preprocessing

inline BandStats band_statistics(const HyperCube& cube) {
  BandStats s{std::vector<double>(cube.bands), std::vector<double>(cube.bands)};
  const std::size_t n = cube.pixels();
  for (std::size_t b = 0; b < cube.bands; ++b) {
    const float* band = cube.values.data() + b * n;
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += band[i];
    const double mean = sum / static_cast<double>(n);
    double sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) sq += (band[i] - mean) * (band[i] - mean);
    s.mean[b] = mean;
    s.stddev[b] = std::sqrt(sq / static_cast<double>(n));
  }
  return s;
}

namespace detail {
inline void check_stats(const HyperCube& cube, const BandStats& stats) {
  if (stats.mean.size() != cube.bands || stats.stddev.size() != cube.bands)
    throw DimensionError("band statistics cover " + std::to_string(stats.mean.size()) + " bands, cube has " +
                         std::to_string(cube.bands));
}
}  // namespace detail

inline HyperCube center_bands(HyperCube cube, const BandStats& stats) {
  detail::check_stats(cube, stats);
  const std::size_t n = cube.pixels();
  for (std::size_t b = 0; b < cube.bands; ++b)
    for (std::size_t i = 0; i < n; ++i)
      cube.values[b * n + i] = static_cast<float>(cube.values[b * n + i] - stats.mean[b]);
  return cube;
}

inline HyperCube standardize_bands(HyperCube cube, const BandStats& stats, double epsilon = 1e-8) {
  detail::check_stats(cube, stats);
  const std::size_t n = cube.pixels();
  for (std::size_t b = 0; b < cube.bands; ++b) {
    const double denom = std::max(stats.stddev[b], epsilon);
    for (std::size_t i = 0; i < n; ++i)
      cube.values[b * n + i] = static_cast<float>((cube.values[b * n + i] - stats.mean[b]) / denom);
  }
  return cube;
}

/// Drops the listed (0-based) bands, e.g. noisy or water-absorption channels.
inline HyperCube exclude_bands(const HyperCube& cube, const std::vector<std::size_t>& excluded) {
  std::set<std::size_t> drop(excluded.begin(), excluded.end());
  for (auto b : drop)
    if (b >= cube.bands) throw BoundsError("excluded band " + std::to_string(b) + " out of range");
  if (drop.size() == cube.bands) throw DimensionError("all bands excluded");
  HyperCube out(cube.height, cube.width, cube.bands - drop.size());
  std::size_t dst = 0;
  const std::size_t n = cube.pixels();
  for (std::size_t b = 0; b < cube.bands; ++b) {
    if (drop.count(b)) continue;
    std::copy_n(cube.values.begin() + static_cast<std::ptrdiff_t>(b * n), n,
                out.values.begin() + static_cast<std::ptrdiff_t>(dst * n));
    ++dst;
  }
  return out;
}

// ---------------------------------------------------------------- patches

/// Mirror reflection without repeating the edge pixel: -1 -> 1, n -> n-2.
inline std::size_t reflect_index(long i, std::size_t n) {
  if (n == 1) return 0;
  const long period = 2 * (static_cast<long>(n) - 1);
  long r = i % period;
  if (r < 0) r += period;
  if (r >= static_cast<long>(n)) r = period - r;
  return static_cast<std::size_t>(r);
}

/// Writes the (bands, side, side) window around `center` into `out`.
inline void extract_window(const HyperCube& cube, Pixel center, std::size_t side, float* out) {
  if (side % 2 == 0) throw ParameterError("patch side must be odd, got " + std::to_string(side));
  if (center.row >= cube.height || center.col >= cube.width)
    throw BoundsError("patch center (" + std::to_string(center.row) + "," + std::to_string(center.col) +
                      ") outside image");
  const long half = static_cast<long>(side / 2);
  std::vector<std::size_t> rows(side), cols(side);
  for (std::size_t k = 0; k < side; ++k) {
    rows[k] = reflect_index(static_cast<long>(center.row) - half + static_cast<long>(k), cube.height);
    cols[k] = reflect_index(static_cast<long>(center.col) - half + static_cast<long>(k), cube.width);
  }
  const std::size_t n = cube.pixels();
  for (std::size_t b = 0; b < cube.bands; ++b) {
    const float* band = cube.values.data() + b * n;
    for (std::size_t y = 0; y < side; ++y)
      for (std::size_t x = 0; x < side; ++x) *out++ = band[rows[y] * cube.width + cols[x]];
  }
}

inline Patch extract_patch(const HyperCube& cube, Pixel center, std::size_t side) {
  Patch p{center, Tensor<float>({cube.bands, side, side})};
  extract_window(cube, center, side, p.window.data());
  return p;
}

/// Batch of windows shaped (N, bands, side, side).
inline Tensor<float> extract_batch(const HyperCube& cube, std::span<const Pixel> centers, std::size_t side) {
  if (centers.empty()) throw DimensionError("extract_batch: no centers");
  Tensor<float> batch({centers.size(), cube.bands, side, side});
  const std::size_t stride = cube.bands * side * side;
  for (std::size_t i = 0; i < centers.size(); ++i) extract_window(cube, centers[i], side, batch.data() + i * stride);
  return batch;
}

// ---------------------------------------------------------------- label maps

inline void write_labelmap(std::ostream& os, const LabelMap& map) {
  binio::write_magic(os, "HSL1");
  binio::write_u32(os, static_cast<std::uint32_t>(map.height));
  binio::write_u32(os, static_cast<std::uint32_t>(map.width));
  for (auto v : map.labels) binio::write_u16(os, v);
}

inline LabelMap read_labelmap(std::istream& is) {
  binio::expect_magic(is, "HSL1");
  const auto h = binio::read_u32(is, "HSL1 header");
  const auto w = binio::read_u32(is, "HSL1 header");
  if (h == 0 || w == 0) throw FormatError("HSL1: zero dimension in header");
  LabelMap map(h, w);
  for (auto& v : map.labels) v = binio::read_u16(is, "HSL1 payload");
  return map;
}

inline void save_labelmap(const LabelMap& map, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path + " for writing");
  write_labelmap(os, map);
}

inline LabelMap load_labelmap(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path);
  return read_labelmap(is);
}

inline void require_same_frame(const HyperCube& cube, const LabelMap& map) {
  if (cube.height != map.height || cube.width != map.width)
    throw DimensionError("label map " + std::to_string(map.height) + "x" + std::to_string(map.width) +
                         " does not match cube " + std::to_string(cube.height) + "x" + std::to_string(cube.width));
}

// ---------------------------------------------------------------- map images

/// Class 0 is black; class i >= 1 has hue i*137.508 deg, saturation 0.8, value 0.95.
inline std::array<std::uint8_t, 3> palette_color(std::size_t label) {
  if (label == 0) return {0, 0, 0};
  const double hue = std::fmod(static_cast<double>(label) * 137.508, 360.0);
  const double s = 0.8, v = 0.95;
  const double c = v * s;
  const double hp = hue / 60.0;
  const double x = c * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
  double r = 0, g = 0, b = 0;
  switch (static_cast<int>(hp)) {
    case 0: r = c, g = x; break;
    case 1: r = x, g = c; break;
    case 2: g = c, b = x; break;
    case 3: g = x, b = c; break;
    case 4: r = x, b = c; break;
    default: r = c, b = x; break;
  }
  const double m = v - c;
  auto to8 = [m](double ch) { return static_cast<std::uint8_t>(std::lround((ch + m) * 255.0)); };
  return {to8(r), to8(g), to8(b)};
}

inline void write_map_image(std::ostream& os, const LabelMap& map) {
  if (map.class_count() > 255) throw ParameterError("map image supports at most 255 classes");
  os << "P6\n" << map.width << ' ' << map.height << "\n255\n";
  for (auto label : map.labels) {
    const auto rgb = palette_color(label);
    binio::write_bytes(os, rgb.data(), rgb.size());
  }
}

inline void export_map_image(const LabelMap& map, const std::string& path) {
  if (map.class_count() > 255) throw ParameterError("map image supports at most 255 classes");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path + " for writing");
  write_map_image(os, map);
}

}  // namespace hypergrid
