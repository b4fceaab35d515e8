#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "hypergrid/hsdata.hpp"
#include "hypergrid/rng.hpp"

namespace hypergrid {

// ---------------------------------------------------------------- artificial labels

struct GridDivisions {
  std::size_t rows = 1;  // m: parts along the height
  std::size_t cols = 1;  // n: parts along the width
};

struct GridBlocks {
  std::size_t block_h = 1;
  std::size_t block_w = 1;
};

/// Either m x n divisions or a pixel block size; k = m*n classes.
using GridSpec = std::variant<GridDivisions, GridBlocks>;

/// Boundary i of `parts` roughly equal parts of `extent`: round(i*extent/parts).
inline std::size_t part_boundary(std::size_t i, std::size_t extent, std::size_t parts) {
  return (2 * i * extent + parts) / (2 * parts);
}

/// Part index of every coordinate along one axis.
inline std::vector<std::size_t> axis_parts(std::size_t extent, std::size_t parts) {
  if (parts == 0 || parts > extent)
    throw ParameterError(std::to_string(parts) + " divisions do not fit an extent of " + std::to_string(extent));
  std::vector<std::size_t> part(extent);
  for (std::size_t i = 0; i < parts; ++i)
    for (std::size_t x = part_boundary(i, extent, parts); x < part_boundary(i + 1, extent, parts); ++x) part[x] = i;
  return part;
}

inline GridDivisions resolve_grid(std::size_t h, std::size_t w, const GridSpec& spec) {
  if (const auto* b = std::get_if<GridBlocks>(&spec)) {
    if (b->block_h == 0 || b->block_w == 0) throw ParameterError("grid block extents must be positive");
    return {(h + b->block_h - 1) / b->block_h, (w + b->block_w - 1) / b->block_w};
  }
  return std::get<GridDivisions>(spec);
}

/// Labels cells 1..m*n in row-major cell order.
inline LabelMap grid_partition(std::size_t h, std::size_t w, const GridSpec& spec) {
  const auto g = resolve_grid(h, w, spec);
  if (g.rows * g.cols > 0xFFFF) throw ParameterError("grid has more cells than label range allows");
  const auto row_part = axis_parts(h, g.rows);
  const auto col_part = axis_parts(w, g.cols);
  LabelMap map(h, w);
  for (std::size_t r = 0; r < h; ++r)
    for (std::size_t c = 0; c < w; ++c)
      map.at(r, c) = static_cast<std::uint16_t>(row_part[r] * g.cols + col_part[c] + 1);
  return map;
}

/// s vertical stripes; a pixel's label depends on its column only.
inline LabelMap stripe_partition(std::size_t h, std::size_t w, std::size_t stripes) {
  return grid_partition(h, w, GridDivisions{1, stripes});
}

// ---------------------------------------------------------------- ground-truth variants

using Grouping = std::map<std::uint16_t, std::uint16_t>;

/// Parses "old=group" lines; blank lines and '#' comments are ignored.
inline Grouping parse_grouping(std::istream& is) {
  Grouping g;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto eq = line.find('=');
    try {
      if (eq == std::string::npos) throw std::invalid_argument("");
      const long from = std::stol(line.substr(0, eq));
      const long to = std::stol(line.substr(eq + 1));
      if (from < 1 || to < 1 || from > 0xFFFF || to > 0xFFFF) throw std::invalid_argument("");
      g[static_cast<std::uint16_t>(from)] = static_cast<std::uint16_t>(to);
    } catch (const std::exception&) {
      throw FormatError("grouping line " + std::to_string(lineno) + ": expected \"old=group\" with labels >= 1");
    }
  }
  return g;
}

inline Grouping load_grouping(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path);
  return parse_grouping(is);
}

/// Coarsens gt: label 0 stays 0, every other label becomes its group.
inline LabelMap join_classes(const LabelMap& gt, const Grouping& grouping) {
  LabelMap out = gt;
  for (auto& v : out.labels) {
    if (v == 0) continue;
    auto it = grouping.find(v);
    if (it == grouping.end()) throw MappingError("grouping does not cover label " + std::to_string(v));
    v = it->second;
  }
  return out;
}

/// Refines gt by intersecting it with a partition. Each non-empty
/// (gt label, partition cell) pair becomes a class, numbered in first
/// occurrence scan order. Fragments smaller than `min_fragment` pixels are
/// merged into the largest fragment of the same gt class.
inline LabelMap split_classes(const LabelMap& gt, const LabelMap& partition, std::size_t min_fragment = 1) {
  if (gt.height != partition.height || gt.width != partition.width)
    throw DimensionError("split_classes: partition dimensions do not match ground truth");
  using Key = std::pair<std::uint16_t, std::uint16_t>;
  std::map<Key, std::size_t> order;
  std::vector<Key> keys;
  std::vector<std::size_t> counts;
  for (std::size_t i = 0; i < gt.labels.size(); ++i) {
    if (gt.labels[i] == 0) continue;
    const Key k{gt.labels[i], partition.labels[i]};
    auto [it, inserted] = order.emplace(k, keys.size());
    if (inserted) {
      keys.push_back(k);
      counts.push_back(0);
    }
    ++counts[it->second];
  }
  // target[f] = fragment whose label f's pixels end up with
  std::vector<std::size_t> target(keys.size());
  for (std::size_t f = 0; f < keys.size(); ++f) target[f] = f;
  if (min_fragment > 1) {
    std::map<std::uint16_t, std::size_t> largest;
    for (std::size_t f = 0; f < keys.size(); ++f) {
      auto [it, inserted] = largest.emplace(keys[f].first, f);
      if (!inserted && counts[f] > counts[it->second]) it->second = f;
    }
    for (std::size_t f = 0; f < keys.size(); ++f)
      if (counts[f] < min_fragment) target[f] = largest.at(keys[f].first);
  }
  // Renumber surviving fragments densely, still in first-occurrence order.
  std::vector<std::uint16_t> label(keys.size(), 0);
  std::uint16_t next = 0;
  for (std::size_t f = 0; f < keys.size(); ++f)
    if (target[f] == f) label[f] = ++next;
  LabelMap out(gt.height, gt.width);
  for (std::size_t i = 0; i < gt.labels.size(); ++i) {
    if (gt.labels[i] == 0) continue;
    out.labels[i] = label[target[order.at({gt.labels[i], partition.labels[i]})]];
  }
  return out;
}

/// Keeps only the listed labels; every other pixel becomes 0.
inline LabelMap restrict_classes(const LabelMap& gt, const std::vector<std::uint16_t>& keep) {
  std::set<std::uint16_t> k(keep.begin(), keep.end());
  LabelMap out = gt;
  for (auto& v : out.labels)
    if (!k.count(v)) v = 0;
  return out;
}

// ---------------------------------------------------------------- training pixel selection

struct LabeledPixel {
  Pixel pixel;
  std::size_t class_index;
};

struct SampleSelection {
  std::vector<std::uint16_t> classes;       // ground-truth label of class index i
  std::vector<std::vector<Pixel>> pixels;   // selected pixels per class index
  std::uint64_t seed = 0;
  std::size_t n_per_class = 0;

  std::size_t class_count() const { return classes.size(); }

  std::vector<LabeledPixel> training() const {
    std::vector<LabeledPixel> out;
    for (std::size_t c = 0; c < pixels.size(); ++c)
      for (const auto& p : pixels[c]) out.push_back({p, c});
    return out;
  }

  std::set<Pixel> training_set() const {
    std::set<Pixel> s;
    for (const auto& list : pixels) s.insert(list.begin(), list.end());
    return s;
  }

  /// Labeled pixels of gt that were not selected for training.
  std::vector<Pixel> test_pixels(const LabelMap& gt) const {
    const auto train = training_set();
    std::vector<Pixel> out;
    for (std::size_t r = 0; r < gt.height; ++r)
      for (std::size_t c = 0; c < gt.width; ++c)
        if (gt.at(r, c) != 0 && !train.count({r, c})) out.push_back({r, c});
    return out;
  }
};

/// Uniform sampling without replacement of n pixels from every class present in gt.
inline SampleSelection select_training_pixels(Rng& rng, const LabelMap& gt, std::size_t n_per_class) {
  if (n_per_class == 0) throw ParameterError("n_per_class must be positive");
  SampleSelection sel;
  sel.seed = rng.seed();
  sel.n_per_class = n_per_class;
  sel.classes = gt.present_labels();
  if (sel.classes.empty()) throw InsufficientSamplesError(0, 0, n_per_class);
  std::map<std::uint16_t, std::vector<Pixel>> support;
  for (std::size_t r = 0; r < gt.height; ++r)
    for (std::size_t c = 0; c < gt.width; ++c)
      if (auto v = gt.at(r, c); v != 0) support[v].push_back({r, c});
  for (auto label : sel.classes) {
    auto& pool = support[label];
    if (pool.size() < n_per_class) throw InsufficientSamplesError(label, pool.size(), n_per_class);
    for (std::size_t i = 0; i < n_per_class; ++i) {
      const auto j = i + static_cast<std::size_t>(rng.below(pool.size() - i));
      std::swap(pool[i], pool[j]);
    }
    sel.pixels.emplace_back(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(n_per_class));
  }
  return sel;
}

}  // namespace hypergrid
