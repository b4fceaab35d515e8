#pragma once

#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "hypergrid/binio.hpp"
#include "hypergrid/tensor.hpp"

namespace hypergrid {

struct NamedTensors {
  std::string name;
  std::vector<Tensor<float>> tensors;

  friend bool operator==(const NamedTensors&, const NamedTensors&) = default;
};

// HGW1 layout, all integers little-endian u32:
//   "HGW1" | layer count | per layer: name length, name bytes, tensor count |
//   per tensor: rank, extents..., then f32 values row-major
inline void write_weights(std::ostream& os, const std::vector<NamedTensors>& layers) {
  binio::write_magic(os, "HGW1");
  binio::write_u32(os, static_cast<std::uint32_t>(layers.size()));
  for (const auto& layer : layers) {
    binio::write_u32(os, static_cast<std::uint32_t>(layer.name.size()));
    binio::write_bytes(os, layer.name.data(), layer.name.size());
    binio::write_u32(os, static_cast<std::uint32_t>(layer.tensors.size()));
    for (const auto& t : layer.tensors) {
      binio::write_u32(os, static_cast<std::uint32_t>(t.rank()));
      for (auto e : t.shape()) {
        if (e > std::numeric_limits<std::uint32_t>::max()) throw DimensionError("HGW1: extent exceeds u32");
        binio::write_u32(os, static_cast<std::uint32_t>(e));
      }
      for (float v : t.values()) binio::write_f32(os, v);
    }
  }
}

inline std::vector<NamedTensors> read_weights(std::istream& is) {
  binio::expect_magic(is, "HGW1");
  const auto layer_count = binio::read_u32(is, "HGW1 layer count");
  std::vector<NamedTensors> layers;
  layers.reserve(std::min<std::uint32_t>(layer_count, 4096));
  for (std::uint32_t l = 0; l < layer_count; ++l) {
    NamedTensors layer;
    const auto name_len = binio::read_u32(is, "HGW1 name length");
    if (name_len > (1u << 16)) throw FormatError("HGW1: implausible layer name length");
    layer.name.resize(name_len);
    binio::read_bytes(is, layer.name.data(), name_len, "HGW1 layer name");
    const auto tensor_count = binio::read_u32(is, "HGW1 tensor count");
    for (std::uint32_t t = 0; t < tensor_count; ++t) {
      const auto rank = binio::read_u32(is, "HGW1 rank");
      if (rank == 0 || rank > 8) throw FormatError("HGW1: unsupported tensor rank " + std::to_string(rank));
      Shape shape(rank);
      for (auto& e : shape) {
        e = binio::read_u32(is, "HGW1 extent");
        if (e == 0) throw FormatError("HGW1: zero extent");
      }
      std::vector<float> values(shape_size(shape));
      for (auto& v : values) v = binio::read_f32(is, "HGW1 values");
      layer.tensors.emplace_back(std::move(shape), std::move(values));
    }
    layers.push_back(std::move(layer));
  }
  return layers;
}

inline void save_weights(const std::string& path, const std::vector<NamedTensors>& layers) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path + " for writing");
  write_weights(os, layers);
}

inline std::vector<NamedTensors> load_weights(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path);
  return read_weights(is);
}

}  // namespace hypergrid
