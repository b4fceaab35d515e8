#pragma once

#include <cmath>
#include <vector>

#include "hypergrid/hsdata.hpp"
#include "hypergrid/rng.hpp"

namespace hypergrid {

struct SynthParams {
  std::size_t size = 60;            // square scene side in pixels
  std::size_t bands = 10;
  std::size_t classes = 6;
  double blob_radius = 7.0;         // pixels
  double noise_std = 0.1;
  std::size_t blobs_per_class = 3;
  double blob_variation = 0.15;     // amplitude of each blob's own spectral offset
  double class_separation = 0.25;   // amplitude of the class-specific spectral bumps
  std::size_t min_class_pixels = 50;
  std::uint64_t seed = 1;
};

struct SynthScene {
  HyperCube cube;
  LabelMap ground_truth;
};

namespace detail {
// Smooth random curve: a sum of three Gaussian bumps over the band axis.
inline std::vector<double> smooth_curve(Rng& rng, std::size_t bands, double amplitude) {
  std::vector<double> v(bands, 0.0);
  const double span = static_cast<double>(bands);
  for (int g = 0; g < 3; ++g) {
    const double a = rng.uniform(-amplitude, amplitude);
    const double mu = rng.uniform(0.0, span);
    const double width = rng.uniform(std::max(1.0, span / 8), std::max(1.5, span / 3));
    for (std::size_t b = 0; b < bands; ++b) {
      const double d = (static_cast<double>(b) - mu) / width;
      v[b] += a * std::exp(-0.5 * d * d);
    }
  }
  return v;
}
}  // namespace detail

/// Gaussian-blob scene: each class owns several disc-shaped blobs, each blob
/// perturbs the class signature with its own smooth offset, and every band
/// gets i.i.d. Gaussian noise. Pixels outside all blobs are background (0)
/// with a slowly varying spectrum of their own.
inline SynthScene generate_scene(const SynthParams& p) {
  if (p.size == 0 || p.bands == 0 || p.classes == 0 || p.blobs_per_class == 0)
    throw ParameterError("synth: size, bands, classes and blobs_per_class must be positive");
  if (!(p.blob_radius > 0) || !(p.noise_std >= 0)) throw ParameterError("synth: bad radius or noise");
  Rng rng(p.seed);
  for (int attempt = 0; attempt < 200; ++attempt) {
    Rng layout = rng.child(static_cast<std::uint64_t>(attempt));
    struct Blob {
      double r, c;
      std::size_t cls;
      std::vector<double> offset;
    };
    std::vector<Blob> blobs;
    const double side = static_cast<double>(p.size);
    for (std::size_t k = 0; k < p.classes; ++k)
      for (std::size_t j = 0; j < p.blobs_per_class; ++j)
        blobs.push_back({layout.uniform(0, side), layout.uniform(0, side), k + 1,
                         detail::smooth_curve(layout, p.bands, p.blob_variation)});

    LabelMap gt(p.size, p.size);
    std::vector<const Blob*> owner(p.size * p.size, nullptr);
    std::vector<std::size_t> counts(p.classes + 1, 0);
    for (std::size_t r = 0; r < p.size; ++r)
      for (std::size_t c = 0; c < p.size; ++c) {
        double best = p.blob_radius * p.blob_radius;
        for (const auto& b : blobs) {
          const double dr = static_cast<double>(r) + 0.5 - b.r, dc = static_cast<double>(c) + 0.5 - b.c;
          if (const double d2 = dr * dr + dc * dc; d2 <= best) {
            best = d2;
            owner[r * p.size + c] = &b;
          }
        }
        if (owner[r * p.size + c]) {
          gt.at(r, c) = static_cast<std::uint16_t>(owner[r * p.size + c]->cls);
          ++counts[owner[r * p.size + c]->cls];
        }
      }
    bool ok = true;
    for (std::size_t k = 1; k <= p.classes; ++k) ok = ok && counts[k] >= p.min_class_pixels;
    if (!ok) continue;

    Rng spectra = rng.child(1000);
    std::vector<double> base = detail::smooth_curve(spectra, p.bands, 0.3);
    for (auto& v : base) v += 0.5;
    std::vector<std::vector<double>> signature(p.classes + 1);
    for (std::size_t k = 0; k <= p.classes; ++k) {
      signature[k] = detail::smooth_curve(spectra, p.bands, p.class_separation);
      for (std::size_t b = 0; b < p.bands; ++b) signature[k][b] += base[b];
    }
    // Background drifts across the scene so it is not a single spectrum.
    const auto drift_r = detail::smooth_curve(spectra, p.bands, 0.2);
    const auto drift_c = detail::smooth_curve(spectra, p.bands, 0.2);

    Rng noise = rng.child(2000);
    SynthScene scene{HyperCube(p.size, p.size, p.bands), gt};
    for (std::size_t r = 0; r < p.size; ++r)
      for (std::size_t c = 0; c < p.size; ++c) {
        const Blob* b = owner[r * p.size + c];
        const double fr = static_cast<double>(r) / side - 0.5, fc = static_cast<double>(c) / side - 0.5;
        for (std::size_t band = 0; band < p.bands; ++band) {
          double v = b ? signature[b->cls][band] + b->offset[band]
                       : signature[0][band] + fr * drift_r[band] + fc * drift_c[band];
          v += noise.normal(0.0, p.noise_std);
          scene.cube.at(band, r, c) = static_cast<float>(v);
        }
      }
    return scene;
  }
  throw ParameterError("synth: could not place blobs giving every class enough pixels; increase size or radius");
}

}  // namespace hypergrid
