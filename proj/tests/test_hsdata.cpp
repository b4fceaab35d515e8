#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "hypergrid/hsdata.hpp"
#include "hypergrid/rng.hpp"

using namespace hypergrid;
namespace fs = std::filesystem;

namespace {

HyperCube random_cube(Rng& rng, std::size_t h, std::size_t w, std::size_t b, double mean = 0.0, double sd = 1.0) {
  HyperCube c(h, w, b);
  for (auto& v : c.values) v = static_cast<float>(rng.normal(mean, sd));
  return c;
}

fs::path temp_dir(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("hypergrid_hsdata_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

template <typename T>
void write_le(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

}  // namespace

// ---------------------------------------------------------------- HSC1

TEST(NativeCube, LayoutIsBandSequential) {
  std::stringstream ss;
  ss.write("HSC1", 4);
  for (std::uint32_t v : {2u, 2u, 1u}) write_le(ss, v);
  for (float v : {1.f, 2.f, 3.f, 4.f}) write_le(ss, v);
  const auto c = read_cube(ss);
  EXPECT_EQ(c.height, 2u);
  EXPECT_EQ(c.bands, 1u);
  EXPECT_EQ(c.at(0, 1, 0), 3.0f);
}

TEST(NativeCube, RoundTripIsBitExact) {
  Rng rng(1);
  for (auto [h, w, b] : {std::tuple{1, 1, 1}, std::tuple{3, 7, 2}, std::tuple{16, 5, 11}}) {
    const auto c = random_cube(rng, h, w, b);
    std::stringstream ss;
    write_cube(ss, c);
    EXPECT_EQ(ss.str().size(), 16 + 4 * c.values.size());
    EXPECT_EQ(read_cube(ss), c);
  }
}

TEST(NativeCube, FileRoundTrip) {
  Rng rng(2);
  const auto dir = temp_dir("file");
  const auto c = random_cube(rng, 4, 6, 3);
  save_cube(c, (dir / "c.hsc").string());
  EXPECT_EQ(load_cube((dir / "c.hsc").string()), c);
  EXPECT_THROW(load_cube((dir / "missing.hsc").string()), IoError);
}

TEST(NativeCube, Errors) {
  std::stringstream bad("XXXX");
  EXPECT_THROW(read_cube(bad), FormatError);

  std::stringstream trunc;
  trunc.write("HSC1", 4);
  for (std::uint32_t v : {2u, 2u, 1u}) write_le(trunc, v);
  write_le(trunc, 1.0f);
  EXPECT_THROW(read_cube(trunc), IoError);

  std::stringstream nan;
  nan.write("HSC1", 4);
  for (std::uint32_t v : {1u, 1u, 1u}) write_le(nan, v);
  write_le(nan, std::nanf(""));
  EXPECT_THROW(read_cube(nan), DataError);
}

// ---------------------------------------------------------------- ENVI

TEST(Envi, InterleavesAgreeWithBsq) {
  Rng rng(3);
  const std::size_t h = 3, w = 4, b = 5;
  const auto cube = random_cube(rng, h, w, b);
  const auto dir = temp_dir("envi");
  for (std::string il : {"bsq", "bil", "bip"}) {
    std::ofstream hdr(dir / (il + ".hdr"));
    hdr << "ENVI\ndescription = {test cube}\nsamples = " << w << "\nlines   = " << h << "\nbands = " << b
        << "\nheader offset = 0\nfile type = ENVI Standard\ndata type = 4\ninterleave = " << il
        << "\nbyte order = 0\n";
    hdr.close();
    std::ofstream data(dir / (il + ".img"), std::ios::binary);
    for (std::size_t i = 0; i < h * w * b; ++i) {
      std::size_t band, row, col;
      if (il == "bsq") {
        band = i / (h * w), row = (i / w) % h, col = i % w;
      } else if (il == "bil") {
        row = i / (b * w), band = (i / w) % b, col = i % w;
      } else {
        row = i / (w * b), col = (i / b) % w, band = i % b;
      }
      write_le(data, cube.at(band, row, col));
    }
    data.close();
    EXPECT_EQ(load_cube((dir / (il + ".hdr")).string(), CubeFormat::envi), cube) << il;
    EXPECT_EQ(load_cube((dir / (il + ".img")).string(), CubeFormat::envi), cube) << il;
  }
}

TEST(Envi, DeclaredDimensionsAndUint16) {
  const auto dir = temp_dir("envi_u16");
  const std::size_t h = 145, w = 145, b = 200;
  {
    std::ofstream hdr(dir / "ip.hdr");
    hdr << "ENVI\nsamples = 145\nlines = 145\nbands = 200\ndata type = 12\ninterleave = bsq\nbyte order = 0\n";
    std::ofstream data(dir / "ip", std::ios::binary);
    for (std::size_t i = 0; i < h * w * b; ++i) write_le(data, static_cast<std::uint16_t>(i % 6000));
  }
  const auto c = load_cube((dir / "ip").string(), CubeFormat::envi);
  EXPECT_EQ(c.height, 145u);
  EXPECT_EQ(c.width, 145u);
  EXPECT_EQ(c.bands, 200u);
  EXPECT_EQ(c.at(1, 0, 0), static_cast<float>((145 * 145) % 6000));
}

TEST(Envi, UnsupportedVariantsAreRejected) {
  const auto dir = temp_dir("envi_bad");
  auto header = [&](const std::string& extra) {
    std::ofstream hdr(dir / "x.hdr");
    hdr << "ENVI\nsamples = 1\nlines = 1\nbands = 1\n" << extra;
    std::ofstream data(dir / "x.img", std::ios::binary);
    write_le(data, 1.0f);
  };
  header("data type = 5\ninterleave = bsq\n");
  EXPECT_THROW(load_cube((dir / "x.hdr").string(), CubeFormat::envi), FormatError);
  header("data type = 4\ninterleave = bsq\nbyte order = 1\n");
  EXPECT_THROW(load_cube((dir / "x.hdr").string(), CubeFormat::envi), FormatError);
  header("data type = 4\ninterleave = xyz\n");
  EXPECT_THROW(load_cube((dir / "x.hdr").string(), CubeFormat::envi), FormatError);
}

// ---------------------------------------------------------------- statistics and preprocessing

TEST(BandStatistics, ConstantAndTwoValueBands) {
  HyperCube c(1, 2, 2);
  c.at(0, 0, 0) = 5, c.at(0, 0, 1) = 5;
  c.at(1, 0, 0) = 1, c.at(1, 0, 1) = 3;
  const auto s = band_statistics(c);
  EXPECT_EQ(s.mean[0], 5.0);
  EXPECT_EQ(s.stddev[0], 0.0);
  EXPECT_EQ(s.mean[1], 2.0);
  EXPECT_EQ(s.stddev[1], 1.0);
}

TEST(BandStatistics, MatchesTwoPassOracle) {
  Rng rng(4);
  const auto c = random_cube(rng, 9, 13, 6, 3.0, 2.0);
  const auto s = band_statistics(c);
  for (std::size_t b = 0; b < c.bands; ++b) {
    double sum = 0;
    for (std::size_t i = 0; i < c.pixels(); ++i) sum += c.values[b * c.pixels() + i];
    const double mean = sum / static_cast<double>(c.pixels());
    double sq = 0;
    for (std::size_t i = 0; i < c.pixels(); ++i) sq += std::pow(c.values[b * c.pixels() + i] - mean, 2);
    EXPECT_NEAR(s.mean[b], mean, 1e-6);
    EXPECT_NEAR(s.stddev[b], std::sqrt(sq / static_cast<double>(c.pixels())), 1e-6);
  }
}

TEST(Centering, BandMeansVanish) {
  Rng rng(5);
  const auto c = random_cube(rng, 10, 10, 4, 50.0, 5.0);
  const auto centered = center_bands(c, band_statistics(c));
  for (double m : band_statistics(centered).mean) EXPECT_LT(std::abs(m), 1e-5);
  const auto again = center_bands(centered, band_statistics(centered));
  for (std::size_t i = 0; i < c.values.size(); ++i) EXPECT_NEAR(again.values[i], centered.values[i], 1e-5);
  HyperCube five(2, 2, 1, 5.0f);
  for (float v : center_bands(five, band_statistics(five)).values) EXPECT_EQ(v, 0.0f);
}

TEST(Standardize, PostHocMomentsAndGuards) {
  Rng rng(6);
  const auto c = random_cube(rng, 12, 12, 5, -3.0, 7.0);
  const auto z = standardize_bands(c, band_statistics(c));
  const auto s = band_statistics(z);
  for (std::size_t b = 0; b < 5; ++b) {
    EXPECT_NEAR(s.mean[b], 0.0, 1e-4);
    EXPECT_NEAR(s.stddev[b], 1.0, 1e-4);
  }
  HyperCube two(1, 2, 1);
  two.values = {1.f, 3.f};
  EXPECT_EQ(standardize_bands(two, band_statistics(two)).values, (std::vector<float>{-1.f, 1.f}));
  HyperCube flat(2, 2, 1, 4.0f);
  for (float v : standardize_bands(flat, band_statistics(flat)).values) EXPECT_TRUE(std::isfinite(v));
  BandStats wrong{{0.0}, {1.0}};
  EXPECT_THROW(center_bands(c, wrong), DimensionError);
  EXPECT_THROW(standardize_bands(c, wrong), DimensionError);
}

TEST(ExcludeBands, DropsListedBands) {
  HyperCube c(1, 1, 5);
  for (std::size_t b = 0; b < 5; ++b) c.at(b, 0, 0) = static_cast<float>(b);
  const auto kept = exclude_bands(c, {1, 3});
  EXPECT_EQ(kept.bands, 3u);
  EXPECT_EQ(kept.values, (std::vector<float>{0, 2, 4}));
  EXPECT_THROW(exclude_bands(c, {0, 1, 2, 3, 4}), DimensionError);
}

// ---------------------------------------------------------------- patches

TEST(Patch, InteriorEqualsSlicing) {
  Rng rng(7);
  const auto c = random_cube(rng, 9, 11, 3);
  for (std::size_t side : {1, 3, 5, 9}) {
    const std::size_t half = side / 2;
    for (std::size_t r = half; r + half < c.height; ++r)
      for (std::size_t q = half; q + half < c.width; ++q) {
        const auto p = extract_patch(c, {r, q}, side);
        for (std::size_t b = 0; b < c.bands; ++b)
          for (std::size_t i = 0; i < side; ++i)
            for (std::size_t j = 0; j < side; ++j)
              ASSERT_EQ(p.window.at(b, i, j), c.at(b, r + i - half, q + j - half));
      }
  }
}

TEST(Patch, CornerIsMirrored) {
  Rng rng(8);
  const auto c = random_cube(rng, 4, 4, 2);
  const auto p = extract_patch(c, {0, 0}, 3);
  for (std::size_t b = 0; b < 2; ++b) {
    EXPECT_EQ(p.window.at(b, 0, 0), c.at(b, 1, 1));
    EXPECT_EQ(p.window.at(b, 0, 1), c.at(b, 1, 0));
    EXPECT_EQ(p.window.at(b, 1, 0), c.at(b, 0, 1));
    EXPECT_EQ(p.window.at(b, 1, 1), c.at(b, 0, 0));
  }
}

TEST(Patch, EveryPixelOfSmallCube) {
  Rng rng(9);
  const auto c = random_cube(rng, 7, 7, 3);
  for (std::size_t r = 0; r < 7; ++r)
    for (std::size_t q = 0; q < 7; ++q) {
      const auto p = extract_patch(c, {r, q}, 5);
      ASSERT_EQ(p.window.shape(), (Shape{3, 5, 5}));
      ASSERT_TRUE(p.window.all_finite());
      ASSERT_EQ(p.window.at(1, 2, 2), c.at(1, r, q));
    }
  const HyperCube single(1, 1, 2, 1.5f);
  const auto big = extract_patch(single, {0, 0}, 9);
  for (float v : big.window.values()) EXPECT_EQ(v, 1.5f);
}

TEST(Patch, Errors) {
  const HyperCube c(5, 5, 1);
  EXPECT_THROW(extract_patch(c, {2, 2}, 4), ParameterError);
  EXPECT_THROW(extract_patch(c, {5, 0}, 3), BoundsError);
}

// ---------------------------------------------------------------- HSL1

TEST(LabelMapFormat, RoundTripAndClassCount) {
  Rng rng(10);
  LabelMap m(13, 7);
  for (auto& v : m.labels) v = static_cast<std::uint16_t>(rng.below(65536));
  std::stringstream ss;
  write_labelmap(ss, m);
  EXPECT_EQ(read_labelmap(ss), m);

  EXPECT_EQ(LabelMap(3, 3).class_count(), 0u);
  LabelMap eight(145, 145);
  for (std::size_t i = 0; i < eight.labels.size(); ++i) eight.labels[i] = static_cast<std::uint16_t>(i % 9);
  EXPECT_EQ(eight.class_count(), 8u);

  const auto dir = temp_dir("hsl");
  save_labelmap(eight, (dir / "gt.hsl").string());
  EXPECT_EQ(load_labelmap((dir / "gt.hsl").string()), eight);
  std::stringstream bad("HSL0");
  EXPECT_THROW(read_labelmap(bad), FormatError);
}

// ---------------------------------------------------------------- map images

TEST(MapImage, PaletteAndLayout) {
  EXPECT_EQ(palette_color(0), (std::array<std::uint8_t, 3>{0, 0, 0}));
  // hue 137.508: sector 2, V=0.95, S=0.8 -> (0.19, 0.95, 0.19 + 0.76*(137.508/60-2))
  const auto c1 = palette_color(1);
  EXPECT_EQ(c1[0], 48);
  EXPECT_EQ(c1[1], 242);
  EXPECT_EQ(c1[2], std::lround((0.19 + 0.76 * (137.508 / 60.0 - 2.0)) * 255.0));

  std::stringstream black;
  write_map_image(black, LabelMap(2, 3));
  const std::string header = "P6\n3 2\n255\n";
  EXPECT_EQ(black.str(), header + std::string(18, '\0'));

  LabelMap checker(2, 2);
  checker.labels = {1, 2, 2, 1};
  std::stringstream img;
  write_map_image(img, checker);
  const std::string px = img.str().substr(header.size());
  EXPECT_EQ(px.size(), 12u);
  EXPECT_EQ(px.substr(0, 3), px.substr(9, 3));
  EXPECT_EQ(px.substr(3, 3), px.substr(6, 3));
  EXPECT_NE(px.substr(0, 3), px.substr(3, 3));

  std::stringstream again;
  write_map_image(again, checker);
  EXPECT_EQ(again.str(), img.str());

  LabelMap many(1, 1, 256);
  EXPECT_THROW(write_map_image(again, many), ParameterError);
}
