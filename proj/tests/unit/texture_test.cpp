#include <gtest/gtest.h>

#include <bit>
#include <random>

#include "lssat/error.hpp"
#include "lssat/texture.hpp"
#include "support/generators.hpp"
#include "support/oracles.hpp"

using namespace lssat;

namespace {

GrayImage random_gray(std::size_t h, std::size_t w, std::mt19937_64& rng) {
  return GrayImage{h, w, gen::pixels(h * w, rng)};
}

}  // namespace

TEST(Kirsch, KernelTableMatchesOracle) {
  const auto& k = kirsch_kernels();
  for (int d = 0; d < 8; ++d)
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) EXPECT_EQ(k[d][i][j], oracle::kKirsch[d][i][j]) << d;
}

TEST(Kirsch, ConstantNeighbourhoodGivesZero) {
  GrayImage img{3, 3, std::vector<std::uint8_t>(9, 100)};
  for (int r : kirsch_edge_responses(img, 1, 1)) EXPECT_EQ(r, 0);
}

TEST(Kirsch, CentreHasZeroWeight) {
  GrayImage img{3, 3, std::vector<std::uint8_t>(9, 0)};
  img.pixels[4] = 255;
  for (int r : kirsch_edge_responses(img, 1, 1)) EXPECT_EQ(r, 0);
}

TEST(Kirsch, VerticalEdgeMatchesDotProducts) {
  GrayImage img{3, 3, {0, 0, 255, 0, 0, 255, 0, 0, 255}};
  const auto got = kirsch_edge_responses(img, 1, 1);
  const auto want = oracle::kirsch(img.pixels, 3, 3, 1, 1);
  for (int d = 0; d < 8; ++d) EXPECT_EQ(got[d], want[d]);
  EXPECT_EQ(got[0], 3 * 5 * 255);
}

TEST(Kirsch, BorderPixelIsRejected) {
  GrayImage img{4, 4, std::vector<std::uint8_t>(16, 0)};
  EXPECT_THROW(kirsch_edge_responses(img, 0, 1), RangeError);
  EXPECT_THROW(kirsch_edge_responses(img, 1, 3), RangeError);
  EXPECT_NO_THROW(kirsch_edge_responses(img, 2, 2));
}

TEST(LdpCode, TieBreakAndExamples) {
  std::array<int, 8> zeros{};
  EXPECT_EQ(ldp_code(zeros, 3), 7);
  std::array<int, 8> r{9, 1, 1, 1, 1, 1, 1, 10};
  EXPECT_EQ(ldp_code(r, 2), 129);
  std::array<int, 8> any{5, -7, 2, 0, 3, 1, -9, 4};
  EXPECT_EQ(ldp_code(any, 8), 255);
  EXPECT_THROW(ldp_code(any, 0), RangeError);
  EXPECT_THROW(ldp_code(any, 9), RangeError);
}

TEST(LdpCode, UsesMagnitudes) {
  std::array<int, 8> r{1, -50, 2, 3, 40, 0, 0, 0};
  EXPECT_EQ(ldp_code(r, 2), 0b00010010);
}

TEST(LdpImage, ConstantImageIsAllSevens) {
  GrayImage img{6, 5, std::vector<std::uint8_t>(30, 77)};
  for (auto c : ldp_image(img, 3).codes) EXPECT_EQ(c, 7);
}

TEST(LdpImage, RandomImagesMatchNaiveOracle) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t h = gen::dim(rng, 3, 9), w = gen::dim(rng, 3, 9);
    const int k = static_cast<int>(gen::dim(rng, 1, 8));
    const GrayImage img = random_gray(h, w, rng);
    EXPECT_EQ(ldp_image(img, k).codes, oracle::ldp(img.pixels, static_cast<int>(h), static_cast<int>(w), k));
  }
}

TEST(LdpImage, PopcountIsK) {
  std::mt19937_64 rng(22);
  for (int k = 1; k <= 8; ++k) {
    for (auto c : ldp_image(random_gray(8, 8, rng), k).codes) EXPECT_EQ(std::popcount(c), k);
  }
}

TEST(LdpImage, InvariantToBrightnessShift) {
  std::mt19937_64 rng(23);
  GrayImage img = random_gray(10, 10, rng);
  for (auto& p : img.pixels) p = static_cast<std::uint8_t>(p / 2);
  GrayImage shifted = img;
  for (auto& p : shifted.pixels) p = static_cast<std::uint8_t>(p + 60);
  EXPECT_EQ(ldp_image(img).codes, ldp_image(shifted).codes);
}

TEST(LdpImage, UndersizedImageIsRejected) {
  EXPECT_THROW(ldp_image(GrayImage{2, 5, std::vector<std::uint8_t>(10)}), ShapeError);
}

TEST(LdpTensor, ShapeAndScaling) {
  std::mt19937_64 rng(24);
  const ImageDims dims{2, 1, 3, 8, 6};
  std::vector<double> v(dims.count());
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (auto& x : v) x = u(rng);
  const ImageTensor x(dims, v);
  const ImageTensor p = ldp_tensor(x, 3);
  EXPECT_EQ(p.dims(), dims);
  for (std::size_t b = 0; b < 2; ++b) {
    std::vector<std::uint8_t> gray(48);
    for (std::size_t i = 0; i < 48; ++i) {
      gray[i] = oracle::luma(255.0 * x.at(b, 0, 0, i / 6, i % 6), 255.0 * x.at(b, 0, 1, i / 6, i % 6),
                             255.0 * x.at(b, 0, 2, i / 6, i % 6));
    }
    EXPECT_EQ(to_gray(x, b, 0).pixels, gray);
    const auto codes = oracle::ldp(gray, 8, 6, 3);
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t i = 0; i < 48; ++i) EXPECT_EQ(p.at(b, 0, c, i / 6, i % 6), codes[i] / 255.0);
  }
}

TEST(LdpTensor, LbpHookIsNotImplemented) {
  const ImageTensor x = ImageTensor::zeros({1, 1, 3, 4, 4});
  EXPECT_THROW(local_pattern_tensor(x, DescriptorKind::kLbp), ConfigError);
  EXPECT_TRUE(local_pattern_tensor(x, DescriptorKind::kLdp).tensor().bit_equal(ldp_tensor(x).tensor()));
}

TEST(Histograms, CountsSumToRegionSize) {
  std::mt19937_64 rng(25);
  const LdpImage ldp = ldp_image(random_gray(12, 10, rng), 3);
  const auto h = region_histograms(ldp, 3, 3, 2);
  EXPECT_EQ(h.bins, 56u);
  EXPECT_EQ(ldp_code_bins(3).size(), 56u);
  for (std::size_t r = 0; r < h.regions(); ++r) {
    double s = 0.0;
    for (std::size_t b = 0; b < h.bins; ++b) s += h.count(r, b);
    EXPECT_EQ(s, 4.0 * 5.0);
  }
}

namespace {

RegionHistogramSet one_region(std::vector<double> counts, double w) {
  RegionHistogramSet h;
  h.bins = counts.size();
  h.counts = std::move(counts);
  h.weights = {w};
  return h;
}

}  // namespace

TEST(ChiSquare, Examples) {
  EXPECT_EQ(weighted_chi_square(one_region({2, 0}, 1.0), one_region({0, 2}, 1.0)), 4.0);
  EXPECT_EQ(weighted_chi_square(one_region({2, 0}, 0.5), one_region({0, 2}, 0.5)), 2.0);
  EXPECT_EQ(weighted_chi_square(one_region({3, 1}, 1.0), one_region({3, 1}, 1.0)), 0.0);
  EXPECT_EQ(weighted_chi_square(one_region({0, 0}, 1.0), one_region({0, 0}, 1.0)), 0.0);
}

TEST(ChiSquare, MismatchedGridsAreRejected) {
  EXPECT_THROW(weighted_chi_square(one_region({1, 2}, 1.0), one_region({1, 2, 3}, 1.0)), ShapeError);
}

TEST(ChiSquare, SymmetricNonNegativeAndZeroOnlyWhenEqual) {
  std::mt19937_64 rng(26);
  for (int trial = 0; trial < 30; ++trial) {
    const auto a = region_histograms(ldp_image(random_gray(8, 8, rng)), 3, 2, 2, {1.0, 0.5, 2.0, 0.25});
    const auto b = region_histograms(ldp_image(random_gray(8, 8, rng)), 3, 2, 2, {1.0, 0.5, 2.0, 0.25});
    const double ab = weighted_chi_square(a, b);
    EXPECT_EQ(ab, weighted_chi_square(b, a));
    EXPECT_GT(ab, 0.0);
    EXPECT_EQ(weighted_chi_square(a, a), 0.0);
  }
}

TEST(ChiSquare, ZeroWeightRegionsAreIgnored) {
  std::mt19937_64 rng(27);
  const LdpImage x = ldp_image(random_gray(8, 8, rng));
  LdpImage y = x;
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t c = 0; c < 4; ++c) y.codes[r * 8 + c] = 0b00000111;
  const auto hx = region_histograms(x, 3, 2, 2, {0.0, 1.0, 1.0, 1.0});
  const auto hy = region_histograms(y, 3, 2, 2, {0.0, 1.0, 1.0, 1.0});
  EXPECT_EQ(weighted_chi_square(hx, hy), 0.0);
}
