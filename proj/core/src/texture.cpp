#include "lssat/texture.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <string>

#include "lssat/error.hpp"

namespace lssat {

namespace {

// Neighbour offsets (row, col) in direction order E, NE, N, NW, W, SW, S, SE.
constexpr std::array<std::array<int, 2>, 8> kRing{{
    {0, 1}, {-1, 1}, {-1, 0}, {-1, -1}, {0, -1}, {1, -1}, {1, 0}, {1, 1},
}};

void check_k(int k) {
  if (k < 1 || k > 8) throw RangeError("ldp: k must be in [1,8], got " + std::to_string(k));
}

void check_size(std::size_t h, std::size_t w) {
  if (h < 3 || w < 3) {
    throw ShapeError("ldp: image must be at least 3x3, got " + std::to_string(h) + "x" +
                     std::to_string(w));
  }
}

}  // namespace

const std::array<KirschKernel, 8>& kirsch_kernels() {
  static const std::array<KirschKernel, 8> kernels{{
      {{{-3, -3, 5}, {-3, 0, 5}, {-3, -3, 5}}},     // E
      {{{-3, 5, 5}, {-3, 0, 5}, {-3, -3, -3}}},     // NE
      {{{5, 5, 5}, {-3, 0, -3}, {-3, -3, -3}}},     // N
      {{{5, 5, -3}, {5, 0, -3}, {-3, -3, -3}}},     // NW
      {{{5, -3, -3}, {5, 0, -3}, {5, -3, -3}}},     // W
      {{{-3, -3, -3}, {5, 0, -3}, {5, 5, -3}}},     // SW
      {{{-3, -3, -3}, {-3, 0, -3}, {5, 5, 5}}},     // S
      {{{-3, -3, -3}, {-3, 0, 5}, {-3, 5, 5}}},     // SE
  }};
  return kernels;
}

EdgeResponses kirsch_edge_responses(const GrayImage& img, std::size_t row, std::size_t col) {
  if (row < 1 || col < 1 || row + 1 >= img.height || col + 1 >= img.width) {
    throw RangeError("kirsch: (" + std::to_string(row) + "," + std::to_string(col) +
                     ") is not an interior pixel of a " + std::to_string(img.height) + "x" +
                     std::to_string(img.width) + " image");
  }
  EdgeResponses out{};
  const auto& kernels = kirsch_kernels();
  for (std::size_t d = 0; d < 8; ++d) {
    int acc = 0;
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 3; ++j) acc += kernels[d][i][j] * img.at(row + i - 1, col + j - 1);
    out[d] = acc;
  }
  return out;
}

std::uint8_t ldp_code(std::span<const int, 8> responses, int k) {
  check_k(k);
  std::uint8_t code = 0;
  for (int d = 0; d < 8; ++d) {
    const int mag = std::abs(responses[d]);
    int rank = 0;
    for (int j = 0; j < 8; ++j) {
      const int other = std::abs(responses[j]);
      if (other > mag || (other == mag && j < d)) ++rank;
    }
    if (rank < k) code |= static_cast<std::uint8_t>(1u << d);
  }
  return code;
}

LdpImage ldp_image(const GrayImage& img, int k) {
  check_k(k);
  check_size(img.height, img.width);
  if (img.pixels.size() != img.height * img.width) throw DataError("ldp: pixel buffer size mismatch");
  const std::size_t h = img.height, w = img.width;
  const std::size_t pw = w + 2;
  std::vector<int> padded((h + 2) * pw);
  for (std::size_t r = 0; r < h + 2; ++r) {
    const std::size_t sr = std::clamp<std::size_t>(r, 1, h) - 1;
    for (std::size_t c = 0; c < pw; ++c) {
      const std::size_t sc = std::clamp<std::size_t>(c, 1, w) - 1;
      padded[r * pw + c] = img.at(sr, sc);
    }
  }

  // Kirsch response d = 5*window_d - 3*(total - window_d) = 8*window_d - 3*total,
  // where window_d sums the three ring neighbours centred on direction d.
  std::array<std::ptrdiff_t, 8> ring_offset{};
  for (std::size_t d = 0; d < 8; ++d) {
    ring_offset[d] = kRing[d][0] * static_cast<std::ptrdiff_t>(pw) + kRing[d][1];
  }
  LdpImage out{h, w, std::vector<std::uint8_t>(h * w), BorderPolicy::kReplicate};
  std::array<int, 8> nb{};
  EdgeResponses resp{};
  for (std::size_t r = 0; r < h; ++r) {
    const int* center = padded.data() + (r + 1) * pw + 1;
    for (std::size_t c = 0; c < w; ++c, ++center) {
      int total = 0;
      for (std::size_t d = 0; d < 8; ++d) total += (nb[d] = center[ring_offset[d]]);
      for (std::size_t d = 0; d < 8; ++d) {
        const int window = nb[(d + 7) % 8] + nb[d] + nb[(d + 1) % 8];
        resp[d] = 8 * window - 3 * total;
      }
      out.codes[r * w + c] = ldp_code(resp, k);
    }
  }
  return out;
}

GrayImage to_gray(const ImageTensor& x, std::size_t b, std::size_t t) {
  const auto& d = x.dims();
  if (d.channels != 1 && d.channels != 3) {
    throw ShapeError("to_gray: expected 1 or 3 channels, got " + std::to_string(d.channels));
  }
  GrayImage g{d.height, d.width, std::vector<std::uint8_t>(d.height * d.width)};
  for (std::size_t r = 0; r < d.height; ++r) {
    for (std::size_t c = 0; c < d.width; ++c) {
      double v = d.channels == 3
                     ? 0.299 * x.at(b, t, 0, r, c) + 0.587 * x.at(b, t, 1, r, c) + 0.114 * x.at(b, t, 2, r, c)
                     : x.at(b, t, 0, r, c);
      v = std::clamp(v, 0.0, 1.0);
      g.pixels[r * d.width + c] = static_cast<std::uint8_t>(std::lround(v * 255.0));
    }
  }
  return g;
}

ImageTensor ldp_tensor(const ImageTensor& x, int k) {
  const auto& d = x.dims();
  check_k(k);
  check_size(d.height, d.width);
  std::vector<double> out(d.count());
  const std::size_t plane = d.height * d.width;
  for (std::size_t b = 0; b < d.batch; ++b) {
    for (std::size_t t = 0; t < d.frames; ++t) {
      const LdpImage ldp = ldp_image(to_gray(x, b, t), k);
      for (std::size_t c = 0; c < d.channels; ++c) {
        double* dst = out.data() + x.offset(b, t, c, 0, 0);
        for (std::size_t i = 0; i < plane; ++i) dst[i] = ldp.codes[i] / 255.0;
      }
    }
  }
  return ImageTensor(d, std::move(out));
}

ImageTensor local_pattern_tensor(const ImageTensor& x, DescriptorKind kind, int k) {
  switch (kind) {
    case DescriptorKind::kLdp: return ldp_tensor(x, k);
    case DescriptorKind::kLbp: break;
  }
  throw ConfigError("local pattern: only the LDP descriptor is implemented");
}

std::vector<std::uint8_t> ldp_code_bins(int k) {
  check_k(k);
  std::vector<std::uint8_t> bins;
  for (unsigned code = 0; code < 256; ++code) {
    if (std::popcount(code) == k) bins.push_back(static_cast<std::uint8_t>(code));
  }
  return bins;
}

RegionHistogramSet region_histograms(const LdpImage& ldp, int k, std::size_t grid_rows,
                                     std::size_t grid_cols, std::vector<double> weights) {
  if (grid_rows == 0 || grid_cols == 0 || grid_rows > ldp.height || grid_cols > ldp.width) {
    throw RangeError("region histograms: grid " + std::to_string(grid_rows) + "x" +
                     std::to_string(grid_cols) + " does not fit the image");
  }
  const auto codes = ldp_code_bins(k);
  std::array<int, 256> bin_of{};
  bin_of.fill(-1);
  for (std::size_t i = 0; i < codes.size(); ++i) bin_of[codes[i]] = static_cast<int>(i);

  RegionHistogramSet set;
  set.grid_rows = grid_rows;
  set.grid_cols = grid_cols;
  set.bins = codes.size();
  set.counts.assign(set.regions() * set.bins, 0.0);
  set.weights = weights.empty() ? std::vector<double>(set.regions(), 1.0) : std::move(weights);
  if (set.weights.size() != set.regions()) throw ShapeError("region histograms: one weight per region required");
  for (double w : set.weights) {
    if (!(w >= 0.0)) throw RangeError("region histograms: weights must be non-negative");
  }
  for (std::size_t r = 0; r < ldp.height; ++r) {
    const std::size_t gr = r * grid_rows / ldp.height;
    for (std::size_t c = 0; c < ldp.width; ++c) {
      const std::size_t gc = c * grid_cols / ldp.width;
      const int bin = bin_of[ldp.at(r, c)];
      if (bin < 0) throw DataError("region histograms: code does not have k bits set");
      set.counts[(gr * grid_cols + gc) * set.bins + static_cast<std::size_t>(bin)] += 1.0;
    }
  }
  return set;
}

double weighted_chi_square(const RegionHistogramSet& s, const RegionHistogramSet& m) {
  if (s.grid_rows != m.grid_rows || s.grid_cols != m.grid_cols || s.bins != m.bins ||
      s.counts.size() != m.counts.size() || s.weights.size() != s.regions()) {
    throw ShapeError("weighted chi-square: histogram sets have different grids or bins");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < s.regions(); ++i) {
    for (std::size_t t = 0; t < s.bins; ++t) {
      const double a = s.count(i, t), b = m.count(i, t);
      const double denom = a + b;
      if (denom == 0.0) continue;
      total += s.weights[i] * (a - b) * (a - b) / denom;
    }
  }
  return total;
}

}  // namespace lssat
