#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "lssat/image_tensor.hpp"

namespace lssat {

struct GrayImage {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> pixels;  // row-major

  std::uint8_t at(std::size_t r, std::size_t c) const { return pixels[r * width + c]; }
};

enum class BorderPolicy { kReplicate };

struct LdpImage {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> codes;
  BorderPolicy border = BorderPolicy::kReplicate;

  std::uint8_t at(std::size_t r, std::size_t c) const { return codes[r * width + c]; }
};

// Directions in response order. Kernel d puts weight 5 on the three
// neighbours centred on direction d, -3 on the other five, 0 at the centre.
enum class Direction { kEast, kNorthEast, kNorth, kNorthWest, kWest, kSouthWest, kSouth, kSouthEast };

using KirschKernel = std::array<std::array<int, 3>, 3>;
using EdgeResponses = std::array<int, 8>;

//      E               NE              N               NW
//  -3 -3  5        -3  5  5         5  5  5         5  5 -3
//  -3  0  5        -3  0  5        -3  0 -3         5  0 -3
//  -3 -3  5        -3 -3 -3        -3 -3 -3        -3 -3 -3
//
//      W               SW              S               SE
//   5 -3 -3        -3 -3 -3        -3 -3 -3        -3 -3 -3
//   5  0 -3         5  0 -3        -3  0 -3        -3  0  5
//   5 -3 -3         5  5 -3         5  5  5        -3  5  5
const std::array<KirschKernel, 8>& kirsch_kernels();

// Responses of the eight Kirsch masks at an interior pixel.
EdgeResponses kirsch_edge_responses(const GrayImage& img, std::size_t row, std::size_t col);

// Sets bit d for the k largest |response_d|; equal magnitudes go to the
// lower direction index, so exactly k bits are set.
std::uint8_t ldp_code(std::span<const int, 8> responses, int k);

// LDP code for every pixel. Borders read a replicate-padded copy of the
// source so the output has the input's size.
LdpImage ldp_image(const GrayImage& img, int k = 3);

// 8-bit luma (0.299 R + 0.587 G + 0.114 B) of frame (b, t). Single-channel
// tensors are used as-is.
GrayImage to_gray(const ImageTensor& x, std::size_t b, std::size_t t);

// Local-pattern stream: LDP of each frame's luma, scaled to [0,1] by /255
// and replicated over all channels. Output dims equal input dims.
ImageTensor ldp_tensor(const ImageTensor& x, int k = 3);

enum class DescriptorKind { kLdp, kLbp };

// Descriptor dispatch. Only kLdp is implemented; kLbp throws.
ImageTensor local_pattern_tensor(const ImageTensor& x, DescriptorKind kind, int k = 3);

// Codes with exactly k bits set, ascending; index = histogram bin.
std::vector<std::uint8_t> ldp_code_bins(int k);

struct RegionHistogramSet {
  std::size_t grid_rows = 1;
  std::size_t grid_cols = 1;
  std::size_t bins = 0;
  std::vector<double> counts;   // region-major: (r * grid_cols + c) * bins + bin
  std::vector<double> weights;  // one per region

  std::size_t regions() const { return grid_rows * grid_cols; }
  double count(std::size_t region, std::size_t bin) const { return counts[region * bins + bin]; }
};

// Per-region histograms over the C(8,k) attainable codes. Region (r, c)
// covers rows [r*H/grid_rows, (r+1)*H/grid_rows) and likewise for columns.
// Empty weights means 1.0 for every region.
RegionHistogramSet region_histograms(const LdpImage& ldp, int k, std::size_t grid_rows,
                                     std::size_t grid_cols, std::vector<double> weights = {});

// sum over regions i and bins t of w_i (S_i(t) - M_i(t))^2 / (S_i(t) + M_i(t)),
// 0/0 terms contributing 0. Region weights are read from `s`.
double weighted_chi_square(const RegionHistogramSet& s, const RegionHistogramSet& m);

}  // namespace lssat
