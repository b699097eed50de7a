#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "lssat/autodiff.hpp"
#include "lssat/image_tensor.hpp"

namespace lssat {

// Token view of an ImageTensor. Tokens run frame-major, then row-major over
// the patch grid; inside a token values run channel, patch row, patch column.
struct PatchSet {
  std::size_t batch = 0;
  std::size_t count = 0;  // tokens per sample
  std::size_t patch_dim = 0;
  std::size_t patch_size = 0;
  Tensor tokens;  // [batch, count, patch_dim]
};

std::size_t patch_count(const ImageDims& dims, std::size_t patch_size);

PatchSet patchify(const ImageTensor& x, std::size_t patch_size);
ImageTensor unpatchify(const PatchSet& patches, const ImageDims& dims);

// Exact index sets removed by the masking operator, one entry per sample.
struct MaskPlan {
  std::size_t batch = 0;
  std::size_t count = 0;  // S
  double ratio = 0.0;
  std::uint64_t seed = 0;
  std::vector<std::vector<std::size_t>> masked;   // ascending
  std::vector<std::vector<std::size_t>> visible;  // ascending

  std::size_t masked_per_sample() const { return masked.empty() ? 0 : masked.front().size(); }
  std::size_t visible_per_sample() const { return count - masked_per_sample(); }
  IndexTable visible_table() const;
  IndexTable masked_table() const;
};

// floor(ratio * S)
std::size_t mask_count(std::size_t count, double ratio);

// Independent uniform subset of mask_count(count, ratio) indices per sample.
// Sample i draws from derive_seed(seed, {i}), so plans do not depend on
// batch composition or evaluation order.
MaskPlan sample_mask(std::size_t batch, std::size_t count, double ratio, std::uint64_t seed);

PatchSet gather_visible(const PatchSet& patches, const MaskPlan& plan);

// Differentiable counterparts over graph nodes holding [B,T,C,H,W] images
// and [B,S,patch_dim] tokens.
Var patchify(Var image, std::size_t patch_size);
Var unpatchify(Var tokens, const ImageDims& dims, std::size_t patch_size);

}  // namespace lssat
