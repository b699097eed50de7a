#include "lssat/patching.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "lssat/error.hpp"
#include "lssat/rng.hpp"

namespace lssat {

namespace {

void check_divisible(const ImageDims& d, std::size_t p) {
  if (p == 0 || d.height % p != 0 || d.width % p != 0) {
    throw ShapeError("patchify: " + std::to_string(d.height) + "x" + std::to_string(d.width) +
                     " is not divisible into " + std::to_string(p) + "x" + std::to_string(p) +
                     " patches");
  }
}

IndexTable table_of(const std::vector<std::vector<std::size_t>>& lists, std::size_t batch) {
  IndexTable t;
  t.batch = batch;
  t.count = lists.empty() ? 0 : lists.front().size();
  t.rows.reserve(batch * t.count);
  for (const auto& l : lists) t.rows.insert(t.rows.end(), l.begin(), l.end());
  return t;
}

}  // namespace

std::size_t patch_count(const ImageDims& dims, std::size_t patch_size) {
  check_divisible(dims, patch_size);
  return dims.frames * (dims.height / patch_size) * (dims.width / patch_size);
}

PatchSet patchify(const ImageTensor& x, std::size_t p) {
  const auto& d = x.dims();
  const std::size_t count = patch_count(d, p);
  const std::size_t gh = d.height / p, gw = d.width / p;
  const std::size_t pd = d.channels * p * p;
  std::vector<double> tokens(d.batch * count * pd);
  std::size_t o = 0;
  for (std::size_t b = 0; b < d.batch; ++b)
    for (std::size_t t = 0; t < d.frames; ++t)
      for (std::size_t i = 0; i < gh; ++i)
        for (std::size_t j = 0; j < gw; ++j)
          for (std::size_t c = 0; c < d.channels; ++c)
            for (std::size_t py = 0; py < p; ++py)
              for (std::size_t px = 0; px < p; ++px) tokens[o++] = x.at(b, t, c, i * p + py, j * p + px);
  return PatchSet{d.batch, count, pd, p, Tensor({d.batch, count, pd}, std::move(tokens))};
}

ImageTensor unpatchify(const PatchSet& patches, const ImageDims& d) {
  const std::size_t p = patches.patch_size;
  if (d.batch != patches.batch || patch_count(d, p) != patches.count ||
      d.channels * p * p != patches.patch_dim ||
      patches.tokens.shape() != Shape{patches.batch, patches.count, patches.patch_dim}) {
    throw ShapeError("unpatchify: patch set [" + std::to_string(patches.batch) + "x" +
                     std::to_string(patches.count) + "x" + std::to_string(patches.patch_dim) +
                     "] inconsistent with image dims " + shape_str(d.shape()));
  }
  const std::size_t gh = d.height / p, gw = d.width / p;
  std::vector<double> out(d.count());
  auto offset = [&](std::size_t b, std::size_t t, std::size_t c, std::size_t h, std::size_t w) {
    return (((b * d.frames + t) * d.channels + c) * d.height + h) * d.width + w;
  };
  std::size_t o = 0;
  for (std::size_t b = 0; b < d.batch; ++b)
    for (std::size_t t = 0; t < d.frames; ++t)
      for (std::size_t i = 0; i < gh; ++i)
        for (std::size_t j = 0; j < gw; ++j)
          for (std::size_t c = 0; c < d.channels; ++c)
            for (std::size_t py = 0; py < p; ++py)
              for (std::size_t px = 0; px < p; ++px)
                out[offset(b, t, c, i * p + py, j * p + px)] = patches.tokens[o++];
  return ImageTensor(d, std::move(out));
}

IndexTable MaskPlan::visible_table() const { return table_of(visible, batch); }
IndexTable MaskPlan::masked_table() const { return table_of(masked, batch); }

std::size_t mask_count(std::size_t count, double ratio) {
  if (!(ratio >= 0.0 && ratio < 1.0)) {
    throw RangeError("mask: ratio must be in [0,1), got " + std::to_string(ratio));
  }
  // ratios come from decimal configs: 0.29 * 100 is 28.999999999999996 in
  // binary but means 29
  const double x = ratio * static_cast<double>(count);
  const double n = std::floor(x);
  return static_cast<std::size_t>(x - n > 1.0 - 1e-9 ? n + 1.0 : n);
}

MaskPlan sample_mask(std::size_t batch, std::size_t count, double ratio, std::uint64_t seed) {
  const std::size_t n_masked = mask_count(count, ratio);
  MaskPlan plan{batch, count, ratio, seed, {}, {}};
  plan.masked.reserve(batch);
  plan.visible.reserve(batch);
  std::vector<std::size_t> perm(count);
  for (std::size_t b = 0; b < batch; ++b) {
    auto engine = make_engine(seed, {b});
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    // Partial Fisher-Yates: the first n_masked slots are a uniform subset.
    for (std::size_t i = 0; i < n_masked; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, count - 1);
      std::swap(perm[i], perm[pick(engine)]);
    }
    std::vector<std::size_t> masked(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_masked));
    std::vector<std::size_t> visible(perm.begin() + static_cast<std::ptrdiff_t>(n_masked), perm.end());
    std::sort(masked.begin(), masked.end());
    std::sort(visible.begin(), visible.end());
    plan.masked.push_back(std::move(masked));
    plan.visible.push_back(std::move(visible));
  }
  return plan;
}

PatchSet gather_visible(const PatchSet& patches, const MaskPlan& plan) {
  if (plan.batch != patches.batch || plan.count != patches.count) {
    throw ShapeError("gather_visible: plan for " + std::to_string(plan.batch) + "x" +
                     std::to_string(plan.count) + " tokens applied to " +
                     std::to_string(patches.batch) + "x" + std::to_string(patches.count));
  }
  const std::size_t kept = plan.visible_per_sample();
  std::vector<double> out(patches.batch * kept * patches.patch_dim);
  auto src = patches.tokens.data();
  for (std::size_t b = 0; b < patches.batch; ++b) {
    for (std::size_t j = 0; j < kept; ++j) {
      const std::size_t s = plan.visible[b][j];
      std::copy_n(src.begin() + (b * patches.count + s) * patches.patch_dim, patches.patch_dim,
                  out.begin() + (b * kept + j) * patches.patch_dim);
    }
  }
  return PatchSet{patches.batch, kept, patches.patch_dim, patches.patch_size,
                  Tensor({patches.batch, kept, patches.patch_dim}, std::move(out))};
}

Var patchify(Var image, std::size_t p) {
  const Shape& s = image.shape();
  if (s.size() != 5) throw ShapeError("patchify: expected rank-5 image, got " + shape_str(s));
  const ImageDims d{s[0], s[1], s[2], s[3], s[4]};
  const std::size_t count = patch_count(d, p);
  const std::size_t gh = d.height / p, gw = d.width / p;
  Var v = reshape(image, {d.batch, d.frames, d.channels, gh, p, gw, p});
  v = transpose(v, std::vector<std::size_t>{0, 1, 3, 5, 2, 4, 6});
  return reshape(v, {d.batch, count, d.channels * p * p});
}

Var unpatchify(Var tokens, const ImageDims& d, std::size_t p) {
  const std::size_t count = patch_count(d, p);
  const Shape expected{d.batch, count, d.channels * p * p};
  if (tokens.shape() != expected) {
    throw ShapeError("unpatchify: tokens " + shape_str(tokens.shape()) + " inconsistent with " +
                     shape_str(d.shape()));
  }
  const std::size_t gh = d.height / p, gw = d.width / p;
  Var v = reshape(tokens, {d.batch, d.frames, gh, gw, d.channels, p, p});
  v = transpose(v, std::vector<std::size_t>{0, 1, 4, 2, 5, 3, 6});
  return reshape(v, d.shape());
}

}  // namespace lssat
