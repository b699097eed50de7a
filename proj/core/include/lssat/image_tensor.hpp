#pragma once

#include <cstddef>
#include <vector>

#include "lssat/tensor.hpp"

namespace lssat {

struct ImageDims {
  std::size_t batch = 1;
  std::size_t frames = 1;
  std::size_t channels = 3;
  std::size_t height = 0;
  std::size_t width = 0;

  Shape shape() const { return {batch, frames, channels, height, width}; }
  std::size_t count() const { return batch * frames * channels * height * width; }
  bool operator==(const ImageDims&) const = default;
};

// Rank-5 batch (B x T x C x H x W) carrying both the RGB and the
// local-pattern streams.
class ImageTensor {
 public:
  ImageTensor() = default;
  ImageTensor(ImageDims dims, std::vector<double> values);
  explicit ImageTensor(const Tensor& t);

  static ImageTensor zeros(ImageDims dims);

  const ImageDims& dims() const { return dims_; }
  const Tensor& tensor() const { return values_; }
  std::span<const double> values() const { return values_.data(); }

  std::size_t offset(std::size_t b, std::size_t t, std::size_t c, std::size_t h,
                     std::size_t w) const {
    return (((b * dims_.frames + t) * dims_.channels + c) * dims_.height + h) * dims_.width + w;
  }
  double at(std::size_t b, std::size_t t, std::size_t c, std::size_t h, std::size_t w) const {
    return values_[offset(b, t, c, h, w)];
  }

 private:
  ImageDims dims_{};
  Tensor values_ = Tensor::zeros({0, 1, 1, 1, 1});
};

}  // namespace lssat
