#include "lssat/image_tensor.hpp"

#include "lssat/error.hpp"

namespace lssat {

ImageTensor::ImageTensor(ImageDims dims, std::vector<double> values)
    : dims_(dims), values_(dims.shape(), std::move(values)) {
  if (dims.frames == 0) throw ShapeError("image tensor: T must be at least 1");
}

ImageTensor::ImageTensor(const Tensor& t) {
  const Shape& s = t.shape();
  if (s.size() != 5) throw ShapeError("image tensor: expected rank 5, got " + shape_str(s));
  dims_ = {s[0], s[1], s[2], s[3], s[4]};
  if (dims_.frames == 0) throw ShapeError("image tensor: T must be at least 1");
  values_ = t.with_requires_grad(false);
}

ImageTensor ImageTensor::zeros(ImageDims dims) {
  return ImageTensor(dims, std::vector<double>(dims.count(), 0.0));
}

}  // namespace lssat
