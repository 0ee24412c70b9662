#include "detailpp/latent.hpp"

#include <cmath>
#include <string>

#include "detailpp/errors.hpp"

namespace detailpp {

LatentGrid::LatentGrid(std::size_t height, std::size_t width, std::size_t channels,
                       std::vector<double> values)
    : height_(height), width_(width), channels_(channels), values_(std::move(values)) {
  if (values_.size() != height_ * width_ * channels_) {
    throw ShapeError("latent grid " + std::to_string(height_) + "x" + std::to_string(width_) +
                     "x" + std::to_string(channels_) + " given " +
                     std::to_string(values_.size()) + " values");
  }
}

double l2_distance(const LatentGrid& a, const LatentGrid& b) {
  if (!a.same_shape(b)) throw ShapeError("l2_distance: shape mismatch");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    sum += d * d;
  }
  return std::sqrt(sum);
}

}  // namespace detailpp
