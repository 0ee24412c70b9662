#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace detailpp {

// H x W x C grid, row-major and channel-last. With C = 3 the grid doubles as
// an RGB image.
class LatentGrid {
 public:
  LatentGrid() = default;
  LatentGrid(std::size_t height, std::size_t width, std::size_t channels, double fill = 0.0)
      : height_(height), width_(width), channels_(channels),
        values_(height * width * channels, fill) {}
  // Throws ShapeError when the value count does not match the dims.
  LatentGrid(std::size_t height, std::size_t width, std::size_t channels,
             std::vector<double> values);

  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t channels() const noexcept { return channels_; }
  std::size_t positions() const noexcept { return height_ * width_; }
  std::size_t size() const noexcept { return values_.size(); }

  double& at(std::size_t h, std::size_t w, std::size_t c) noexcept {
    return values_[(h * width_ + w) * channels_ + c];
  }
  double at(std::size_t h, std::size_t w, std::size_t c) const noexcept {
    return values_[(h * width_ + w) * channels_ + c];
  }
  double& operator[](std::size_t i) noexcept { return values_[i]; }
  double operator[](std::size_t i) const noexcept { return values_[i]; }

  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }

  bool same_shape(const LatentGrid& other) const noexcept {
    return height_ == other.height_ && width_ == other.width_ && channels_ == other.channels_;
  }

  friend bool operator==(const LatentGrid&, const LatentGrid&) = default;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::size_t channels_ = 0;
  std::vector<double> values_;
};

// Euclidean distance between two grids of equal shape.
double l2_distance(const LatentGrid& a, const LatentGrid& b);

}  // namespace detailpp
