#include "detailpp/mask.hpp"

#include <algorithm>

#include "detailpp/errors.hpp"

namespace detailpp {

std::size_t BinaryMask::ones() const noexcept {
  return static_cast<std::size_t>(std::count(values.begin(), values.end(), 1));
}

SubjectMap subject_map(const CapturedAttention& captured, TokenSpan span, std::size_t height,
                       std::size_t width) {
  if (span.empty()) throw SpanError("subject_map: empty token span");
  if (captured.cross_maps.empty()) throw ShapeError("subject_map: no cross-attention captured");
  const std::size_t positions = captured.cross_maps.front().rows();
  if (height * width != positions) {
    throw ShapeError("subject_map: " + std::to_string(height) + "x" + std::to_string(width) +
                     " does not cover " + std::to_string(positions) + " positions");
  }

  SubjectMap out;
  out.height = height;
  out.width = width;
  out.values.assign(positions, 0.0);
  for (const RealMatrix& layer : captured.cross_maps) {
    if (layer.rows() != positions) throw ShapeError("subject_map: layer resolution mismatch");
    if (span.end > layer.cols()) {
      throw SpanError("subject_map: span [" + std::to_string(span.begin) + ", " +
                      std::to_string(span.end) + ") exceeds " + std::to_string(layer.cols()) +
                      " tokens");
    }
    for (std::size_t p = 0; p < positions; ++p) {
      for (std::size_t tok = span.begin; tok < span.end; ++tok) out.values[p] += layer(p, tok);
    }
  }
  const double count = static_cast<double>(captured.cross_maps.size() * span.size());
  for (double& v : out.values) v /= count;
  return out;
}

BinaryMask binarize(const SubjectMap& map, double tau) {
  if (!(tau > 0.0 && tau < 1.0)) throw ConfigError("binarize: tau must lie in (0, 1)");
  BinaryMask mask;
  mask.height = map.height;
  mask.width = map.width;
  mask.values.assign(map.values.size(), 0);
  if (map.values.empty()) {
    mask.degenerate = true;
    return mask;
  }
  const auto [lo_it, hi_it] = std::minmax_element(map.values.begin(), map.values.end());
  const double lo = *lo_it;
  const double range = *hi_it - lo;
  if (range < kDegenerateRange) {
    mask.degenerate = true;
    return mask;
  }
  for (std::size_t i = 0; i < map.values.size(); ++i) {
    mask.values[i] = (map.values[i] - lo) / range > tau ? 1 : 0;
  }
  return mask;
}

BinaryMask align_mask(const BinaryMask& mask, std::size_t height, std::size_t width) {
  if (mask.height == 0 || mask.width == 0 || height % mask.height != 0 ||
      width % mask.width != 0) {
    throw ConfigError("align_mask: cannot map " + std::to_string(mask.height) + "x" +
                      std::to_string(mask.width) + " onto " + std::to_string(height) + "x" +
                      std::to_string(width));
  }
  if (height == mask.height && width == mask.width) return mask;
  const std::size_t sy = height / mask.height;
  const std::size_t sx = width / mask.width;
  BinaryMask out;
  out.height = height;
  out.width = width;
  out.degenerate = mask.degenerate;
  out.values.resize(height * width);
  for (std::size_t h = 0; h < height; ++h) {
    for (std::size_t w = 0; w < width; ++w) out.values[h * width + w] = mask.at(h / sy, w / sx);
  }
  return out;
}

}  // namespace detailpp
