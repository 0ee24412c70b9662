#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "detailpp/denoiser.hpp"
#include "detailpp/prompt.hpp"

namespace detailpp {

// Averaged cross-attention map of one subject, laid out H_a x W_a.
struct SubjectMap {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> values;  // row-major
  std::size_t source_branch = 0;
  std::string subject;

  double at(std::size_t h, std::size_t w) const noexcept { return values[h * width + w]; }
};

struct BinaryMask {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<unsigned char> values;  // 0 or 1, row-major
  bool degenerate = false;

  unsigned char at(std::size_t h, std::size_t w) const noexcept { return values[h * width + w]; }
  std::size_t ones() const noexcept;
  friend bool operator==(const BinaryMask&, const BinaryMask&) = default;
};

inline constexpr double kDefaultMaskThreshold = 0.5;
inline constexpr double kDegenerateRange = 1e-12;

// Mean over layers and the span's token columns of the captured cross maps,
// reshaped from HW rows onto the height x width grid. Throws SpanError for an
// empty or out-of-range span, ShapeError when height*width != HW.
SubjectMap subject_map(const CapturedAttention& captured, TokenSpan span, std::size_t height,
                       std::size_t width);

// Min-max normalize, then 1 where the normalized value is strictly above tau.
// A flat map (range below 1e-12) gives all zeros with degenerate = true.
// Throws ConfigError unless 0 < tau < 1.
BinaryMask binarize(const SubjectMap& map, double tau = kDefaultMaskThreshold);

// Nearest-neighbour block upsampling to height x width. Throws ConfigError
// when the target is not an integer multiple of the mask resolution.
BinaryMask align_mask(const BinaryMask& mask, std::size_t height, std::size_t width);

}  // namespace detailpp
