#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace detailpp {

// Dense row-major matrix of doubles.
class RealMatrix {
 public:
  RealMatrix() = default;
  RealMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), values_(rows * cols, fill) {}
  // Throws ShapeError when values.size() != rows * cols.
  RealMatrix(std::size_t rows, std::size_t cols, std::vector<double> values);

  static RealMatrix identity(std::size_t n);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return values_.size(); }

  double& operator()(std::size_t r, std::size_t c) noexcept { return values_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return values_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) noexcept { return {values_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const noexcept {
    return {values_.data() + r * cols_, cols_};
  }

  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }

  bool all_finite() const noexcept;

  friend bool operator==(const RealMatrix&, const RealMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
};

// Row-wise softmax with per-row max subtraction.
// Throws NumericInputError on NaN/Inf input.
RealMatrix softmax_rows(const RealMatrix& m);

// Counter-based SplitMix64 stream: the value at a given position depends only
// on (seed, position), so the sequence is reproducible bit for bit.
class SeededStream {
 public:
  explicit SeededStream(std::uint64_t seed, std::uint64_t position = 0) noexcept
      : seed_(seed), position_(position) {}

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t position() const noexcept { return position_; }

  std::uint64_t next_u64() noexcept;
  // Uniform in the open interval (0, 1).
  double next_unit() noexcept;

 private:
  std::uint64_t seed_;
  std::uint64_t position_;
};

std::uint64_t splitmix64_mix(std::uint64_t z) noexcept;

// n standard-normal draws via Box-Muller on consecutive uniform pairs.
// Value j always comes from pair j/2, so a k-draw is a prefix of an n-draw.
std::vector<double> seeded_gaussian(SeededStream& stream, std::size_t n);

std::uint64_t fnv1a64(std::string_view bytes) noexcept;

// Deterministic unit-norm stand-in for a text-encoder output.
// Throws ParseInputError for an empty token, ConfigError for dim < 2.
std::vector<double> token_embedding(std::string_view token, std::size_t dim);

}  // namespace detailpp
