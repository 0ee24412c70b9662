#include "detailpp/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "detailpp/errors.hpp"

namespace detailpp {

namespace {
constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
}

RealMatrix::RealMatrix(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
  if (values_.size() != rows_ * cols_) {
    throw ShapeError("matrix " + std::to_string(rows_) + "x" + std::to_string(cols_) +
                     " given " + std::to_string(values_.size()) + " values");
  }
}

RealMatrix RealMatrix::identity(std::size_t n) {
  RealMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

bool RealMatrix::all_finite() const noexcept {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

RealMatrix softmax_rows(const RealMatrix& m) {
  if (!m.all_finite()) throw NumericInputError("softmax_rows: non-finite logit");
  RealMatrix out(m.rows(), m.cols());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto in = m.row(r);
    auto dst = out.row(r);
    if (in.empty()) continue;
    const double peak = *std::max_element(in.begin(), in.end());
    double sum = 0.0;
    for (std::size_t c = 0; c < in.size(); ++c) {
      dst[c] = std::exp(in[c] - peak);
      sum += dst[c];
    }
    for (double& v : dst) v /= sum;
  }
  return out;
}

std::uint64_t splitmix64_mix(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t SeededStream::next_u64() noexcept {
  ++position_;
  return splitmix64_mix(seed_ + position_ * kGolden);
}

double SeededStream::next_unit() noexcept {
  // 53 random mantissa bits, offset by half an ulp so 0 is never produced.
  return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

std::vector<double> seeded_gaussian(SeededStream& stream, std::size_t n) {
  std::vector<double> out;
  out.reserve(n);
  while (out.size() < n) {
    const double u1 = stream.next_unit();
    const double u2 = stream.next_unit();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    out.push_back(radius * std::cos(angle));
    if (out.size() < n) out.push_back(radius * std::sin(angle));
  }
  return out;
}

std::uint64_t fnv1a64(std::string_view bytes) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::vector<double> token_embedding(std::string_view token, std::size_t dim) {
  if (token.empty()) throw ParseInputError("token_embedding: empty token");
  if (dim < 2) throw ConfigError("token_embedding: dim must be >= 2");
  SeededStream stream(fnv1a64(token));
  auto v = seeded_gaussian(stream, dim);
  double norm = 0.0;
  for (double x : v) norm += x * x;
  norm = std::sqrt(norm);
  for (double& x : v) x /= norm;
  return v;
}

}  // namespace detailpp
