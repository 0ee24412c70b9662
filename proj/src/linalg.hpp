#pragma once
// Small dense helpers used by the denoiser; not part of the public surface.

#include "detailpp/errors.hpp"
#include "detailpp/numerics.hpp"

namespace detailpp::linalg {

// a * b
inline RealMatrix matmul(const RealMatrix& a, const RealMatrix& b) {
  if (a.cols() != b.rows()) throw ShapeError("matmul: inner dimension mismatch");
  RealMatrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto dst = out.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      auto brow = b.row(k);
      for (std::size_t j = 0; j < brow.size(); ++j) dst[j] += aik * brow[j];
    }
  }
  return out;
}

// a * b^T
inline RealMatrix matmul_bt(const RealMatrix& a, const RealMatrix& b) {
  if (a.cols() != b.cols()) throw ShapeError("matmul_bt: inner dimension mismatch");
  RealMatrix out(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto arow = a.row(i);
    for (std::size_t j = 0; j < b.rows(); ++j) {
      auto brow = b.row(j);
      double s = 0.0;
      for (std::size_t k = 0; k < arow.size(); ++k) s += arow[k] * brow[k];
      out(i, j) = s;
    }
  }
  return out;
}

// a^T * b
inline RealMatrix matmul_at(const RealMatrix& a, const RealMatrix& b) {
  if (a.rows() != b.rows()) throw ShapeError("matmul_at: inner dimension mismatch");
  RealMatrix out(a.cols(), b.cols());
  for (std::size_t k = 0; k < a.rows(); ++k) {
    auto arow = a.row(k);
    auto brow = b.row(k);
    for (std::size_t i = 0; i < arow.size(); ++i) {
      const double aki = arow[i];
      if (aki == 0.0) continue;
      auto dst = out.row(i);
      for (std::size_t j = 0; j < brow.size(); ++j) dst[j] += aki * brow[j];
    }
  }
  return out;
}

inline void add_inplace(RealMatrix& a, const RealMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw ShapeError("add: shape mismatch");
  auto av = a.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < av.size(); ++i) av[i] += bv[i];
}

inline void scale_inplace(RealMatrix& a, double s) {
  for (double& v : a.values()) v *= s;
}

// Backward of a row softmax: given P = softmax(X) and dL/dP, returns dL/dX.
inline RealMatrix softmax_rows_backward(const RealMatrix& probs, const RealMatrix& grad) {
  RealMatrix out(probs.rows(), probs.cols());
  for (std::size_t r = 0; r < probs.rows(); ++r) {
    auto p = probs.row(r);
    auto g = grad.row(r);
    double dot = 0.0;
    for (std::size_t c = 0; c < p.size(); ++c) dot += p[c] * g[c];
    auto dst = out.row(r);
    for (std::size_t c = 0; c < p.size(); ++c) dst[c] = p[c] * (g[c] - dot);
  }
  return out;
}

}  // namespace detailpp::linalg
