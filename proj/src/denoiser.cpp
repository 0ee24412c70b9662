#include "detailpp/denoiser.hpp"

#include <cmath>
#include <numbers>

#include "detailpp/errors.hpp"
#include "linalg.hpp"

namespace detailpp {

using linalg::add_inplace;
using linalg::matmul;
using linalg::matmul_at;
using linalg::matmul_bt;
using linalg::scale_inplace;

namespace {

RealMatrix gaussian_matrix(SeededStream& stream, std::size_t rows, std::size_t cols, double scale) {
  auto v = seeded_gaussian(stream, rows * cols);
  for (double& x : v) x *= scale;
  return RealMatrix(rows, cols, std::move(v));
}

// Low-frequency 2-D sinusoidal code: the first half of the channels encodes
// the row, the second half the column, with (k+1)/2 cycles across the grid.
RealMatrix positional_code(const ModelDims& dims) {
  const std::size_t d = dims.model_width;
  const std::size_t half = d / 2;
  RealMatrix pos(dims.positions(), d);
  constexpr double kAmplitude = 0.5;
  for (std::size_t h = 0; h < dims.height; ++h) {
    for (std::size_t w = 0; w < dims.width; ++w) {
      auto row = pos.row(h * dims.width + w);
      const double coords[2] = {static_cast<double>(h) / static_cast<double>(dims.height),
                                static_cast<double>(w) / static_cast<double>(dims.width)};
      for (int axis = 0; axis < 2; ++axis) {
        const std::size_t base = axis == 0 ? 0 : half;
        const std::size_t width = axis == 0 ? half : d - half;
        for (std::size_t k = 0; k < width; ++k) {
          const double cycles = static_cast<double>(k / 2 + 1) / 2.0;
          const double angle = 2.0 * std::numbers::pi * cycles * coords[axis];
          row[base + k] = kAmplitude * (k % 2 == 0 ? std::sin(angle) : std::cos(angle));
        }
      }
    }
  }
  return pos;
}

void check_override(std::span<const RealMatrix> sa_override, const ModelDims& dims) {
  if (sa_override.empty()) return;
  if (sa_override.size() != dims.layers) {
    throw ShapeError("self-attention override: expected " + std::to_string(dims.layers) +
                     " layer maps, got " + std::to_string(sa_override.size()));
  }
  const std::size_t hw = dims.positions();
  for (const auto& m : sa_override) {
    if (m.rows() != hw || m.cols() != hw) {
      throw ShapeError("self-attention override: expected " + std::to_string(hw) + "x" +
                       std::to_string(hw) + ", got " + std::to_string(m.rows()) + "x" +
                       std::to_string(m.cols()));
    }
  }
}

}  // namespace

void ModelDims::validate() const {
  if (height == 0 || width == 0 || channels == 0 || model_width == 0 || key_dim == 0 ||
      layers == 0) {
    throw ConfigError("model dims must be positive");
  }
  if (height > 64 || width > 64) throw ConfigError("latent height/width limited to 64");
  if (model_width < 4 || key_dim < 4) throw ConfigError("model width and key dim must be >= 4");
}

ModelParams init_params(std::uint64_t seed, const ModelDims& dims) {
  dims.validate();
  const std::size_t d = dims.model_width;
  const std::size_t dk = dims.key_dim;
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  SeededStream stream(seed);

  ModelParams p;
  p.dims = dims;
  p.seed = seed;
  p.input_proj = gaussian_matrix(stream, dims.channels, d, scale);
  p.time_proj = gaussian_matrix(stream, d, d, scale);
  for (std::size_t l = 0; l < dims.layers; ++l) {
    AttentionLayerParams layer;
    layer.self_query = gaussian_matrix(stream, d, dk, scale);
    layer.self_key = gaussian_matrix(stream, d, dk, scale);
    layer.self_value = gaussian_matrix(stream, d, d, scale);
    layer.cross_query = gaussian_matrix(stream, d, dk, scale);
    layer.cross_key = gaussian_matrix(stream, d, dk, scale);
    layer.cross_value = gaussian_matrix(stream, d, d, scale);
    p.layers.push_back(std::move(layer));
  }
  p.mix_hidden = gaussian_matrix(stream, d, 2 * d, scale);
  p.mix_bias = seeded_gaussian(stream, 2 * d);
  for (double& b : p.mix_bias) b *= scale;
  p.mix_out = gaussian_matrix(stream, 2 * d, dims.channels, scale);
  return p;
}

Schedule::Schedule(std::size_t steps) {
  if (steps == 0) throw ConfigError("schedule needs at least one step");
  alpha_bar_.resize(steps + 1);
  alpha_bar_[0] = 1.0;
  for (std::size_t t = 1; t <= steps; ++t) {
    const double frac =
        steps == 1 ? 0.0 : static_cast<double>(t - 1) / static_cast<double>(steps - 1);
    const double beta = kBetaStart + (kBetaEnd - kBetaStart) * frac;
    alpha_bar_[t] = alpha_bar_[t - 1] * (1.0 - beta);
  }
}

double Schedule::alpha_bar(std::size_t t) const {
  if (t >= alpha_bar_.size()) throw IndexError("schedule: timestep " + std::to_string(t));
  return alpha_bar_[t];
}

RealMatrix embed_tokens(const std::vector<std::string>& tokens, std::size_t dim) {
  RealMatrix out(tokens.size(), dim);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const auto e = token_embedding(tokens[i], dim);
    std::copy(e.begin(), e.end(), out.row(i).begin());
  }
  return out;
}

std::vector<double> timestep_embedding(std::size_t t, std::size_t dim) {
  std::vector<double> out(dim, 0.0);
  const std::size_t half = dim / 2;
  const double log_base = std::log(10000.0) / static_cast<double>(half);
  for (std::size_t i = 0; i < half; ++i) {
    const double angle = static_cast<double>(t) * std::exp(-static_cast<double>(i) * log_base);
    out[i] = std::cos(angle);
    out[i + half] = std::sin(angle);
  }
  return out;
}

Denoiser::Denoiser(ModelParams params, std::size_t steps)
    : params_(std::move(params)), schedule_(steps), positional_(positional_code(params_.dims)) {}

RealMatrix Denoiser::input_features(const LatentGrid& z, std::size_t t) const {
  const ModelDims& dims = params_.dims;
  if (z.height() != dims.height || z.width() != dims.width || z.channels() != dims.channels) {
    throw ShapeError("forward: latent shape does not match model dims");
  }
  if (t < 1 || t > schedule_.steps()) {
    throw IndexError("forward: timestep " + std::to_string(t) + " outside [1, " +
                     std::to_string(schedule_.steps()) + "]");
  }
  const std::size_t d = dims.model_width;
  RealMatrix z_mat(dims.positions(), dims.channels, std::vector<double>(z.values().begin(), z.values().end()));
  RealMatrix x = matmul(z_mat, params_.input_proj);
  add_inplace(x, positional_);

  const auto sinus = timestep_embedding(t, d);
  std::vector<double> temb(d, 0.0);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) temb[j] += sinus[i] * params_.time_proj(i, j);
  }
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto row = x.row(r);
    for (std::size_t j = 0; j < d; ++j) row[j] += temb[j];
  }
  return x;
}

CapturedAttention Denoiser::forward_attention(const LatentGrid& z,
                                              const RealMatrix& token_embeddings, std::size_t t,
                                              std::span<const RealMatrix> sa_override,
                                              ForwardTrace* trace) const {
  // The mixing network reads the final features, which forward() needs; keep
  // them in the trace's last slot when no trace was requested.
  ForwardTrace local;
  ForwardTrace& tr = trace ? *trace : local;
  tr.layers.clear();
  check_override(sa_override, params_.dims);
  if (token_embeddings.cols() != params_.dims.model_width || token_embeddings.rows() == 0) {
    throw ShapeError("forward: token embeddings must be L x d with L >= 1");
  }
  const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(params_.dims.key_dim));

  CapturedAttention captured;
  RealMatrix x = input_features(z, t);
  for (std::size_t l = 0; l < params_.layers.size(); ++l) {
    const AttentionLayerParams& lp = params_.layers[l];
    ForwardTrace::Layer rec;
    rec.input = x;
    rec.self_value = matmul(x, lp.self_value);
    if (sa_override.empty()) {
      rec.self_query = matmul(x, lp.self_query);
      rec.self_key = matmul(x, lp.self_key);
      RealMatrix logits = matmul_bt(rec.self_query, rec.self_key);
      scale_inplace(logits, inv_sqrt_dk);
      rec.self_probs = softmax_rows(logits);
    } else {
      rec.self_probs = sa_override[l];
      rec.overridden = true;
    }
    add_inplace(x, matmul(rec.self_probs, rec.self_value));

    rec.cross_query = matmul(x, lp.cross_query);
    rec.cross_key = matmul(token_embeddings, lp.cross_key);
    rec.cross_value = matmul(token_embeddings, lp.cross_value);
    RealMatrix logits = matmul_bt(rec.cross_query, rec.cross_key);
    scale_inplace(logits, inv_sqrt_dk);
    rec.cross_probs = softmax_rows(logits);
    add_inplace(x, matmul(rec.cross_probs, rec.cross_value));

    captured.self_maps.push_back(rec.self_probs);
    captured.cross_maps.push_back(rec.cross_probs);
    tr.layers.push_back(std::move(rec));
  }
  // Final features ride along as an extra layer record holding only `input`.
  ForwardTrace::Layer tail;
  tail.input = std::move(x);
  tr.layers.push_back(std::move(tail));
  return captured;
}

ForwardResult Denoiser::forward(const LatentGrid& z, const RealMatrix& token_embeddings,
                                std::size_t t, std::span<const RealMatrix> sa_override) const {
  ForwardTrace trace;
  ForwardResult result;
  result.captured = forward_attention(z, token_embeddings, t, sa_override, &trace);
  const RealMatrix& features = trace.layers.back().input;

  RealMatrix hidden = matmul(features, params_.mix_hidden);
  for (std::size_t r = 0; r < hidden.rows(); ++r) {
    auto row = hidden.row(r);
    for (std::size_t j = 0; j < row.size(); ++j) row[j] = std::tanh(row[j] + params_.mix_bias[j]);
  }
  RealMatrix eps = matmul(hidden, params_.mix_out);
  const ModelDims& dims = params_.dims;
  result.noise_pred = LatentGrid(dims.height, dims.width, dims.channels,
                                 std::vector<double>(eps.values().begin(), eps.values().end()));
  return result;
}

LatentGrid Denoiser::backward_from_cross_maps(const ForwardTrace& trace,
                                              std::span<const RealMatrix> grad_cross_maps) const {
  const std::size_t n_layers = params_.layers.size();
  if (grad_cross_maps.size() != n_layers || trace.layers.size() != n_layers + 1) {
    throw ShapeError("backward: expected one gradient map per layer");
  }
  const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(params_.dims.key_dim));
  const std::size_t d = params_.dims.model_width;

  // grad w.r.t. the output features of the current layer
  RealMatrix g_out(params_.dims.positions(), d);
  for (std::size_t li = n_layers; li-- > 0;) {
    const ForwardTrace::Layer& rec = trace.layers[li];
    const AttentionLayerParams& lp = params_.layers[li];

    // x2 = x1 + A Vc
    RealMatrix g_x1 = g_out;
    RealMatrix g_probs = matmul_bt(g_out, rec.cross_value);
    add_inplace(g_probs, grad_cross_maps[li]);
    RealMatrix g_logits = linalg::softmax_rows_backward(rec.cross_probs, g_probs);
    scale_inplace(g_logits, inv_sqrt_dk);
    RealMatrix g_query = matmul(g_logits, rec.cross_key);
    add_inplace(g_x1, matmul_bt(g_query, lp.cross_query));

    // x1 = x + S (x Wv)
    RealMatrix g_x = g_x1;
    RealMatrix g_value = matmul_at(rec.self_probs, g_x1);
    add_inplace(g_x, matmul_bt(g_value, lp.self_value));
    if (!rec.overridden) {
      RealMatrix g_self = matmul_bt(g_x1, rec.self_value);
      RealMatrix g_self_logits = linalg::softmax_rows_backward(rec.self_probs, g_self);
      scale_inplace(g_self_logits, inv_sqrt_dk);
      RealMatrix g_q = matmul(g_self_logits, rec.self_key);
      RealMatrix g_k = matmul_at(g_self_logits, rec.self_query);
      add_inplace(g_x, matmul_bt(g_q, lp.self_query));
      add_inplace(g_x, matmul_bt(g_k, lp.self_key));
    }
    g_out = std::move(g_x);
  }
  // x0 = z Win + const
  RealMatrix g_z = matmul_bt(g_out, params_.input_proj);
  const ModelDims& dims = params_.dims;
  return LatentGrid(dims.height, dims.width, dims.channels,
                    std::vector<double>(g_z.values().begin(), g_z.values().end()));
}

double ddim_update(double z, double eps, double alpha_bar_t, double alpha_bar_prev) {
  const double x0 = (z - std::sqrt(1.0 - alpha_bar_t) * eps) / std::sqrt(alpha_bar_t);
  return std::sqrt(alpha_bar_prev) * x0 + std::sqrt(1.0 - alpha_bar_prev) * eps;
}

LatentGrid Denoiser::ddim_step(const LatentGrid& z, const LatentGrid& noise_pred,
                               std::size_t t) const {
  if (t < 1 || t > schedule_.steps()) {
    throw IndexError("ddim_step: timestep " + std::to_string(t) + " outside [1, " +
                     std::to_string(schedule_.steps()) + "]");
  }
  if (!z.same_shape(noise_pred)) throw ShapeError("ddim_step: noise shape mismatch");
  const double ab_t = schedule_.alpha_bar(t);
  const double ab_prev = schedule_.alpha_bar(t - 1);
  LatentGrid out = z;
  for (std::size_t i = 0; i < z.size(); ++i) out[i] = ddim_update(z[i], noise_pred[i], ab_t, ab_prev);
  return out;
}

LatentGrid sample_init(std::uint64_t seed, const ModelDims& dims) {
  dims.validate();
  SeededStream stream(seed);
  return LatentGrid(dims.height, dims.width, dims.channels,
                    seeded_gaussian(stream, dims.height * dims.width * dims.channels));
}

}  // namespace detailpp
