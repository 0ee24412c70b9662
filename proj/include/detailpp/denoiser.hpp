#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "detailpp/latent.hpp"
#include "detailpp/numerics.hpp"

namespace detailpp {

struct ModelDims {
  std::size_t height = 16;
  std::size_t width = 16;
  std::size_t channels = 3;
  std::size_t model_width = 32;  // d
  std::size_t key_dim = 16;      // d_k
  std::size_t layers = 1;        // stacked self+cross attention blocks

  std::size_t positions() const noexcept { return height * width; }
  // Throws ConfigError for zero dims, H or W above 64, or d, d_k below 4.
  void validate() const;
  friend bool operator==(const ModelDims&, const ModelDims&) = default;
};

struct AttentionLayerParams {
  RealMatrix self_query;   // d x d_k
  RealMatrix self_key;     // d x d_k
  RealMatrix self_value;   // d x d
  RealMatrix cross_query;  // d x d_k
  RealMatrix cross_key;    // d x d_k (token embeddings have width d)
  RealMatrix cross_value;  // d x d

  friend bool operator==(const AttentionLayerParams&, const AttentionLayerParams&) = default;
};

struct ModelParams {
  ModelDims dims;
  std::uint64_t seed = 0;
  RealMatrix input_proj;  // C x d
  RealMatrix time_proj;   // d x d, applied to the sinusoidal timestep embedding
  std::vector<AttentionLayerParams> layers;
  RealMatrix mix_hidden;  // d x 2d
  std::vector<double> mix_bias;  // 2d
  RealMatrix mix_out;     // 2d x C

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

// Every weight is a seeded_gaussian draw scaled by 1/sqrt(d).
ModelParams init_params(std::uint64_t seed, const ModelDims& dims = {});

// Linear beta schedule (1e-4 .. 0.02) over T steps; alpha_bar(0) == 1.
class Schedule {
 public:
  static constexpr double kBetaStart = 1e-4;
  static constexpr double kBetaEnd = 0.02;

  // Throws ConfigError for T == 0.
  explicit Schedule(std::size_t steps);

  std::size_t steps() const noexcept { return alpha_bar_.size() - 1; }
  // Throws IndexError for t > T.
  double alpha_bar(std::size_t t) const;

 private:
  std::vector<double> alpha_bar_;
};

// Per-layer attention probabilities from one forward pass.
struct CapturedAttention {
  std::vector<RealMatrix> self_maps;   // HW x HW
  std::vector<RealMatrix> cross_maps;  // HW x L
};

struct ForwardResult {
  LatentGrid noise_pred;
  CapturedAttention captured;
};

// Activations kept for the backward pass through the attention path.
struct ForwardTrace {
  struct Layer {
    RealMatrix input;        // X
    RealMatrix self_query, self_key, self_value;
    RealMatrix self_probs;   // S (computed or override)
    bool overridden = false;
    RealMatrix cross_query, cross_key, cross_value;
    RealMatrix cross_probs;  // A
  };
  std::vector<Layer> layers;
};

// L x d matrix of token_embedding rows.
RealMatrix embed_tokens(const std::vector<std::string>& tokens, std::size_t dim);

// Sinusoidal embedding of a timestep, width dim.
std::vector<double> timestep_embedding(std::size_t t, std::size_t dim);

// Single-block toy noise predictor plus its deterministic DDIM sampler.
// Immutable after construction; forward() may be called concurrently.
class Denoiser {
 public:
  Denoiser(ModelParams params, std::size_t steps);

  const ModelParams& params() const noexcept { return params_; }
  const ModelDims& dims() const noexcept { return params_.dims; }
  const Schedule& schedule() const noexcept { return schedule_; }

  // Noise prediction for z at timestep t in [1, T]. When sa_override is
  // non-empty it must hold one HW x HW row-stochastic map per layer; those maps
  // replace the computed self-attention probabilities and are reported in the
  // capture. Throws ShapeError (override or latent shape), IndexError (t).
  ForwardResult forward(const LatentGrid& z, const RealMatrix& token_embeddings, std::size_t t,
                        std::span<const RealMatrix> sa_override = {}) const;

  // Attention-only pass (skips the mixing network) that records activations.
  CapturedAttention forward_attention(const LatentGrid& z, const RealMatrix& token_embeddings,
                                      std::size_t t, std::span<const RealMatrix> sa_override,
                                      ForwardTrace* trace) const;

  // Gradient w.r.t. z of a scalar that depends on z only through the cross
  // maps, given dLoss/dA for every layer.
  LatentGrid backward_from_cross_maps(const ForwardTrace& trace,
                                      std::span<const RealMatrix> grad_cross_maps) const;

  // z_{t-1} from z_t and the predicted noise. Throws IndexError for t outside [1, T].
  LatentGrid ddim_step(const LatentGrid& z, const LatentGrid& noise_pred, std::size_t t) const;

 private:
  RealMatrix input_features(const LatentGrid& z, std::size_t t) const;

  ModelParams params_;
  Schedule schedule_;
  RealMatrix positional_;  // HW x d, fixed 2-D sinusoidal code
};

// Scalar DDIM update: x0 = (z - sqrt(1-ab_t) eps) / sqrt(ab_t);
// z_prev = sqrt(ab_prev) x0 + sqrt(1-ab_prev) eps.
double ddim_update(double z, double eps, double alpha_bar_t, double alpha_bar_prev);

// H x W x C standard-normal grid; every branch starts from this same grid.
LatentGrid sample_init(std::uint64_t seed, const ModelDims& dims = {});

}  // namespace detailpp
