#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "detailpp/denoiser.hpp"
#include "detailpp/mask.hpp"

namespace detailpp {

// Which latents receive test-time updates during the active window.
enum class NurseTarget {
  kAttributeBranches,  // every branch whose maps source a mask, for its own subject
  kFirstBranch,        // branch 0 only, for all subjects
};

struct NurseConfig {
  double lambda = 1.0;       // weight of the entropy term
  double step_size = 0.05;   // alpha
  std::size_t inner_steps = 1;   // K; 0 disables nursing
  std::size_t active_steps = 10; // nursing runs during the first min(this, S) steps
  NurseTarget target = NurseTarget::kAttributeBranches;

  // Throws ConfigError for lambda < 0 or alpha <= 0.
  void validate() const;
};

struct MapPoint {
  double w = 0.0;
  double h = 0.0;
};

struct GridPoint {
  std::size_t w = 0;
  std::size_t h = 0;
  friend bool operator==(const GridPoint&, const GridPoint&) = default;
};

// Attention-weighted mean position (c_w, c_h). Throws DegenerateMapError when
// the map has no positive mass.
MapPoint centroid(const SubjectMap& map);

// Position of the largest entry; ties go to the smallest row-major index.
GridPoint peak(const SubjectMap& map);

// Sum over subjects of |centroid - peak|^2.
double align_loss(std::span<const SubjectMap> maps);

// Shannon entropy (natural log) of the map renormalized to sum 1, with
// 0 log 0 = 0. Throws DegenerateMapError for a map with no positive mass.
double entropy_loss(const SubjectMap& map);

// d(align + lambda * entropy)/dM for one map, holding the peak at `frozen_peak`.
std::vector<double> map_loss_gradient(const SubjectMap& map, GridPoint frozen_peak, double lambda);

struct SubjectLoss {
  std::string subject;
  MapPoint centroid;
  GridPoint peak;
  double align = 0.0;
  double entropy = 0.0;
  bool skipped = false;  // degenerate map, excluded from the totals
};

struct LossReport {
  double align = 0.0;
  double entropy = 0.0;
  double total = 0.0;  // align + lambda * entropy
  std::vector<SubjectLoss> subjects;
};

// Everything the loss needs besides the latent: frozen model, prompt
// embeddings, subject token spans, timestep and optional shared self-attention.
struct NurseContext {
  const Denoiser* model = nullptr;
  const RealMatrix* token_embeddings = nullptr;
  std::vector<TokenSpan> spans;
  std::vector<std::string> subjects;
  std::size_t t = 1;
  std::span<const RealMatrix> sa_override;
};

// Losses at z. With frozen_peaks, those positions replace each map's argmax.
LossReport evaluate_losses(const NurseContext& ctx, const LatentGrid& z, double lambda,
                           std::span<const GridPoint> frozen_peaks = {});

struct LossGradient {
  LossReport report;
  LatentGrid gradient;
  std::vector<GridPoint> peaks;  // argmax positions held constant while differentiating
};

// Analytic gradient of L_align + lambda * L_ent w.r.t. z, by backpropagation
// through the cross-attention path.
LossGradient loss_gradient(const NurseContext& ctx, const LatentGrid& z, double lambda);

struct NurseResult {
  LatentGrid latent;
  LossReport report;   // losses after the last update
  LossReport initial;  // losses before any update
};

// K steps of z <- z - alpha * grad L_total. Throws ConfigError when there are
// no subjects.
NurseResult nurse_update(const LatentGrid& z, const NurseContext& ctx, const NurseConfig& cfg);

// Central differences (f(z + eps e_i) - f(z - eps e_i)) / (2 eps) per
// coordinate. Throws ConfigError for eps <= 0.
LatentGrid fd_gradient(const std::function<double(const LatentGrid&)>& loss_at,
                       const LatentGrid& z, double eps);

struct GradientCheck {
  double max_relative_error = 0.0;
  std::size_t coordinates = 0;
};

// Compares the analytic gradient against fd_gradient on `coordinates` random
// positions of a random latent through a freshly seeded toy model.
GradientCheck run_gradient_check(std::uint64_t seed, const ModelDims& dims,
                                 std::size_t coordinates = 20, double eps = 1e-4,
                                 double lambda = 1.0);

}  // namespace detailpp
