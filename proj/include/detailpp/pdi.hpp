#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "detailpp/denoiser.hpp"
#include "detailpp/mask.hpp"
#include "detailpp/nurse.hpp"
#include "detailpp/prompt.hpp"

namespace detailpp {

// Where the subject masks B_i are read from.
enum class MaskSource {
  kAttributeBranch,  // branch i+1, the one that introduces the attribute
  kFirstBranch,      // branch 0 for every subject
};

struct PDIConfig {
  std::size_t steps = 50;         // T
  double share_fraction = 0.8;    // S / T
  double tau = kDefaultMaskThreshold;
  MaskSource mask_source = MaskSource::kAttributeBranch;
  NurseConfig nurse;
  DecompositionConfig decomposition = DecompositionConfig::kB;
  // Ablation switches; the full pipeline runs with both on.
  bool share_self_attention = true;
  bool apply_alm = true;
  // Run branch forwards of one step concurrently; serial on a single hardware thread.
  bool parallel = false;

  // S = round(share_fraction * T).
  std::size_t shared_steps() const noexcept;
  // Throws ConfigError.
  void validate() const;
};

// z_prev + b * (z_hat - z_prev) with b broadcast over channels. For a binary
// mask this selects z_hat where b = 1 and z_prev where b = 0, bit for bit.
// Throws ShapeError when shapes disagree.
LatentGrid alm(const LatentGrid& z_prev, const LatentGrid& z_hat, const BinaryMask& mask);

struct NurseRecord {
  std::size_t t = 0;
  std::size_t branch = 0;  // p-index
  LossReport report;
};

// Optional observation and test points. Branch arguments are p-indices.
struct RunHooks {
  // Attention captured by each branch's forward at timestep t.
  std::function<void(std::size_t t, std::size_t branch, const CapturedAttention&)> on_attention;
  // Mask B_i used at timestep t, before it is applied; may be rewritten.
  std::function<void(std::size_t t, std::size_t subject, BinaryMask&)> on_mask;
};

struct RunResult {
  std::size_t first_index = 0;              // p-index of finals[0]
  std::vector<LatentGrid> finals;           // z_i^0 in branch order
  std::vector<NurseRecord> nurse_log;
  // trace[k][b]: latent of branch b at timestep T - k, k = 0..T (when requested).
  std::vector<std::vector<LatentGrid>> trace;

  // Branch n carries every injected detail.
  const LatentGrid& output() const { return finals.back(); }
};

// Progressive detail injection over every sub-prompt of the plan, starting all
// branches from sample_init(seed). The model's schedule length must equal
// cfg.steps. Throws ConfigError on inconsistent inputs.
RunResult run(const Denoiser& model, const PromptPlan& plan, const PDIConfig& cfg,
              std::uint64_t seed, bool keep_trace = false, const RunHooks& hooks = {});

}  // namespace detailpp
