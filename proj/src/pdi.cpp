#include "detailpp/pdi.hpp"

#include <cmath>
#include <future>
#include <optional>
#include <thread>

#include "detailpp/errors.hpp"

namespace detailpp {

std::size_t PDIConfig::shared_steps() const noexcept {
  return static_cast<std::size_t>(std::llround(share_fraction * static_cast<double>(steps)));
}

void PDIConfig::validate() const {
  if (steps < 1) throw ConfigError("steps must be >= 1");
  if (!(share_fraction >= 0.0 && share_fraction <= 1.0)) {
    throw ConfigError("share fraction must lie in [0, 1]");
  }
  if (!(tau > 0.0 && tau < 1.0)) throw ConfigError("tau must lie in (0, 1)");
  nurse.validate();
}

LatentGrid alm(const LatentGrid& z_prev, const LatentGrid& z_hat, const BinaryMask& mask) {
  if (!z_prev.same_shape(z_hat)) throw ShapeError("alm: latent shapes differ");
  if (mask.height != z_prev.height() || mask.width != z_prev.width() ||
      mask.values.size() != z_prev.positions()) {
    throw ShapeError("alm: mask does not match latent resolution");
  }
  LatentGrid out = z_prev;
  const std::size_t channels = z_prev.channels();
  for (std::size_t p = 0; p < z_prev.positions(); ++p) {
    if (mask.values[p] == 0) continue;
    for (std::size_t c = 0; c < channels; ++c) out[p * channels + c] = z_hat[p * channels + c];
  }
  return out;
}

namespace {

struct Branch {
  std::size_t p_index = 0;
  RealMatrix embeddings;
  LatentGrid latent;
  ForwardResult last;
};

}  // namespace

RunResult run(const Denoiser& model, const PromptPlan& plan, const PDIConfig& cfg,
              std::uint64_t seed, bool keep_trace, const RunHooks& hooks) {
  cfg.validate();
  if (plan.sub_prompts.empty()) throw ConfigError("run: empty plan");
  if (model.schedule().steps() != cfg.steps) {
    throw ConfigError("run: model schedule has " + std::to_string(model.schedule().steps()) +
                      " steps, config asks for " + std::to_string(cfg.steps));
  }
  const ModelDims& dims = model.dims();
  const std::size_t T = cfg.steps;
  const std::size_t S = cfg.shared_steps();
  const std::size_t first = plan.first_index();
  const std::size_t n_subjects = plan.subjects.size();
  const bool nursing_enabled = cfg.nurse.inner_steps > 0 && n_subjects > 0;
  const std::size_t nurse_window = std::min(cfg.nurse.active_steps, S);

  // One hardware thread gains nothing from extra threads.
  const bool concurrent = cfg.parallel && std::thread::hardware_concurrency() > 1;

  const LatentGrid z_init = sample_init(seed, dims);
  std::vector<Branch> branches(plan.branch_count());
  for (std::size_t b = 0; b < branches.size(); ++b) {
    branches[b].p_index = first + b;
    branches[b].embeddings = embed_tokens(tokenize(plan.sub_prompts[b]), dims.model_width);
    branches[b].latent = z_init;
  }
  // p-index -> branch position
  auto pos_of = [first](std::size_t p_index) { return p_index - first; };

  RunResult result;
  result.first_index = first;
  auto record_trace = [&] {
    if (!keep_trace) return;
    std::vector<LatentGrid> step;
    for (const auto& b : branches) step.push_back(b.latent);
    result.trace.push_back(std::move(step));
  };
  record_trace();

  std::vector<std::optional<NurseRecord>> nurse_slots(branches.size());
  auto nurse_branch = [&](std::size_t b, std::size_t t, std::vector<TokenSpan> spans,
                          std::vector<std::string> subjects,
                          std::span<const RealMatrix> sa_override) {
    NurseContext ctx;
    ctx.model = &model;
    ctx.token_embeddings = &branches[b].embeddings;
    ctx.spans = std::move(spans);
    ctx.subjects = std::move(subjects);
    ctx.t = t;
    ctx.sa_override = sa_override;
    NurseResult nr = nurse_update(branches[b].latent, ctx, cfg.nurse);
    branches[b].latent = std::move(nr.latent);
    nurse_slots[b] = NurseRecord{t, branches[b].p_index, std::move(nr.report)};
  };

  for (std::size_t k = 0; k < T; ++k) {
    const std::size_t t = T - k;
    const bool shared = k < S;
    const bool nursing = nursing_enabled && shared && k < nurse_window;
    for (auto& slot : nurse_slots) slot.reset();

    // (a) branch 0 with its own self-attention; its maps are the shared layout.
    if (nursing && cfg.nurse.target == NurseTarget::kFirstBranch) {
      nurse_branch(0, t, plan.first_branch_spans, plan.subjects, {});
    }
    branches[0].last = model.forward(branches[0].latent, branches[0].embeddings, t);
    const std::span<const RealMatrix> shared_maps =
        shared && cfg.share_self_attention
            ? std::span<const RealMatrix>(branches[0].last.captured.self_maps)
            : std::span<const RealMatrix>();

    // (b) remaining branches, optionally concurrent, reading the shared maps.
    auto advance = [&](std::size_t b) {
      const std::size_t p = branches[b].p_index;
      if (nursing && cfg.nurse.target == NurseTarget::kAttributeBranches && p >= 2) {
        nurse_branch(b, t, {plan.subject_spans[p - 2]}, {plan.subjects[p - 2]}, shared_maps);
      }
      branches[b].last = model.forward(branches[b].latent, branches[b].embeddings, t, shared_maps);
    };
    if (concurrent && branches.size() > 2) {
      std::vector<std::future<void>> pending;
      for (std::size_t b = 2; b < branches.size(); ++b) {
        pending.push_back(std::async(std::launch::async, advance, b));
      }
      advance(1);
      for (auto& f : pending) f.get();
    } else {
      for (std::size_t b = 1; b < branches.size(); ++b) advance(b);
    }

    for (const auto& slot : nurse_slots) {
      if (slot) result.nurse_log.push_back(*slot);
    }
    if (hooks.on_attention) {
      for (const auto& br : branches) hooks.on_attention(t, br.p_index, br.last.captured);
    }

    // (c) one sampler step for every branch.
    for (auto& br : branches) br.latent = model.ddim_step(br.latent, br.last.noise_pred, t);

    // (d) accumulative latent modification, strictly in branch order.
    if (shared && cfg.apply_alm) {
      for (std::size_t i = 1; i + 1 <= plan.last_index() && i <= n_subjects; ++i) {
        const bool from_first = cfg.mask_source == MaskSource::kFirstBranch;
        const CapturedAttention& source =
            from_first ? branches[0].last.captured : branches[pos_of(i + 1)].last.captured;
        const TokenSpan span = from_first ? plan.first_branch_spans[i - 1] : plan.subject_spans[i - 1];
        SubjectMap m = subject_map(source, span, dims.height, dims.width);
        BinaryMask mask = align_mask(binarize(m, cfg.tau), dims.height, dims.width);
        if (hooks.on_mask) hooks.on_mask(t, i, mask);
        Branch& next = branches[pos_of(i + 1)];
        next.latent = alm(branches[pos_of(i)].latent, next.latent, mask);
      }
    }
    record_trace();
  }

  for (auto& br : branches) result.finals.push_back(std::move(br.latent));
  return result;
}

}  // namespace detailpp
