#include "detailpp/nurse.hpp"

#include <algorithm>
#include <cmath>

#include "detailpp/errors.hpp"
#include "detailpp/prompt.hpp"

namespace detailpp {

namespace {

double map_mass(const SubjectMap& map) {
  double s = 0.0;
  for (double v : map.values) s += v;
  return s;
}

bool has_positive_mass(const SubjectMap& map) {
  return std::any_of(map.values.begin(), map.values.end(), [](double v) { return v > 0.0; });
}

double squared_distance(MapPoint c, GridPoint p) {
  const double dw = c.w - static_cast<double>(p.w);
  const double dh = c.h - static_cast<double>(p.h);
  return dw * dw + dh * dh;
}

// dL/dM of align + lambda * entropy for one subject map, added into grad.
void accumulate_map_gradient(const SubjectMap& map, MapPoint c, GridPoint p, double lambda,
                             std::vector<double>& grad) {
  const double mass = map_mass(map);
  double entropy = 0.0;
  for (double v : map.values) {
    const double q = v / mass;
    if (q > 0.0) entropy -= q * std::log(q);
  }
  const double dw = c.w - static_cast<double>(p.w);
  const double dh = c.h - static_cast<double>(p.h);
  for (std::size_t h = 0; h < map.height; ++h) {
    for (std::size_t w = 0; w < map.width; ++w) {
      const std::size_t i = h * map.width + w;
      // centroid_w = sum(w M) / sum(M)  =>  d/dM_i = (w_i - c_w) / sum(M)
      double g = 2.0 * dw * (static_cast<double>(w) - c.w) / mass +
                 2.0 * dh * (static_cast<double>(h) - c.h) / mass;
      // H(M / sum M)  =>  d/dM_i = (-log q_i - H) / sum(M)
      const double q = map.values[i] / mass;
      if (q > 0.0) g += lambda * (-std::log(q) - entropy) / mass;
      grad[i] += g;
    }
  }
}

struct SubjectMaps {
  CapturedAttention captured;
  std::vector<SubjectMap> maps;
};

SubjectMaps subject_maps_at(const NurseContext& ctx, const LatentGrid& z, ForwardTrace* trace) {
  if (ctx.model == nullptr || ctx.token_embeddings == nullptr) {
    throw ConfigError("nurse: context missing model or token embeddings");
  }
  SubjectMaps out;
  out.captured =
      ctx.model->forward_attention(z, *ctx.token_embeddings, ctx.t, ctx.sa_override, trace);
  const ModelDims& dims = ctx.model->dims();
  for (std::size_t i = 0; i < ctx.spans.size(); ++i) {
    SubjectMap m = subject_map(out.captured, ctx.spans[i], dims.height, dims.width);
    if (i < ctx.subjects.size()) m.subject = ctx.subjects[i];
    out.maps.push_back(std::move(m));
  }
  return out;
}

LossReport report_from_maps(const std::vector<SubjectMap>& maps, double lambda,
                            std::span<const GridPoint> frozen_peaks) {
  LossReport report;
  for (std::size_t i = 0; i < maps.size(); ++i) {
    SubjectLoss s;
    s.subject = maps[i].subject;
    if (!has_positive_mass(maps[i])) {
      s.skipped = true;
      report.subjects.push_back(std::move(s));
      continue;
    }
    s.centroid = centroid(maps[i]);
    s.peak = i < frozen_peaks.size() ? frozen_peaks[i] : peak(maps[i]);
    s.align = squared_distance(s.centroid, s.peak);
    s.entropy = entropy_loss(maps[i]);
    report.align += s.align;
    report.entropy += s.entropy;
    report.subjects.push_back(std::move(s));
  }
  report.total = report.align + lambda * report.entropy;
  return report;
}

}  // namespace

void NurseConfig::validate() const {
  if (!(lambda >= 0.0)) throw ConfigError("nurse: lambda must be >= 0");
  if (!(step_size > 0.0)) throw ConfigError("nurse: step size must be > 0");
}

MapPoint centroid(const SubjectMap& map) {
  double mass = 0.0, sw = 0.0, sh = 0.0;
  for (std::size_t h = 0; h < map.height; ++h) {
    for (std::size_t w = 0; w < map.width; ++w) {
      const double v = map.at(h, w);
      mass += v;
      sw += static_cast<double>(w) * v;
      sh += static_cast<double>(h) * v;
    }
  }
  if (!has_positive_mass(map) || !(mass > 0.0)) {
    throw DegenerateMapError("centroid: map has no positive mass");
  }
  return {sw / mass, sh / mass};
}

GridPoint peak(const SubjectMap& map) {
  if (map.values.empty()) throw DegenerateMapError("peak: empty map");
  // max_element returns the first of equal maxima, i.e. the smallest row-major index.
  const auto it = std::max_element(map.values.begin(), map.values.end());
  const auto idx = static_cast<std::size_t>(it - map.values.begin());
  return {idx % map.width, idx / map.width};
}

double align_loss(std::span<const SubjectMap> maps) {
  double total = 0.0;
  for (const auto& m : maps) total += squared_distance(centroid(m), peak(m));
  return total;
}

std::vector<double> map_loss_gradient(const SubjectMap& map, GridPoint frozen_peak, double lambda) {
  std::vector<double> grad(map.values.size(), 0.0);
  accumulate_map_gradient(map, centroid(map), frozen_peak, lambda, grad);
  return grad;
}

double entropy_loss(const SubjectMap& map) {
  if (!has_positive_mass(map)) throw DegenerateMapError("entropy_loss: map has no positive mass");
  const double mass = map_mass(map);
  double h = 0.0;
  for (double v : map.values) {
    const double q = v / mass;
    if (q > 0.0) h -= q * std::log(q);
  }
  return h;
}

LossReport evaluate_losses(const NurseContext& ctx, const LatentGrid& z, double lambda,
                           std::span<const GridPoint> frozen_peaks) {
  const SubjectMaps sm = subject_maps_at(ctx, z, nullptr);
  return report_from_maps(sm.maps, lambda, frozen_peaks);
}

LossGradient loss_gradient(const NurseContext& ctx, const LatentGrid& z, double lambda) {
  ForwardTrace trace;
  const SubjectMaps sm = subject_maps_at(ctx, z, &trace);

  LossGradient out;
  out.report = report_from_maps(sm.maps, lambda, {});
  const ModelDims& dims = ctx.model->dims();
  const std::size_t positions = dims.positions();
  const std::size_t n_layers = sm.captured.cross_maps.size();
  const std::size_t n_tokens = sm.captured.cross_maps.front().cols();

  RealMatrix grad_cross(positions, n_tokens);
  for (std::size_t i = 0; i < sm.maps.size(); ++i) {
    const SubjectLoss& s = out.report.subjects[i];
    out.peaks.push_back(s.peak);
    if (s.skipped) continue;
    std::vector<double> g_map(positions, 0.0);
    accumulate_map_gradient(sm.maps[i], s.centroid, s.peak, lambda, g_map);
    // M = mean over layers and span tokens of A_l[:, tok]
    const TokenSpan span = ctx.spans[i];
    const double share = 1.0 / static_cast<double>(n_layers * span.size());
    for (std::size_t p = 0; p < positions; ++p) {
      for (std::size_t tok = span.begin; tok < span.end; ++tok) grad_cross(p, tok) += g_map[p] * share;
    }
  }
  std::vector<RealMatrix> per_layer(n_layers, grad_cross);
  out.gradient = ctx.model->backward_from_cross_maps(trace, per_layer);
  return out;
}

NurseResult nurse_update(const LatentGrid& z, const NurseContext& ctx, const NurseConfig& cfg) {
  cfg.validate();
  if (ctx.spans.empty()) throw ConfigError("nurse_update: no subjects to nurse");
  NurseResult result;
  result.latent = z;
  for (std::size_t k = 0; k < cfg.inner_steps; ++k) {
    const LossGradient lg = loss_gradient(ctx, result.latent, cfg.lambda);
    if (k == 0) result.initial = lg.report;
    for (std::size_t i = 0; i < result.latent.size(); ++i) {
      result.latent[i] -= cfg.step_size * lg.gradient[i];
    }
  }
  result.report = evaluate_losses(ctx, result.latent, cfg.lambda);
  if (cfg.inner_steps == 0) result.initial = result.report;
  return result;
}

LatentGrid fd_gradient(const std::function<double(const LatentGrid&)>& loss_at,
                       const LatentGrid& z, double eps) {
  if (!(eps > 0.0)) throw ConfigError("fd_gradient: eps must be > 0");
  LatentGrid grad(z.height(), z.width(), z.channels());
  LatentGrid probe = z;
  for (std::size_t i = 0; i < z.size(); ++i) {
    probe[i] = z[i] + eps;
    const double up = loss_at(probe);
    probe[i] = z[i] - eps;
    const double down = loss_at(probe);
    probe[i] = z[i];
    grad[i] = (up - down) / (2.0 * eps);
  }
  return grad;
}

GradientCheck run_gradient_check(std::uint64_t seed, const ModelDims& dims,
                                 std::size_t coordinates, double eps, double lambda) {
  constexpr std::size_t kSteps = 50;
  constexpr std::size_t kTimestep = 45;
  const Denoiser model(init_params(seed, dims), kSteps);
  const LatentGrid z = sample_init(seed + 1, dims);

  const auto plan = decompose(parse_prompt("a red teddy bear wearing a green tracksuit"),
                              DecompositionConfig::kA);
  const std::vector<std::string> tokens = tokenize(plan.prompt(0));
  const RealMatrix embeddings = embed_tokens(tokens, dims.model_width);

  NurseContext ctx;
  ctx.model = &model;
  ctx.token_embeddings = &embeddings;
  ctx.spans = plan.first_branch_spans;
  ctx.subjects = plan.subjects;
  ctx.t = kTimestep;

  const LossGradient analytic = loss_gradient(ctx, z, lambda);
  const std::vector<GridPoint> frozen = analytic.peaks;

  const LatentGrid numeric = fd_gradient(
      [&](const LatentGrid& probe) { return evaluate_losses(ctx, probe, lambda, frozen).total; },
      z, eps);

  SeededStream pick(seed ^ 0x9e3779b97f4a7c15ULL);
  GradientCheck check;
  for (std::size_t n = 0; n < coordinates; ++n) {
    const std::size_t i = static_cast<std::size_t>(pick.next_u64() % z.size());
    const double exact = analytic.gradient[i];
    const double scale = std::max({std::abs(numeric[i]), std::abs(exact), 1e-8});
    check.max_relative_error =
        std::max(check.max_relative_error, std::abs(numeric[i] - exact) / scale);
    ++check.coordinates;
  }
  return check;
}

}  // namespace detailpp
