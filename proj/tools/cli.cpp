#include "cli.hpp"

#include <CLI11.hpp>

#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>

#include "detailpp/errors.hpp"
#include "detailpp/io.hpp"
#include "detailpp/nurse.hpp"
#include "detailpp/pdi.hpp"
#include "detailpp/prompt.hpp"
#include "detailpp/scb.hpp"
#include "detailpp/version.hpp"

namespace detailpp::cli {

namespace fs = std::filesystem;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitParse = 2;
constexpr int kExitNumeric = 3;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct GenerateArgs {
  std::string prompt;
  std::uint64_t seed = 0;
  std::uint64_t model_seed = 0;
  std::size_t steps = 50;
  double share_frac = 0.8;
  double tau = kDefaultMaskThreshold;
  double lambda = 1.0;
  double alpha = 0.05;
  std::size_t nurse_steps = 1;
  std::size_t nurse_window = 10;
  std::string nurse_target = "attr";
  std::string mask_source = "branch";
  std::string config = "B";
  std::size_t height = 16;
  std::size_t width = 16;
  std::size_t layers = 1;
  bool no_share = false;
  bool no_alm = false;
  bool trace = false;
  bool parallel = false;
  std::string manifest;
  std::string out;
};

std::uint64_t env_seed() {
  const char* s = std::getenv("DPP_SEED");
  if (s == nullptr) return 0;
  std::uint64_t v = 0;
  const char* end = s + std::char_traits<char>::length(s);
  const auto [ptr, ec] = std::from_chars(s, end, v);
  if (ec != std::errc() || ptr != end || s == end) {
    throw UsageError(std::string("DPP_SEED is not an unsigned integer: '") + s + "'");
  }
  return v;
}

io::RunManifest manifest_from(const GenerateArgs& a, bool seed_given) {
  io::RunManifest m;
  m.prompt = a.prompt;
  m.seed = seed_given ? a.seed : env_seed();
  m.model_seed = a.model_seed;
  m.dims.height = a.height;
  m.dims.width = a.width;
  m.dims.layers = a.layers;
  m.config.steps = a.steps;
  m.config.share_fraction = a.share_frac;
  m.config.tau = a.tau;
  m.config.mask_source = a.mask_source == "first" ? MaskSource::kFirstBranch : MaskSource::kAttributeBranch;
  m.config.decomposition = parse_decomposition_config(a.config);
  m.config.nurse.lambda = a.lambda;
  m.config.nurse.step_size = a.alpha;
  m.config.nurse.inner_steps = a.nurse_steps;
  m.config.nurse.active_steps = a.nurse_window;
  m.config.nurse.target = a.nurse_target == "first" ? NurseTarget::kFirstBranch : NurseTarget::kAttributeBranches;
  m.config.share_self_attention = !a.no_share;
  m.config.apply_alm = !a.no_alm;
  m.trace = a.trace;
  m.version = std::string(kVersion);
  return m;
}

io::RunManifest load_manifest(const fs::path& path) {
  const auto bytes = io::read_file(path);
  return io::RunManifest::from_json(std::string(bytes.begin(), bytes.end()));
}

struct Prepared {
  Denoiser model;
  PromptPlan plan;
};

Prepared prepare(const io::RunManifest& m) {
  m.dims.validate();
  m.config.validate();
  PromptPlan plan = decompose(parse_prompt(m.prompt), m.config.decomposition);
  return {Denoiser(init_params(m.model_seed, m.dims), m.config.steps), std::move(plan)};
}

std::string branch_name(std::size_t p) { return "b" + std::to_string(p); }

int do_generate(const GenerateArgs& a, bool seed_given, std::ostream& out) {
  io::RunManifest m = a.manifest.empty() ? manifest_from(a, seed_given) : load_manifest(a.manifest);
  PDIConfig cfg = m.config;
  cfg.parallel = a.parallel;
  const Prepared p = prepare(m);
  const RunResult r = run(p.model, p.plan, cfg, m.seed, m.trace);

  const fs::path dir = a.out;
  io::write_text(dir / "manifest.json", m.to_json());
  io::write_latent(dir / "final.dpl", r.output());
  io::write_file(dir / "final.ppm", io::encode_ppm(r.output()));
  for (std::size_t b = 0; b < r.finals.size(); ++b) {
    io::write_latent(dir / "branches" / (branch_name(r.first_index + b) + ".dpl"), r.finals[b]);
  }
  io::write_text(dir / "nurse.csv", io::format_nurse_csv(r.nurse_log));
  io::write_text(dir / "plan.tsv", format_plan(p.plan));
  if (m.trace) {
    for (std::size_t k = 0; k < r.trace.size(); ++k) {
      const std::size_t t = cfg.steps - k;
      for (std::size_t b = 0; b < r.trace[k].size(); ++b) {
        io::write_latent(dir / "trace" / (branch_name(r.first_index + b) + "_t" + std::to_string(t) + ".dpl"),
                         r.trace[k][b]);
      }
    }
  }
  out << "wrote " << dir.string() << ": " << r.finals.size() << " branches, " << cfg.steps
      << " steps, output b" << p.plan.last_index() << "\n";
  return 0;
}

int do_nurse_check(std::uint64_t seed, std::size_t side, std::ostream& out) {
  ModelDims dims;
  dims.height = dims.width = side;
  const GradientCheck g = run_gradient_check(seed, dims);
  out << "max relative error " << std::setprecision(6) << g.max_relative_error << " over "
      << g.coordinates << " coordinates\n";
  if (g.max_relative_error > 1e-4) throw NumericInputError("gradient check exceeds 1e-4");
  return 0;
}

std::map<std::size_t, fs::path> indexed_images(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  std::map<std::size_t, fs::path> images;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.path().extension() != ".ppm") continue;
    const std::string stem = entry.path().stem().string();
    std::size_t idx = 0;
    const auto [ptr, ec] = std::from_chars(stem.data(), stem.data() + stem.size(), idx);
    if (ec != std::errc() || ptr != stem.data() + stem.size()) continue;
    images[idx] = entry.path();
  }
  return images;
}

int do_eval_scb(const fs::path& images_dir, const fs::path& boxes_file, const fs::path& out_csv,
                std::uint64_t corpus_seed, std::ostream& out) {
  const auto corpus = build_benchmark(corpus_seed);
  const auto box_bytes = io::read_file(boxes_file);
  const auto boxes = parse_boxes(std::string(box_bytes.begin(), box_bytes.end()));
  const auto images = indexed_images(images_dir);
  if (images.empty()) throw IoError("no <index>.ppm images in " + images_dir.string());

  const ToyStyleEmbedder embedder;
  std::ostringstream csv;
  csv << "prompt_index,component,score\n" << std::setprecision(10);
  std::vector<double> averages;
  std::size_t missing = 0;
  for (const auto& [idx, path] : images) {
    if (idx >= corpus.size()) throw IndexError("image index " + std::to_string(idx) + " beyond the corpus");
    const ImageReport rep = score_image(io::decode_ppm(io::read_file(path)), corpus[idx], boxes, embedder);
    for (const auto& c : rep.components) {
      csv << idx << ',' << c.component << ',';
      if (c.score) csv << *c.score; else csv << "NA";
      csv << '\n';
    }
    csv << idx << ",AVG,";
    if (rep.average) {
      csv << *rep.average;
      averages.push_back(*rep.average);
    } else {
      csv << "NA";
    }
    csv << '\n';
    if (rep.missing) ++missing;
  }
  io::write_text(out_csv, csv.str());
  out << "scored " << images.size() << " images";
  if (!averages.empty()) out << ", mean " << std::setprecision(6) << average_scores(averages);
  if (missing) out << ", " << missing << " with missing components";
  out << "\n";
  return 0;
}

std::vector<double> layer_mean(const std::vector<RealMatrix>& maps, std::size_t col) {
  std::vector<double> v(maps.front().rows(), 0.0);
  for (const auto& m : maps) {
    for (std::size_t r = 0; r < m.rows(); ++r) v[r] += m(r, col);
  }
  for (double& x : v) x /= static_cast<double>(maps.size());
  return v;
}

int do_dump_attn(const fs::path& run_dir, std::size_t branch, std::size_t step, std::ostream& out) {
  const io::RunManifest m = load_manifest(run_dir / "manifest.json");
  const Prepared p = prepare(m);
  if (branch < p.plan.first_index() || branch > p.plan.last_index()) {
    throw IndexError("branch " + std::to_string(branch) + " outside [" +
                     std::to_string(p.plan.first_index()) + ", " + std::to_string(p.plan.last_index()) + "]");
  }
  if (step < 1 || step > m.config.steps) {
    throw IndexError("step " + std::to_string(step) + " outside [1, " + std::to_string(m.config.steps) + "]");
  }
  std::optional<CapturedAttention> captured;
  std::vector<std::pair<std::size_t, BinaryMask>> masks;
  RunHooks hooks;
  hooks.on_attention = [&](std::size_t t, std::size_t b, const CapturedAttention& c) {
    if (t == step && b == branch) captured = c;
  };
  hooks.on_mask = [&](std::size_t t, std::size_t i, BinaryMask& mask) {
    if (t == step) masks.emplace_back(i, mask);
  };
  run(p.model, p.plan, m.config, m.seed, false, hooks);

  const fs::path dir = run_dir / "attn";
  const std::string stem = branch_name(branch) + "_t" + std::to_string(step);
  const std::size_t H = m.dims.height, W = m.dims.width, HW = H * W;
  std::vector<double> self(HW * HW, 0.0);
  for (const auto& layer : captured->self_maps) {
    for (std::size_t i = 0; i < self.size(); ++i) self[i] += layer.values()[i];
  }
  io::write_file(dir / (stem + "_self.pgm"), io::encode_pgm(HW, HW, self));
  const auto tokens = tokenize(p.plan.prompt(branch));
  std::size_t files = 1;
  for (std::size_t j = 0; j < tokens.size(); ++j) {
    io::write_file(dir / (stem + "_tok" + std::to_string(j) + "_" + tokens[j] + ".pgm"),
                   io::encode_pgm(H, W, layer_mean(captured->cross_maps, j)));
    ++files;
  }
  for (const auto& [i, mask] : masks) {
    io::write_file(dir / ("mask_q" + std::to_string(i) + "_t" + std::to_string(step) + ".pgm"),
                   io::encode_mask_pgm(mask));
    ++files;
  }
  out << "wrote " << files << " maps to " << dir.string() << "\n";
  return 0;
}

}  // namespace

int run(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Progressive detail injection on a toy diffusion model", "detailpp"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  std::string prompt, config = "B";
  auto* decompose_cmd = app.add_subcommand("decompose", "Print the sub-prompt plan of a prompt");
  decompose_cmd->add_option("--prompt", prompt, "Prompt text")->required();
  decompose_cmd->add_option("--config", config, "A, B, C, D or accum")
      ->check(CLI::IsMember({"A", "B", "C", "D", "accum"}))->capture_default_str();

  GenerateArgs g;
  auto* gen = app.add_subcommand("generate", "Run the full pipeline and write an output tree");
  auto* prompt_opt = gen->add_option("--prompt", g.prompt, "Prompt text");
  auto* seed_opt = gen->add_option("--seed", g.seed, "Latent seed (default: DPP_SEED or 0)");
  std::vector<CLI::Option*> pipeline = {
      prompt_opt,
      seed_opt,
      gen->add_option("--model-seed", g.model_seed, "Seed of the toy model weights")->capture_default_str(),
      gen->add_option("--steps", g.steps, "Denoising steps T")->capture_default_str(),
      gen->add_option("--share-frac", g.share_frac, "Fraction of steps with shared layout")->capture_default_str(),
      gen->add_option("--tau", g.tau, "Mask threshold")->capture_default_str(),
      gen->add_option("--lambda", g.lambda, "Entropy weight")->capture_default_str(),
      gen->add_option("--alpha", g.alpha, "Nursing step size")->capture_default_str(),
      gen->add_option("--nurse-steps", g.nurse_steps, "Gradient steps per nursed timestep (0 disables)")
          ->capture_default_str(),
      gen->add_option("--nurse-window", g.nurse_window, "Number of leading timesteps that are nursed")
          ->capture_default_str(),
      gen->add_option("--nurse-target", g.nurse_target, "attr or first")
          ->check(CLI::IsMember({"attr", "first"}))->capture_default_str(),
      gen->add_option("--mask-source", g.mask_source, "branch or first")
          ->check(CLI::IsMember({"branch", "first"}))->capture_default_str(),
      gen->add_option("--config", g.config, "Decomposition config")
          ->check(CLI::IsMember({"A", "B", "C", "D", "accum"}))->capture_default_str(),
      gen->add_option("--height", g.height, "Latent height")->capture_default_str(),
      gen->add_option("--width", g.width, "Latent width")->capture_default_str(),
      gen->add_option("--layers", g.layers, "Attention blocks")->capture_default_str(),
      gen->add_flag("--no-share", g.no_share, "Disable self-attention sharing"),
      gen->add_flag("--no-alm", g.no_alm, "Disable latent modification"),
      gen->add_flag("--trace", g.trace, "Dump every branch latent at every step"),
  };
  auto* manifest_opt = gen->add_option("--manifest", g.manifest, "Rerun from a manifest.json")
                           ->check(CLI::ExistingFile);
  for (auto* o : pipeline) manifest_opt->excludes(o);
  gen->add_flag("--parallel", g.parallel, "Run branch forwards concurrently");
  gen->add_option("--out", g.out, "Output directory")->required();
  gen->callback([&] {
    if (g.manifest.empty() && g.prompt.empty()) throw CLI::RequiredError("--prompt or --manifest");
  });

  std::uint64_t check_seed = 0;
  std::size_t check_side = 8;
  auto* check = app.add_subcommand("nurse-check", "Compare the nursing gradient with finite differences");
  check->add_option("--seed", check_seed, "Seed")->capture_default_str();
  check->add_option("--size", check_side, "Latent side length")->capture_default_str();

  std::string images, boxes, csv_out;
  std::uint64_t corpus_seed = 0;
  auto* eval = app.add_subcommand("eval-scb", "Score <index>.ppm images against the benchmark corpus");
  eval->add_option("--images", images, "Directory of <prompt index>.ppm files")->required();
  eval->add_option("--boxes", boxes, "Component boxes (component, x, y, w, h; tab separated)")
      ->required()->check(CLI::ExistingFile);
  eval->add_option("--out", csv_out, "CSV output")->required();
  eval->add_option("--corpus-seed", corpus_seed, "Benchmark shuffle seed")->capture_default_str();

  std::string run_dir;
  std::size_t dump_branch = 0, dump_step = 0;
  auto* dump = app.add_subcommand("dump-attn", "Write attention maps of one branch and step as PGM");
  dump->add_option("--run", run_dir, "Directory written by generate")->required();
  dump->add_option("--branch", dump_branch, "Branch p-index")->required();
  dump->add_option("--step", dump_step, "Timestep t")->required();

  auto* corpus_cmd = app.add_subcommand("scb-corpus", "Print the benchmark prompts");
  corpus_cmd->add_option("--seed", corpus_seed, "Shuffle seed")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "detailpp: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (*decompose_cmd) {
      out << format_plan(decompose(parse_prompt(prompt), parse_decomposition_config(config)));
      return 0;
    }
    if (*gen) return do_generate(g, seed_opt->count() > 0, out);
    if (*check) return do_nurse_check(check_seed, check_side, out);
    if (*eval) return do_eval_scb(images, boxes, csv_out, corpus_seed, out);
    if (*dump) return do_dump_attn(run_dir, dump_branch, dump_step, out);
    if (*corpus_cmd) {
      const auto corpus = build_benchmark(corpus_seed);
      out << format_corpus(corpus);
      return 0;
    }
  } catch (const UsageError& e) {
    err << "detailpp: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    err << "detailpp: " << e.what() << "\n";
    return e.category() == ErrorCategory::kParse ? kExitParse : kExitNumeric;
  } catch (const fs::filesystem_error& e) {
    err << "detailpp: " << e.what() << "\n";
    return kExitNumeric;
  }
  return kExitUsage;
}

}  // namespace detailpp::cli
