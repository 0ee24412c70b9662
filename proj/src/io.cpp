#include "detailpp/io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "detailpp/errors.hpp"
#include "detailpp/version.hpp"

namespace detailpp::io {

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(const std::vector<std::uint8_t>& in, std::size_t offset) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in[offset + i]) << (8 * i);
  return v;
}

void append_header(std::vector<std::uint8_t>& out, const std::string& header) {
  out.insert(out.end(), header.begin(), header.end());
}

std::uint8_t to_byte(double unit) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(unit, 0.0, 1.0) * 255.0));
}

// Reads the next whitespace-delimited header field of a PNM file, skipping
// comments.
std::string next_field(const std::vector<std::uint8_t>& in, std::size_t& pos) {
  for (;;) {
    while (pos < in.size() && std::isspace(in[pos])) ++pos;
    if (pos < in.size() && in[pos] == '#') {
      while (pos < in.size() && in[pos] != '\n') ++pos;
      continue;
    }
    break;
  }
  std::string field;
  while (pos < in.size() && !std::isspace(in[pos])) field += static_cast<char>(in[pos++]);
  return field;
}

}  // namespace

std::vector<std::uint8_t> encode_latent(const LatentGrid& grid) {
  std::vector<std::uint8_t> out = {'D', 'P', 'P', '1'};
  out.reserve(16 + 4 * grid.size());
  put_u32(out, static_cast<std::uint32_t>(grid.height()));
  put_u32(out, static_cast<std::uint32_t>(grid.width()));
  put_u32(out, static_cast<std::uint32_t>(grid.channels()));
  for (double v : grid.values()) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  return out;
}

LatentGrid decode_latent(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), "DPP1", 4) != 0) {
    throw IoError("latent dump: missing DPP1 header");
  }
  const std::size_t h = get_u32(bytes, 4), w = get_u32(bytes, 8), c = get_u32(bytes, 12);
  const std::size_t n = h * w * c;
  if (bytes.size() != 16 + 4 * n) throw IoError("latent dump: payload size mismatch");
  std::vector<double> values(n);
  for (std::size_t i = 0; i < n; ++i) {
    values[i] = static_cast<double>(std::bit_cast<float>(get_u32(bytes, 16 + 4 * i)));
  }
  return LatentGrid(h, w, c, std::move(values));
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  write_file(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

void write_latent(const std::filesystem::path& path, const LatentGrid& grid) {
  write_file(path, encode_latent(grid));
}

LatentGrid read_latent(const std::filesystem::path& path) { return decode_latent(read_file(path)); }

std::vector<std::uint8_t> encode_pgm(std::size_t height, std::size_t width,
                                     std::span<const double> values) {
  if (values.size() != height * width) throw ShapeError("pgm: value count mismatch");
  std::vector<std::uint8_t> out;
  append_header(out, "P5\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n");
  double lo = 0.0, hi = 0.0;
  if (!values.empty()) {
    const auto [a, b] = std::minmax_element(values.begin(), values.end());
    lo = *a;
    hi = *b;
  }
  const double range = hi - lo;
  for (double v : values) out.push_back(range > 0.0 ? to_byte((v - lo) / range) : 0);
  return out;
}

std::vector<std::uint8_t> encode_mask_pgm(const BinaryMask& mask) {
  std::vector<std::uint8_t> out;
  append_header(out, "P5\n" + std::to_string(mask.width) + " " + std::to_string(mask.height) +
                         "\n255\n");
  for (auto v : mask.values) out.push_back(v ? 255 : 0);
  return out;
}

std::vector<std::uint8_t> encode_ppm(const LatentGrid& rgb) {
  if (rgb.channels() != 3) throw ShapeError("ppm: expected 3 channels");
  std::vector<std::uint8_t> out;
  append_header(out, "P6\n" + std::to_string(rgb.width()) + " " + std::to_string(rgb.height()) +
                         "\n255\n");
  for (double v : rgb.values()) out.push_back(to_byte(v));
  return out;
}

LatentGrid decode_ppm(const std::vector<std::uint8_t>& bytes) {
  std::size_t pos = 0;
  if (next_field(bytes, pos) != "P6") throw IoError("ppm: expected P6 header");
  std::size_t w = 0, h = 0, maxval = 0;
  try {
    w = std::stoul(next_field(bytes, pos));
    h = std::stoul(next_field(bytes, pos));
    maxval = std::stoul(next_field(bytes, pos));
  } catch (const std::exception&) {
    throw IoError("ppm: malformed header");
  }
  if (maxval != 255) throw IoError("ppm: only maxval 255 is supported");
  ++pos;  // single whitespace before the raster
  if (bytes.size() < pos + w * h * 3) throw IoError("ppm: truncated raster");
  std::vector<double> values(w * h * 3);
  for (std::size_t i = 0; i < values.size(); ++i) values[i] = bytes[pos + i] / 255.0;
  return LatentGrid(h, w, 3, std::move(values));
}

std::string RunManifest::to_json() const {
  nlohmann::ordered_json j;
  j["version"] = version.empty() ? std::string(kVersion) : version;
  j["prompt"] = prompt;
  j["seed"] = seed;
  j["model_seed"] = model_seed;
  j["dims"] = {{"height", dims.height},         {"width", dims.width},
               {"channels", dims.channels},     {"model_width", dims.model_width},
               {"key_dim", dims.key_dim},       {"layers", dims.layers}};
  j["steps"] = config.steps;
  j["share_fraction"] = config.share_fraction;
  j["tau"] = config.tau;
  j["mask_source"] = config.mask_source == MaskSource::kFirstBranch ? "first" : "branch";
  j["decomposition"] = std::string(to_string(config.decomposition));
  j["share_self_attention"] = config.share_self_attention;
  j["apply_alm"] = config.apply_alm;
  j["nurse"] = {{"lambda", config.nurse.lambda},
                {"alpha", config.nurse.step_size},
                {"inner_steps", config.nurse.inner_steps},
                {"active_steps", config.nurse.active_steps},
                {"target", config.nurse.target == NurseTarget::kFirstBranch ? "first" : "attr"}};
  j["trace"] = trace;
  return j.dump(2) + "\n";
}

RunManifest RunManifest::from_json(const std::string& text) {
  RunManifest m;
  try {
    const auto j = nlohmann::json::parse(text);
    m.version = j.at("version").get<std::string>();
    m.prompt = j.at("prompt").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.model_seed = j.at("model_seed").get<std::uint64_t>();
    const auto& d = j.at("dims");
    m.dims.height = d.at("height").get<std::size_t>();
    m.dims.width = d.at("width").get<std::size_t>();
    m.dims.channels = d.at("channels").get<std::size_t>();
    m.dims.model_width = d.at("model_width").get<std::size_t>();
    m.dims.key_dim = d.at("key_dim").get<std::size_t>();
    m.dims.layers = d.at("layers").get<std::size_t>();
    m.config.steps = j.at("steps").get<std::size_t>();
    m.config.share_fraction = j.at("share_fraction").get<double>();
    m.config.tau = j.at("tau").get<double>();
    const auto source = j.at("mask_source").get<std::string>();
    if (source != "first" && source != "branch") throw ConfigError("mask_source: " + source);
    m.config.mask_source = source == "first" ? MaskSource::kFirstBranch : MaskSource::kAttributeBranch;
    m.config.decomposition = parse_decomposition_config(j.at("decomposition").get<std::string>());
    m.config.share_self_attention = j.at("share_self_attention").get<bool>();
    m.config.apply_alm = j.at("apply_alm").get<bool>();
    const auto& n = j.at("nurse");
    m.config.nurse.lambda = n.at("lambda").get<double>();
    m.config.nurse.step_size = n.at("alpha").get<double>();
    m.config.nurse.inner_steps = n.at("inner_steps").get<std::size_t>();
    m.config.nurse.active_steps = n.at("active_steps").get<std::size_t>();
    const auto target = n.at("target").get<std::string>();
    if (target != "first" && target != "attr") throw ConfigError("nurse target: " + target);
    m.config.nurse.target = target == "first" ? NurseTarget::kFirstBranch : NurseTarget::kAttributeBranches;
    m.trace = j.at("trace").get<bool>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("manifest: ") + e.what());
  }
  return m;
}

std::string format_nurse_csv(const std::vector<NurseRecord>& records) {
  std::ostringstream out;
  out << "t,branch,align,entropy,total\n";
  out << std::setprecision(17);
  for (const auto& r : records) {
    out << r.t << ',' << r.branch << ',' << r.report.align << ',' << r.report.entropy << ','
        << r.report.total << '\n';
  }
  return out.str();
}

}  // namespace detailpp::io
