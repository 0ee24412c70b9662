#include "detailpp/scb.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>

#include "detailpp/errors.hpp"
#include "detailpp/numerics.hpp"

namespace detailpp {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

struct Rgb {
  double r, g, b;
};

void put(LatentGrid& img, std::size_t y, std::size_t x, Rgb c) {
  img.at(y, x, 0) = c.r;
  img.at(y, x, 1) = c.g;
  img.at(y, x, 2) = c.b;
}

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

Rgb jitter(Rgb c, SeededStream& rng, double amount) {
  auto j = [&](double v) { return clamp01(v + amount * (rng.next_unit() - 0.5)); };
  return {j(c.r), j(c.g), j(c.b)};
}

std::size_t pick(SeededStream& rng, std::size_t n) {
  return static_cast<std::size_t>(rng.next_u64() % n);
}

// Canonical style key: lowercase, trailing " style" removed.
std::string style_key(std::string_view descriptor) {
  std::string key = lower(descriptor);
  while (!key.empty() && std::isspace(static_cast<unsigned char>(key.back()))) key.pop_back();
  constexpr std::string_view suffix = " style";
  if (key.size() > suffix.size() && key.ends_with(suffix)) key.erase(key.size() - suffix.size());
  while (!key.empty() && std::isspace(static_cast<unsigned char>(key.front()))) key.erase(0, 1);
  return key;
}

void draw_lego(LatentGrid& img, SeededStream& rng) {
  const Rgb palette[] = {{0.9, 0.1, 0.1}, {0.95, 0.85, 0.1}, {0.1, 0.2, 0.85}, {0.1, 0.6, 0.2}};
  constexpr std::size_t brick = 4;
  for (std::size_t by = 0; by < img.height(); by += brick) {
    for (std::size_t bx = 0; bx < img.width(); bx += brick) {
      const Rgb c = palette[pick(rng, 4)];
      for (std::size_t y = by; y < std::min(by + brick, img.height()); ++y) {
        for (std::size_t x = bx; x < std::min(bx + brick, img.width()); ++x) {
          const bool stud = (y - by == 1 || y - by == 2) && (x - bx == 1 || x - bx == 2);
          put(img, y, x, stud ? Rgb{clamp01(c.r + 0.05), clamp01(c.g + 0.05), clamp01(c.b + 0.05)} : c);
        }
      }
    }
  }
}

void draw_oil(LatentGrid& img, SeededStream& rng) {
  const double phase = rng.next_unit() * 6.0;
  for (std::size_t y = 0; y < img.height(); ++y) {
    for (std::size_t x = 0; x < img.width(); ++x) {
      const double u = 0.5 + 0.5 * std::sin(0.25 * static_cast<double>(x) + phase) *
                                 std::cos(0.2 * static_cast<double>(y));
      const Rgb base{0.62 - 0.2 * u, 0.45 - 0.05 * u, 0.2 + 0.05 * u};
      put(img, y, x, jitter(base, rng, 0.06));
    }
  }
}

void draw_cyberpunk(LatentGrid& img, SeededStream& rng) {
  const Rgb night{0.05, 0.04, 0.15};
  const Rgb magenta{0.95, 0.1, 0.8};
  const Rgb cyan{0.1, 0.9, 0.95};
  for (std::size_t y = 0; y < img.height(); ++y) {
    const bool neon_row = y % 5 == 2;
    const Rgb neon = (y / 5) % 2 == 0 ? magenta : cyan;
    for (std::size_t x = 0; x < img.width(); ++x) {
      const bool neon_col = x % 7 == 3;
      put(img, y, x, neon_row || neon_col ? neon : jitter(night, rng, 0.04));
    }
  }
}

void draw_sketch(LatentGrid& img, SeededStream& rng) {
  const Rgb paper{0.93, 0.93, 0.9};
  const Rgb graphite{0.3, 0.3, 0.32};
  for (std::size_t y = 0; y < img.height(); ++y) {
    for (std::size_t x = 0; x < img.width(); ++x) {
      const bool hatch = (x + y) % 4 == 0 || (rng.next_unit() < 0.05);
      put(img, y, x, hatch ? jitter(graphite, rng, 0.05) : jitter(paper, rng, 0.03));
    }
  }
}

void draw_pixel_art(LatentGrid& img, SeededStream& rng) {
  const Rgb palette[] = {{0.2, 0.6, 0.2}, {0.4, 0.6, 0.95}, {0.55, 0.3, 0.1}, {0.95, 0.95, 0.3}};
  constexpr std::size_t block = 2;
  for (std::size_t by = 0; by < img.height(); by += block) {
    for (std::size_t bx = 0; bx < img.width(); bx += block) {
      const Rgb c = palette[pick(rng, 4)];
      for (std::size_t y = by; y < std::min(by + block, img.height()); ++y) {
        for (std::size_t x = bx; x < std::min(bx + block, img.width()); ++x) put(img, y, x, c);
      }
    }
  }
}

void draw_watercolor(LatentGrid& img, SeededStream& rng) {
  const Rgb washes[] = {{0.82, 0.7, 0.88}, {0.7, 0.86, 0.82}, {0.92, 0.82, 0.7}};
  const double phase = rng.next_unit() * 6.0;
  for (std::size_t y = 0; y < img.height(); ++y) {
    for (std::size_t x = 0; x < img.width(); ++x) {
      const double u = 0.5 + 0.5 * std::sin(0.12 * static_cast<double>(x + y) + phase);
      const Rgb& a = washes[(x / 12 + y / 12) % 3];
      const Rgb& b = washes[(x / 12 + y / 12 + 1) % 3];
      put(img, y, x,
          jitter({a.r * u + b.r * (1 - u), a.g * u + b.g * (1 - u), a.b * u + b.b * (1 - u)}, rng,
                 0.02));
    }
  }
}

void draw_graffiti(LatentGrid& img, SeededStream& rng) {
  const Rgb palette[] = {{1.0, 0.5, 0.0}, {0.1, 0.9, 0.2}, {0.6, 0.1, 0.9}, {0.05, 0.05, 0.05}};
  // Wall first, then thick random strokes.
  for (std::size_t y = 0; y < img.height(); ++y) {
    for (std::size_t x = 0; x < img.width(); ++x) put(img, y, x, jitter({0.55, 0.55, 0.55}, rng, 0.1));
  }
  const std::size_t strokes = img.height() * img.width() / 24 + 1;
  for (std::size_t s = 0; s < strokes; ++s) {
    const Rgb c = palette[pick(rng, 4)];
    std::size_t y = pick(rng, img.height());
    std::size_t x = pick(rng, img.width());
    for (std::size_t len = 0; len < 8; ++len) {
      put(img, y, x, c);
      if (x + 1 < img.width()) put(img, y, x + 1, c);
      if (rng.next_unit() < 0.5) {
        x = std::min(x + 1, img.width() - 1);
      } else {
        y = std::min(y + 1, img.height() - 1);
      }
    }
  }
}

}  // namespace

std::string SCBPrompt::text() const {
  return "A " + lower(subject_style) + " style " + lower(subject) + " in a " +
         lower(background_style) + " style " + lower(background);
}

std::vector<SCBPrompt> build_benchmark(std::uint64_t seed) {
  std::vector<SCBPrompt> all;
  for (auto ss : kScbStyles) {
    for (auto subject : kScbSubjects) {
      for (auto bs : kScbStyles) {
        if (ss == bs) continue;
        for (auto background : kScbBackgrounds) {
          all.push_back({std::string(ss), std::string(subject), std::string(bs),
                         std::string(background)});
        }
      }
    }
  }
  SeededStream rng(seed);
  for (std::size_t i = all.size() - 1; i > 0; --i) {
    const auto j = static_cast<std::size_t>(rng.next_u64() % (i + 1));
    std::swap(all[i], all[j]);
  }
  all.resize(kScbPromptCount);
  return all;
}

std::string format_corpus(std::span<const SCBPrompt> corpus) {
  std::string out;
  for (const auto& p : corpus) {
    out += p.text();
    out += '\n';
  }
  return out;
}

std::vector<ComponentBox> parse_boxes(std::string_view text) {
  std::vector<ComponentBox> boxes;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    for (;;) {
      const auto tab = line.find('\t', start);
      fields.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (fields.size() != 5 || fields[0].empty()) {
      throw BoxError("box line " + std::to_string(line_no) + ": expected 5 tab-separated fields");
    }
    ComponentBox box;
    box.component = fields[0];
    std::size_t* targets[] = {&box.x, &box.y, &box.w, &box.h};
    for (int f = 0; f < 4; ++f) {
      const std::string& s = fields[f + 1];
      if (s.empty() || !std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c); })) {
        throw BoxError("box line " + std::to_string(line_no) + ": '" + s + "' is not a pixel count");
      }
      *targets[f] = std::stoul(s);
    }
    boxes.push_back(std::move(box));
  }
  return boxes;
}

std::vector<double> ToyStyleEmbedder::embed(const LatentGrid& crop) const {
  if (crop.channels() != 3 || crop.positions() == 0) {
    throw ShapeError("embed: expected a non-empty RGB crop");
  }
  std::vector<double> v(kDimension, 0.0);
  auto bin = [](double c) { return std::min<std::size_t>(3, static_cast<std::size_t>(clamp01(c) * 4.0)); };
  for (std::size_t y = 0; y < crop.height(); ++y) {
    for (std::size_t x = 0; x < crop.width(); ++x) {
      const std::size_t idx =
          bin(crop.at(y, x, 0)) * 16 + bin(crop.at(y, x, 1)) * 4 + bin(crop.at(y, x, 2));
      v[idx] += 1.0;
    }
  }
  for (std::size_t i = 0; i < 64; ++i) v[i] /= static_cast<double>(crop.positions());

  auto luma = [&](std::size_t y, std::size_t x) {
    return 0.299 * clamp01(crop.at(y, x, 0)) + 0.587 * clamp01(crop.at(y, x, 1)) +
           0.114 * clamp01(crop.at(y, x, 2));
  };
  constexpr double kEdge = 0.15;
  std::size_t horizontal = 0, vertical = 0, h_pairs = 0, v_pairs = 0;
  for (std::size_t y = 0; y < crop.height(); ++y) {
    for (std::size_t x = 0; x < crop.width(); ++x) {
      if (x + 1 < crop.width()) {
        ++h_pairs;
        if (std::abs(luma(y, x + 1) - luma(y, x)) > kEdge) ++horizontal;
      }
      if (y + 1 < crop.height()) {
        ++v_pairs;
        if (std::abs(luma(y + 1, x) - luma(y, x)) > kEdge) ++vertical;
      }
    }
  }
  v[64] = h_pairs ? static_cast<double>(horizontal) / static_cast<double>(h_pairs) : 0.0;
  v[65] = v_pairs ? static_cast<double>(vertical) / static_cast<double>(v_pairs) : 0.0;

  double norm = 0.0;
  for (double x : v) norm += x * x;
  norm = std::sqrt(norm);
  for (double& x : v) x /= norm;
  return v;
}

std::vector<double> ToyStyleEmbedder::embed_text(std::string_view descriptor) const {
  return embed(exemplar(style_key(descriptor)));
}

LatentGrid ToyStyleEmbedder::exemplar(std::string_view style, std::size_t height,
                                      std::size_t width) {
  const std::string key = style_key(style);
  LatentGrid img(height, width, 3);
  SeededStream rng(fnv1a64(key));
  if (key == "lego") {
    draw_lego(img, rng);
  } else if (key == "oil-painting") {
    draw_oil(img, rng);
  } else if (key == "cyberpunk") {
    draw_cyberpunk(img, rng);
  } else if (key == "sketch") {
    draw_sketch(img, rng);
  } else if (key == "pixel-art") {
    draw_pixel_art(img, rng);
  } else if (key == "watercolor") {
    draw_watercolor(img, rng);
  } else if (key == "graffiti") {
    draw_graffiti(img, rng);
  } else {
    throw ConfigError("unknown style descriptor '" + std::string(style) + "'");
  }
  return img;
}

LatentGrid crop(const LatentGrid& image, const ComponentBox& box) {
  if (box.w == 0 || box.h == 0) throw BoxError("box '" + box.component + "' has zero area");
  if (box.x + box.w > image.width() || box.y + box.h > image.height()) {
    throw BoxError("box '" + box.component + "' leaves the " + std::to_string(image.width()) +
                   "x" + std::to_string(image.height()) + " image");
  }
  LatentGrid out(box.h, box.w, image.channels());
  for (std::size_t y = 0; y < box.h; ++y) {
    for (std::size_t x = 0; x < box.w; ++x) {
      for (std::size_t c = 0; c < image.channels(); ++c) out.at(y, x, c) = image.at(box.y + y, box.x + x, c);
    }
  }
  return out;
}

double component_score(const LatentGrid& image, const ComponentBox& box,
                       std::string_view descriptor, const StyleEmbedder& embedder) {
  const auto a = embedder.embed(crop(image, box));
  const auto b = embedder.embed_text(descriptor);
  if (a.size() != b.size()) throw ShapeError("component_score: embedding sizes differ");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(dot / std::sqrt(na * nb), -1.0, 1.0);
}

double average_scores(std::span<const double> scores) {
  if (scores.empty()) throw BoxError("no component scores to average");
  double sum = 0.0;
  for (double s : scores) sum += s;
  return sum / static_cast<double>(scores.size());
}

std::optional<std::string> component_descriptor(const SCBPrompt& prompt,
                                                std::string_view component) {
  const std::string c = lower(component);
  if (c == "subject" || c == lower(prompt.subject)) return lower(prompt.subject_style) + " style";
  if (c == "background" || c == lower(prompt.background)) {
    return lower(prompt.background_style) + " style";
  }
  return std::nullopt;
}

namespace {

const ComponentBox* find_box(std::span<const ComponentBox> boxes, const SCBPrompt& prompt,
                             bool subject) {
  const std::string role = subject ? "subject" : "background";
  const std::string word = lower(subject ? prompt.subject : prompt.background);
  for (const auto& b : boxes) {
    const std::string c = lower(b.component);
    if (c == role || c == word) return &b;
  }
  return nullptr;
}

}  // namespace

double image_score(const LatentGrid& image, const SCBPrompt& prompt,
                   std::span<const ComponentBox> boxes, const StyleEmbedder& embedder) {
  std::vector<double> scores;
  for (bool subject : {true, false}) {
    const ComponentBox* box = find_box(boxes, prompt, subject);
    if (box == nullptr) {
      throw BoxError("no box for " + lower(subject ? prompt.subject : prompt.background));
    }
    const std::string style = subject ? prompt.subject_style : prompt.background_style;
    scores.push_back(component_score(image, *box, lower(style) + " style", embedder));
  }
  return average_scores(scores);
}

ImageReport score_image(const LatentGrid& image, const SCBPrompt& prompt,
                        std::span<const ComponentBox> boxes, const StyleEmbedder& embedder) {
  ImageReport report;
  std::vector<double> scores;
  for (bool subject : {true, false}) {
    ComponentResult r;
    r.component = lower(subject ? prompt.subject : prompt.background);
    if (const ComponentBox* box = find_box(boxes, prompt, subject)) {
      const std::string style = subject ? prompt.subject_style : prompt.background_style;
      r.score = component_score(image, *box, lower(style) + " style", embedder);
      scores.push_back(*r.score);
    } else {
      report.missing = true;
    }
    report.components.push_back(std::move(r));
  }
  if (!scores.empty()) report.average = average_scores(scores);
  return report;
}

}  // namespace detailpp
