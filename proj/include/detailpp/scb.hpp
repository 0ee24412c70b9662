#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "detailpp/latent.hpp"

namespace detailpp {

// Style Composition Benchmark word pools.
inline constexpr std::array<std::string_view, 7> kScbStyles = {
    "Lego", "Oil-painting", "Cyberpunk", "Sketch", "Pixel-Art", "Watercolor", "Graffiti"};
inline constexpr std::array<std::string_view, 5> kScbSubjects = {"Dog", "Cat", "Robot", "Car",
                                                                 "Unicorn"};
inline constexpr std::array<std::string_view, 5> kScbBackgrounds = {"forest", "Space", "Desert",
                                                                    "City", "Ruins"};
inline constexpr std::size_t kScbPromptCount = 300;

struct SCBPrompt {
  std::string subject_style;
  std::string subject;
  std::string background_style;
  std::string background;

  // "A <style> style <subject> in a <style> style <background>", lowercased
  // after the leading "A".
  std::string text() const;
  friend bool operator==(const SCBPrompt&, const SCBPrompt&) = default;
};

// Seeded Fisher-Yates shuffle of all 1050 tuples with distinct styles; the
// first 300 form the corpus.
std::vector<SCBPrompt> build_benchmark(std::uint64_t seed);

// One rendered prompt per line.
std::string format_corpus(std::span<const SCBPrompt> corpus);

struct ComponentBox {
  std::string component;
  std::size_t x = 0;
  std::size_t y = 0;
  std::size_t w = 0;
  std::size_t h = 0;
};

// Lines "component<TAB>x<TAB>y<TAB>w<TAB>h"; blank lines and '#' comments are
// skipped. Throws BoxError on malformed lines.
std::vector<ComponentBox> parse_boxes(std::string_view text);

// Maps an image region to a style signature and a style descriptor to the
// same space. Implementations must be deterministic.
class StyleEmbedder {
 public:
  virtual ~StyleEmbedder() = default;
  virtual std::vector<double> embed(const LatentGrid& crop) const = 0;
  virtual std::vector<double> embed_text(std::string_view descriptor) const = 0;
};

// 4x4x4 RGB histogram plus horizontal/vertical edge density, L2-normalized.
// Descriptors ("sketch style", "Sketch") resolve to a procedurally drawn
// exemplar patch of that style, embedded the same way as an image crop.
class ToyStyleEmbedder final : public StyleEmbedder {
 public:
  static constexpr std::size_t kExemplarSize = 32;
  static constexpr std::size_t kDimension = 66;

  std::vector<double> embed(const LatentGrid& crop) const override;
  // Throws ConfigError for a descriptor naming no known style.
  std::vector<double> embed_text(std::string_view descriptor) const override;

  // Deterministic height x width RGB patch drawn in the given style.
  static LatentGrid exemplar(std::string_view style, std::size_t height = kExemplarSize,
                             std::size_t width = kExemplarSize);
};

// Throws BoxError for zero area or a box leaving the image.
LatentGrid crop(const LatentGrid& image, const ComponentBox& box);

// Cosine similarity between the crop's embedding and the descriptor's.
double component_score(const LatentGrid& image, const ComponentBox& box,
                       std::string_view descriptor, const StyleEmbedder& embedder);

// Arithmetic mean. Throws BoxError when empty.
double average_scores(std::span<const double> scores);

// Descriptor expected for a component of the prompt ("<style> style"), or
// nullopt when the component is neither its subject nor its background.
// "subject" and "background" are accepted as role names.
std::optional<std::string> component_descriptor(const SCBPrompt& prompt,
                                                std::string_view component);

// Mean component score over subject and background. Throws BoxError when a
// box is missing or invalid.
double image_score(const LatentGrid& image, const SCBPrompt& prompt,
                   std::span<const ComponentBox> boxes, const StyleEmbedder& embedder);

struct ComponentResult {
  std::string component;
  std::optional<double> score;  // nullopt: no box for this component
};

struct ImageReport {
  std::vector<ComponentResult> components;
  std::optional<double> average;  // over scored components only
  bool missing = false;
};

// Lenient variant for batch evaluation: a missing component is reported and
// left out of the average instead of failing the image.
ImageReport score_image(const LatentGrid& image, const SCBPrompt& prompt,
                        std::span<const ComponentBox> boxes, const StyleEmbedder& embedder);

}  // namespace detailpp
