#include <doctest.h>

#include <cmath>

#include "detailpp/denoiser.hpp"
#include "detailpp/errors.hpp"
#include "detailpp/prompt.hpp"

using namespace detailpp;

namespace {

void check_row_stochastic(const RealMatrix& m) {
  for (std::size_t r = 0; r < m.rows(); ++r) {
    double sum = 0.0;
    for (double v : m.row(r)) {
      REQUIRE(v >= 0.0);
      sum += v;
    }
    REQUIRE(std::abs(sum - 1.0) <= 1e-6);
  }
}

RealMatrix prompt_embeddings(const char* text, std::size_t d) {
  return embed_tokens(tokenize(text), d);
}

}  // namespace

TEST_CASE("init_params is deterministic and validated") {
  CHECK(init_params(7) == init_params(7));
  CHECK_FALSE(init_params(7) == init_params(8));
  ModelDims bad;
  bad.key_dim = 0;
  CHECK_THROWS_AS(init_params(1, bad), ConfigError);
  bad = {};
  bad.height = 65;
  CHECK_THROWS_AS(init_params(1, bad), ConfigError);
  bad = {};
  bad.model_width = 3;
  CHECK_THROWS_AS(init_params(1, bad), ConfigError);
}

TEST_CASE("schedule is strictly decreasing in (0, 1]") {
  const Schedule s(50);
  CHECK(s.alpha_bar(0) == 1.0);
  for (std::size_t t = 1; t <= 50; ++t) {
    CHECK(s.alpha_bar(t) < s.alpha_bar(t - 1));
    CHECK(s.alpha_bar(t) > 0.0);
  }
  CHECK(s.alpha_bar(1) == doctest::Approx(1.0 - Schedule::kBetaStart));
  CHECK_THROWS_AS(s.alpha_bar(51), IndexError);
  CHECK_THROWS_AS(Schedule(0), ConfigError);
  CHECK(Schedule(1).steps() == 1);
}

TEST_CASE("forward shapes and attention normalization") {
  const Denoiser model(init_params(1), 50);
  const LatentGrid z = sample_init(2);
  const RealMatrix emb = prompt_embeddings("a red teddy bear wearing a green tracksuit", 32);
  const ForwardResult r = model.forward(z, emb, 30);
  REQUIRE(r.captured.self_maps.size() == 1);
  CHECK(r.captured.self_maps[0].rows() == 256);
  CHECK(r.captured.self_maps[0].cols() == 256);
  CHECK(r.captured.cross_maps[0].rows() == 256);
  CHECK(r.captured.cross_maps[0].cols() == 8);
  CHECK(r.noise_pred.same_shape(z));
  check_row_stochastic(r.captured.self_maps[0]);
  check_row_stochastic(r.captured.cross_maps[0]);
}

TEST_CASE("forward is bit-deterministic") {
  const Denoiser model(init_params(1), 50);
  const LatentGrid z = sample_init(5);
  const RealMatrix emb = prompt_embeddings("a dog and a cat", 32);
  CHECK(model.forward(z, emb, 17).noise_pred == model.forward(z, emb, 17).noise_pred);
  const Denoiser twin(init_params(1), 50);
  CHECK(twin.forward(z, emb, 17).noise_pred == model.forward(z, emb, 17).noise_pred);
}

TEST_CASE("self-attention override is a true substitution point") {
  const Denoiser model(init_params(3), 50);
  const LatentGrid z = sample_init(4);
  const RealMatrix emb = prompt_embeddings("a red dog", 32);

  const std::vector<RealMatrix> identity = {RealMatrix::identity(256)};
  const ForwardResult with_id = model.forward(z, emb, 10, identity);
  CHECK(with_id.captured.self_maps[0] == identity[0]);

  const ForwardResult own = model.forward(z, emb, 10);
  const ForwardResult replayed = model.forward(z, emb, 10, own.captured.self_maps);
  CHECK(replayed.noise_pred == own.noise_pred);
  CHECK_FALSE(with_id.noise_pred == own.noise_pred);

  const std::vector<RealMatrix> wrong = {RealMatrix::identity(255)};
  CHECK_THROWS_AS(model.forward(z, emb, 10, wrong), ShapeError);
  const std::vector<RealMatrix> too_many = {identity[0], identity[0]};
  CHECK_THROWS_AS(model.forward(z, emb, 10, too_many), ShapeError);
}

TEST_CASE("forward validates timestep and latent shape") {
  const Denoiser model(init_params(3), 50);
  const RealMatrix emb = prompt_embeddings("a dog", 32);
  CHECK_THROWS_AS(model.forward(sample_init(1), emb, 0), IndexError);
  CHECK_THROWS_AS(model.forward(sample_init(1), emb, 51), IndexError);
  CHECK_THROWS_AS(model.forward(LatentGrid(8, 8, 3), emb, 5), ShapeError);
}

TEST_CASE("multi-layer models capture one map per layer") {
  ModelDims dims;
  dims.height = dims.width = 8;
  dims.layers = 3;
  const Denoiser model(init_params(9, dims), 20);
  const ForwardResult r = model.forward(sample_init(1, dims), prompt_embeddings("a dog", 32), 5);
  CHECK(r.captured.self_maps.size() == 3);
  CHECK(r.captured.cross_maps.size() == 3);
  for (const auto& m : r.captured.cross_maps) check_row_stochastic(m);
}

TEST_CASE("ddim_update closed forms") {
  CHECK(ddim_update(1.7, 0.0, 0.5, 0.8) == doctest::Approx(std::sqrt(0.8 / 0.5) * 1.7));
  CHECK(ddim_update(1.7, 0.0, 0.5, 0.5) == doctest::Approx(1.7).epsilon(1e-15));
  // Hand evaluation: x0 = (1 - sqrt(0.75)) / 0.5 = 2 - sqrt(3);
  // z_prev = 0.8 x0 + 0.6 = 2.2 - 0.8 sqrt(3).
  CHECK(std::abs(ddim_update(1.0, 1.0, 0.25, 0.64) - 0.8143593539448983) <= 1e-15);
}

TEST_CASE("ddim_step") {
  const Denoiser model(init_params(1), 10);
  const LatentGrid z = sample_init(3);
  const LatentGrid zero(16, 16, 3);
  const LatentGrid next = model.ddim_step(z, zero, 4);
  const double ratio = std::sqrt(model.schedule().alpha_bar(3) / model.schedule().alpha_bar(4));
  for (std::size_t i = 0; i < z.size(); ++i) CHECK(next[i] == doctest::Approx(ratio * z[i]));
  CHECK_THROWS_AS(model.ddim_step(z, zero, 0), IndexError);
  CHECK_THROWS_AS(model.ddim_step(z, zero, 11), IndexError);
}

TEST_CASE("sample_init") {
  const LatentGrid a = sample_init(77);
  CHECK(a.size() == 768);
  CHECK(a == sample_init(77));
  CHECK_FALSE(a == sample_init(78));
}

TEST_CASE("backward matches finite differences through both attention paths") {
  ModelDims dims;
  dims.height = dims.width = 4;
  dims.layers = 2;
  const Denoiser model(init_params(21, dims), 10);
  const LatentGrid z = sample_init(22, dims);
  const RealMatrix emb = prompt_embeddings("a red dog", 32);
  // Scalar loss: weighted sum of all cross-map entries.
  SeededStream rng(5);
  std::vector<RealMatrix> weights;
  for (int l = 0; l < 2; ++l) {
    auto v = seeded_gaussian(rng, 16 * 3);
    weights.emplace_back(16, 3, std::move(v));
  }
  auto loss = [&](const LatentGrid& x) {
    const auto cap = model.forward_attention(x, emb, 3, {}, nullptr);
    double s = 0.0;
    for (int l = 0; l < 2; ++l) {
      for (std::size_t i = 0; i < weights[l].size(); ++i) {
        s += weights[l].values()[i] * cap.cross_maps[l].values()[i];
      }
    }
    return s;
  };
  ForwardTrace trace;
  model.forward_attention(z, emb, 3, {}, &trace);
  const LatentGrid grad = model.backward_from_cross_maps(trace, weights);
  const double eps = 1e-5;
  LatentGrid probe = z;
  for (std::size_t i = 0; i < z.size(); ++i) {
    probe[i] = z[i] + eps;
    const double up = loss(probe);
    probe[i] = z[i] - eps;
    const double down = loss(probe);
    probe[i] = z[i];
    CHECK(grad[i] == doctest::Approx((up - down) / (2 * eps)).epsilon(1e-5));
  }
}
