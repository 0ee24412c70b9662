#include <doctest.h>

#include <cmath>

#include "detailpp/errors.hpp"
#include "detailpp/numerics.hpp"

using namespace detailpp;

namespace {

RealMatrix random_matrix(SeededStream& rng, std::size_t rows, std::size_t cols, double scale) {
  auto v = seeded_gaussian(rng, rows * cols);
  for (double& x : v) x *= scale;
  return RealMatrix(rows, cols, std::move(v));
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return dot / std::sqrt(na * nb);
}

}  // namespace

TEST_CASE("softmax_rows closed forms") {
  auto half = softmax_rows(RealMatrix(1, 2, {0.0, 0.0}));
  CHECK(half(0, 0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(half(0, 1) == doctest::Approx(0.5).epsilon(1e-15));

  auto thirds = softmax_rows(RealMatrix(1, 2, {std::log(2.0), 0.0}));
  CHECK(thirds(0, 0) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(thirds(0, 1) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));

  CHECK(softmax_rows(RealMatrix(1, 1, {7.3}))(0, 0) == 1.0);
}

TEST_CASE("softmax_rows survives huge logits") {
  auto m = softmax_rows(RealMatrix(1, 3, {1e300, 1e300, -1e300}));
  CHECK(m(0, 0) == doctest::Approx(0.5));
  CHECK(m(0, 2) == 0.0);
}

TEST_CASE("softmax_rows rejects non-finite input") {
  CHECK_THROWS_AS(softmax_rows(RealMatrix(1, 2, {NAN, 0.0})), NumericInputError);
  CHECK_THROWS_AS(softmax_rows(RealMatrix(1, 2, {INFINITY, 0.0})), NumericInputError);
}

TEST_CASE("softmax_rows rows are stochastic on random matrices") {
  SeededStream rng(11);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t rows = 1 + rng.next_u64() % 64;
    const std::size_t cols = 1 + rng.next_u64() % 64;
    const RealMatrix p = softmax_rows(random_matrix(rng, rows, cols, 5.0));
    for (std::size_t r = 0; r < rows; ++r) {
      double sum = 0.0;
      for (double v : p.row(r)) {
        REQUIRE(v >= 0.0);
        sum += v;
      }
      REQUIRE(std::abs(sum - 1.0) <= 1e-6);
    }
  }
}

TEST_CASE("softmax_rows is shift invariant per row") {
  SeededStream rng(12);
  for (int trial = 0; trial < 200; ++trial) {
    RealMatrix m = random_matrix(rng, 8, 12, 3.0);
    RealMatrix shifted = m;
    for (std::size_t r = 0; r < m.rows(); ++r) {
      const double c = 10.0 * (rng.next_unit() - 0.5);
      for (double& v : shifted.row(r)) v += c;
    }
    const RealMatrix a = softmax_rows(m);
    const RealMatrix b = softmax_rows(shifted);
    for (std::size_t i = 0; i < a.size(); ++i) REQUIRE(std::abs(a.values()[i] - b.values()[i]) <= 1e-9);
  }
}

TEST_CASE("RealMatrix checks its value count") {
  CHECK_THROWS_AS(RealMatrix(2, 2, std::vector<double>{1.0, 2.0}), ShapeError);
}

TEST_CASE("seeded_gaussian is deterministic and prefix consistent") {
  SeededStream a(42), b(42);
  CHECK(seeded_gaussian(a, 100) == seeded_gaussian(b, 100));

  for (std::size_t k : {1u, 2u, 7u, 50u}) {
    SeededStream full(9), prefix(9);
    const auto n = seeded_gaussian(full, 101);
    const auto p = seeded_gaussian(prefix, k);
    CHECK(std::equal(p.begin(), p.end(), n.begin()));
  }
}

TEST_CASE("seeded_gaussian moments for seed 1") {
  SeededStream s(1);
  const auto v = seeded_gaussian(s, 100000);
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  var /= static_cast<double>(v.size() - 1);
  CHECK(std::abs(mean) <= 0.02);
  CHECK(std::abs(var - 1.0) <= 0.05);
}

TEST_CASE("different seeds give different leading values") {
  for (std::uint64_t seed = 0; seed < 64; ++seed) {
    SeededStream a(seed), b(seed + 1);
    const auto x = seeded_gaussian(a, 10);
    const auto y = seeded_gaussian(b, 10);
    for (std::size_t i = 0; i < 10; ++i) REQUIRE(x[i] != y[i]);
  }
}

TEST_CASE("stream position advances one step per draw") {
  SeededStream s(5);
  seeded_gaussian(s, 3);  // two Box-Muller pairs
  CHECK(s.position() == 4);
  SeededStream resumed(5, 4);
  CHECK(resumed.next_u64() == s.next_u64());
}

TEST_CASE("FNV-1a reference values") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(fnv1a64("foobar") == 0x85944171f73967e8ULL);
}

TEST_CASE("token_embedding") {
  CHECK(token_embedding("dog", 64) == token_embedding("dog", 64));
  for (const char* tok : {"dog", "cat", "a", "teddy", "oil-painting"}) {
    const auto v = token_embedding(tok, 64);
    double n = 0.0;
    for (double x : v) n += x * x;
    CHECK(std::abs(std::sqrt(n) - 1.0) <= 1e-6);
  }
  // Regression value for the fixed FNV-1a + SplitMix64 + Box-Muller scheme.
  const double c = cosine(token_embedding("dog", 64), token_embedding("cat", 64));
  CHECK(std::abs(c) < 0.5);
  CHECK(std::abs(c - (-0.0035657861567827088)) <= 1e-12);
  CHECK_THROWS_AS(token_embedding("", 64), ParseInputError);
  CHECK_THROWS_AS(token_embedding("dog", 1), ConfigError);
}
