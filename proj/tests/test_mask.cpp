#include <doctest.h>

#include "detailpp/errors.hpp"
#include "detailpp/mask.hpp"

using namespace detailpp;

namespace {

SubjectMap make_map(std::size_t h, std::size_t w, std::vector<double> v) {
  SubjectMap m;
  m.height = h;
  m.width = w;
  m.values = std::move(v);
  return m;
}

// Independent normalize-then-threshold oracle.
std::vector<unsigned char> oracle_mask(const std::vector<double>& v, double tau) {
  double lo = v[0], hi = v[0];
  for (double x : v) {
    lo = x < lo ? x : lo;
    hi = x > hi ? x : hi;
  }
  std::vector<unsigned char> out;
  for (double x : v) out.push_back((x - lo) / (hi - lo) > tau);
  return out;
}

}  // namespace

TEST_CASE("subject_map averages tokens and layers") {
  CapturedAttention cap;
  cap.cross_maps.push_back(RealMatrix(4, 3, {0.1, 0.2, 0.7,  //
                                             0.3, 0.3, 0.4,  //
                                             0.5, 0.1, 0.4,  //
                                             0.2, 0.2, 0.6}));
  const SubjectMap single = subject_map(cap, {1, 2}, 2, 2);
  CHECK(single.values == std::vector<double>{0.2, 0.3, 0.1, 0.2});

  RealMatrix twin(2, 2, {0.25, 0.25, 0.75, 0.75});
  CapturedAttention same;
  same.cross_maps.push_back(twin);
  CHECK(subject_map(same, {0, 2}, 1, 2).values == std::vector<double>{0.25, 0.75});

  CapturedAttention two;
  two.cross_maps.push_back(RealMatrix(2, 1, {0.2, 0.4}));
  two.cross_maps.push_back(RealMatrix(2, 1, {0.6, 0.0}));
  const auto avg = subject_map(two, {0, 1}, 2, 1).values;
  CHECK(avg[0] == doctest::Approx(0.4));
  CHECK(avg[1] == doctest::Approx(0.2));

  CHECK_THROWS_AS(subject_map(cap, {1, 1}, 2, 2), SpanError);
  CHECK_THROWS_AS(subject_map(cap, {2, 4}, 2, 2), SpanError);
  CHECK_THROWS_AS(subject_map(cap, {0, 1}, 3, 2), ShapeError);
}

TEST_CASE("binarize examples") {
  const BinaryMask flat = binarize(make_map(2, 2, {0.3, 0.3, 0.3, 0.3}), 0.5);
  CHECK(flat.degenerate);
  CHECK(flat.ones() == 0);

  const auto v = std::vector<double>{0.1, 0.9, 0.5, 0.3};
  const BinaryMask m = binarize(make_map(2, 2, v), 0.5);
  CHECK(m.values == std::vector<unsigned char>{0, 1, 0, 0});
  CHECK(m.values == oracle_mask(v, 0.5));
  CHECK_FALSE(m.degenerate);

  const BinaryMask low = binarize(make_map(2, 2, v), 1e-9);
  CHECK(low.values == std::vector<unsigned char>{0, 1, 1, 1});

  CHECK_THROWS_AS(binarize(make_map(1, 1, {1.0}), 0.0), ConfigError);
  CHECK_THROWS_AS(binarize(make_map(1, 1, {1.0}), 1.0), ConfigError);
}

TEST_CASE("binarize properties on random maps") {
  SeededStream rng(3);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<double> v = seeded_gaussian(rng, 64);
    const SubjectMap m = make_map(8, 8, v);
    const double tau = 0.05 + 0.9 * rng.next_unit();
    const BinaryMask mask = binarize(m, tau);
    CHECK(mask.values == oracle_mask(v, tau));

    // Affine invariance for a > 0.
    const double a = 0.1 + 10.0 * rng.next_unit();
    const double c = 20.0 * (rng.next_unit() - 0.5);
    std::vector<double> moved = v;
    for (double& x : moved) x = a * x + c;
    CHECK(binarize(make_map(8, 8, moved), tau).values == mask.values);

    // Ones-count is non-increasing in tau.
    std::size_t last = 64;
    for (double t = 0.05; t < 1.0; t += 0.05) {
      const std::size_t ones = binarize(m, t).ones();
      CHECK(ones <= last);
      last = ones;
    }
  }
}

TEST_CASE("degenerate flag tracks the range threshold") {
  CHECK(binarize(make_map(1, 2, {1.0, 1.0 + 5e-13}), 0.5).degenerate);
  CHECK_FALSE(binarize(make_map(1, 2, {1.0, 1.0 + 1e-9}), 0.5).degenerate);
}

TEST_CASE("align_mask") {
  BinaryMask m;
  m.height = 2;
  m.width = 2;
  m.values = {1, 0, 0, 0};
  CHECK(align_mask(m, 2, 2) == m);
  const BinaryMask up = align_mask(m, 4, 4);
  CHECK(up.values == std::vector<unsigned char>{1, 1, 0, 0,  //
                                                1, 1, 0, 0,  //
                                                0, 0, 0, 0,  //
                                                0, 0, 0, 0});
  BinaryMask three;
  three.height = 3;
  three.width = 3;
  three.values.assign(9, 0);
  CHECK_THROWS_AS(align_mask(three, 4, 4), ConfigError);
}
