#include <doctest.h>

#include <filesystem>

#include "detailpp/errors.hpp"
#include "detailpp/io.hpp"

using namespace detailpp;

namespace {

std::string as_text(const std::vector<std::uint8_t>& b) { return std::string(b.begin(), b.end()); }

std::filesystem::path scratch(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "detailpp_test_io";
  std::filesystem::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_CASE("latent dump layout") {
  const LatentGrid g(1, 2, 1, {1.0, -2.0});
  const auto bytes = io::encode_latent(g);
  const std::vector<std::uint8_t> expected = {
      'D', 'P', 'P', '1', 1, 0, 0, 0, 2, 0, 0, 0, 1, 0, 0, 0,
      0x00, 0x00, 0x80, 0x3f,  // 1.0f
      0x00, 0x00, 0x00, 0xc0,  // -2.0f
  };
  CHECK(bytes == expected);
  CHECK(io::decode_latent(bytes) == g);
}

TEST_CASE("latent round trip rounds to float") {
  SeededStream rng(1);
  const LatentGrid g(3, 4, 3, seeded_gaussian(rng, 36));
  const auto path = scratch("g.dpl");
  io::write_latent(path, g);
  const LatentGrid back = io::read_latent(path);
  REQUIRE(back.same_shape(g));
  for (std::size_t i = 0; i < g.size(); ++i) CHECK(back[i] == double(float(g[i])));
  CHECK(io::encode_latent(back) == io::encode_latent(g));
}

TEST_CASE("latent decoding rejects bad input") {
  CHECK_THROWS_AS(io::decode_latent({'D', 'P', 'P'}), IoError);
  auto bytes = io::encode_latent(LatentGrid(1, 1, 1, 0.5));
  bytes[0] = 'X';
  CHECK_THROWS_AS(io::decode_latent(bytes), IoError);
  bytes = io::encode_latent(LatentGrid(1, 1, 1, 0.5));
  bytes.pop_back();
  CHECK_THROWS_AS(io::decode_latent(bytes), IoError);
  CHECK_THROWS_AS(io::read_file(scratch("does-not-exist")), IoError);
}

TEST_CASE("pgm") {
  const double v[] = {0.0, 0.5, 1.0, 2.0};
  const auto bytes = io::encode_pgm(2, 2, v);
  const std::string header = "P5\n2 2\n255\n";
  REQUIRE(bytes.size() == header.size() + 4);
  CHECK(as_text(bytes).substr(0, header.size()) == header);
  CHECK(bytes[header.size()] == 0);
  CHECK(bytes[header.size() + 1] == 64);
  CHECK(bytes[header.size() + 2] == 128);
  CHECK(bytes[header.size() + 3] == 255);

  const double flat[] = {3.0, 3.0};
  const auto f = io::encode_pgm(1, 2, flat);
  CHECK(f[f.size() - 1] == 0);
  CHECK_THROWS_AS(io::encode_pgm(2, 2, flat), ShapeError);

  BinaryMask m;
  m.height = 1;
  m.width = 3;
  m.values = {1, 0, 1};
  const auto mb = io::encode_mask_pgm(m);
  CHECK(as_text(mb) == std::string("P5\n3 1\n255\n") + char(255) + char(0) + char(255));
}

TEST_CASE("ppm round trip") {
  LatentGrid g(2, 3, 3);
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = double(i % 5) / 4.0;
  g[0] = -1.0;
  g[1] = 7.0;
  const auto bytes = io::encode_ppm(g);
  CHECK(as_text(bytes).substr(0, 11) == "P6\n3 2\n255\n");
  const LatentGrid back = io::decode_ppm(bytes);
  CHECK(back.height() == 2);
  CHECK(back.width() == 3);
  CHECK(back[0] == 0.0);
  CHECK(back[1] == 1.0);
  for (std::size_t i = 2; i < g.size(); ++i) CHECK(std::abs(back[i] - g[i]) <= 0.5 / 255.0 + 1e-12);
  CHECK_THROWS_AS(io::encode_ppm(LatentGrid(1, 1, 4)), ShapeError);
  CHECK_THROWS_AS(io::decode_ppm({'P', '5', '\n'}), IoError);

  const std::string commented = "P6\n# made by hand\n1 1\n255\n";
  std::vector<std::uint8_t> c(commented.begin(), commented.end());
  c.insert(c.end(), {255, 0, 51});
  const LatentGrid one = io::decode_ppm(c);
  CHECK(one[0] == 1.0);
  CHECK(one[2] == doctest::Approx(0.2));
}

TEST_CASE("manifest round trip") {
  io::RunManifest m;
  m.prompt = "a red dog with sunglasses";
  m.seed = 18446744073709551615ull;
  m.model_seed = 3;
  m.dims.height = m.dims.width = 8;
  m.dims.layers = 2;
  m.config.steps = 20;
  m.config.share_fraction = 0.6;
  m.config.tau = 0.35;
  m.config.mask_source = MaskSource::kFirstBranch;
  m.config.decomposition = DecompositionConfig::kAccumulative;
  m.config.nurse.lambda = 0.5;
  m.config.nurse.step_size = 0.01;
  m.config.nurse.inner_steps = 3;
  m.config.nurse.active_steps = 7;
  m.config.nurse.target = NurseTarget::kFirstBranch;
  m.config.apply_alm = false;
  m.trace = true;
  const std::string text = m.to_json();
  CHECK(text.rfind("{\n  \"version\"", 0) == 0);
  const io::RunManifest back = io::RunManifest::from_json(text);
  CHECK(back.prompt == m.prompt);
  CHECK(back.seed == m.seed);
  CHECK(back.model_seed == 3);
  CHECK(back.dims == m.dims);
  CHECK(back.config.steps == 20);
  CHECK(back.config.share_fraction == 0.6);
  CHECK(back.config.tau == 0.35);
  CHECK(back.config.mask_source == MaskSource::kFirstBranch);
  CHECK(back.config.decomposition == DecompositionConfig::kAccumulative);
  CHECK(back.config.nurse.step_size == 0.01);
  CHECK(back.config.nurse.target == NurseTarget::kFirstBranch);
  CHECK_FALSE(back.config.apply_alm);
  CHECK(back.trace);
  CHECK(back.to_json() == text);
}

TEST_CASE("manifest errors") {
  CHECK_THROWS_AS(io::RunManifest::from_json("{"), ConfigError);
  CHECK_THROWS_AS(io::RunManifest::from_json("{}"), ConfigError);
  std::string text = io::RunManifest{}.to_json();
  const auto at = text.find("\"branch\"");
  REQUIRE(at != std::string::npos);
  text.replace(at, 8, "\"elsewhere\"");
  CHECK_THROWS_AS(io::RunManifest::from_json(text), ConfigError);
}

TEST_CASE("nurse csv") {
  NurseRecord r;
  r.t = 50;
  r.branch = 2;
  r.report.align = 0.5;
  r.report.entropy = 0.25;
  r.report.total = 0.75;
  CHECK(io::format_nurse_csv({r}) == "t,branch,align,entropy,total\n50,2,0.5,0.25,0.75\n");
  CHECK(io::format_nurse_csv({}) == "t,branch,align,entropy,total\n");
}
