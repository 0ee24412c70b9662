#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "detailpp/io.hpp"
#include "detailpp/scb.hpp"

using namespace detailpp;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code = -1;
  std::string out;
  std::string err;
};

fs::path work_dir() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / "detailpp_test_cli";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome cli(const std::string& args, const std::string& env = "") {
  const fs::path o = work_dir() / "stdout.txt", e = work_dir() / "stderr.txt";
  const std::string cmd = env + " " + DETAILPP_CLI + " " + args + " >" + o.string() + " 2>" + e.string();
  const int status = std::system(cmd.c_str());
  Outcome r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(o);
  r.err = slurp(e);
  return r;
}

std::map<std::string, std::string> tree(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (entry.is_regular_file()) files[fs::relative(entry.path(), root).string()] = slurp(entry.path());
  }
  return files;
}

std::string small_generate(const fs::path& out) {
  return "generate --prompt 'a red teddy bear wearing a green tracksuit' --height 8 --width 8 --steps 10 "
         "--out " + out.string();
}

}  // namespace

TEST_CASE("decompose prints the plan") {
  const Outcome r = cli("decompose --prompt 'a red teddy bear wearing a green tracksuit' --config A");
  CHECK(r.code == 0);
  CHECK(r.out ==
        "0\ta red teddy bear wearing a green tracksuit\t-\n"
        "1\ta teddy bear wearing a tracksuit\t-\n"
        "2\ta red teddy bear wearing a tracksuit\tteddy bear\n"
        "3\ta teddy bear wearing a green tracksuit\ttracksuit\n");
  CHECK(r.err.empty());
}

TEST_CASE("exit codes and diagnostics") {
  Outcome r = cli("decompose --prompt 'red and dog a'");
  CHECK(r.code == 2);
  CHECK(r.err.find("token 1") != std::string::npos);
  CHECK(std::count(r.err.begin(), r.err.end(), '\n') == 1);

  r = cli("decompose --prompt 'a dog' --config E");
  CHECK(r.code == 1);
  r = cli("frobnicate");
  CHECK(r.code == 1);
  r = cli("generate --out " + (work_dir() / "none").string());
  CHECK(r.code == 1);

  r = cli("generate --prompt 'a dog' --steps 0 --out " + (work_dir() / "zero").string());
  CHECK(r.code == 3);
  CHECK(r.err == "detailpp: steps must be >= 1\n");
  CHECK_FALSE(fs::exists(work_dir() / "zero"));

  r = cli("generate --prompt 'a dog' --tau 1.5 --out " + (work_dir() / "tau").string());
  CHECK(r.code == 3);
  r = cli("generate --prompt 'a dog with with' --out " + (work_dir() / "bad").string());
  CHECK(r.code == 2);
}

TEST_CASE("unknown flags write nothing") {
  const fs::path out = work_dir() / "unknown";
  const Outcome r = cli(small_generate(out) + " --trace --shiny");
  CHECK(r.code == 1);
  CHECK(r.err.find("--shiny") != std::string::npos);
  CHECK_FALSE(fs::exists(out));
}

TEST_CASE("generate output tree is reproducible") {
  const fs::path a = work_dir() / "gen_a", b = work_dir() / "gen_b", c = work_dir() / "gen_c";
  REQUIRE(cli(small_generate(a) + " --seed 4 --trace").code == 0);
  REQUIRE(cli(small_generate(b) + " --seed 4 --trace --parallel").code == 0);
  const auto ta = tree(a);
  CHECK(ta == tree(b));
  CHECK(ta.count("manifest.json") == 1);
  CHECK(ta.count("final.dpl") == 1);
  CHECK(ta.count("final.ppm") == 1);
  CHECK(ta.count("nurse.csv") == 1);
  CHECK(ta.count("branches/b3.dpl") == 1);
  CHECK(ta.count("trace/b0_t10.dpl") == 1);
  CHECK(ta.count("trace/b3_t0.dpl") == 1);
  CHECK(ta.count("plan.tsv") == 1);
  CHECK(ta.size() == 5 + 4 + 4 * 11);
  CHECK(ta.at("final.dpl") == ta.at("branches/b3.dpl"));
  CHECK(ta.at("trace/b3_t0.dpl") == ta.at("final.dpl"));

  REQUIRE(cli("generate --manifest " + (a / "manifest.json").string() + " --out " + c.string()).code == 0);
  CHECK(tree(c) == ta);

  const Outcome mixed = cli("generate --manifest " + (a / "manifest.json").string() + " --seed 2 --out " +
                            (work_dir() / "mixed").string());
  CHECK(mixed.code == 1);
}

TEST_CASE("seed flag and environment") {
  const fs::path a = work_dir() / "seed_flag", b = work_dir() / "seed_env", c = work_dir() / "seed_other";
  REQUIRE(cli(small_generate(a) + " --seed 5").code == 0);
  REQUIRE(cli(small_generate(b), "DPP_SEED=5").code == 0);
  REQUIRE(cli(small_generate(c) + " --seed 6").code == 0);
  CHECK(tree(a) == tree(b));
  CHECK(slurp(a / "final.dpl") != slurp(c / "final.dpl"));
  CHECK(cli(small_generate(work_dir() / "seed_bad"), "DPP_SEED=x1").code == 1);
}

TEST_CASE("nurse-check") {
  const Outcome r = cli("nurse-check --seed 1");
  CHECK(r.code == 0);
  REQUIRE(r.out.rfind("max relative error ", 0) == 0);
  CHECK(std::stod(r.out.substr(19)) <= 1e-4);
}

TEST_CASE("dump-attn") {
  const fs::path run = work_dir() / "dump";
  REQUIRE(cli(small_generate(run) + " --seed 1").code == 0);
  const Outcome r = cli("dump-attn --run " + run.string() + " --branch 2 --step 10");
  CHECK(r.code == 0);
  CHECK(fs::exists(run / "attn" / "b2_t10_self.pgm"));
  CHECK(fs::exists(run / "attn" / "b2_t10_tok2_teddy.pgm"));
  const std::string mask = slurp(run / "attn" / "mask_q1_t10.pgm");
  REQUIRE(mask.rfind("P5\n8 8\n255\n", 0) == 0);
  for (std::size_t i = 11; i < mask.size(); ++i) {
    CHECK((static_cast<unsigned char>(mask[i]) == 0 || static_cast<unsigned char>(mask[i]) == 255));
  }
  CHECK(slurp(run / "attn" / "b2_t10_self.pgm").rfind("P5\n64 64\n255\n", 0) == 0);
  CHECK(cli("dump-attn --run " + run.string() + " --branch 7 --step 10").code == 3);
  CHECK(cli("dump-attn --run " + run.string() + " --branch 1 --step 11").code == 3);
}

TEST_CASE("eval-scb") {
  const fs::path images = work_dir() / "scb_images";
  fs::create_directories(images);
  const auto corpus = build_benchmark(0);
  const ToyStyleEmbedder e;
  const std::vector<ComponentBox> boxes = {{"subject", 0, 0, 16, 24}, {"background", 16, 0, 16, 24}};
  LatentGrid img(24, 32, 3);
  const LatentGrid left = ToyStyleEmbedder::exemplar(corpus[7].subject_style, 24, 16);
  const LatentGrid right = ToyStyleEmbedder::exemplar(corpus[7].background_style, 24, 16);
  for (std::size_t y = 0; y < 24; ++y) {
    for (std::size_t x = 0; x < 16; ++x) {
      for (std::size_t ch = 0; ch < 3; ++ch) {
        img.at(y, x, ch) = left.at(y, x, ch);
        img.at(y, x + 16, ch) = right.at(y, x, ch);
      }
    }
  }
  io::write_file(images / "7.ppm", io::encode_ppm(img));
  io::write_text(images / "notes.txt", "ignored\n");
  const fs::path box_file = work_dir() / "boxes.tsv";
  io::write_text(box_file, "subject\t0\t0\t16\t24\nbackground\t16\t0\t16\t24\n");
  const fs::path csv = work_dir() / "scores.csv";

  const Outcome r = cli("eval-scb --images " + images.string() + " --boxes " + box_file.string() +
                        " --out " + csv.string());
  REQUIRE(r.code == 0);
  std::istringstream lines(slurp(csv));
  std::string header, subj, bg, avg;
  std::getline(lines, header);
  std::getline(lines, subj);
  std::getline(lines, bg);
  std::getline(lines, avg);
  CHECK(header == "prompt_index,component,score");
  CHECK(subj.rfind("7," + std::string(1, char(std::tolower(corpus[7].subject[0]))), 0) == 0);
  const auto value = [](const std::string& row) { return std::stod(row.substr(row.rfind(',') + 1)); };
  CHECK(avg.rfind("7,AVG,", 0) == 0);
  CHECK(value(avg) == doctest::Approx((value(subj) + value(bg)) / 2).epsilon(1e-9));
  const double direct = image_score(io::decode_ppm(io::read_file(images / "7.ppm")), corpus[7], boxes, e);
  CHECK(value(avg) == doctest::Approx(direct).epsilon(1e-9));

  io::write_text(box_file, "subject\t0\t0\t16\t24\n");
  REQUIRE(cli("eval-scb --images " + images.string() + " --boxes " + box_file.string() + " --out " +
              csv.string()).code == 0);
  CHECK(slurp(csv).find(",NA\n") != std::string::npos);

  io::write_text(box_file, "subject\t0\t0\n");
  CHECK(cli("eval-scb --images " + images.string() + " --boxes " + box_file.string() + " --out " +
            csv.string()).code == 3);
}

TEST_CASE("scb-corpus") {
  const Outcome r = cli("scb-corpus --seed 0");
  CHECK(r.code == 0);
  CHECK(std::count(r.out.begin(), r.out.end(), '\n') == 300);
  CHECK(r.out == format_corpus(build_benchmark(0)));
}
