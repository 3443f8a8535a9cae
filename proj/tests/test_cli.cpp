#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sys/wait.h>

#include "doctest.h"
#include "json.hpp"
#include "oracles/media_reference.hpp"
#include "stroke_fixtures.hpp"

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
};

Run run(const std::string& args) {
  const std::string cmd = std::string(LVAE_CLI) + " " + args + " 2>/dev/null";
  FILE* p = popen(cmd.c_str(), "r");
  REQUIRE(p);
  std::string out;
  std::array<char, 4096> buf;
  while (std::size_t n = fread(buf.data(), 1, buf.size(), p)) out.append(buf.data(), n);
  const int status = pclose(p);
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

json last_json_line(const std::string& out) {
  auto end = out.find_last_not_of('\n');
  auto start = out.rfind('\n', end);
  return json::parse(out.substr(start == std::string::npos ? 0 : start + 1, end + 1 - (start == std::string::npos ? 0 : start + 1)));
}

std::vector<std::uint8_t> slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

struct Workdir {
  Workdir() {
    std::mt19937_64 rng(std::random_device{}());
    dir = fs::temp_directory_path() / ("lvae-cli-" + std::to_string(rng() % 1000000000));
    fs::create_directories(dir);
    store = "--store " + (dir / "store").string();
  }
  ~Workdir() { fs::remove_all(dir); }
  fs::path dir;
  std::string store;
};

}  // namespace

TEST_CASE("ingest, train, zero-epoch train, interpolate, export") {
  Workdir w;
  const std::string data = LVAE_TEST_DATA_DIR;
  auto r = run(w.store + " --json ingest-idx --images " + data + "/mnist01-images-idx3-ubyte --labels " +
               data + "/mnist01-labels-idx1-ubyte --digits 0,1 --limit 30");
  REQUIRE(r.code == 0);
  const std::string ds = last_json_line(r.out)["id"];

  r = run(w.store + " --json train --dataset " + ds + " --epochs 2 --hidden-dim 16 --seed 3");
  REQUIRE(r.code == 0);
  const std::string model = last_json_line(r.out)["model_id"];
  const fs::path ckpt = w.dir / "store" / "models" / (model + ".lvae");
  const auto before = slurp(ckpt);
  const auto mtime = fs::last_write_time(ckpt);

  r = run(w.store + " train --dataset " + ds + " --model " + model + " --epochs 0");
  CHECK(r.code == 0);
  CHECK(slurp(ckpt) == before);
  CHECK(fs::last_write_time(ckpt) == mtime);

  const fs::path gif = w.dir / "out.gif";
  r = run(w.store + " --json interpolate --model " + model + " --num-images 10 --out " + gif.string());
  REQUIRE(r.code == 0);
  CHECK(last_json_line(r.out)["frames"] == 10);
  CHECK(oracle::read_gif(slurp(gif)).frames.size() == 10);
  CHECK(fs::exists(w.dir / "out.pgm"));

  r = run(w.store + " export-gif --dataset " + ds + " --count 4 --out " + (w.dir / "ds.gif").string());
  CHECK(r.code == 0);
  CHECK(oracle::read_gif(slurp(w.dir / "ds.gif")).frames.size() == 4);
}

TEST_CASE("draw-import") {
  Workdir w;
  json j = {{"strokes_a", json::array()}, {"strokes_b", json::array()}};
  for (int k = 0; k < 3; ++k) {
    j["strokes_a"].push_back(testutil::drawn_digit(0, k));
    j["strokes_b"].push_back(testutil::drawn_digit(1, k));
  }
  const fs::path p = w.dir / "strokes.json";
  std::ofstream(p) << j.dump();
  auto r = run(w.store + " --json draw-import " + p.string() + " --num-images-per-digit 3 --digit-a 0 --digit-b 1");
  REQUIRE(r.code == 0);
  CHECK(last_json_line(r.out)["count"] == 6);

  j["strokes_a"][0]["strokes"] = json::array();
  std::ofstream(p) << j.dump();
  r = run(w.store + " --json draw-import " + p.string());
  CHECK(r.code != 0);
  CHECK(last_json_line(r.out)["reason"] == "empty_drawing");
}

TEST_CASE("level-check reports shipped levels solvable") {
  for (const char* name : {"easy-ae", "easy-vae", "hard-ae", "hard-vae"}) {
    const auto r = run(std::string("level-check ") + LVAE_LEVELS_DIR + "/" + name + ".json");
    CHECK(r.code == 0);
    CHECK(r.out.find("solvable") != std::string::npos);
    CHECK(r.out.find("unsolvable") == std::string::npos);
  }
}

TEST_CASE("errors exit nonzero") {
  Workdir w;
  CHECK(run(w.store + " train --dataset d-missing --epochs 1").code != 0);
  CHECK(run("train --no-such-flag").code != 0);
  CHECK(run("").code != 0);
  CHECK(run(w.store + " interpolate --model v-0 --num-images 1 --out x.gif").code != 0);
}
