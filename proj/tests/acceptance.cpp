// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>

#include "httplib.h"
#include "lvae/media.hpp"
#include "lvae/service.hpp"
#include "lvae/trainer.hpp"
#include "oracles/kl_monte_carlo.hpp"
#include "oracles/media_reference.hpp"
#include "oracles/naive_vae.hpp"
#include "oracles/projector.hpp"
#include "stroke_fixtures.hpp"
#include "test_util.hpp"

using namespace lvae;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

int failures = 0;

void criterion(const std::string& name, const std::function<void(Outcome&)>& body) {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    body(o);
  } catch (const std::exception& e) {
    o.pass = false;
    o.detail << " [exception: " << e.what() << "]";
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  failures += !o.pass;
  std::printf("%s  %-22s %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", name.c_str(),
              o.detail.str().c_str(), secs);
  std::fflush(stdout);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<oracle::Vec> rows_of(const Tensor& t) {
  std::vector<oracle::Vec> out;
  for (std::size_t r = 0; r < t.rows(); ++r) out.emplace_back(t.row(r).begin(), t.row(r).end());
  return out;
}

DigitDataset mnist01(std::size_t limit) {
  const auto images = testutil::read_file(LVAE_TEST_DATA_DIR "/mnist01-images-idx3-ubyte");
  const auto labels = testutil::read_file(LVAE_TEST_DATA_DIR "/mnist01-labels-idx1-ubyte");
  const auto all = parse_idx(images, std::span<const std::uint8_t>(labels));
  return select_digits(all, std::vector<int>{0, 1}, limit, 42);
}

Tensor row_vector(const Tensor& m, std::size_t r) {
  return Tensor({m.cols()}, {m.row(r).begin(), m.row(r).end()});
}

// --- gradients ---------------------------------------------------------------

// Smallest distance from any ReLU or logvar-clamp input to its kink; central
// differences are only a derivative oracle when the stencil stays on one side.
double kink_margin(const VaeModel& m, const Tensor& x, const Tensor& eps) {
  const oracle::NaiveVae net(m);
  double margin = 1e300;
  for (std::size_t b = 0; b < x.rows(); ++b) {
    const oracle::Vec xv(x.row(b).begin(), x.row(b).end());
    oracle::Vec h = oracle::naive_apply(net.layers[0], xv);
    for (auto& v : h) {
      margin = std::min(margin, std::abs(v));
      v = oracle::naive_relu(v);
    }
    const auto mu = oracle::naive_apply(net.layers[1], h);
    const auto lv = oracle::naive_apply(net.layers[2], h);
    oracle::Vec z(mu.size());
    for (std::size_t k = 0; k < z.size(); ++k) {
      margin = std::min(margin, 10.0 - std::abs(lv[k]));
      z[k] = mu[k] + std::exp(0.5 * oracle::clamp_lv(lv[k])) * eps(b, k);
    }
    for (double v : oracle::naive_apply(net.layers[3], z)) margin = std::min(margin, std::abs(v));
  }
  return margin;
}

void gradient_check(Outcome& o) {
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0;
  std::size_t params = 0;
  int checked = 0, redrawn = 0;
  for (std::uint64_t seed = 0; checked < 100; ++seed) {
    VaeModel m = VaeModel::initialized(8, 2, 1000 + seed);
    std::mt19937_64 rng(seed ^ 0xacce);
    for (auto& layer : m.layers()) layer.bias = testutil::random_tensor(layer.bias.shape(), rng, -0.3, 0.3);
    const Tensor x = testutil::random_images(4, rng);
    Rng noise(seed + 77);
    const Tensor eps = standard_normal({4, 2}, noise);
    if (kink_margin(m, x, eps) < 1e-4) {
      ++redrawn;
      continue;
    }
    ++checked;
    forward_backward(m, x, eps);
    const auto fd = oracle::finite_difference_gradients(m, rows_of(x), rows_of(eps), 1e-5);
    for (int l = 0; l < VaeModel::kLayerCount; ++l) {
      const auto gw = m.layer(l).grad_weights.data();
      const auto gb = m.layer(l).grad_bias.data();
      for (std::size_t i = 0; i < gw.size(); ++i)
        worst = std::max(worst, testutil::rel_error(gw[i], fd[l][i], 1e-5));
      for (std::size_t i = 0; i < gb.size(); ++i)
        worst = std::max(worst, testutil::rel_error(gb[i], fd[l][gw.size() + i], 1e-5));
      params += gw.size() + gb.size();
    }
  }
  const double secs = seconds_since(t0);
  o.detail << checked << " models (" << redrawn << " redrawn near a kink), " << params
           << " parameters, max rel err " << worst;
  o.require(worst < 1e-4, "max relative error < 1e-4");
  o.require(secs < 60.0, "runtime < 60 s");
}

void kl_check(Outcome& o) {
  std::mt19937_64 rng(2718);
  std::uniform_real_distribution<double> mu_d(-2, 2), lv_d(-2, 2);
  double worst = 0.0;
  for (int draw = 0; draw < 50; ++draw) {
    std::vector<double> mu{mu_d(rng), mu_d(rng)}, lv{lv_d(rng), lv_d(rng)};
    const double closed = kl_divergence(mu, lv);
    const double mc = oracle::kl_monte_carlo(mu, lv, 100000, 5000 + draw);
    worst = std::max(worst, std::abs(closed - mc) / closed);
  }
  o.detail << "50 draws, max rel diff " << worst;
  o.require(worst < 0.02, "within 2%");
}

// --- training ----------------------------------------------------------------

void desk_scale(Outcome& o) {
  const auto data = mnist01(200);
  TrainConfig cfg;
  cfg.epochs = 50;
  cfg.hidden_dim = 512;
  cfg.latent_dim = 2;
  cfg.seed = 42;
  VaeModel model;
  const auto t0 = std::chrono::steady_clock::now();
  const auto report = train(model, data, cfg);
  const double secs = seconds_since(t0);
  const auto& e = report.epochs;
  if (e.size() != 50 || !e.front().test_total || !e.back().test_total) {
    o.require(false, "50 epochs with a test split");
    return;
  }
  const double ratio = *e.back().test_total / *e.front().test_total;
  int non_increasing = 0;
  for (std::size_t i = 1; i < e.size(); ++i) non_increasing += e[i].train_total <= e[i - 1].train_total;
  const double frac = double(non_increasing) / double(e.size() - 1);
  o.detail << "test loss " << *e.front().test_total << " -> " << *e.back().test_total << " (ratio "
           << ratio << "), " << non_increasing << "/" << e.size() - 1 << " pairs non-increasing";
  o.require(ratio < 0.7, "final test loss < 70% of epoch 1");
  o.require(frac >= 0.8, ">= 80% non-increasing pairs");
  o.require(secs < 300.0, "runtime < 5 min");
}

// --- media -------------------------------------------------------------------

void interpolation_endpoints(Outcome& o) {
  const auto data = mnist01(40);
  int cases = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    VaeModel m = VaeModel::initialized(32, 2, seed);
    TrainConfig cfg;
    cfg.epochs = 2;
    cfg.hidden_dim = 32;
    cfg.seed = seed;
    train(m, data, cfg);
    for (int n : {2, 3, 10}) {
      const Tensor a = row_vector(data.images, seed), b = row_vector(data.images, 20 + seed);
      InterpolationSpec spec{Endpoint::image(a), Endpoint::image(b), n};
      const Tensor decoded = interpolate_decoded(m, spec);
      const Tensor da = decode(m, encode(m, Tensor({1, kImagePixels}, {a.data().begin(), a.data().end()})).mu);
      const Tensor db = decode(m, encode(m, Tensor({1, kImagePixels}, {b.data().begin(), b.data().end()})).mu);
      o.require(slice_rows(decoded, 0, 1) == da, "frame 0 == decode(mu_a)");
      o.require(slice_rows(decoded, std::size_t(n - 1), 1) == db, "frame n-1 == decode(mu_b)");
      const auto frames = interpolate(m, spec);
      o.require(frames.front() == to_gray(da.row(0)) && frames.back() == to_gray(db.row(0)),
                "quantised endpoints");
      ++cases;
    }
    // 2-D grid edges against 1-D lines between the matching corners.
    std::array<Tensor, 4> corners;
    for (std::size_t k = 0; k < 4; ++k) corners[k] = endpoint_latent(m, Endpoint::image(row_vector(data.images, 5 * k + seed)));
    const int g = 6;
    const Tensor grid = decode(m, interpolate_2d_latents(corners, g));
    auto line = [&](int p, int q) { return decode(m, interpolate_latents(corners[p], corners[q], g)); };
    const Tensor top = line(0, 1), bottom = line(2, 3), left = line(0, 2), right = line(1, 3);
    for (int i = 0; i < g; ++i) {
      o.require(grid.row(std::size_t(i)).size() == top.row(std::size_t(i)).size(), "shape");
      auto same = [&](std::size_t grid_row, const Tensor& l, int k) {
        return std::equal(grid.row(grid_row).begin(), grid.row(grid_row).end(), l.row(std::size_t(k)).begin());
      };
      o.require(same(std::size_t(i), top, i), "row 0");
      o.require(same(std::size_t((g - 1) * g + i), bottom, i), "last row");
      o.require(same(std::size_t(i * g), left, i), "column 0");
      o.require(same(std::size_t(i * g + g - 1), right, i), "last column");
    }
  }
  o.detail << cases << " 1-D cases bit-identical, 5 grids with matching edges";
}

void media_formats(Outcome& o) {
  std::mt19937_64 rng(99);
  int gifs = 0;
  for (int n : {1, 2, 10, 37}) {
    for (int delay : {1, 10, 250}) {
      FrameSequence frames;
      for (int k = 0; k < n; ++k) {
        GrayImage img;
        img.pixels.resize(kImagePixels);
        for (auto& p : img.pixels) p = std::uint8_t(rng() % (k % 3 == 0 ? 256 : 4) * (k % 3 == 0 ? 1 : 85));
        frames.push_back(img);
      }
      const auto bytes = encode_gif(frames, delay);
      const auto gif = oracle::read_gif(bytes);
      bool ok = gif.frames.size() == std::size_t(n) && gif.width == 28 && gif.height == 28;
      for (std::size_t k = 0; ok && k < gif.frames.size(); ++k) {
        const auto& f = gif.frames[k];
        ok = f.width == 28 && f.height == 28 && f.delay_cs == delay;
        for (std::size_t i = 0; ok && i < kImagePixels; ++i)
          ok = gif.palette[3 * f.indices[i]] == frames[k].pixels[i];
      }
      o.require(ok, "GIF n=" + std::to_string(n) + " delay=" + std::to_string(delay));
      ++gifs;
    }
  }
  const auto images = testutil::read_file(LVAE_TEST_DATA_DIR "/mnist01-images-idx3-ubyte");
  const auto labels = testutil::read_file(LVAE_TEST_DATA_DIR "/mnist01-labels-idx1-ubyte");
  const auto ds = parse_idx(images, std::span<const std::uint8_t>(labels));
  o.require(write_idx_images(ds) == images, "IDX images round trip");
  o.require(write_idx_labels(ds) == labels, "IDX labels round trip");
  o.require(parse_idx(write_idx_images(ds), std::span<const std::uint8_t>(write_idx_labels(ds))).images == ds.images,
            "IDX parse of written bytes");
  int pgms = 0;
  for (std::size_t i = 0; i < ds.size(); i += 37) {
    const GrayImage img = to_gray(ds.images.row(i));
    const auto p = oracle::read_pgm(write_pgm(img));
    o.require(p.width == 28 && p.height == 28 && p.pixels == img.pixels, "PGM round trip");
    ++pgms;
  }
  o.detail << gifs << " GIFs decoded, " << ds.size() << "-image IDX pair and " << pgms << " PGMs round-tripped";
}

// --- shadow engine -------------------------------------------------------------

using namespace lvae::shadow;

shadow::Action random_action(std::mt19937_64& rng, const GameSession& s) {
  shadow::Action a;
  switch (rng() % 7) {
    case 0:
    case 1: {
      a.op = "move";
      a.object = int(rng() % s.objects().size());
      const auto& cells = s.objects()[std::size_t(a.object)].cells;
      auto it = cells.begin();
      std::advance(it, long(rng() % cells.size()));
      a.from = *it;
      std::uniform_int_distribution<int> coord(-kBound - 1, kBound + 1);
      a.to = {coord(rng), coord(rng), coord(rng)};
      break;
    }
    case 2:
      a.op = "rotate";
      a.object = int(rng() % s.objects().size());
      a.axis = Axis(rng() % 3);
      a.turns = int(rng() % 7) - 3;
      break;
    case 3: a.op = "cast"; break;
    case 4:
      a.op = "mode";
      a.mode = Mode(rng() % 2);
      break;
    case 5:
      a.op = "check";
      a.target = int(rng() % s.level().targets.size());
      break;
    default:
      a.op = "tick";
      a.cs = int(rng() % 200);
  }
  return a;
}

void shadow_engine(Outcome& o) {
  const auto mats = oracle::proper_signed_permutations();
  std::set<Cell> block;
  for (int x = -1; x <= 1; ++x)
    for (int y = -1; y <= 1; ++y)
      for (int z = -1; z <= 1; ++z) block.insert({x, y, z});
  const auto full = ShadowMask::from_rows({"111", "111", "111"});
  int orientations = 0;
  for (const auto& orient : all_orientations()) {
    o.require(project(block, orient) == full, "full block");
    ++orientations;
  }
  o.require(orientations == 24, "24 orientations");

  std::mt19937_64 rng(1234);
  std::uniform_int_distribution<int> coord(-kBound, kBound);
  int mismatches = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    std::set<Cell> cells;
    while (cells.size() < 7) cells.insert({coord(rng), coord(rng), coord(rng)});
    std::vector<oracle::Voxel> vox;
    for (const auto& c : cells) vox.push_back({c.x, c.y, c.z});
    for (const auto& m : mats) {
      Orientation orient;
      orient.m = m;
      mismatches += project(cells, orient).to_rows() != oracle::brute_shadow(vox, m);
    }
  }
  o.require(mismatches == 0, "brute-force projector");

  Level bar{"pick", Variant::vae, 1, {ShadowMask::from_rows({"1"})}, {{0, 0, 0}}};
  GameSession s(bar, 20240917);
  s.set_mode(Mode::decoder);
  std::array<int, 3> counts{};
  for (int k = 0; k < 100000; ++k) {
    if (s.emitted_shadows().size() == kShadowsPerRound) {
      s.set_mode(Mode::encoder);
      s.set_mode(Mode::decoder);
    }
    s.cast_shadow();
    ++counts[std::size_t(*s.last_cast_object())];
  }
  double worst_freq = 0.0;
  for (int c : counts) worst_freq = std::max(worst_freq, std::abs(c / 1e5 - 1.0 / 3.0));
  o.require(worst_freq <= 0.02, "pick frequencies");

  const auto levels = load_levels(LVAE_LEVELS_DIR);
  int solvable = 0;
  for (const auto& l : levels) {
    const auto sol = solve(l);
    bool ok = sol && int(sol->object.cells.size()) == l.cube_budget;
    if (ok) {
      std::vector<oracle::Voxel> vox;
      for (const auto& c : sol->object.cells) vox.push_back({c.x, c.y, c.z});
      for (std::size_t t = 0; t < l.targets.size(); ++t)
        ok &= oracle::brute_shadow(vox, sol->orientations[t].m) == l.targets[t].to_rows();
    }
    solvable += ok;
  }
  o.require(!levels.empty() && solvable == int(levels.size()), "shipped levels solvable");

  int replays = 0, replay_ok = 0;
  for (const auto& level : levels) {
    for (int game = 0; game < 25; ++game) {
      GameSession g(level, rng());
      for (int step = 0; step < 400; ++step) {
        try {
          g.apply(random_action(rng, g));
        } catch (const ShadowError&) {
        }
      }
      const auto again = replay(level, g.rng_seed(), read_action_log(write_action_log(g.log())));
      replay_ok += again.state().dump() == g.state().dump() && again.same_state(g);
      ++replays;
    }
  }
  o.require(replay_ok == replays, "replay");
  o.detail << "block ok under " << orientations << ", " << mismatches
           << " projector mismatches in 1000x24, pick freq max dev " << worst_freq << ", "
           << solvable << "/" << levels.size() << " levels solvable, " << replay_ok << "/"
           << replays << " replays identical";
}

// --- end to end -----------------------------------------------------------------

void end_to_end(Outcome& o) {
  const fs::path dir = fs::temp_directory_path() / ("lvae-acceptance-" + std::to_string(::getpid()));
  fs::remove_all(dir);
  {
    service::Service svc({dir, LVAE_LEVELS_DIR, 1});
    const int port = svc.start("127.0.0.1", 0);
    httplib::Client cli("127.0.0.1", port);
    cli.set_read_timeout(600, 0);

    json strokes_a = json::array(), strokes_b = json::array();
    for (int k = 0; k < 10; ++k) {
      strokes_a.push_back(testutil::drawn_digit(0, k));
      strokes_b.push_back(testutil::drawn_digit(1, k));
    }
    auto r = cli.Post("/datasets",
                      json{{"digit_a", 0}, {"digit_b", 1}, {"num_images_per_digit", 10},
                           {"strokes_a", strokes_a}, {"strokes_b", strokes_b}}.dump(),
                      "application/json");
    if (!r || r->status != 201) return o.require(false, "POST /datasets");
    const auto ds = json::parse(r->body);

    r = cli.Post("/train", json{{"dataset_id", ds["id"]}, {"config", {{"epochs", 50}, {"seed", 42}}}}.dump(),
                 "application/json");
    if (!r || r->status != 202) return o.require(false, "POST /train");
    const auto job = json::parse(r->body);

    r = cli.Get("/jobs/" + job["job_id"].get<std::string>() + "/events");
    if (!r || r->status != 200) return o.require(false, "GET events");
    std::istringstream lines(r->body);
    int epochs = 0;
    json last;
    for (std::string line; std::getline(lines, line);) {
      last = json::parse(line);
      epochs += last["type"] == "epoch";
    }
    o.require(epochs == 50 && last["state"] == "done", "50 streamed epochs then done");

    r = cli.Post("/models/" + job["model_id"].get<std::string>() + "/interpolate",
                 json{{"dataset_id", ds["id"]}, {"digit_a", 0}, {"digit_b", 1}, {"num_images", 10}}.dump(),
                 "application/json");
    if (!r || r->status != 201) return o.require(false, "POST interpolate");
    const auto media = json::parse(r->body);

    r = cli.Get("/media/" + media["media_id"].get<std::string>());
    if (!r || r->status != 200) return o.require(false, "GET media");
    o.require(r->get_header_value("Content-Type") == "image/gif", "content type");
    const auto gif = oracle::read_gif({r->body.begin(), r->body.end()});
    o.require(gif.frames.size() == 10 && gif.width == 28 && gif.height == 28, "10-frame 28x28 GIF");
    o.detail << "dataset " << ds["count"] << " images, " << epochs << " epochs streamed, GIF "
             << gif.frames.size() << " frames, " << r->body.size() << " bytes";
    svc.stop();
  }
  fs::remove_all(dir);
}

}  // namespace

int main() {
  criterion("gradient-check", gradient_check);
  criterion("kl-monte-carlo", kl_check);
  criterion("desk-scale-learning", desk_scale);
  criterion("interpolation-endpoints", interpolation_endpoints);
  criterion("media-formats", media_formats);
  criterion("shadow-engine", shadow_engine);
  criterion("end-to-end-http", end_to_end);
  std::printf("%d failed\n", failures);
  return failures == 0 ? 0 : 1;
}
