#include <csignal>
#include <fstream>
#include <iostream>
#include <iterator>

#include "CLI11.hpp"
#include "lvae/errors.hpp"
#include "lvae/media.hpp"
#include "lvae/service.hpp"

using namespace lvae;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Globals {
  bool json_out = false;
  std::string store = "lvae-store";
};

std::vector<std::uint8_t> read_file(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  if (!f) throw DataError(DataErrorReason::io, "cannot read " + p.string());
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

void write_file(const fs::path& p, const std::vector<std::uint8_t>& bytes) {
  std::ofstream f(p, std::ios::binary | std::ios::trunc);
  f.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
  if (!f) throw std::runtime_error("cannot write " + p.string());
}

json read_json_file(const fs::path& p) {
  const auto bytes = read_file(p);
  return json::parse(bytes.begin(), bytes.end());
}

void emit(const Globals& g, const json& j, const std::string& text) {
  if (g.json_out)
    std::cout << j.dump() << "\n";
  else
    std::cout << text << "\n";
}

std::string reason_of(const std::exception& e) {
  if (auto* d = dynamic_cast<const DataError*>(&e)) return to_string(d->reason());
  if (dynamic_cast<const service::NotFound*>(&e)) return "not_found";
  if (dynamic_cast<const ConfigError*>(&e)) return "invalid_config";
  if (dynamic_cast<const DimensionError*>(&e)) return "dimension";
  if (dynamic_cast<const DivergedError*>(&e)) return "diverged";
  if (dynamic_cast<const ModelError*>(&e)) return "model";
  if (dynamic_cast<const shadow::ShadowError*>(&e)) return "level";
  if (dynamic_cast<const json::exception*>(&e)) return "bad_json";
  return "error";
}

std::vector<int> parse_digits(const std::string& s) {
  std::vector<int> out;
  std::stringstream in(s);
  for (std::string tok; std::getline(in, tok, ',');)
    if (!tok.empty()) out.push_back(std::stoi(tok));
  return out;
}

// Endpoint image: first image of `digit` in the dataset.
Tensor digit_image(const DigitDataset& ds, int digit) {
  const auto it = std::find(ds.labels.begin(), ds.labels.end(), digit);
  if (it == ds.labels.end()) throw ConfigError("dataset has no digit " + std::to_string(digit));
  Tensor t = ds.image(std::size_t(it - ds.labels.begin()));
  return Tensor({kImagePixels}, {t.data().begin(), t.data().end()});
}

std::atomic<bool> g_interrupted{false};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Small VAE toolkit: datasets, training, interpolation media, shadow levels"};
  app.require_subcommand(1);
  Globals g;
  app.add_flag("--json", g.json_out, "Machine-readable output");
  app.add_option("--store", g.store, "Store directory")->capture_default_str();

  // ingest-idx
  auto* ingest = app.add_subcommand("ingest-idx", "Import MNIST IDX files as a dataset");
  std::string images_path, labels_path, digits_str;
  std::optional<std::size_t> limit;
  std::uint64_t split_seed = 0;
  ingest->add_option("--images", images_path, "IDX3 image file")->required()->check(CLI::ExistingFile);
  ingest->add_option("--labels", labels_path, "IDX1 label file")->check(CLI::ExistingFile);
  ingest->add_option("--digits", digits_str, "Comma-separated labels to keep");
  ingest->add_option("--limit", limit, "Keep at most this many images");
  ingest->add_option("--split-seed", split_seed, "Train/test split seed");

  // draw-import
  auto* draw = app.add_subcommand("draw-import", "Rasterize recorded strokes into a dataset");
  std::string strokes_path;
  int digit_a = 0, digit_b = 1;
  std::optional<std::size_t> per_digit;
  draw->add_option("strokes", strokes_path, "JSON with strokes_a and strokes_b")->required()->check(CLI::ExistingFile);
  draw->add_option("--digit-a", digit_a, "Label of the first digit")->capture_default_str();
  draw->add_option("--digit-b", digit_b, "Label of the second digit")->capture_default_str();
  draw->add_option("--num-images-per-digit", per_digit, "Drawings used per digit");
  draw->add_option("--split-seed", split_seed, "Train/test split seed");

  // train
  auto* train_cmd = app.add_subcommand("train", "Train or fine-tune a model on a dataset");
  std::string dataset_id, model_id, config_path;
  std::optional<int> epochs, freeze;
  std::optional<std::size_t> batch, hidden, latent;
  std::optional<double> lr;
  std::optional<std::uint64_t> seed;
  train_cmd->add_option("--dataset", dataset_id, "Dataset id")->required();
  train_cmd->add_option("--model", model_id, "Existing model to continue training (new model otherwise)");
  train_cmd->add_option("--config", config_path, "TrainConfig JSON file")->check(CLI::ExistingFile);
  train_cmd->add_option("--epochs", epochs);
  train_cmd->add_option("--batch-size", batch);
  train_cmd->add_option("--learning-rate", lr);
  train_cmd->add_option("--seed", seed);
  train_cmd->add_option("--hidden-dim", hidden);
  train_cmd->add_option("--latent-dim", latent);
  train_cmd->add_option("--freeze-up-to", freeze, "Freeze the encoder layers up to this index");

  // interpolate
  auto* interp = app.add_subcommand("interpolate", "Render a latent interpolation as a GIF");
  std::string out_path, strip_path;
  int num_images = 10, delay = kDefaultFrameDelayCs;
  bool gif_only = false;
  interp->add_option("--model", model_id, "Model id")->required();
  interp->add_option("--dataset", dataset_id, "Dataset for the endpoints (default: the model's)");
  interp->add_option("--digit-a", digit_a, "First endpoint digit")->capture_default_str();
  interp->add_option("--digit-b", digit_b, "Second endpoint digit")->capture_default_str();
  interp->add_option("--num-images", num_images, "Frames along the line")->capture_default_str();
  interp->add_option("--frame-delay-cs", delay, "GIF frame delay")->capture_default_str();
  interp->add_flag("--show-gif-only", gif_only, "Skip the PGM strip of frames");
  interp->add_option("--out", out_path, "GIF output path")->required();
  interp->add_option("--strip", strip_path, "PGM strip output path (default: next to --out)");

  // export-gif
  auto* export_cmd = app.add_subcommand("export-gif", "Write stored media, or dataset images as a GIF");
  std::string media_id;
  std::size_t count = 10;
  auto* media_opt = export_cmd->add_option("--media", media_id, "Media id");
  auto* ds_opt = export_cmd->add_option("--dataset", dataset_id, "Dataset id");
  media_opt->excludes(ds_opt);
  export_cmd->add_option("--count", count, "Dataset images to include")->capture_default_str();
  export_cmd->add_option("--frame-delay-cs", delay)->capture_default_str();
  export_cmd->add_option("--out", out_path, "Output path")->required();

  // level-check
  auto* check = app.add_subcommand("level-check", "Check that levels are solvable");
  std::vector<std::string> level_paths;
  check->add_option("levels", level_paths, "Level files or directories")->required();

  // serve
  auto* serve = app.add_subcommand("serve", "Run the HTTP service");
  std::string host = "127.0.0.1", levels_dir = LVAE_DEFAULT_LEVELS_DIR;
  std::optional<int> port;
  int workers = 1;
  serve->add_option("--host", host)->capture_default_str();
  serve->add_option("--port", port, "Port (default: LVAE_PORT or 8080)");
  serve->add_option("--workers", workers, "Training worker threads")->capture_default_str();
  serve->add_option("--levels", levels_dir, "Level directory")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*serve) {
      service::Service svc({g.store, levels_dir, workers});
      const int p = port ? *port : service::port_from_env();
      emit(g, {{"host", host}, {"port", p}}, "serving on http://" + host + ":" + std::to_string(p));
      std::cout.flush();
      if (!svc.listen(host, p)) throw std::runtime_error("cannot listen on port " + std::to_string(p));
      return 0;
    }

    if (*check) {
      std::vector<fs::path> files;
      for (const auto& p : level_paths) {
        if (fs::is_directory(p)) {
          for (const auto& e : fs::directory_iterator(p))
            if (e.path().extension() == ".json") files.push_back(e.path());
        } else {
          files.push_back(p);
        }
      }
      std::sort(files.begin(), files.end());
      bool all = true;
      json out = json::array();
      for (const auto& f : files) {
        const auto level = shadow::load_level(f);
        const auto sol = shadow::solve(level);
        all &= bool(sol);
        json entry = {{"file", f.string()}, {"level", level.name}, {"solvable", bool(sol)}};
        if (sol) entry["cells"] = sol->object.cells;
        out.push_back(entry);
        if (!g.json_out) std::cout << f.string() << ": " << (sol ? "solvable" : "unsolvable") << "\n";
      }
      if (g.json_out) std::cout << out.dump() << "\n";
      return all ? 0 : 1;
    }

    service::Store store(g.store);

    if (*ingest) {
      const auto images = read_file(images_path);
      DigitDataset ds;
      if (!labels_path.empty()) {
        const auto labels = read_file(labels_path);
        ds = parse_idx(images, std::span<const std::uint8_t>(labels), split_seed);
      } else {
        ds = parse_idx(images, std::nullopt, split_seed);
      }
      const auto digits = parse_digits(digits_str);
      if (!digits.empty() || limit) ds = select_digits(ds, digits, limit, split_seed);
      const auto m = store.put_dataset(ds);
      emit(g, m, m.id + " (" + std::to_string(m.count) + " images)");
    } else if (*draw) {
      const json j = read_json_file(strokes_path);
      std::vector<StrokeSet> a, b;
      try {
        a = j.at("strokes_a").get<std::vector<StrokeSet>>();
        b = j.at("strokes_b").get<std::vector<StrokeSet>>();
      } catch (const json::exception& e) {
        throw DataError(DataErrorReason::invalid_strokes, e.what());
      }
      const auto n = per_digit.value_or(std::min(a.size(), b.size()));
      const auto ds = build_drawn_dataset(a, b, n, digit_a, digit_b, split_seed);
      const auto m = store.put_dataset(ds);
      json out = m;
      out["warning"] = ds.split.warning;
      if (ds.split.warning && !g.json_out)
        std::cerr << "warning: too few drawings for a test split, all go to training\n";
      emit(g, out, m.id + " (" + std::to_string(m.count) + " images)");
    } else if (*train_cmd) {
      TrainConfig cfg;
      if (!config_path.empty()) cfg = read_json_file(config_path).get<TrainConfig>();
      if (epochs) cfg.epochs = *epochs;
      if (batch) cfg.batch_size = *batch;
      if (lr) cfg.learning_rate = *lr;
      if (seed) cfg.seed = *seed;
      if (hidden) cfg.hidden_dim = *hidden;
      if (latent) cfg.latent_dim = *latent;
      if (freeze) cfg.freeze_up_to = *freeze;
      cfg.validate();
      const auto data = store.dataset(dataset_id);
      const bool existing = !model_id.empty();
      VaeModel model = existing ? store.model(model_id) : VaeModel();
      const std::string id = existing ? model_id : store.new_id("v");

      std::signal(SIGINT, [](int) { g_interrupted = true; });
      const auto report = train(
          model, data, cfg,
          [&](const EpochMetrics& m) {
            if (g.json_out) {
              std::cout << json{{"type", "epoch"}, {"metrics", m}}.dump() << "\n";
            } else {
              std::cout << "epoch " << m.epoch << "  loss " << m.train_total;
              if (m.test_total) std::cout << "  test " << *m.test_total;
              std::cout << "\n";
            }
            std::cout.flush();
          },
          &g_interrupted);
      // Zero epochs on an existing model leaves its files alone.
      if (!(existing && cfg.epochs == 0)) {
        json meta = {{"id", id},
                     {"dataset_id", dataset_id},
                     {"config", cfg},
                     {"hidden_dim", model.hidden_dim()},
                     {"latent_dim", model.latent_dim()},
                     {"report", report},
                     {"created_at", utc_timestamp()}};
        if (existing) meta["base_model_id"] = model_id;
        store.put_model(id, model, meta);
      }
      emit(g, {{"type", "end"}, {"model_id", id}, {"epochs", report.epochs.size()}}, "model " + id);
    } else if (*interp) {
      const auto model = store.model(model_id);
      if (dataset_id.empty()) dataset_id = store.model_meta(model_id).at("dataset_id").get<std::string>();
      const auto ds = store.dataset(dataset_id);
      InterpolationSpec spec{Endpoint::image(digit_image(ds, digit_a)),
                             Endpoint::image(digit_image(ds, digit_b)), num_images, gif_only,
                             delay};
      spec.validate();
      const auto frames = interpolate(model, spec);
      write_file(out_path, encode_gif(frames, spec.frame_delay_cs));
      json out = {{"gif", out_path}, {"frames", frames.size()}};
      std::string text = out_path + " (" + std::to_string(frames.size()) + " frames)";
      if (!gif_only) {
        if (strip_path.empty()) strip_path = fs::path(out_path).replace_extension(".pgm").string();
        write_file(strip_path, write_pgm(tile(frames, frames.size())));
        out["strip"] = strip_path;
        text += ", " + strip_path;
      }
      emit(g, out, text);
    } else if (*export_cmd) {
      std::vector<std::uint8_t> bytes;
      if (!media_id.empty()) {
        bytes = store.media(media_id).bytes;
      } else if (!dataset_id.empty()) {
        const auto ds = store.dataset(dataset_id);
        FrameSequence frames;
        for (std::size_t i = 0; i < std::min(count, ds.size()); ++i)
          frames.push_back(to_gray(ds.images.row(i)));
        if (frames.empty()) throw ConfigError("nothing to export");
        bytes = encode_gif(frames, delay);
      } else {
        throw ConfigError("export-gif needs --media or --dataset");
      }
      write_file(out_path, bytes);
      emit(g, {{"out", out_path}, {"bytes", bytes.size()}}, out_path);
    }
  } catch (const std::exception& e) {
    if (g.json_out) std::cout << json{{"error", e.what()}, {"reason", reason_of(e)}}.dump() << "\n";
    std::cerr << "error (" << reason_of(e) << "): " << e.what() << "\n";
    return 1;
  }
  return 0;
}
