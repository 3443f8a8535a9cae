#include <cstdlib>

#include "httplib.h"
#include "lvae/errors.hpp"
#include "lvae/media.hpp"
#include "lvae/service.hpp"

namespace lvae::service {

using nlohmann::json;

namespace {

constexpr const char* kJson = "application/json";
constexpr const char* kNdjson = "application/x-ndjson";

struct HttpError : std::runtime_error {
  HttpError(int status, std::string reason, const std::string& what)
      : std::runtime_error(what), status(status), reason(std::move(reason)) {}
  int status;
  std::string reason;
};

void send(httplib::Response& res, const json& body, int status = 200) {
  res.status = status;
  res.set_content(body.dump(), kJson);
}

void send_error(httplib::Response& res, int status, const std::string& reason,
                const std::string& message) {
  send(res, {{"error", message}, {"reason", reason}}, status);
}

std::string shadow_reason(shadow::ShadowError::Kind k) {
  switch (k) {
    case shadow::ShadowError::Kind::mode: return "mode";
    case shadow::ShadowError::Kind::no_cube: return "no_cube";
    case shadow::ShadowError::Kind::index: return "index";
    case shadow::ShadowError::Kind::level: return "level";
  }
  return "shadow";
}

void map_exception(httplib::Response& res, std::exception_ptr ep) {
  try {
    std::rethrow_exception(ep);
  } catch (const HttpError& e) {
    send_error(res, e.status, e.reason, e.what());
  } catch (const NotFound& e) {
    send_error(res, 404, "not_found", e.what());
  } catch (const Conflict& e) {
    send_error(res, 409, e.reason(), e.what());
  } catch (const DataError& e) {
    send_error(res, 422, to_string(e.reason()), e.what());
  } catch (const shadow::ShadowError& e) {
    send_error(res, e.kind() == shadow::ShadowError::Kind::mode ? 409 : 422,
               shadow_reason(e.kind()), e.what());
  } catch (const DimensionError& e) {
    send_error(res, 422, "dimension", e.what());
  } catch (const ConfigError& e) {
    send_error(res, 422, "invalid_config", e.what());
  } catch (const ModelError& e) {
    send_error(res, 422, "model", e.what());
  } catch (const json::parse_error& e) {
    send_error(res, 400, "bad_json", e.what());
  } catch (const json::exception& e) {
    send_error(res, 422, "invalid_request", e.what());
  } catch (const std::invalid_argument& e) {
    send_error(res, 422, "invalid_request", e.what());
  } catch (const std::exception& e) {
    send_error(res, 500, "internal", e.what());
  } catch (...) {
    send_error(res, 500, "internal", "unknown error");
  }
}

json body_of(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  json j = json::parse(req.body);
  if (!j.is_object()) throw HttpError(400, "bad_json", "request body must be a JSON object");
  return j;
}

std::vector<std::uint8_t> bytes_of(const std::string& s) { return {s.begin(), s.end()}; }

Tensor image_tensor(const json& pixels) {
  auto v = pixels.get<std::vector<double>>();
  if (v.size() != kImagePixels)
    throw DimensionError("image has " + std::to_string(v.size()) + " pixels, expected " +
                         std::to_string(kImagePixels));
  return Tensor({kImagePixels}, std::move(v));
}

json manifest_json(const DatasetManifest& m) { return m; }

json job_json(const JobRecord& r) { return r.to_json(); }

}  // namespace

int port_from_env(int fallback) {
  const char* v = std::getenv("LVAE_PORT");
  if (!v || !*v) return fallback;
  char* end = nullptr;
  const long p = std::strtol(v, &end, 10);
  if (*end || p < 0 || p > 65535) throw ConfigError(std::string("bad LVAE_PORT '") + v + "'");
  return int(p);
}

Service::Service(ServiceConfig cfg)
    : cfg_(std::move(cfg)),
      store_(cfg_.store_dir),
      jobs_(store_, cfg_.workers),
      http_(std::make_unique<httplib::Server>()) {
  if (!cfg_.levels_dir.empty() && std::filesystem::is_directory(cfg_.levels_dir))
    levels_ = shadow::load_levels(cfg_.levels_dir);
  for (const auto& rec : store_.sessions()) {
    sessions_[rec.id] = std::make_shared<LiveSession>(shadow::replay(rec.level, rec.seed, rec.log));
  }
  routes();
}

Service::~Service() { stop(); }

int Service::start(const std::string& host, int port) {
  const int bound = port == 0 ? http_->bind_to_any_port(host) : (http_->bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port));
  thread_ = std::thread([this] { http_->listen_after_bind(); });
  http_->wait_until_ready();
  return bound;
}

bool Service::listen(const std::string& host, int port) { return http_->listen(host, port); }

void Service::stop() {
  if (http_) http_->stop();
  if (thread_.joinable()) thread_.join();
}

std::shared_ptr<Service::LiveSession> Service::session(const std::string& id) {
  std::lock_guard lock(sessions_mu_);
  const auto it = sessions_.find(id);
  if (it == sessions_.end()) throw NotFound("no session '" + id + "'");
  return it->second;
}

const shadow::Level& Service::level_by_ref(const json& ref) const {
  if (ref.is_number_integer()) {
    const auto i = ref.get<long long>();
    if (i < 0 || i >= (long long)levels_.size())
      throw NotFound("no level " + std::to_string(i));
    return levels_[std::size_t(i)];
  }
  const auto name = ref.get<std::string>();
  for (const auto& l : levels_)
    if (l.name == name) return l;
  throw NotFound("no level '" + name + "'");
}

json Service::apply_action(const std::string& id, const json& body) {
  auto live = session(id);
  json action = body;
  if (action.value("op", "") == "set_mode") action["op"] = "mode";
  if (action.value("op", "") == "tick")
    throw HttpError(422, "invalid_request", "the timer is driven by the server clock");
  const auto a = action.get<shadow::Action>();

  std::lock_guard lock(live->mu);
  auto& game = live->game;
  // Wall-clock time since the previous action enters the log as a tick, so
  // replaying the log reproduces the timer.
  const auto now = std::chrono::steady_clock::now();
  live->pending_ms +=
      std::chrono::duration_cast<std::chrono::milliseconds>(now - live->last_action).count();
  live->last_action = now;
  if (live->pending_ms >= 10) {
    game.tick(int(live->pending_ms / 10));
    live->pending_ms %= 10;
  }

  json result = json::object();
  std::optional<std::exception_ptr> failure;
  try {
    if (a.op == "move") {
      const auto r = game.move_cube(a.object, a.from, a.to);
      result["accepted"] = r.accepted();
      if (r.rejection) result["rejection"] = shadow::to_string(*r.rejection);
    } else if (a.op == "cast") {
      result["shadow"] = game.cast_shadow();
      if (game.last_cast_object()) result["object"] = *game.last_cast_object();
    } else if (a.op == "check") {
      result["matched"] = game.check_match(a.target);
    } else {
      game.apply(a);
    }
  } catch (...) {
    failure = std::current_exception();
  }
  store_.put_session({id, game.level(), game.rng_seed(), game.log()});
  if (failure) std::rethrow_exception(*failure);
  return {{"id", id}, {"state", game.state()}, {"result", result}};
}

void Service::routes() {
  auto& s = *http_;
  s.set_exception_handler(
      [](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
        map_exception(res, ep);
      });
  s.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
    if (res.body.empty())
      send_error(res, res.status, res.status == 404 ? "not_found" : "http_" + std::to_string(res.status),
                 "no route for " + req.method + " " + req.path);
  });
  s.set_post_routing_handler([](const httplib::Request&, httplib::Response& res) {
    res.set_header("Access-Control-Allow-Origin", "*");
  });
  s.Options(".*", [](const httplib::Request&, httplib::Response& res) {
    res.set_header("Access-Control-Allow-Methods", "GET, POST, DELETE, OPTIONS");
    res.set_header("Access-Control-Allow-Headers", "Content-Type");
    res.status = 204;
  });

  s.Get("/health", [](const httplib::Request&, httplib::Response& res) {
    send(res, {{"status", "ok"}});
  });

  // --- datasets ---------------------------------------------------------

  s.Post("/datasets", [this](const httplib::Request& req, httplib::Response& res) {
    DigitDataset ds;
    if (req.is_multipart_form_data()) {
      if (!req.has_file("images"))
        throw DataError(DataErrorReason::io, "multipart upload needs an 'images' part");
      const auto images = bytes_of(req.get_file_value("images").content);
      std::optional<std::vector<std::uint8_t>> labels;
      if (req.has_file("labels")) labels = bytes_of(req.get_file_value("labels").content);
      auto field = [&](const char* key) -> std::optional<std::string> {
        if (!req.has_file(key)) return std::nullopt;
        return req.get_file_value(key).content;
      };
      const std::uint64_t seed = field("split_seed") ? std::stoull(*field("split_seed")) : 0;
      if (labels)
        ds = parse_idx(images, std::span<const std::uint8_t>(*labels), seed);
      else
        ds = parse_idx(images, std::nullopt, seed);
      std::vector<int> digits;
      if (const auto d = field("digits"))
        for (const auto& v : json::parse(*d)) digits.push_back(v.get<int>());
      std::optional<std::size_t> limit;
      if (const auto l = field("limit")) limit = std::stoull(*l);
      if (!digits.empty() || limit) ds = select_digits(ds, digits, limit, seed);
    } else {
      const json j = body_of(req);
      auto strokes = [&](const char* key) {
        try {
          return j.at(key).get<std::vector<StrokeSet>>();
        } catch (const json::exception& e) {
          throw DataError(DataErrorReason::invalid_strokes, std::string(key) + ": " + e.what());
        }
      };
      const auto a = strokes("strokes_a");
      const auto b = strokes("strokes_b");
      const auto n = j.value("num_images_per_digit", std::min(a.size(), b.size()));
      ds = build_drawn_dataset(a, b, n, j.value("digit_a", 0), j.value("digit_b", 1),
                               j.value("split_seed", std::uint64_t{0}));
    }
    const auto manifest = store_.put_dataset(ds);
    json out = manifest;
    out["warning"] = ds.split.warning;
    send(res, out, 201);
  });

  s.Get("/datasets", [this](const httplib::Request&, httplib::Response& res) {
    json out = json::array();
    for (const auto& m : store_.datasets()) out.push_back(manifest_json(m));
    send(res, out);
  });

  s.Get(R"(/datasets/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
    DatasetManifest m;
    const auto ds = store_.dataset(req.matches[1], &m);
    json out = m;
    out["labels"] = ds.labels;
    send(res, out);
  });

  s.Get(R"(/datasets/([^/]+)/images/(\d+))",
        [this](const httplib::Request& req, httplib::Response& res) {
          const auto ds = store_.dataset(req.matches[1]);
          const auto i = std::stoull(req.matches[2]);
          if (i >= ds.size()) throw NotFound("no image " + std::to_string(i));
          const auto pgm = write_pgm(to_gray(ds.images.row(i)));
          res.set_content(std::string(pgm.begin(), pgm.end()), "image/x-portable-graymap");
        });

  // --- training -----------------------------------------------------------

  s.Post("/train", [this](const httplib::Request& req, httplib::Response& res) {
    const json j = body_of(req);
    const auto cfg = j.value("config", json::object()).get<TrainConfig>();
    std::optional<std::string> base;
    if (j.contains("model_id") && !j["model_id"].is_null()) base = j["model_id"].get<std::string>();
    const auto rec = jobs_.submit(j.at("dataset_id").get<std::string>(), cfg, base);
    send(res, {{"job_id", rec.id}, {"model_id", rec.model_id}, {"state", to_string(rec.state)}},
         202);
  });

  s.Get("/jobs", [this](const httplib::Request&, httplib::Response& res) {
    json out = json::array();
    for (const auto& r : jobs_.list()) out.push_back(job_json(r));
    send(res, out);
  });

  s.Get(R"(/jobs/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
    send(res, job_json(jobs_.get(req.matches[1])));
  });

  s.Delete(R"(/jobs/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
    const auto rec = jobs_.cancel(req.matches[1]);
    send(res, job_json(rec));
  });

  // One JSON object per line: each epoch's metrics, then a final line with
  // the terminal state.
  s.Get(R"(/jobs/([^/]+)/events)", [this](const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.matches[1];
    jobs_.get(id);
    auto next = std::make_shared<std::size_t>(0);
    res.set_chunked_content_provider(kNdjson, [this, id, next](std::size_t, httplib::DataSink& sink) {
      auto [events, terminal] = jobs_.wait_events(id, *next, std::chrono::milliseconds(500));
      for (const auto& e : events) {
        const std::string line = json{{"type", "epoch"}, {"metrics", e}}.dump() + "\n";
        if (!sink.write(line.data(), line.size())) return false;
      }
      *next += events.size();
      if (terminal) {
        // Events may have landed between the wait and the terminal check.
        auto [rest, _] = jobs_.wait_events(id, *next, std::chrono::milliseconds(0));
        for (const auto& e : rest) {
          const std::string line = json{{"type", "epoch"}, {"metrics", e}}.dump() + "\n";
          if (!sink.write(line.data(), line.size())) return false;
        }
        const auto rec = jobs_.get(id);
        json last = {{"type", "end"}, {"state", to_string(rec.state)}};
        if (rec.error) last["error"] = *rec.error;
        if (rec.report) last["report"] = *rec.report;
        const std::string line = last.dump() + "\n";
        sink.write(line.data(), line.size());
        sink.done();
      } else if (!sink.is_writable()) {
        return false;
      }
      return true;
    });
  });

  // --- models and media -----------------------------------------------------

  s.Get("/models", [this](const httplib::Request&, httplib::Response& res) {
    send(res, store_.models());
  });

  s.Get(R"(/models/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
    send(res, store_.model_meta(req.matches[1]));
  });

  s.Get(R"(/models/([^/]+)/checkpoint)",
        [this](const httplib::Request& req, httplib::Response& res) {
          const auto bytes = checkpoint_bytes(store_.model(req.matches[1]));
          res.set_content(std::string(bytes.begin(), bytes.end()), "application/octet-stream");
        });

  // Endpoint forms: {"image": [784]}, {"latent": [L]}, {"strokes": {...}},
  // {"dataset_id", "index"} or {"dataset_id", "digit"} (first image with that label).
  auto endpoint = [this](const json& j) -> Endpoint {
    if (j.contains("latent")) {
      auto v = j["latent"].get<std::vector<double>>();
      const auto n = v.size();
      return Endpoint::latent(Tensor({n}, std::move(v)));
    }
    if (j.contains("image")) return Endpoint::image(image_tensor(j["image"]));
    if (j.contains("strokes")) {
      StrokeSet s;
      try {
        s = j["strokes"].get<StrokeSet>();
      } catch (const json::exception& e) {
        throw DataError(DataErrorReason::invalid_strokes, e.what());
      }
      Tensor t = rasterize(s);
      return Endpoint::image(Tensor({kImagePixels}, {t.data().begin(), t.data().end()}));
    }
    if (j.contains("dataset_id")) {
      const auto ds = store_.dataset(j["dataset_id"].get<std::string>());
      std::size_t index = 0;
      if (j.contains("digit")) {
        const int digit = j["digit"].get<int>();
        const auto it = std::find(ds.labels.begin(), ds.labels.end(), digit);
        if (it == ds.labels.end()) throw NotFound("no image of digit " + std::to_string(digit));
        index = std::size_t(it - ds.labels.begin());
      } else {
        index = j.value("index", std::size_t{0});
      }
      if (index >= ds.size()) throw NotFound("no image " + std::to_string(index));
      Tensor t = ds.image(index);
      return Endpoint::image(Tensor({kImagePixels}, {t.data().begin(), t.data().end()}));
    }
    throw HttpError(422, "invalid_request", "endpoint needs image, latent, strokes or dataset_id");
  };

  s.Post(R"(/models/([^/]+)/interpolate)",
         [this, endpoint](const httplib::Request& req, httplib::Response& res) {
           const std::string model_id = req.matches[1];
           const json j = body_of(req);
           const auto model = store_.model(model_id);
           auto side = [&](const char* key, const char* digit_key) {
             if (j.contains(key)) return endpoint(j[key]);
             if (j.contains(digit_key) && j.contains("dataset_id"))
               return endpoint({{"dataset_id", j["dataset_id"]}, {"digit", j[digit_key]}});
             throw HttpError(422, "invalid_request", std::string("missing ") + key);
           };
           InterpolationSpec spec;
           spec.a = side("a", "digit_a");
           spec.b = side("b", "digit_b");
           spec.num_images = j.value("num_images", spec.num_images);
           spec.show_gif_only = j.value("show_gif_only", spec.show_gif_only);
           spec.frame_delay_cs = j.value("frame_delay_cs", spec.frame_delay_cs);
           spec.validate();
           const auto frames = interpolate(model, spec);
           const json meta = {{"model_id", model_id}, {"num_images", spec.num_images}};
           json out = {{"model_id", model_id}, {"frames", frames.size()}};
           out["media_id"] = store_.put_media(encode_gif(frames, spec.frame_delay_cs), "image/gif", meta);
           if (!spec.show_gif_only)
             out["strip_media_id"] = store_.put_media(write_pgm(tile(frames, frames.size())),
                                                      "image/x-portable-graymap", meta);
           send(res, out, 201);
         });

  s.Post(R"(/models/([^/]+)/interpolate_2d)",
         [this, endpoint](const httplib::Request& req, httplib::Response& res) {
           const std::string model_id = req.matches[1];
           const json j = body_of(req);
           const auto model = store_.model(model_id);
           const auto& corners = j.at("corners");
           if (!corners.is_array() || corners.size() != 4)
             throw HttpError(422, "invalid_request", "corners needs four endpoints");
           std::array<Tensor, 4> latents;
           for (std::size_t k = 0; k < 4; ++k) latents[k] = endpoint_latent(model, endpoint(corners[k]));
           const int n = j.value("grid_n", 5);
           const Tensor z = interpolate_2d_latents(latents, n);
           const auto frames = to_frames(decode(model, z));
           const auto pgm = write_pgm(tile(frames, std::size_t(n)));
           const std::string id = store_.put_media(
               pgm, "image/x-portable-graymap", {{"model_id", model_id}, {"grid_n", n}});
           send(res, {{"media_id", id}, {"grid_n", n}, {"frames", frames.size()}}, 201);
         });

  s.Get(R"(/media/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
    const auto m = store_.media(req.matches[1]);
    res.set_content(std::string(m.bytes.begin(), m.bytes.end()), m.content_type);
  });

  // --- game -------------------------------------------------------------

  s.Get("/game/levels", [this](const httplib::Request&, httplib::Response& res) {
    send(res, levels_);
  });

  s.Post("/game/sessions", [this](const httplib::Request& req, httplib::Response& res) {
    const json j = body_of(req);
    const json ref = j.value("level", json(0));
    const shadow::Level level = ref.is_object() ? ref.get<shadow::Level>() : level_by_ref(ref);
    const auto seed = j.value("seed", std::uint64_t{0});
    const std::string id = store_.new_id("s");
    auto live = std::make_shared<LiveSession>(shadow::GameSession(level, seed));
    store_.put_session({id, level, seed, {}});
    const json state = live->game.state();
    {
      std::lock_guard lock(sessions_mu_);
      sessions_[id] = std::move(live);
    }
    send(res, {{"id", id}, {"seed", seed}, {"state", state}}, 201);
  });

  s.Get("/game/sessions", [this](const httplib::Request&, httplib::Response& res) {
    std::lock_guard lock(sessions_mu_);
    json out = json::array();
    for (const auto& [id, live] : sessions_) out.push_back(id);
    send(res, out);
  });

  s.Get(R"(/game/sessions/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
    auto live = session(req.matches[1]);
    std::lock_guard lock(live->mu);
    send(res, {{"id", req.matches[1].str()},
               {"seed", live->game.rng_seed()},
               {"state", live->game.state()}});
  });

  s.Get(R"(/game/sessions/([^/]+)/log)",
        [this](const httplib::Request& req, httplib::Response& res) {
          auto live = session(req.matches[1]);
          std::lock_guard lock(live->mu);
          res.set_content(shadow::write_action_log(live->game.log()), kNdjson);
        });

  s.Post(R"(/game/sessions/([^/]+)/actions)",
         [this](const httplib::Request& req, httplib::Response& res) {
           send(res, apply_action(req.matches[1], body_of(req)));
         });
}

}  // namespace lvae::service
