#include <sstream>

#include "lvae/shadow.hpp"

namespace lvae::shadow {

std::string to_string(Rejection r) {
  return r == Rejection::occupied ? "occupied" : "out_of_bounds";
}

std::uint64_t splitmix64(std::uint64_t seed, std::uint64_t draw) {
  std::uint64_t z = seed + (draw + 1) * 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

GameSession::GameSession(Level level, std::uint64_t seed)
    : level_(std::move(level)), seed_(seed) {
  level_.validate();
  const int count = level_.variant == Variant::ae ? 1 : 3;
  VoxelObject start{{level_.initial_cells.begin(), level_.initial_cells.end()},
                    Orientation::identity()};
  objects_.assign(count, start);
  matched_.assign(level_.targets.size(), false);
}

VoxelObject& GameSession::object_at(int index) {
  if (index < 0 || index >= int(objects_.size()))
    throw ShadowError(ShadowError::Kind::index,
                      "object index " + std::to_string(index) + " out of range");
  return objects_[index];
}

bool GameSession::solved() const {
  return std::all_of(matched_.begin(), matched_.end(), [](bool m) { return m; });
}

MoveResult GameSession::move_cube(int object, Cell from, Cell to) {
  VoxelObject& obj = object_at(object);
  if (mode_ != Mode::encoder)
    throw ShadowError(ShadowError::Kind::mode, "cubes can only be moved in encoder mode");
  if (!obj.cells.count(from)) throw ShadowError(ShadowError::Kind::no_cube, "no cube at source cell");
  Action a;
  a.op = "move";
  a.object = object;
  a.from = from;
  a.to = to;
  log_.push_back(a);
  if (!in_bounds(to)) return {Rejection::out_of_bounds};
  if (obj.cells.count(to)) return {Rejection::occupied};
  obj.cells.erase(from);
  obj.cells.insert(to);
  return {};
}

void GameSession::rotate(int object, Axis axis, int quarter_turns) {
  VoxelObject& obj = object_at(object);
  obj.orientation = Orientation::quarter_turn(axis, quarter_turns) * obj.orientation;
  Action a;
  a.op = "rotate";
  a.object = object;
  a.axis = axis;
  a.turns = quarter_turns;
  log_.push_back(a);
}

ShadowMask GameSession::cast_shadow() {
  if (mode_ != Mode::decoder)
    throw ShadowError(ShadowError::Kind::mode, "shadows can only be cast in decoder mode");
  const int pick =
      level_.variant == Variant::ae ? 0 : static_cast<int>(splitmix64(seed_, casts_) % 3);
  ++casts_;
  last_cast_object_ = pick;
  ShadowMask m = objects_[pick].shadow();
  emitted_.push_back(m);
  if (emitted_.size() >= kShadowsPerRound) timer_running_ = false;
  log_.push_back(Action{.op = "cast"});
  return m;
}

void GameSession::set_mode(Mode m) {
  if (m == Mode::encoder && mode_ == Mode::decoder) {
    emitted_.clear();
    timer_running_ = true;
  }
  mode_ = m;
  log_.push_back(Action{.op = "mode", .mode = m});
}

bool GameSession::check_match(int target) {
  if (target < 0 || target >= int(level_.targets.size()))
    throw ShadowError(ShadowError::Kind::index,
                      "target index " + std::to_string(target) + " out of range");
  const ShadowMask& want = level_.targets[target];
  const bool ok = std::all_of(objects_.begin(), objects_.end(),
                              [&](const VoxelObject& o) { return o.shadow() == want; });
  matched_[target] = ok;
  log_.push_back(Action{.op = "check", .target = target});
  return ok;
}

void GameSession::tick(int cs) {
  if (cs < 0) throw std::invalid_argument("tick must not be negative");
  if (timer_running_) timer_cs_ += cs;
  log_.push_back(Action{.op = "tick", .cs = cs});
}

void GameSession::apply(const Action& a) {
  if (a.op == "move") {
    move_cube(a.object, a.from, a.to);
  } else if (a.op == "rotate") {
    rotate(a.object, a.axis, a.turns);
  } else if (a.op == "cast") {
    cast_shadow();
  } else if (a.op == "mode") {
    set_mode(a.mode);
  } else if (a.op == "check") {
    check_match(a.target);
  } else if (a.op == "tick") {
    tick(a.cs);
  } else {
    throw std::invalid_argument("unknown action '" + a.op + "'");
  }
}

nlohmann::json GameSession::state() const {
  nlohmann::json objects = nlohmann::json::array();
  for (const auto& o : objects_)
    objects.push_back({{"cells", o.cells}, {"orientation", o.orientation}, {"shadow", o.shadow()}});
  return {{"level", level_.name},
          {"variant", to_string(level_.variant)},
          {"mode", to_string(mode_)},
          {"objects", std::move(objects)},
          {"matched", matched_},
          {"solved", solved()},
          {"emitted_shadows", emitted_},
          {"timer_cs", timer_cs_},
          {"timer_running", timer_running_},
          {"rng_seed", seed_},
          {"casts", casts_},
          {"last_cast_object",
           last_cast_object_ ? nlohmann::json(*last_cast_object_) : nlohmann::json()}};
}

bool GameSession::same_state(const GameSession& other) const {
  return level_ == other.level_ && state() == other.state();
}

GameSession replay(const Level& level, std::uint64_t seed, const std::vector<Action>& log) {
  GameSession s(level, seed);
  for (const auto& a : log) s.apply(a);
  return s;
}

void to_json(nlohmann::json& j, const Action& a) {
  j = {{"op", a.op}};
  if (a.op == "move") {
    j["object"] = a.object;
    j["from"] = a.from;
    j["to"] = a.to;
  } else if (a.op == "rotate") {
    j["object"] = a.object;
    j["axis"] = to_string(a.axis);
    j["turns"] = a.turns;
  } else if (a.op == "mode") {
    j["mode"] = to_string(a.mode);
  } else if (a.op == "check") {
    j["target"] = a.target;
  } else if (a.op == "tick") {
    j["cs"] = a.cs;
  }
}

void from_json(const nlohmann::json& j, Action& a) {
  a = Action{};
  a.op = j.at("op").get<std::string>();
  if (a.op == "move") {
    a.object = j.value("object", 0);
    a.from = j.at("from").get<Cell>();
    a.to = j.at("to").get<Cell>();
  } else if (a.op == "rotate") {
    a.object = j.value("object", 0);
    a.axis = axis_from_string(j.at("axis").get<std::string>());
    a.turns = j.value("turns", 1);
  } else if (a.op == "mode") {
    a.mode = mode_from_string(j.at("mode").get<std::string>());
  } else if (a.op == "check") {
    a.target = j.at("target").get<int>();
  } else if (a.op == "tick") {
    a.cs = j.at("cs").get<int>();
  } else if (a.op != "cast") {
    throw std::invalid_argument("unknown action '" + a.op + "'");
  }
}

std::string write_action_log(const std::vector<Action>& log) {
  std::string out;
  for (const auto& a : log) out += nlohmann::json(a).dump() + "\n";
  return out;
}

std::vector<Action> read_action_log(const std::string& text) {
  std::vector<Action> log;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);)
    if (line.find_first_not_of(" \t\r") != std::string::npos)
      log.push_back(nlohmann::json::parse(line).get<Action>());
  return log;
}

}  // namespace lvae::shadow
