#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

namespace lvae::shadow {

// Cells live in [-kBound, kBound]^3.
inline constexpr int kBound = 4;
// The solver searches this smaller box.
inline constexpr int kSolveBound = 2;

struct Cell {
  int x = 0, y = 0, z = 0;
  auto operator<=>(const Cell&) const = default;
};

bool in_bounds(const Cell& c, int bound = kBound);

enum class Axis { x, y, z };

std::string to_string(Axis a);
Axis axis_from_string(const std::string& s);

// A proper rotation with entries in {-1, 0, 1}.
struct Orientation {
  std::array<std::array<int, 3>, 3> m{{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};

  static Orientation identity() { return {}; }
  // Right-handed quarter turns about `axis`; negative counts turn backwards.
  static Orientation quarter_turn(Axis axis, int turns = 1);

  Orientation operator*(const Orientation& rhs) const;
  Orientation transposed() const;
  Cell apply(const Cell& c) const;
  int determinant() const;
  bool valid() const;  // orthogonal, det +1, entries in {-1, 0, 1}

  auto operator<=>(const Orientation&) const = default;
};

// The 24 orientations reachable from the identity by quarter turns.
const std::vector<Orientation>& all_orientations();

// Boolean grid cropped to its bounding box. Row 0 is the top (largest y).
struct ShadowMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> bits;  // row-major, 0/1

  bool at(int row, int col) const { return bits[static_cast<std::size_t>(row) * width + col]; }
  bool empty() const { return bits.empty(); }
  int ink() const;

  // Rows of '0'/'1'; throws std::invalid_argument on ragged or non-binary rows
  // and crops away blank margins.
  static ShadowMask from_rows(const std::vector<std::string>& rows);
  std::vector<std::string> to_rows() const;

  bool operator==(const ShadowMask&) const = default;
};

// Rotates each cell, drops z, crops to the bounding box of the (x, y) hits.
ShadowMask project(const std::set<Cell>& cells, const Orientation& o);

struct VoxelObject {
  std::set<Cell> cells;
  Orientation orientation;

  ShadowMask shadow() const { return project(cells, orientation); }
  bool operator==(const VoxelObject&) const = default;
};

enum class Variant { ae, vae };
enum class Mode { encoder, decoder };

std::string to_string(Variant v);
std::string to_string(Mode m);
Variant variant_from_string(const std::string& s);
Mode mode_from_string(const std::string& s);

class ShadowError : public std::runtime_error {
 public:
  enum class Kind { mode, no_cube, index, level };
  ShadowError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

struct Level {
  std::string name;
  Variant variant = Variant::ae;
  int cube_budget = 0;
  std::vector<ShadowMask> targets;
  std::vector<Cell> initial_cells;

  // Throws ShadowError(level) when the level is malformed.
  void validate() const;
  bool operator==(const Level&) const = default;
};

Level load_level(const std::filesystem::path& path);
// Every *.json level in `dir`, sorted by file name.
std::vector<Level> load_levels(const std::filesystem::path& dir);

enum class Rejection { occupied, out_of_bounds };
std::string to_string(Rejection r);

struct MoveResult {
  std::optional<Rejection> rejection;
  bool accepted() const { return !rejection; }
};

// One recorded player action. `op` is one of move, rotate, cast, mode,
// check, tick.
struct Action {
  std::string op;
  int object = 0;
  Cell from{};
  Cell to{};
  Axis axis = Axis::x;
  int turns = 0;
  Mode mode = Mode::encoder;
  int target = 0;
  int cs = 0;

  bool operator==(const Action&) const = default;
};

// The draw-th output of a SplitMix64 stream started at `seed`.
std::uint64_t splitmix64(std::uint64_t seed, std::uint64_t draw);

inline constexpr int kShadowsPerRound = 3;

class GameSession {
 public:
  GameSession(Level level, std::uint64_t seed);

  const Level& level() const { return level_; }
  Mode mode() const { return mode_; }
  const std::vector<VoxelObject>& objects() const { return objects_; }
  const std::vector<bool>& matched() const { return matched_; }
  const std::vector<ShadowMask>& emitted_shadows() const { return emitted_; }
  long long timer_cs() const { return timer_cs_; }
  bool timer_running() const { return timer_running_; }
  std::uint64_t rng_seed() const { return seed_; }
  std::uint64_t casts() const { return casts_; }
  std::optional<int> last_cast_object() const { return last_cast_object_; }
  bool solved() const;
  const std::vector<Action>& log() const { return log_; }

  // Cells are in the object's own (unrotated) frame.
  MoveResult move_cube(int object, Cell from, Cell to);
  void rotate(int object, Axis axis, int quarter_turns);
  ShadowMask cast_shadow();
  void set_mode(Mode m);
  bool check_match(int target);
  // Advances the timer while it runs.
  void tick(int cs);

  // Applies a recorded action through the public operations above.
  void apply(const Action& a);

  // Full observable state, log excluded.
  nlohmann::json state() const;
  bool same_state(const GameSession& other) const;

 private:
  VoxelObject& object_at(int index);

  Level level_;
  std::uint64_t seed_;
  Mode mode_ = Mode::encoder;
  std::vector<VoxelObject> objects_;
  std::vector<bool> matched_;
  std::vector<ShadowMask> emitted_;
  long long timer_cs_ = 0;
  bool timer_running_ = true;
  std::uint64_t casts_ = 0;
  std::optional<int> last_cast_object_;
  std::vector<Action> log_;
};

GameSession replay(const Level& level, std::uint64_t seed, const std::vector<Action>& log);

// JSON lines, one action per line.
std::string write_action_log(const std::vector<Action>& log);
std::vector<Action> read_action_log(const std::string& text);

struct Solution {
  VoxelObject object;                     // orientation is the identity
  std::vector<Orientation> orientations;  // one per target
};

// Finds cube_budget cells in [-2, 2]^3 whose shadows under some orientation
// equal every target, or nullopt.
std::optional<Solution> solve(const Level& level);

void to_json(nlohmann::json& j, const Cell& c);
void from_json(const nlohmann::json& j, Cell& c);
void to_json(nlohmann::json& j, const Orientation& o);
void to_json(nlohmann::json& j, const ShadowMask& m);
void to_json(nlohmann::json& j, const Level& l);
void from_json(const nlohmann::json& j, Level& l);
void to_json(nlohmann::json& j, const Action& a);
void from_json(const nlohmann::json& j, Action& a);

}  // namespace lvae::shadow
