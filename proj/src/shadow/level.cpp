#include <algorithm>
#include <fstream>

#include "lvae/shadow.hpp"

namespace lvae::shadow {

namespace {

[[noreturn]] void bad_level(const std::string& what) {
  throw ShadowError(ShadowError::Kind::level, what);
}

}  // namespace

std::string to_string(Variant v) { return v == Variant::ae ? "AE" : "VAE"; }
std::string to_string(Mode m) { return m == Mode::encoder ? "encoder" : "decoder"; }

Variant variant_from_string(const std::string& s) {
  if (s == "AE") return Variant::ae;
  if (s == "VAE") return Variant::vae;
  throw std::invalid_argument("unknown variant '" + s + "'");
}

Mode mode_from_string(const std::string& s) {
  if (s == "encoder") return Mode::encoder;
  if (s == "decoder") return Mode::decoder;
  throw std::invalid_argument("unknown mode '" + s + "'");
}

void Level::validate() const {
  if (name.empty()) bad_level("level has no name");
  const int side = 2 * kBound + 1;
  if (cube_budget < 1 || cube_budget > side * side * side)
    bad_level(name + ": cube_budget out of range");
  if (int(initial_cells.size()) != cube_budget)
    bad_level(name + ": initial_cells has " + std::to_string(initial_cells.size()) +
              " cubes, budget is " + std::to_string(cube_budget));
  std::set<Cell> unique(initial_cells.begin(), initial_cells.end());
  if (unique.size() != initial_cells.size()) bad_level(name + ": duplicate initial cell");
  for (const Cell& c : initial_cells)
    if (!in_bounds(c)) bad_level(name + ": initial cell out of bounds");
  if (targets.empty()) bad_level(name + ": no targets");
  for (const auto& t : targets) {
    if (t.empty()) bad_level(name + ": empty target");
    if (ShadowMask::from_rows(t.to_rows()) != t) bad_level(name + ": target not cropped");
    if (t.ink() > cube_budget) bad_level(name + ": target needs more cubes than the budget");
  }
}

void to_json(nlohmann::json& j, const Level& l) {
  j = {{"name", l.name},
       {"variant", to_string(l.variant)},
       {"cube_budget", l.cube_budget},
       {"targets", l.targets},
       {"initial_cells", l.initial_cells}};
}

void from_json(const nlohmann::json& j, Level& l) {
  try {
    l.name = j.at("name").get<std::string>();
    l.variant = variant_from_string(j.at("variant").get<std::string>());
    l.cube_budget = j.at("cube_budget").get<int>();
    l.targets.clear();
    for (const auto& rows : j.at("targets"))
      l.targets.push_back(ShadowMask::from_rows(rows.get<std::vector<std::string>>()));
    l.initial_cells = j.at("initial_cells").get<std::vector<Cell>>();
  } catch (const ShadowError&) {
    throw;
  } catch (const std::exception& e) {
    bad_level(std::string("malformed level: ") + e.what());
  }
  l.validate();
}

Level load_level(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) bad_level("cannot read " + path.string());
  try {
    return nlohmann::json::parse(f).get<Level>();
  } catch (const nlohmann::json::parse_error& e) {
    bad_level(path.string() + ": " + e.what());
  }
}

std::vector<Level> load_levels(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir))
    if (entry.path().extension() == ".json") files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  std::vector<Level> levels;
  for (const auto& p : files) levels.push_back(load_level(p));
  return levels;
}

}  // namespace lvae::shadow
