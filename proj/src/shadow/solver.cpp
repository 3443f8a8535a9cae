#include <algorithm>
#include <bitset>
#include <map>

#include "lvae/shadow.hpp"

namespace lvae::shadow {

namespace {

constexpr int kSide = 2 * kSolveBound + 1;
constexpr int kCells = kSide * kSide * kSide;
using CellSet = std::bitset<kCells>;

Cell index_cell(int i) {
  return {i / (kSide * kSide) - kSolveBound, (i / kSide) % kSide - kSolveBound,
          i % kSide - kSolveBound};
}

// One way of laying a target on the wall: the cells allowed to exist, and
// for every inked pixel the line of cells that projects onto it.
struct Placement {
  Orientation orientation;
  CellSet allowed;
  std::vector<CellSet> columns;
};

std::vector<Placement> placements(const ShadowMask& target, bool identity_only) {
  std::vector<Placement> out;
  std::set<std::pair<std::string, std::vector<std::string>>> seen;
  const auto& group = all_orientations();
  for (const Orientation& o : group) {
    if (identity_only && o != Orientation::identity()) continue;
    for (int xoff = -kSolveBound; xoff + target.width - 1 <= kSolveBound; ++xoff)
      for (int ytop = kSolveBound; ytop - (target.height - 1) >= -kSolveBound; --ytop) {
        Placement p{o, {}, std::vector<CellSet>(target.bits.size())};
        for (int i = 0; i < kCells; ++i) {
          const Cell w = o.apply(index_cell(i));
          const int c = w.x - xoff, r = ytop - w.y;
          if (c < 0 || r < 0 || c >= target.width || r >= target.height || !target.at(r, c))
            continue;
          p.allowed.set(i);
          p.columns[static_cast<std::size_t>(r) * target.width + c].set(i);
        }
        std::vector<CellSet> cols;
        for (const auto& col : p.columns)
          if (col.any()) cols.push_back(col);
        p.columns = std::move(cols);
        // Placements that demand the same columns are interchangeable.
        std::vector<std::string> key;
        for (const auto& col : p.columns) key.push_back(col.to_string());
        std::sort(key.begin(), key.end());
        if (seen.insert({p.allowed.to_string(), key}).second) out.push_back(std::move(p));
      }
  }
  return out;
}

class CoverSearch {
 public:
  CoverSearch(const std::vector<const Placement*>& chosen, const CellSet& allowed, int budget)
      : allowed_(allowed), budget_(budget) {
    for (std::size_t t = 0; t < chosen.size(); ++t)
      for (const auto& col : chosen[t]->columns) columns_.push_back({col & allowed, int(t)});
    targets_ = int(chosen.size());
  }

  std::optional<CellSet> run() {
    CellSet picked;
    if (!dfs(picked, 0)) return std::nullopt;
    return picked;
  }

 private:
  struct Column {
    CellSet cells;
    int target;
  };

  bool dfs(CellSet& picked, int count) {
    std::vector<int> open(targets_, 0);
    const Column* best = nullptr;
    std::size_t best_size = kCells + 1;
    for (const auto& col : columns_) {
      if ((col.cells & picked).any()) continue;
      ++open[col.target];
      if (col.cells.count() < best_size) {
        best_size = col.cells.count();
        best = &col;
      }
    }
    if (!best) return true;
    // A cell closes at most one column per target.
    if (count + *std::max_element(open.begin(), open.end()) > budget_) return false;
    for (int i = 0; i < kCells; ++i) {
      if (!best->cells.test(i)) continue;
      picked.set(i);
      if (dfs(picked, count + 1)) return true;
      picked.reset(i);
    }
    return false;
  }

  CellSet allowed_;
  int budget_;
  int targets_ = 0;
  std::vector<Column> columns_;
};

bool feasible(const std::vector<const Placement*>& chosen, const CellSet& allowed, int budget) {
  if (int(allowed.count()) < budget) return false;
  for (const Placement* p : chosen)
    for (const auto& col : p->columns)
      if ((col & allowed).none()) return false;
  return true;
}

}  // namespace

std::optional<Solution> solve(const Level& level) {
  const int budget = level.cube_budget;
  if (budget < 1 || budget > kCells || level.targets.empty()) return std::nullopt;
  std::vector<std::vector<Placement>> options;
  for (std::size_t t = 0; t < level.targets.size(); ++t) {
    if (level.targets[t].empty()) return std::nullopt;
    options.push_back(placements(level.targets[t], t == 0));
  }

  std::vector<const Placement*> chosen;
  std::optional<Solution> found;
  auto search = [&](auto&& self, std::size_t t, const CellSet& allowed) -> bool {
    if (t == options.size()) {
      auto cover = CoverSearch(chosen, allowed, budget).run();
      if (!cover) return false;
      CellSet cells = *cover;
      for (int i = 0; i < kCells && int(cells.count()) < budget; ++i)
        if (allowed.test(i)) cells.set(i);
      Solution s;
      for (int i = 0; i < kCells; ++i)
        if (cells.test(i)) s.object.cells.insert(index_cell(i));
      for (const Placement* p : chosen) s.orientations.push_back(p->orientation);
      found = std::move(s);
      return true;
    }
    for (const Placement& p : options[t]) {
      const CellSet next = allowed & p.allowed;
      chosen.push_back(&p);
      if (feasible(chosen, next, budget) && self(self, t + 1, next)) return true;
      chosen.pop_back();
    }
    return false;
  };
  search(search, 0, CellSet().set());
  return found;
}

}  // namespace lvae::shadow
