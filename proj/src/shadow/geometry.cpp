#include <algorithm>
#include <climits>
#include <deque>

#include "lvae/shadow.hpp"

namespace lvae::shadow {

bool in_bounds(const Cell& c, int bound) {
  return std::abs(c.x) <= bound && std::abs(c.y) <= bound && std::abs(c.z) <= bound;
}

std::string to_string(Axis a) {
  switch (a) {
    case Axis::x: return "x";
    case Axis::y: return "y";
    case Axis::z: return "z";
  }
  return "?";
}

Axis axis_from_string(const std::string& s) {
  if (s == "x") return Axis::x;
  if (s == "y") return Axis::y;
  if (s == "z") return Axis::z;
  throw std::invalid_argument("unknown axis '" + s + "'");
}

Orientation Orientation::quarter_turn(Axis axis, int turns) {
  Orientation step;
  switch (axis) {
    case Axis::x: step.m = {{{1, 0, 0}, {0, 0, -1}, {0, 1, 0}}}; break;
    case Axis::y: step.m = {{{0, 0, 1}, {0, 1, 0}, {-1, 0, 0}}}; break;
    case Axis::z: step.m = {{{0, -1, 0}, {1, 0, 0}, {0, 0, 1}}}; break;
  }
  Orientation r;
  for (int k = 0; k < ((turns % 4) + 4) % 4; ++k) r = step * r;
  return r;
}

Orientation Orientation::operator*(const Orientation& rhs) const {
  Orientation out;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      int s = 0;
      for (int k = 0; k < 3; ++k) s += m[i][k] * rhs.m[k][j];
      out.m[i][j] = s;
    }
  return out;
}

Orientation Orientation::transposed() const {
  Orientation out;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) out.m[i][j] = m[j][i];
  return out;
}

Cell Orientation::apply(const Cell& c) const {
  return {m[0][0] * c.x + m[0][1] * c.y + m[0][2] * c.z,
          m[1][0] * c.x + m[1][1] * c.y + m[1][2] * c.z,
          m[2][0] * c.x + m[2][1] * c.y + m[2][2] * c.z};
}

int Orientation::determinant() const {
  return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
         m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
         m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
}

bool Orientation::valid() const {
  for (const auto& row : m)
    for (int v : row)
      if (v < -1 || v > 1) return false;
  return *this * transposed() == identity() && determinant() == 1;
}

const std::vector<Orientation>& all_orientations() {
  static const std::vector<Orientation> group = [] {
    std::vector<Orientation> seen{Orientation::identity()};
    std::deque<Orientation> queue{Orientation::identity()};
    while (!queue.empty()) {
      const Orientation o = queue.front();
      queue.pop_front();
      for (Axis a : {Axis::x, Axis::y, Axis::z}) {
        const Orientation next = Orientation::quarter_turn(a) * o;
        if (std::find(seen.begin(), seen.end(), next) == seen.end()) {
          seen.push_back(next);
          queue.push_back(next);
        }
      }
    }
    return seen;
  }();
  return group;
}

int ShadowMask::ink() const {
  return static_cast<int>(std::count(bits.begin(), bits.end(), 1));
}

ShadowMask ShadowMask::from_rows(const std::vector<std::string>& rows) {
  if (rows.empty()) return {};
  const std::size_t w = rows[0].size();
  int top = INT_MAX, bottom = -1, left = INT_MAX, right = -1;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != w) throw std::invalid_argument("mask rows differ in length");
    for (std::size_t c = 0; c < w; ++c) {
      const char ch = rows[r][c];
      if (ch != '0' && ch != '1') throw std::invalid_argument("mask rows must be '0'/'1'");
      if (ch == '1') {
        top = std::min(top, int(r));
        bottom = std::max(bottom, int(r));
        left = std::min(left, int(c));
        right = std::max(right, int(c));
      }
    }
  }
  if (bottom < 0) return {};
  ShadowMask m;
  m.width = right - left + 1;
  m.height = bottom - top + 1;
  for (int r = top; r <= bottom; ++r)
    for (int c = left; c <= right; ++c) m.bits.push_back(rows[r][c] == '1');
  return m;
}

std::vector<std::string> ShadowMask::to_rows() const {
  std::vector<std::string> rows;
  for (int r = 0; r < height; ++r) {
    std::string row;
    for (int c = 0; c < width; ++c) row += at(r, c) ? '1' : '0';
    rows.push_back(std::move(row));
  }
  return rows;
}

ShadowMask project(const std::set<Cell>& cells, const Orientation& o) {
  if (cells.empty()) return {};
  std::vector<std::pair<int, int>> hits;
  int xmin = INT_MAX, xmax = INT_MIN, ymin = INT_MAX, ymax = INT_MIN;
  for (const Cell& c : cells) {
    const Cell w = o.apply(c);
    hits.emplace_back(w.x, w.y);
    xmin = std::min(xmin, w.x);
    xmax = std::max(xmax, w.x);
    ymin = std::min(ymin, w.y);
    ymax = std::max(ymax, w.y);
  }
  ShadowMask m;
  m.width = xmax - xmin + 1;
  m.height = ymax - ymin + 1;
  m.bits.assign(static_cast<std::size_t>(m.width) * m.height, 0);
  for (auto [x, y] : hits) m.bits[static_cast<std::size_t>(ymax - y) * m.width + (x - xmin)] = 1;
  return m;
}

void to_json(nlohmann::json& j, const Cell& c) { j = {c.x, c.y, c.z}; }

void from_json(const nlohmann::json& j, Cell& c) {
  if (!j.is_array() || j.size() != 3) throw std::invalid_argument("cell must be [x, y, z]");
  c = {j[0].get<int>(), j[1].get<int>(), j[2].get<int>()};
}

void to_json(nlohmann::json& j, const Orientation& o) { j = o.m; }

void to_json(nlohmann::json& j, const ShadowMask& m) { j = m.to_rows(); }

}  // namespace lvae::shadow
