#include <algorithm>
#include <cmath>

#include "lvae/dataset.hpp"
#include "lvae/image.hpp"

namespace lvae {

namespace {

constexpr int kCropMargin = 2;
constexpr int kContentSide = 20;

void validate_strokes(const StrokeSet& s) {
  if (s.canvas_size <= 0)
    throw DataError(DataErrorReason::invalid_strokes, "canvas_size must be positive");
  if (!(s.pen_width > 0.0))
    throw DataError(DataErrorReason::invalid_strokes, "pen_width must be positive");
  bool any_point = false;
  for (const auto& stroke : s.strokes) {
    if (stroke.empty())
      throw DataError(DataErrorReason::invalid_strokes, "stroke with no points");
    for (const auto& p : stroke) {
      if (!(p.x >= 0.0 && p.x <= s.canvas_size && p.y >= 0.0 &&
            p.y <= s.canvas_size))
        throw DataError(DataErrorReason::invalid_strokes,
                        "stroke point outside the canvas");
      any_point = true;
    }
  }
  if (!any_point) throw DataError(DataErrorReason::empty_drawing, "drawing has no ink");
}

double segment_distance_sq(double px, double py, CanvasPoint a, CanvasPoint b) {
  const double dx = b.x - a.x, dy = b.y - a.y;
  const double len_sq = dx * dx + dy * dy;
  double t = 0.0;
  if (len_sq > 0.0)
    t = std::clamp(((px - a.x) * dx + (py - a.y) * dy) / len_sq, 0.0, 1.0);
  const double ex = a.x + t * dx - px, ey = a.y + t * dy - py;
  return ex * ex + ey * ey;
}

// Overlap weights of source cells [0, n) with output cell u of m cells.
std::vector<std::vector<std::pair<int, double>>> box_weights(int n, int m) {
  std::vector<std::vector<std::pair<int, double>>> w(m);
  const double ratio = static_cast<double>(n) / m;
  for (int u = 0; u < m; ++u) {
    const double lo = u * ratio, hi = (u + 1) * ratio;
    for (int k = static_cast<int>(std::floor(lo)); k < n && k < hi; ++k) {
      const double overlap = std::min<double>(k + 1, hi) - std::max<double>(k, lo);
      if (overlap > 0.0) w[u].emplace_back(k, overlap);
    }
  }
  return w;
}

}  // namespace

std::vector<std::uint8_t> rasterize_canvas(const StrokeSet& s) {
  validate_strokes(s);
  const int n = s.canvas_size;
  const double r = s.pen_width / 2.0;
  std::vector<std::uint8_t> ink(static_cast<std::size_t>(n) * n, 0);
  auto stamp_segment = [&](CanvasPoint a, CanvasPoint b) {
    const int x_lo = std::max(0, static_cast<int>(std::floor(std::min(a.x, b.x) - r)));
    const int x_hi = std::min(n - 1, static_cast<int>(std::ceil(std::max(a.x, b.x) + r)));
    const int y_lo = std::max(0, static_cast<int>(std::floor(std::min(a.y, b.y) - r)));
    const int y_hi = std::min(n - 1, static_cast<int>(std::ceil(std::max(a.y, b.y) + r)));
    for (int y = y_lo; y <= y_hi; ++y)
      for (int x = x_lo; x <= x_hi; ++x)
        if (segment_distance_sq(x + 0.5, y + 0.5, a, b) <= r * r)
          ink[static_cast<std::size_t>(y) * n + x] = 1;
  };
  for (const auto& stroke : s.strokes) {
    if (stroke.size() == 1) stamp_segment(stroke[0], stroke[0]);
    for (std::size_t i = 1; i < stroke.size(); ++i)
      stamp_segment(stroke[i - 1], stroke[i]);
    // A pen thinner than a pixel still marks the pixels it passes through.
    for (const auto& p : stroke) {
      const int x = std::min(n - 1, static_cast<int>(p.x));
      const int y = std::min(n - 1, static_cast<int>(p.y));
      ink[static_cast<std::size_t>(y) * n + x] = 1;
    }
  }
  return ink;
}

Tensor rasterize(const StrokeSet& s) {
  const auto ink = rasterize_canvas(s);
  const int n = s.canvas_size;

  int min_x = n, max_x = -1, min_y = n, max_y = -1;
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x)
      if (ink[static_cast<std::size_t>(y) * n + x]) {
        min_x = std::min(min_x, x);
        max_x = std::max(max_x, x);
        min_y = std::min(min_y, y);
        max_y = std::max(max_y, y);
      }
  if (max_x < 0) throw DataError(DataErrorReason::empty_drawing, "drawing has no ink");

  const int x0 = min_x - kCropMargin, y0 = min_y - kCropMargin;
  const int w = max_x - min_x + 1 + 2 * kCropMargin;
  const int h = max_y - min_y + 1 + 2 * kCropMargin;
  const int side = std::max(w, h);
  const int cw = std::max(1, static_cast<int>(std::lround(double(w) * kContentSide / side)));
  const int ch = std::max(1, static_cast<int>(std::lround(double(h) * kContentSide / side)));
  const auto wx = box_weights(w, cw);
  const auto wy = box_weights(h, ch);
  const double cell_area = (double(w) / cw) * (double(h) / ch);

  auto inked = [&](int cx, int cy) {
    const int x = x0 + cx, y = y0 + cy;
    if (x < 0 || y < 0 || x >= n || y >= n) return 0.0;
    return ink[static_cast<std::size_t>(y) * n + x] ? 1.0 : 0.0;
  };

  std::vector<double> content(static_cast<std::size_t>(cw) * ch, 0.0);
  double mass = 0.0, mx = 0.0, my = 0.0;
  for (int v = 0; v < ch; ++v)
    for (int u = 0; u < cw; ++u) {
      double acc = 0.0;
      for (auto [ly, fy] : wy[v])
        for (auto [lx, fx] : wx[u]) acc += fy * fx * inked(lx, ly);
      const double val = std::min(1.0, acc / cell_area);
      content[static_cast<std::size_t>(v) * cw + u] = val;
      mass += val;
      mx += val * (u + 0.5);
      my += val * (v + 0.5);
    }

  const double centre = kImageSide / 2.0;
  const int ox = static_cast<int>(std::floor(centre - mx / mass + 0.5));
  const int oy = static_cast<int>(std::floor(centre - my / mass + 0.5));

  Tensor frame({kImagePixels});
  double best = -1.0;
  std::size_t best_at = 0;
  bool any = false;
  for (int v = 0; v < ch; ++v)
    for (int u = 0; u < cw; ++u) {
      const int fx = ox + u, fy = oy + v;
      if (fx < 0 || fy < 0 || fx >= int(kImageSide) || fy >= int(kImageSide)) continue;
      const double val = content[static_cast<std::size_t>(v) * cw + u];
      const auto at = static_cast<std::size_t>(fy) * kImageSide + fx;
      frame[at] = std::round(val * 255.0) / 255.0;
      any |= frame[at] > 0.0;
      if (val > best) {
        best = val;
        best_at = at;
      }
    }
  if (!any) frame[best_at] = 1.0 / 255.0;
  return frame;
}

void to_json(nlohmann::json& j, const StrokeSet& s) {
  nlohmann::json strokes = nlohmann::json::array();
  for (const auto& stroke : s.strokes) {
    nlohmann::json pts = nlohmann::json::array();
    for (const auto& p : stroke) pts.push_back({p.x, p.y});
    strokes.push_back(std::move(pts));
  }
  j = {{"canvas_size", s.canvas_size},
       {"pen_width", s.pen_width},
       {"strokes", std::move(strokes)}};
}

void from_json(const nlohmann::json& j, StrokeSet& s) {
  try {
    s.canvas_size = j.value("canvas_size", kDefaultCanvasSize);
    s.pen_width = j.value("pen_width", kDefaultPenWidth);
    s.strokes.clear();
    for (const auto& stroke : j.at("strokes")) {
      std::vector<CanvasPoint> pts;
      for (const auto& p : stroke)
        pts.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
      s.strokes.push_back(std::move(pts));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(DataErrorReason::invalid_strokes,
                    std::string("malformed stroke set: ") + e.what());
  }
}

}  // namespace lvae
