#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <string_view>
#include <vector>

#include "vislog/raster.hpp"

namespace vislog::imaging {

enum class ContourKind { outer, hole };

struct Contour {
  std::vector<Point> points;  // closed 8-connected chain
  ContourKind kind = ContourKind::outer;

  [[nodiscard]] BBox bbox() const {
    int x0 = points.front().x, y0 = points.front().y;
    int x1 = x0, y1 = y0;
    for (const Point& p : points) {
      x0 = std::min(x0, p.x);
      y0 = std::min(y0, p.y);
      x1 = std::max(x1, p.x);
      y1 = std::max(y1, p.y);
    }
    return {x0, y0, x1 - x0 + 1, y1 - y0 + 1};
  }
};

namespace detail {
// Clockwise on screen (y grows downward), starting east.
constexpr std::array<int, 8> kDx{1, 1, 0, -1, -1, -1, 0, 1};
constexpr std::array<int, 8> kDy{0, 1, 1, 1, 0, -1, -1, -1};

inline int direction_of(int dx, int dy) {
  for (int d = 0; d < 8; ++d) {
    if (kDx[d] == dx && kDy[d] == dy) return d;
  }
  return -1;
}
}  // namespace detail

/// Suzuki-Abe border following over 8-connected foreground.
///
/// Each 8-connected component yields one outer contour and each 4-connected
/// background hole inside it yields one hole contour. Contours come out in
/// raster order of their starting pixel.
inline std::vector<Contour> trace_contours(const BitMask& mask) {
  using detail::kDx;
  using detail::kDy;
  const int W = mask.width() + 2;
  const int H = mask.height() + 2;
  std::vector<int> f(static_cast<std::size_t>(W) * H, 0);
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (mask.get(x, y)) f[static_cast<std::size_t>(y + 1) * W + x + 1] = 1;
    }
  }
  const auto at = [&](int x, int y) -> int& { return f[static_cast<std::size_t>(y) * W + x]; };

  std::vector<Contour> out;
  int nbd = 1;
  for (int y = 1; y < H - 1; ++y) {
    for (int x = 1; x < W - 1; ++x) {
      const int v = at(x, y);
      if (v == 0) continue;
      int from_dir = -1;
      ContourKind kind = ContourKind::outer;
      if (v == 1 && at(x - 1, y) == 0) {
        from_dir = 4;  // west
      } else if (v >= 1 && at(x + 1, y) == 0) {
        from_dir = 0;  // east
        kind = ContourKind::hole;
      } else {
        continue;
      }
      ++nbd;
      Contour c;
      c.kind = kind;

      // Clockwise search for the first non-zero neighbour.
      int first_dir = -1;
      for (int k = 0; k < 8; ++k) {
        const int d = (from_dir + k) % 8;
        if (at(x + kDx[d], y + kDy[d]) != 0) {
          first_dir = d;
          break;
        }
      }
      if (first_dir < 0) {
        at(x, y) = -nbd;
        c.points.push_back({x - 1, y - 1});
        out.push_back(std::move(c));
        continue;
      }
      const int x1 = x + kDx[first_dir];
      const int y1 = y + kDy[first_dir];
      int px = x1, py = y1;  // previous pixel
      int cx = x, cy = y;    // current pixel
      while (true) {
        const int back = detail::direction_of(px - cx, py - cy);
        bool east_zero = false;
        int nx = cx, ny = cy;
        for (int k = 1; k <= 8; ++k) {
          const int d = (back - k + 16) % 8;
          const int tx = cx + kDx[d];
          const int ty = cy + kDy[d];
          if (at(tx, ty) != 0) {
            nx = tx;
            ny = ty;
            break;
          }
          if (d == 0) east_zero = true;
        }
        if (east_zero) {
          at(cx, cy) = -nbd;
        } else if (at(cx, cy) == 1) {
          at(cx, cy) = nbd;
        }
        c.points.push_back({cx - 1, cy - 1});
        if (nx == x && ny == y && cx == x1 && cy == y1) break;
        px = cx, py = cy;
        cx = nx, cy = ny;
      }
      out.push_back(std::move(c));
    }
  }
  return out;
}

/// Pixels enclosed by a contour chain (the chain itself included), as a mask
/// over the contour's bounding box.
struct FilledRegion {
  BBox bbox;
  BitMask mask;
  long long count = 0;
};

inline FilledRegion fill_contour(const Contour& c) {
  const BBox b = c.bbox();
  // One pixel of padding so the exterior is a single connected ring.
  const int w = b.w + 2;
  const int h = b.h + 2;
  std::vector<std::uint8_t> cell(static_cast<std::size_t>(w) * h, 0);  // 1 chain, 2 exterior
  for (const Point& p : c.points) cell[static_cast<std::size_t>(p.y - b.y + 1) * w + (p.x - b.x + 1)] = 1;
  std::vector<std::size_t> stack{0};
  cell[0] = 2;
  while (!stack.empty()) {
    const std::size_t p = stack.back();
    stack.pop_back();
    const int x = static_cast<int>(p % w);
    const int y = static_cast<int>(p / w);
    const int nbr[4][2] = {{x + 1, y}, {x - 1, y}, {x, y + 1}, {x, y - 1}};
    for (const auto& n : nbr) {
      if (n[0] < 0 || n[1] < 0 || n[0] >= w || n[1] >= h) continue;
      const std::size_t q = static_cast<std::size_t>(n[1]) * w + n[0];
      if (cell[q] == 0) {
        cell[q] = 2;
        stack.push_back(q);
      }
    }
  }
  FilledRegion r{b, BitMask(b.w, b.h), 0};
  for (int y = 0; y < b.h; ++y) {
    for (int x = 0; x < b.w; ++x) {
      if (cell[static_cast<std::size_t>(y + 1) * w + x + 1] != 2) {
        r.mask.set(x, y);
        ++r.count;
      }
    }
  }
  return r;
}

struct ContourMetrics {
  double area = 0.0;
  double perimeter = 0.0;
  BBox bbox;
  double circularity = 0.0;
  double rect_fill = 0.0;
  double principal_angle = 0.0;  // degrees in [0,180)
  bool isotropic = false;        // second moments carry no orientation
};

inline ContourMetrics contour_metrics(const Contour& c) {
  if (c.points.empty()) fail_invalid("contour has no points");
  ContourMetrics m;
  const FilledRegion region = fill_contour(c);
  m.bbox = region.bbox;
  m.area = static_cast<double>(region.count);

  const std::size_t n = c.points.size();
  if (n == 1) {
    m.perimeter = 1.0;
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      const Point a = c.points[i];
      const Point b = c.points[(i + 1) % n];
      m.perimeter += (a.x != b.x && a.y != b.y) ? std::numbers::sqrt2 : 1.0;
    }
  }
  m.circularity = std::clamp(4.0 * std::numbers::pi * m.area / (m.perimeter * m.perimeter), 0.0, 1.1);
  m.rect_fill = m.area / static_cast<double>(m.bbox.area());

  // Exact integer raw moments relative to the bbox origin.
  __int128 s = 0, sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  for (int y = 0; y < m.bbox.h; ++y) {
    for (int x = 0; x < m.bbox.w; ++x) {
      if (!region.mask.get(x, y)) continue;
      ++s;
      sx += x;
      sy += y;
      sxx += static_cast<__int128>(x) * x;
      syy += static_cast<__int128>(y) * y;
      sxy += static_cast<__int128>(x) * y;
    }
  }
  // Central moments scaled by s^2.
  const auto mu20 = static_cast<double>(s * sxx - sx * sx);
  const auto mu02 = static_cast<double>(s * syy - sy * sy);
  const auto mu11 = static_cast<double>(s * sxy - sx * sy);
  const double aniso = std::hypot(mu20 - mu02, 2.0 * mu11);
  m.isotropic = aniso <= 1e-3 * (mu20 + mu02);
  double angle = 0.0;
  if (aniso > 0.0) angle = 0.5 * std::atan2(2.0 * mu11, mu20 - mu02) * 180.0 / std::numbers::pi;
  if (angle < 0.0) angle += 180.0;
  if (angle >= 180.0) angle -= 180.0;
  m.principal_angle = angle;
  return m;
}

enum class Shape { rectangle, circle, irregular };
enum class Orientation { horizontal, vertical, irregular };

struct ShapeThresholds {
  double circularity = 0.80;
  double rect_fill = 0.85;
  double angle_tolerance = 10.0;  // degrees
  double square_tolerance = 0.1;  // |w-h| <= tol * max(w,h)
};

struct ShapeClass {
  Shape shape = Shape::irregular;
  Orientation orientation = Orientation::irregular;
};

/// Rectangle test runs before the circle test: small filled squares reach a
/// circularity above 0.8 under the chain-code perimeter, while a disc never
/// fills more than pi/4 of its box.
inline ShapeClass classify_shape(const ContourMetrics& m, const ShapeThresholds& t = {}) {
  ShapeClass out;
  if (m.rect_fill >= t.rect_fill) {
    out.shape = Shape::rectangle;
  } else if (m.circularity >= t.circularity) {
    out.shape = Shape::circle;
  }
  const bool squarish = std::abs(m.bbox.w - m.bbox.h) <= t.square_tolerance * std::max(m.bbox.w, m.bbox.h);
  const double a = m.principal_angle;
  if ((out.shape == Shape::circle || m.isotropic) && squarish) {
    out.orientation = Orientation::horizontal;
  } else if (a <= t.angle_tolerance || a >= 180.0 - t.angle_tolerance) {
    out.orientation = Orientation::horizontal;
  } else if (std::abs(a - 90.0) <= t.angle_tolerance) {
    out.orientation = Orientation::vertical;
  }
  return out;
}

inline std::string_view to_string(Shape s) {
  switch (s) {
    case Shape::rectangle: return "rectangle";
    case Shape::circle: return "circle";
    case Shape::irregular: return "irregular";
  }
  return "irregular";
}

inline std::string_view to_string(Orientation o) {
  switch (o) {
    case Orientation::horizontal: return "horizontal";
    case Orientation::vertical: return "vertical";
    case Orientation::irregular: return "irregular";
  }
  return "irregular";
}

inline Shape parse_shape(std::string_view s) {
  if (s == "rectangle") return Shape::rectangle;
  if (s == "circle") return Shape::circle;
  if (s == "irregular") return Shape::irregular;
  fail_invalid("unknown shape '" + std::string(s) + "'");
}

inline Orientation parse_orientation(std::string_view s) {
  if (s == "horizontal") return Orientation::horizontal;
  if (s == "vertical") return Orientation::vertical;
  if (s == "irregular") return Orientation::irregular;
  fail_invalid("unknown orientation '" + std::string(s) + "'");
}

}  // namespace vislog::imaging
