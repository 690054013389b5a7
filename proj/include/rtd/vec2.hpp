#pragma once
// Planar vector and convex-polygon primitives shared by the geometry, world,
// and simulation layers.  Polygons are CCW vertex lists, no repeated closing
// vertex.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace rtd {

struct Vec2 {
  double x = 0.0, y = 0.0;

  Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  Vec2 operator-() const { return {-x, -y}; }
  Vec2& operator+=(Vec2 o) { x += o.x; y += o.y; return *this; }
  Vec2& operator-=(Vec2 o) { x -= o.x; y -= o.y; return *this; }

  double dot(Vec2 o) const { return x * o.x + y * o.y; }
  double cross(Vec2 o) const { return x * o.y - y * o.x; }
  double norm() const { return std::hypot(x, y); }
  double norm2() const { return x * x + y * y; }
  Vec2 perp() const { return {-y, x}; }  // +90 deg
  Vec2 rotated(double ang) const {
    double c = std::cos(ang), s = std::sin(ang);
    return {c * x - s * y, s * x + c * y};
  }
  Vec2 normalized() const {
    double n = norm();
    return n > 0.0 ? Vec2{x / n, y / n} : Vec2{0.0, 0.0};
  }
};

inline Vec2 operator*(double s, Vec2 v) { return v * s; }

using Polygon = std::vector<Vec2>;

inline double polygon_area(const Polygon& p) {  // signed, CCW positive
  double a = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) a += p[i].cross(p[(i + 1) % p.size()]);
  return 0.5 * a;
}

inline void ensure_ccw(Polygon& p) {
  if (polygon_area(p) < 0.0) std::reverse(p.begin(), p.end());
}

inline Vec2 polygon_centroid(const Polygon& p) {
  double a = 0.0;
  Vec2 c{0.0, 0.0};
  for (std::size_t i = 0; i < p.size(); ++i) {
    Vec2 u = p[i], v = p[(i + 1) % p.size()];
    double w = u.cross(v);
    a += w;
    c += (u + v) * w;
  }
  return a != 0.0 ? c * (1.0 / (3.0 * a)) : p.front();
}

// monotone chain; returns CCW hull, collinear points dropped
inline Polygon convex_hull(std::vector<Vec2> pts) {
  std::sort(pts.begin(), pts.end(), [](Vec2 a, Vec2 b) {
    return a.x < b.x || (a.x == b.x && a.y < b.y);
  });
  pts.erase(std::unique(pts.begin(), pts.end(), [](Vec2 a, Vec2 b) {
              return a.x == b.x && a.y == b.y;
            }),
            pts.end());
  if (pts.size() < 3) return pts;
  Polygon h(2 * pts.size());
  std::size_t k = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    while (k >= 2 && (h[k - 1] - h[k - 2]).cross(pts[i] - h[k - 2]) <= 0.0) --k;
    h[k++] = pts[i];
  }
  for (std::size_t i = pts.size() - 1, t = k + 1; i-- > 0;) {
    while (k >= t && (h[k - 1] - h[k - 2]).cross(pts[i] - h[k - 2]) <= 0.0) --k;
    h[k++] = pts[i];
  }
  h.resize(k - 1);
  return h;
}

// boundary counts as inside (tol expands the polygon by tol)
inline bool point_in_convex(const Polygon& p, Vec2 q, double tol = 0.0) {
  for (std::size_t i = 0; i < p.size(); ++i) {
    Vec2 a = p[i], b = p[(i + 1) % p.size()];
    Vec2 e = (b - a).normalized();
    if (e.cross(q - a) < -tol) return false;
  }
  return true;
}

inline double dist_point_segment(Vec2 q, Vec2 a, Vec2 b) {
  Vec2 ab = b - a;
  double t = ab.norm2() > 0.0 ? std::clamp((q - a).dot(ab) / ab.norm2(), 0.0, 1.0)
                              : 0.0;
  return (q - (a + ab * t)).norm();
}

// 0 inside, else distance to the boundary
inline double polygon_distance(const Polygon& p, Vec2 q) {
  if (point_in_convex(p, q)) return 0.0;
  double d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < p.size(); ++i)
    d = std::min(d, dist_point_segment(q, p[i], p[(i + 1) % p.size()]));
  return d;
}

// closed-set intersection test via separating axes (convex only)
inline bool convex_overlap(const Polygon& a, const Polygon& b) {
  auto separated_by = [](const Polygon& edges, const Polygon& p, const Polygon& q) {
    for (std::size_t i = 0; i < edges.size(); ++i) {
      Vec2 n = (edges[(i + 1) % edges.size()] - edges[i]).perp();
      double pmin = 1e300, pmax = -1e300, qmin = 1e300, qmax = -1e300;
      for (Vec2 v : p) {
        double d = n.dot(v);
        pmin = std::min(pmin, d);
        pmax = std::max(pmax, d);
      }
      for (Vec2 v : q) {
        double d = n.dot(v);
        qmin = std::min(qmin, d);
        qmax = std::max(qmax, d);
      }
      if (pmax < qmin || qmax < pmin) return true;
    }
    return false;
  };
  return !separated_by(a, a, b) && !separated_by(b, a, b);
}

// segment intersection, touching counts
inline bool segments_intersect(Vec2 a, Vec2 b, Vec2 c, Vec2 d) {
  auto orient = [](Vec2 p, Vec2 q, Vec2 r) {
    double v = (q - p).cross(r - p);
    return v > 0.0 ? 1 : (v < 0.0 ? -1 : 0);
  };
  auto on_seg = [](Vec2 p, Vec2 q, Vec2 r) {  // r collinear with pq: r on [pq]?
    return std::min(p.x, q.x) <= r.x && r.x <= std::max(p.x, q.x) &&
           std::min(p.y, q.y) <= r.y && r.y <= std::max(p.y, q.y);
  };
  int o1 = orient(a, b, c), o2 = orient(a, b, d);
  int o3 = orient(c, d, a), o4 = orient(c, d, b);
  if (o1 != o2 && o3 != o4) return true;
  if (o1 == 0 && on_seg(a, b, c)) return true;
  if (o2 == 0 && on_seg(a, b, d)) return true;
  if (o3 == 0 && on_seg(c, d, a)) return true;
  if (o4 == 0 && on_seg(c, d, b)) return true;
  return false;
}

inline bool segment_hits_polygon(Vec2 a, Vec2 b, const Polygon& p) {
  for (std::size_t i = 0; i < p.size(); ++i)
    if (segments_intersect(a, b, p[i], p[(i + 1) % p.size()])) return true;
  return point_in_convex(p, a) || point_in_convex(p, b);
}

// Sutherland-Hodgman step: keep the side with n.dot(q) <= c
inline Polygon clip_halfplane(const Polygon& p, Vec2 n, double c) {
  Polygon out;
  for (std::size_t i = 0; i < p.size(); ++i) {
    Vec2 a = p[i], b = p[(i + 1) % p.size()];
    double da = n.dot(a) - c, db = n.dot(b) - c;
    if (da <= 0.0) out.push_back(a);
    if ((da < 0.0 && db > 0.0) || (da > 0.0 && db < 0.0))
      out.push_back(a + (b - a) * (da / (da - db)));
  }
  return out;
}

inline Polygon regular_polygon(Vec2 c, double r, int n, double phase = 0.0) {
  Polygon p;
  p.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    double a = phase + 6.28318530717958647692 * i / n;
    p.push_back(c + Vec2{r * std::cos(a), r * std::sin(a)});
  }
  return p;
}

inline Polygon box_polygon(Vec2 center, double len_x, double len_y,
                           double heading = 0.0) {
  Polygon p = {{-len_x / 2, -len_y / 2},
               {len_x / 2, -len_y / 2},
               {len_x / 2, len_y / 2},
               {-len_x / 2, len_y / 2}};
  for (Vec2& v : p) v = center + v.rotated(heading);
  return p;
}

}  // namespace rtd
