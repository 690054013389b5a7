#include "rtd/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "rtd/util.hpp"

namespace rtd {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kTwoPi = 6.28318530717958647692;

Polygon rotated_poly(const Polygon& p, double ang) {
  Polygon out = p;
  for (Vec2& v : out) v = v.rotated(ang);
  return out;
}

Polygon translated_poly(const Polygon& p, Vec2 d) {
  Polygon out = p;
  for (Vec2& v : out) v += d;
  return out;
}

double max_coord(const Polygon& p) {
  double m = 0.0;
  for (Vec2 v : p) m = std::max({m, std::fabs(v.x), std::fabs(v.y)});
  return m;
}

// ---- vertical chord profile -------------------------------------------------
//
// For a convex polygon the vertical slice length at abscissa x is piecewise
// linear and unimodal in x, with breakpoints at vertex abscissae.  Every sweep
// quantity below reduces to queries on this profile: pushing the shape in +x
// through a gap on a vertical line, the slice crossing the line when the
// leading edge is d deep is the slice at (xmax - d).

struct Profile {
  std::vector<double> xs;   // ascending, unique
  std::vector<double> len;  // slice extent at xs[i]
};

// extent of poly ∩ {x = c}; false if the line misses the polygon
bool slice_extent(const Polygon& p, double c, double* lo, double* hi) {
  bool any = false;
  double l = 0.0, h = 0.0;
  auto add = [&](double y) {
    if (!any) {
      l = h = y;
      any = true;
    } else {
      l = std::min(l, y);
      h = std::max(h, y);
    }
  };
  const std::size_t n = p.size();
  for (std::size_t i = 0; i < n; ++i) {
    Vec2 a = p[i], b = p[(i + 1) % n];
    if ((a.x - c) * (b.x - c) > 0.0) continue;
    if (a.x == b.x) {
      if (a.x == c) {
        add(a.y);
        add(b.y);
      }
      continue;
    }
    double t = (c - a.x) / (b.x - a.x);
    if (t < 0.0 || t > 1.0) continue;
    add(a.y + t * (b.y - a.y));
  }
  if (!any) return false;
  *lo = l;
  *hi = h;
  return true;
}

Profile chord_profile(const Polygon& p) {
  Profile pr;
  pr.xs.reserve(p.size());
  for (const Vec2& v : p) pr.xs.push_back(v.x);
  std::sort(pr.xs.begin(), pr.xs.end());
  pr.xs.erase(std::unique(pr.xs.begin(), pr.xs.end()), pr.xs.end());
  pr.len.reserve(pr.xs.size());
  for (double x : pr.xs) {
    double lo, hi;
    pr.len.push_back(slice_extent(p, x, &lo, &hi) ? hi - lo : 0.0);
  }
  return pr;
}

double profile_at(const Profile& pr, double x) {
  const auto& xs = pr.xs;
  if (x <= xs.front()) return x == xs.front() ? pr.len.front() : 0.0;
  if (x >= xs.back()) return x == xs.back() ? pr.len.back() : 0.0;
  auto it = std::upper_bound(xs.begin(), xs.end(), x);
  std::size_t i = static_cast<std::size_t>(it - xs.begin());
  double t = (x - xs[i - 1]) / (xs[i] - xs[i - 1]);
  return pr.len[i - 1] + t * (pr.len[i] - pr.len[i - 1]);
}

// largest depth d such that the slice stays strictly below `gap` everywhere on
// (xmax - d, xmax]; returns the full extent if the slice never reaches gap
double profile_penetration(const Profile& pr, double gap) {
  const std::size_t n = pr.xs.size();
  double xmax = pr.xs[n - 1];
  if (pr.len[n - 1] >= gap) return 0.0;
  for (std::size_t i = n - 1; i-- > 0;) {
    if (pr.len[i] >= gap) {
      double t = (gap - pr.len[i + 1]) / (pr.len[i] - pr.len[i + 1]);
      double xc = pr.xs[i + 1] + t * (pr.xs[i] - pr.xs[i + 1]);
      return xmax - xc;
    }
  }
  return xmax - pr.xs[0];
}

double poly_width(const Polygon& p) {
  double best = std::numeric_limits<double>::infinity();
  const std::size_t n = p.size();
  for (std::size_t i = 0; i < n; ++i) {
    Vec2 e = p[(i + 1) % n] - p[i];
    if (e.norm() == 0.0) continue;
    Vec2 nor = e.perp().normalized();
    double lo = 1e300, hi = -1e300;
    for (Vec2 v : p) {
      double d = nor.dot(v);
      lo = std::min(lo, d);
      hi = std::max(hi, d);
    }
    best = std::min(best, hi - lo);
  }
  return best;
}

// Certified per-sample bounds for a sweep: each sample value is debited by
// (step * local Lipschitz estimate * safety).  Near the extremum the profile
// is flat so the debit is small; samples at feasibility edges get large
// debits but do not govern the extremum.  Isolated samples (no feasible
// neighbor) fall back to the global slope estimate.
//
// With branch_min the local estimate is the SMALLER finite-difference slope
// toward a neighbor.  That is for sweeps whose value is a min over
// configuration branches (the corner-circle chord search): the branch in
// force switches at isolated angles, so one adjacent difference straddles a
// jump and says nothing about the branch's own slope.  Each half-step is
// still covered by the sample on its own side of the jump.  Continuous
// sweeps use the larger slope (more conservative).
std::vector<double> certified_bounds(const std::vector<double>& vals, double dth,
                                     double safety, const char* what,
                                     bool branch_min = false) {
  const std::size_t n = vals.size();
  double global = 0.0;
  std::size_t pairs = 0, defined = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isnan(vals[i])) ++defined;
    double a = vals[i], b = vals[(i + 1) % n];
    if (std::isnan(a) || std::isnan(b)) continue;
    global = std::max(global, std::fabs(b - a) / dth);
    ++pairs;
  }
  if (defined == 0 || (pairs == 0 && defined > 1))
    throw std::runtime_error(
        strf("%s: sweep has no adjacent feasible samples; decrease "
             "SweepParams.dtheta",
             what));
  std::vector<double> out(n, std::numeric_limits<double>::quiet_NaN());
  for (std::size_t i = 0; i < n; ++i) {
    if (std::isnan(vals[i])) continue;
    double prev = vals[(i + n - 1) % n], next = vals[(i + 1) % n];
    double lip = -1.0;
    auto fold = [&](double slope) {
      lip = lip < 0.0 ? slope : (branch_min ? std::min(lip, slope)
                                            : std::max(lip, slope));
    };
    if (!std::isnan(prev)) fold(std::fabs(vals[i] - prev) / dth);
    if (!std::isnan(next)) fold(std::fabs(next - vals[i]) / dth);
    if (lip < 0.0) lip = global;
    out[i] = vals[i] - dth * lip * safety;
  }
  return out;
}

double sweep_bbar(const Polygon& poly, double rbar, const SweepParams& sp) {
  int n = std::max(8, static_cast<int>(std::ceil(kTwoPi / sp.dtheta)));
  double dth = kTwoPi / n;
  std::vector<double> vals(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    vals[static_cast<std::size_t>(i)] =
        profile_penetration(chord_profile(rotated_poly(poly, i * dth)), rbar);
  std::vector<double> bound = certified_bounds(vals, dth, sp.safety, "max_penetration");
  double best = -1e300;
  for (double v : bound)
    if (!std::isnan(v)) best = std::max(best, v);
  if (!(best > 0.0))
    throw std::runtime_error(
        "max_penetration: sweep slack exceeds the sweep maximum; decrease "
        "SweepParams.dtheta");
  return best;
}

double sweep_point_spacing(const Polygon& poly, double rbar, double b,
                           const SweepParams& sp) {
  int n = std::max(8, static_cast<int>(std::ceil(kTwoPi / sp.dtheta)));
  double dth = kTwoPi / n;
  std::vector<double> vals(static_cast<std::size_t>(n),
                           std::numeric_limits<double>::quiet_NaN());
  bool any = false;
  for (int i = 0; i < n; ++i) {
    Profile pr = chord_profile(rotated_poly(poly, i * dth));
    if (profile_penetration(pr, rbar) < b) continue;  // cannot reach depth b
    vals[static_cast<std::size_t>(i)] = profile_at(pr, pr.xs.back() - b);
    any = true;
  }
  if (!any)
    throw std::runtime_error(
        "point_spacing: no rotation reaches the requested depth (b too close "
        "to bbar for this sweep resolution)");
  std::vector<double> bound = certified_bounds(vals, dth, sp.safety, "point_spacing");
  double vmin = 1e300;
  for (double v : bound)
    if (!std::isnan(v)) vmin = std::min(vmin, v);
  if (!(vmin > 0.0))
    throw std::runtime_error(
        "point_spacing: sweep slack exceeds the sweep minimum; decrease "
        "SweepParams.dtheta");
  return vmin;
}

double sweep_arc_spacing(const Polygon& poly, double rbar, double b,
                         const SweepParams& sp) {
  int n = std::max(8, static_cast<int>(std::ceil(kTwoPi / sp.dtheta)));
  double dth = kTwoPi / n;
  double eps = 1e-9 * (1.0 + max_coord(poly));
  std::vector<double> vals(static_cast<std::size_t>(n),
                           std::numeric_limits<double>::quiet_NaN());
  bool any = false;
  for (int i = 0; i < n; ++i) {
    Polygon rot = rotated_poly(poly, i * dth);
    Profile pr = chord_profile(rot);
    if (profile_penetration(pr, rbar) < b) continue;
    double xmax = pr.xs.back();
    // wedge at depth exactly b: leading abscissa sits at x = b, gap line x = 0
    Polygon wedged = translated_poly(rot, {b - xmax, 0.0});
    // candidate circle centers: deepest vertices (plus the midpoint when the
    // leading feature is a vertical edge)
    std::vector<Vec2> centers;
    for (Vec2 v : wedged)
      if (std::fabs(v.x - b) <= eps) centers.push_back({b, v.y});
    if (centers.size() == 2)
      centers.push_back({b, 0.5 * (centers[0].y + centers[1].y)});
    double cand = std::numeric_limits<double>::infinity();
    for (Vec2 c : centers) {
      // circle of radius b about the deepest point, intersected with the
      // footprint boundary; the spacing candidate is the chord between the
      // crossings above and below the tip
      std::vector<Vec2> cross;
      const std::size_t m = wedged.size();
      for (std::size_t e = 0; e < m; ++e) {
        Vec2 a1 = wedged[e], a2 = wedged[(e + 1) % m];
        Vec2 d = a2 - a1, f = a1 - c;
        double A = d.norm2();
        if (A == 0.0) continue;
        double B = 2.0 * f.dot(d);
        double C = f.norm2() - b * b;
        double disc = B * B - 4.0 * A * C;
        if (disc < 0.0) continue;
        double sq = std::sqrt(disc);
        for (double t : {(-B - sq) / (2.0 * A), (-B + sq) / (2.0 * A)}) {
          if (t < -1e-12 || t > 1.0 + 1e-12) continue;
          Vec2 q = a1 + d * std::clamp(t, 0.0, 1.0);
          bool dup = false;
          for (Vec2 r : cross)
            if ((r - q).norm() <= eps) dup = true;
          if (!dup) cross.push_back(q);
        }
      }
      // generic position gives exactly two crossings; if numerical grazing
      // yields more, the min pairwise distance only shrinks the spacing,
      // which is the safe direction
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t u = 0; u < cross.size(); ++u)
        for (std::size_t w = u + 1; w < cross.size(); ++w)
          best = std::min(best, (cross[u] - cross[w]).norm());
      cand = std::min(cand, best);
    }
    if (std::isfinite(cand)) {
      vals[static_cast<std::size_t>(i)] = cand;
      any = true;
    }
  }
  if (!any)
    throw std::runtime_error(
        "arc_point_spacing: no rotation yields a valid arc chord (b too close "
        "to bbar for this sweep resolution)");
  std::vector<double> bound =
      certified_bounds(vals, dth, sp.safety, "arc_point_spacing", true);
  double vmin = 1e300;
  for (double v : bound)
    if (!std::isnan(v)) vmin = std::min(vmin, v);
  if (!(vmin > 0.0))
    throw std::runtime_error(
        "arc_point_spacing: sweep slack exceeds the sweep minimum; decrease "
        "SweepParams.dtheta");
  return vmin;
}

}  // namespace

Footprint Footprint::circle(double R) {
  if (!(R > 0.0)) throw std::runtime_error("footprint: radius must be > 0");
  Footprint fp;
  fp.kind = Kind::Circle;
  fp.radius = R;
  fp.poly = regular_polygon({0.0, 0.0}, R, 64);
  return fp;
}

Footprint Footprint::rectangle(double len_x, double len_y) {
  if (!(len_x > 0.0) || !(len_y > 0.0))
    throw std::runtime_error("footprint: rectangle extents must be > 0");
  Footprint fp;
  fp.kind = Kind::Rectangle;
  fp.len_x = len_x;
  fp.len_y = len_y;
  fp.poly = box_polygon({0.0, 0.0}, len_x, len_y);
  return fp;
}

Footprint Footprint::convex(Polygon p) {
  Polygon hull = convex_hull(p);
  if (hull.size() < 3)
    throw std::runtime_error("footprint: polygon needs >= 3 non-collinear vertices");
  Footprint fp;
  fp.kind = Kind::Poly;
  fp.poly = std::move(hull);
  return fp;
}

double footprint_width(const Footprint& fp) {
  switch (fp.kind) {
    case Footprint::Kind::Circle:
      return 2.0 * fp.radius;
    case Footprint::Kind::Rectangle:
      return std::min(fp.len_x, fp.len_y);
    case Footprint::Kind::Poly:
      return poly_width(fp.poly);
  }
  return 0.0;
}

double max_penetration(const Footprint& fp, const SweepParams& sp) {
  switch (fp.kind) {
    case Footprint::Kind::Circle:
      return fp.radius;
    case Footprint::Kind::Rectangle:
      return 0.5 * std::min(fp.len_x, fp.len_y);
    case Footprint::Kind::Poly:
      return sweep_bbar(fp.poly, poly_width(fp.poly), sp);
  }
  return 0.0;
}

double point_spacing(const Footprint& fp, double b, const SweepParams& sp) {
  double bbar = max_penetration(fp, sp);
  if (!(b > 0.0) || !(b < bbar))
    throw std::runtime_error(
        strf("point_spacing: buffer b=%g must lie in (0, bbar=%g)", b, bbar));
  switch (fp.kind) {
    case Footprint::Kind::Circle: {
      double R = fp.radius;
      return 2.0 * R * std::sin(std::acos((R - b) / R));
    }
    case Footprint::Kind::Rectangle:
      return 2.0 * b;
    case Footprint::Kind::Poly:
      return sweep_point_spacing(fp.poly, poly_width(fp.poly), b, sp);
  }
  return 0.0;
}

double arc_point_spacing(const Footprint& fp, double b, const SweepParams& sp) {
  double bbar = max_penetration(fp, sp);
  if (!(b > 0.0) || !(b < bbar))
    throw std::runtime_error(
        strf("arc_point_spacing: buffer b=%g must lie in (0, bbar=%g)", b, bbar));
  switch (fp.kind) {
    case Footprint::Kind::Circle:
      return 2.0 * b * std::sin(std::acos(b / (2.0 * fp.radius)));
    case Footprint::Kind::Rectangle:
      return 2.0 * b * std::sin(kPi / 4.0);
    case Footprint::Kind::Poly: {
      double a = sweep_arc_spacing(fp.poly, poly_width(fp.poly), b, sp);
      double r = sweep_point_spacing(fp.poly, poly_width(fp.poly), b, sp);
      return std::min(a, r * (1.0 - 1e-9));  // keep the a < r invariant
    }
  }
  return 0.0;
}

namespace {

BufferedBoundary buffer_convex(const Polygon& p, double b) {
  BufferedBoundary bb;
  const std::size_t n = p.size();
  if (n == 1) {
    BoundaryPiece arc;
    arc.is_arc = true;
    arc.center = p[0];
    arc.radius = b;
    arc.ang0 = 0.0;
    arc.ang1 = kTwoPi;
    arc.a = arc.b = p[0] + Vec2{b, 0.0};
    bb.pieces.push_back(arc);
    return bb;
  }
  // walk edges; for a 2-vertex "polygon" the edge list (0->1, 1->0) produces
  // the stadium shape
  std::vector<Vec2> normals(n);
  for (std::size_t i = 0; i < n; ++i) {
    Vec2 e = p[(i + 1) % n] - p[i];
    normals[i] = Vec2{e.y, -e.x}.normalized();  // outward for CCW
  }
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t j = (i + 1) % n;
    BoundaryPiece seg;
    seg.a = p[i] + normals[i] * b;
    seg.b = p[j] + normals[i] * b;
    bb.pieces.push_back(seg);
    // vertex arc from this edge's normal to the next edge's normal
    double delta = std::atan2(normals[i].cross(normals[j]), normals[i].dot(normals[j]));
    if (delta < 0.0) delta += kTwoPi;
    if (delta > 1e-12) {
      BoundaryPiece arc;
      arc.is_arc = true;
      arc.center = p[j];
      arc.radius = b;
      arc.ang0 = std::atan2(normals[i].y, normals[i].x);
      arc.ang1 = arc.ang0 + delta;
      arc.a = p[j] + normals[i] * b;
      arc.b = p[j] + normals[j] * b;
      bb.pieces.push_back(arc);
    }
  }
  return bb;
}

bool is_convex_ccw(const Polygon& p) {
  const std::size_t n = p.size();
  for (std::size_t i = 0; i < n; ++i) {
    Vec2 a = p[i], b = p[(i + 1) % n], c = p[(i + 2) % n];
    if ((b - a).cross(c - b) < -1e-12 * (1.0 + max_coord(p))) return false;
  }
  return true;
}

}  // namespace

std::vector<BufferedBoundary> buffer_obstacle(const Polygon& obstacle, double b) {
  if (!(b > 0.0)) throw std::runtime_error("buffer_obstacle: b must be > 0");
  if (obstacle.empty()) throw std::runtime_error("buffer_obstacle: empty polygon");
  // drop repeated consecutive vertices
  Polygon p;
  for (Vec2 v : obstacle)
    if (p.empty() || (v - p.back()).norm() > 1e-12) p.push_back(v);
  while (p.size() > 1 && (p.front() - p.back()).norm() <= 1e-12) p.pop_back();

  if (p.size() <= 2) return {buffer_convex(p, b)};
  ensure_ccw(p);
  if (is_convex_ccw(p)) return {buffer_convex(p, b)};
  // nonconvex: fan triangulation from vertex 0, each triangle buffered alone
  std::vector<BufferedBoundary> out;
  for (std::size_t i = 1; i + 1 < p.size(); ++i) {
    Polygon tri = {p[0], p[i], p[i + 1]};
    ensure_ccw(tri);
    out.push_back(buffer_convex(tri, b));
  }
  return out;
}

std::vector<Vec2> discretize_boundary(const BufferedBoundary& bb, double r,
                                      double a) {
  if (!(r > 0.0) || !(a > 0.0))
    throw std::runtime_error("discretize_boundary: spacings must be > 0");
  std::vector<Vec2> pts;
  auto push = [&](Vec2 q) {
    if (!pts.empty() && (pts.back() - q).norm() < 1e-12) return;
    pts.push_back(q);
  };
  for (const BoundaryPiece& pc : bb.pieces) {
    if (!pc.is_arc) {
      double L = (pc.b - pc.a).norm();
      int m = std::max(1, static_cast<int>(std::ceil(L / r - 1e-12)));
      for (int j = 0; j <= m; ++j) push(pc.a + (pc.b - pc.a) * (double(j) / m));
    } else {
      // arclength steps <= a; chord <= arclength, so consecutive points on the
      // buffer circle (whose center is the source vertex) are also <= a apart
      double span = pc.ang1 - pc.ang0;
      double arclen = span * pc.radius;
      int m = std::max(1, static_cast<int>(std::ceil(arclen / a - 1e-12)));
      for (int j = 0; j <= m; ++j) {
        double ang = pc.ang0 + span * j / m;
        push(pc.center + Vec2{pc.radius * std::cos(ang), pc.radius * std::sin(ang)});
      }
    }
  }
  if (pts.size() > 1 && (pts.front() - pts.back()).norm() < 1e-12) pts.pop_back();
  return pts;
}

std::vector<Vec2> discretize_obstacle(const Polygon& obstacle, double b,
                                      double r, double a) {
  std::vector<Vec2> pts;
  for (const BufferedBoundary& bb : buffer_obstacle(obstacle, b)) {
    std::vector<Vec2> part = discretize_boundary(bb, r, a);
    pts.insert(pts.end(), part.begin(), part.end());
  }
  return pts;
}

// ---- oracles ----------------------------------------------------------------

namespace {

// y extent of poly ∩ {x >= xcut}; -1 if empty
double cap_extent(const Polygon& p, double xcut) {
  Polygon cap = clip_halfplane(p, Vec2{-1.0, 0.0}, -xcut);
  if (cap.empty()) return -1.0;
  double lo = 1e300, hi = -1e300;
  for (Vec2 v : cap) {
    lo = std::min(lo, v.y);
    hi = std::max(hi, v.y);
  }
  return hi - lo;
}

// upper bound on the deepest translate-only penetration of this fixed
// orientation; `full` if it passes fully through
double oracle_pen_one(const Polygon& p, double gap) {
  double xmin = 1e300, xmax = -1e300;
  for (Vec2 v : p) {
    xmin = std::min(xmin, v.x);
    xmax = std::max(xmax, v.x);
  }
  double full = xmax - xmin;
  if (cap_extent(p, xmin) < gap) return full;  // whole shape fits the gap
  double lo = 0.0, hi = full;
  for (int it = 0; it < 60; ++it) {
    double mid = 0.5 * (lo + hi);
    if (cap_extent(p, xmax - mid) < gap)
      lo = mid;
    else
      hi = mid;
  }
  return hi;  // cap extent is monotone in depth, so the true depth is <= hi
}

}  // namespace

double oracle_max_penetration(const Polygon& fp, double gap, double dtheta) {
  int n = std::max(8, static_cast<int>(std::ceil(kTwoPi / dtheta)));
  double best = 0.0;
  for (int i = 0; i < n; ++i)
    best = std::max(best, oracle_pen_one(rotated_poly(fp, i * kTwoPi / n), gap));
  return best;
}

bool oracle_passes_through(const Polygon& fp, double gap, double dtheta) {
  int n = std::max(8, static_cast<int>(std::ceil(kTwoPi / dtheta)));
  for (int i = 0; i < n; ++i) {
    Polygon rot = rotated_poly(fp, i * kTwoPi / n);
    double lo = 1e300, hi = -1e300;
    for (Vec2 v : rot) {
      lo = std::min(lo, v.y);
      hi = std::max(hi, v.y);
    }
    if (hi - lo < gap) return true;
  }
  return false;
}

}  // namespace rtd
