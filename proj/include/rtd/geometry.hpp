#pragma once
// Footprint geometry for the discrete obstacle representation.  For a robot
// footprint this computes: rbar, the footprint width (narrowest gap it could
// ever pass); bbar, the deepest it can poke through a gap of length rbar
// without touching the gap endpoints; and, for a chosen buffer 0 < b < bbar,
// the straight-boundary point spacing r and the corner-arc chord spacing a
// that make a discretized buffered boundary impassable: squeezing between
// adjacent points can reach at most b deep, which the buffer has already paid
// for.  Obstacles are buffered (edge offsets + vertex arcs) and the buffered
// boundary is sampled at those spacings.

#include <vector>

#include "rtd/vec2.hpp"

namespace rtd {

struct Footprint {
  enum class Kind { Circle, Rectangle, Poly };
  Kind kind = Kind::Circle;
  double radius = 0.0;                 // Circle
  double len_x = 0.0, len_y = 0.0;     // Rectangle (body frame extents)
  Polygon poly;                        // always populated (circle: 64-gon)

  static Footprint circle(double R);
  static Footprint rectangle(double len_x, double len_y);
  static Footprint convex(Polygon p);
};

// Rotation-sweep resolution for general convex polygons.  Reported spacings
// subtract a slack of (step * estimated Lipschitz constant * safety) so the
// sweep minimum cannot overshoot the true infimum between samples; circle and
// rectangle footprints use exact closed forms instead.
struct SweepParams {
  double dtheta = 0.00872664625997164788;  // 0.5 deg
  double safety = 2.0;
};

// rbar: minimum distance between two parallel lines enclosing the footprint
double footprint_width(const Footprint& fp);

// bbar: worst-case penetration depth through a gap of length rbar
double max_penetration(const Footprint& fp, const SweepParams& sp = {});

// r: boundary point spacing for buffer b (penetration through a gap of
// length r never exceeds b)
double point_spacing(const Footprint& fp, double b, const SweepParams& sp = {});

// a: arc chord spacing for buffer b (penetration into a radius-b circle
// through a chord of length a never exceeds b); always < r
double arc_point_spacing(const Footprint& fp, double b,
                         const SweepParams& sp = {});

// Buffered obstacle boundary: obstacle edges offset outward by b, joined by
// radius-b arcs at the vertices.  Pieces are ordered CCW and closed.
struct BoundaryPiece {
  bool is_arc = false;
  Vec2 a, b;                    // endpoints (chord endpoints for an arc)
  Vec2 center;                  // arc only
  double radius = 0.0;
  double ang0 = 0.0, ang1 = 0.0;  // arc sweep, CCW, ang1 >= ang0
};
struct BufferedBoundary {
  std::vector<BoundaryPiece> pieces;
};

// Convex obstacles give one boundary.  Nonconvex ones are fan-triangulated
// from vertex 0 and each triangle is buffered separately; overlapping
// boundaries are kept as-is (points from swallowed sections are redundant but
// never unsafe).
std::vector<BufferedBoundary> buffer_obstacle(const Polygon& obstacle, double b);

// Boundary points: piece endpoints always included; straight pieces are split
// into ceil(len / r) equal steps, arcs into equal angular steps with arclength
// (hence also chord) <= a.
std::vector<Vec2> discretize_boundary(const BufferedBoundary& bb, double r,
                                      double a);
std::vector<Vec2> discretize_obstacle(const Polygon& obstacle, double b,
                                      double r, double a);

// ---- brute-force reference oracles (test use only) -------------------------
//
// Independent of the sweep implementation above: penetrations are measured by
// clipping the polygon cap past the gap line and checking its extent against
// the gap, not by chord profiles.

// deepest translate-only penetration through a gap of the given length,
// maximized over a dense rotation grid; returns the footprint extent if some
// rotation passes fully through
double oracle_max_penetration(const Polygon& fp, double gap,
                              double dtheta = 0.002);

// true if some rotation lets the footprint pass fully through the gap
bool oracle_passes_through(const Polygon& fp, double gap, double dtheta = 0.002);

// The chord case (entering a radius-b corner circle between two boundary
// points a apart) is the same measure with gap = a: the obstacle points are
// the chord endpoints and penetration is depth past the line through them.
// The disk footprint is tight here: its deepest reach past a chord of the
// closed-form spacing a lands exactly on the circle center, at depth
// b^2/(2R) <= b.

}  // namespace rtd
