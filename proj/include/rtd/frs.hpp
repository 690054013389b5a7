#pragma once

// Conservative forward-reachable-set (FRS) computation on grids.
//
// The offline stage propagates interval boxes of the disturbed planning model
//   zdot = f(t,z,k) + g(t,k) * d(t),   |d_i| <= 1
// through time and marks every grid cell the enclosure touches, per parameter
// cell.  Everything here errs outward: a marked cell may be unreachable, but
// an unmarked cell is certified untouched by any admissible trajectory.  The
// online stage only ever reads the grids (value / projection / filtering), so
// queries are lock-free and const.
//
// Rectangular platforms are handled by decomposition: two lower-dimensional
// grids over (x, heading) and (y, heading) are computed separately and then
// recombined by matching heading cells, which stays a superset of the full
// system's reach.

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <variant>
#include <vector>

#include "rtd/tracking_error.hpp"
#include "rtd/vec2.hpp"

namespace rtd {

// ------------------------------------------------------------- intervals

struct Interval {
  double lo = 0.0, hi = 0.0;

  static Interval point(double v) { return {v, v}; }
  static Interval of(double a, double b) { return a <= b ? Interval{a, b} : Interval{b, a}; }

  double width() const { return hi - lo; }
  double mid() const { return 0.5 * (lo + hi); }
  bool contains(double v) const { return v >= lo && v <= hi; }
  bool contains(const Interval& o) const { return o.lo >= lo && o.hi <= hi; }
  Interval inflate(double e) const { return {lo - e, hi + e}; }
};

inline Interval operator+(Interval a, Interval b) { return {a.lo + b.lo, a.hi + b.hi}; }
inline Interval operator-(Interval a, Interval b) { return {a.lo - b.hi, a.hi - b.lo}; }
inline Interval operator*(double s, Interval a) {
  return s >= 0.0 ? Interval{s * a.lo, s * a.hi} : Interval{s * a.hi, s * a.lo};
}
Interval operator*(Interval a, Interval b);
inline Interval hull(Interval a, Interval b) {
  return {a.lo < b.lo ? a.lo : b.lo, a.hi > b.hi ? a.hi : b.hi};
}
// {tau * v : tau in [0,h], v in a}
inline Interval sweep_scale(double h, Interval a) { return hull({0.0, 0.0}, h * a); }

Interval iv_pow(Interval a, int e);
Interval iv_sin(Interval a);
Interval iv_cos(Interval a);
// true range enclosure of a (t,k) polynomial over a box
Interval poly_range(const PolyTK& p, Interval t, const std::vector<Interval>& k);

// ------------------------------------------------------------- grid axes

struct GridAxis {
  std::string name;
  double lo = 0.0, hi = 0.0;
  int n = 0;

  double cell() const { return (hi - lo) / n; }
  double edge(int i) const { return lo + i * cell(); }
  double center(int i) const { return lo + (i + 0.5) * cell(); }
  Interval cell_box(int i) const { return {edge(i), edge(i + 1)}; }
  // containing cell, -1 outside [lo,hi]; the upper bound maps to the last cell
  int index(double v) const;
  // cells intersecting [a,b], clipped to the domain; touching counts;
  // {1,0} (first > second) when disjoint from the domain
  std::pair<int, int> cover(double a, double b) const;
  void validate() const;
  bool operator==(const GridAxis& o) const {
    return name == o.name && lo == o.lo && hi == o.hi && n == o.n;
  }
};

// ------------------------------------------------------------- grid FRS

struct FrsProvenance {
  std::string model;
  double T = 0.0, dt = 0.0;
  std::vector<double> slack;      // per space axis, added while marking
  std::vector<double> lipschitz;  // per space axis, supplied or estimated
};

// Occupancy bitmap over (space axes) x (parameter axes).  Bits hold the raw
// propagation marks; queries additionally accept any cell within
// `dilate_cells` (Chebyshev, space axes only), so the stored bitmap stays
// exactly what the propagation touched.
struct GridFRS {
  std::vector<GridAxis> axes;  // space axes first, then parameter axes
  std::size_t n_space = 0;
  int dilate_cells = 1;
  std::vector<std::uint64_t> bits;  // one padded word block per parameter cell
  FrsProvenance prov;

  std::size_t nk() const { return axes.size() - n_space; }
  std::size_t space_cells() const;
  std::size_t k_cells() const;
  std::size_t words_per_slice() const { return (space_cells() + 63) / 64; }
  void alloc();

  bool get(std::size_t sflat, std::size_t kflat) const {
    std::size_t b = kflat * words_per_slice() * 64 + sflat;
    return (bits[b >> 6] >> (b & 63)) & 1u;
  }
  void set(std::size_t sflat, std::size_t kflat) {
    std::size_t b = kflat * words_per_slice() * 64 + sflat;
    bits[b >> 6] |= 1ull << (b & 63);
  }

  // first space axis fastest
  std::size_t space_flat(const int* idx) const;
  std::size_t k_flat(const int* idx) const;
  // false if any coordinate leaves its axis domain
  bool space_index(const double* s, int* idx) const;
  bool k_index(const double* k, int* idx) const;

  // 1.0 if the containing cell or any cell within dilate_cells is marked,
  // 0.0 otherwise; out-of-domain positions are 0 (nothing is certified
  // reachable there); out-of-domain parameters throw std::domain_error.
  double value(const double* s, const double* k) const;
  double value(Vec2 x, const std::vector<double>& k) const;  // n_space == 2

  std::size_t count() const;  // marked cells over all parameter cells
  void validate() const;
};

// --------------------------------------------------------- polynomial FRS

// Imported polynomial reach indicator: w(x,k) >= 1 marks reachable.  Each
// axis carries a scaling box mapping physical units to [-1,1].
struct PolynomialFRS {
  std::vector<GridAxis> axes;  // n unused (1); lo/hi are the scaling boxes
  std::size_t n_space = 0;
  std::vector<std::vector<int>> monomials;  // exponents, one per axis
  std::vector<double> coeffs;
  FrsProvenance prov;

  double value(const double* s, const double* k) const;
  double value(Vec2 x, const std::vector<double>& k) const;
  void validate() const;
};

using Frs = std::variant<GridFRS, PolynomialFRS>;

// ------------------------------------------------------------ computation

// Interval enclosure of the disturbed field f + g*[-1,1] over a box:
// fills out[0..n_space) given the time interval, space box, and k box.
using IntervalField =
    std::function<void(const Interval& t, const Interval* s, const Interval* k, Interval* out)>;

struct FrsSpec {
  std::vector<GridAxis> axes;  // space axes first, then parameter axes
  std::size_t n_space = 0;
  std::vector<Interval> z0;  // initial box per space axis, inside the domain
  // optional refinement: keep an initial cell iff its box meets the true
  // initial set (boxes given per space axis as lo[i], hi[i])
  std::function<bool(const double* lo, const double* hi)> z0_cell_filter;
  double T = 0.0, dt = 0.0;
  IntervalField field;
  // per space axis; empty -> estimated by sampling with a safety factor
  std::vector<double> lipschitz;
  std::string model;
  int threads = 1;
  int dilate_cells = 1;
  int max_picard = 10;
};

// Marks, per parameter cell, every cell touched by the interval enclosure of
// the disturbed flow from the initial set over [0,T].  Each initial cell box
// is carried forward as its own enclosure chain (verified per step, endpoint
// re-boxed), so quantization error does not accumulate step over step.
// Throws std::runtime_error naming the first escaping axis if the enclosure
// leaves the grid domain.
GridFRS compute_grid_frs(const FrsSpec& spec);

// Interval hull of the swept reach over [0,T] for the whole parameter box;
// used to size grid domains before committing to a resolution.
std::vector<Interval> sweep_hull(const IntervalField& field, std::vector<Interval> z0,
                                 const std::vector<Interval>& kbox, std::size_t n_space, double T,
                                 double dt, int max_picard = 10);

// Per-axis Lipschitz estimate of the field by sampled difference quotients
// over the domain, times a safety factor.
std::vector<double> estimate_lipschitz(const IntervalField& field,
                                       const std::vector<GridAxis>& axes, std::size_t n_space,
                                       double T);

// --------------------------------------------------------- decomposition

// Pair of grids over (x, shared...) and (y, shared...); all axes after the
// first must match exactly between the two.
struct SubsystemFRS {
  GridFRS sub[2];
  void validate() const;
};

SubsystemFRS compute_subsystem_frs(const FrsSpec& sx, const FrsSpec& sy);

// Cell (x, y, k) is marked iff some shared-axis cell c has (x, c, k) marked
// in sub[0] and (y, c, k) marked in sub[1].  Output axes: x, y, parameters;
// superset of any same-resolution full-system grid.
GridFRS reconstruct_frs(const SubsystemFRS& s);

// ----------------------------------------------------------------- queries

double frs_value(const Frs& frs, Vec2 x, const std::vector<double>& k);

// All certified-reachable query points for parameter k: occupied cell
// centers when resolution <= 0, else a lattice at the given spacing.
// Requires two space axes.
std::vector<Vec2> reach_projection(const GridFRS& frs, const std::vector<double>& k,
                                   double resolution = 0.0);

// Keeps only points some parameter cell can reach; dropped points can never
// constrain a plan.  Requires two space axes.
std::vector<Vec2> filter_unreachable(const GridFRS& frs, const std::vector<Vec2>& pts);

// --------------------------------------------------------------------- io

// Versioned JSON with run-length-encoded occupancy and an FNV-1a checksum;
// round-trips are bit-exact.  Loading verifies version, schema, and checksum.
std::string frs_to_json(const Frs& frs);
Frs frs_from_json(const std::string& text);
void save_frs(const std::string& path, const Frs& frs);
Frs load_frs(const std::string& path);

}  // namespace rtd
