#pragma once

// Platform reach-set libraries.  Both robots plan over a family of reach
// grids, one per initial-condition bin (speed range, and for the rover also
// wheel-angle range and heading sign), because the tracking error fit per bin
// is far tighter than one global envelope.  Each entry packages the selection
// predicate, the certified parameter box, the bin's tracking error fit, and
// the reach set the planner queries.

#include <cstddef>
#include <string>
#include <vector>

#include "rtd/dynamics.hpp"
#include "rtd/frs.hpp"
#include "rtd/tracking_error.hpp"
#include "rtd/util.hpp"

namespace rtd {

// Runtime selection predicate over the robot state at plan time.  Closed
// ranges; overlapping entries are resolved by declaration order.
struct FrsSelector {
  Interval speed{0.0, 0.0};
  Interval wheel{-1e18, 1e18};  // steering wheel angle; full range when unused
  int heading_sign = 0;         // -1: heading <= 0, +1: heading >= 0, 0: any

  bool matches(double v, double wheel_angle, double heading) const;
};

// Everything the bin certifies before any reach set is computed: ranges the
// fit envelope and grids are built from.
struct FrsBinDef {
  std::string id;
  FrsSelector sel;
  std::vector<Interval> kbox;  // parameter bounds, FRS parameter-axis order
  Interval th0{0.0, 0.0};      // initial heading range (rover bins)
  double T = 0.0;
  double tau_plan = 0.0;
};

struct FrsEntry {
  std::string id;
  FrsSelector sel;
  Frs frs;                     // what the planner queries (value semantics)
  std::vector<Interval> kbox;  // certified parameter box
  double T = 0.0;
  double tau_plan = 0.0;
  TrackingErrorFn g;           // the bin's tracking error fit

  void validate() const;
};

struct FrsLibrary {
  std::string platform;  // "segway" | "rover"
  std::vector<FrsEntry> entries;

  // first entry in declaration order whose selector matches; throws
  // std::domain_error when the state is outside the covered envelope
  const FrsEntry& select(double v, double wheel_angle, double heading) const;
  void validate() const;

  std::string to_json() const;
  static FrsLibrary from_json(const std::string& text);
  void save(const std::string& path) const;
  static FrsLibrary load(const std::string& path);
};

// ---------------------------------------------------------------------------
// interval tracking-model fields (consumed by compute_grid_frs)

// segway plan-frame field on (x, y) with k = (k1 yaw rate, k2 speed); exact
// for every body point of the rigid family:
//   xdot = k2 - k1 y + [-1,1]|gx(t,k)|,  ydot = k1 x + [-1,1]|gy(t,k)|
IntervalField segway_tracking_field(const TrackingErrorFn& g);

// rover subsystem field on (x or y, theta) with k = (k1, k2, k3); axis 0
// selects the x form, 1 the y form; cubic heading expansion and the
// lane-change yaw rate profile omega(t,k)
IntervalField rover_subsystem_field(const TrackingErrorFn& g, std::size_t axis,
                                    const RoverParams& p);

// interval form of rover_omega over a (t, k1, k2) box
Interval rover_omega_range(const Interval& t, const Interval& k1, const Interval& k2, double T_h);

// ---------------------------------------------------------------------------
// library construction

struct SegwayLibraryOptions {
  SegwayParams params;
  PdGains gains;
  bool hardware = false;  // hardware: 2 speed bins, T = 1.0 s
  double cell = 0.05;     // spatial resolution of the reach grids
  int n_k1 = 21;
  int n_k2 = 21;
  double frs_dt = 0.02;
  double fit_dt = 0.01;
  FitConfig fit;
  int threads = 1;

  static SegwayLibraryOptions from_config(const Config& cfg);
};

struct RoverLibraryOptions {
  RoverParams params;
  RoverGains gains;
  bool hardware = false;  // hardware: one 1.0--1.5 m/s bin, tau_plan 0.375 s
  double cell = 0.05;     // x / y / theta resolution
  int n_k1 = 11;
  int n_k2 = 5;
  int n_k3 = 7;
  double frs_dt = 0.02;
  double fit_dt = 0.01;
  FitConfig fit;
  int threads = 1;

  static RoverLibraryOptions from_config(const Config& cfg);
};

// bin tables in declaration (selection-priority) order.
// segway sim: speeds 0-0.5 (T 0.6), 0.5-1.0 (T 0.8), 1.0-1.5 (T 0.8);
// hardware: 0-0.5 and 0.5-1.25, both T 1.0.  k = (k1 in +-omega_max, k2 =
// speed bin); tau_plan 0.5.
std::vector<FrsBinDef> segway_bin_defs(const SegwayLibraryOptions& opt);
// rover sim: 3 speed bins x 7 wheel bins x heading sign = 42 entries, slow
// bins T 1.25, fast 1.5, tau_plan 0.5; k2 in [0,0.5] for negative headings
// (mirrored positive), k1 in [-1,1] with the per-k2 coupling left to the
// planner, k3 in [max(0.5, v_lo-1), min(v_max, v_hi+1)].  hardware: one bin,
// speeds 1.0-1.5, both heading signs, tau_plan 0.375.
std::vector<FrsBinDef> rover_bin_defs(const RoverLibraryOptions& opt);

// build one bin: fit the tracking error over the bin envelope, then compute
// the reach grid(s).  The rover build returns the subsystem pair alongside
// the reconstructed entry for audits.
FrsEntry build_segway_entry(const SegwayLibraryOptions& opt, const FrsBinDef& def);

struct RoverBinBuild {
  FrsEntry entry;     // frs = reconstruction of the subsystem pair
  SubsystemFRS sub;
};
RoverBinBuild build_rover_entry(const RoverLibraryOptions& opt, const FrsBinDef& def);

FrsLibrary build_segway_library(const SegwayLibraryOptions& opt);
FrsLibrary build_rover_library(const RoverLibraryOptions& opt);

}  // namespace rtd
