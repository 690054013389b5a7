#pragma once

// Tracking-error functions g(t,k): per-axis polynomial envelopes on how far
// the closed-loop platform can drift from its plan, fit empirically from
// simulation sweeps.  The reachability layer adds g as a disturbance gain, so
// the fit must guarantee two bounds on every sampled trajectory:
//   rate:  g_i(t,k)        >= |pdot_hi,i(t) - f_model,i(t,...)|   (pointwise)
//   state: int_0^t g_i dk  >= |p_hi,i(t) - p_plan,i(t)|           (integral)
// both taken over the worst body point.  The pointwise bound is what lets a
// unit disturbance reproduce the real trajectory inside the model family.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "rtd/dynamics.hpp"
#include "rtd/util.hpp"

namespace rtd {

// polynomial in (t, k_1..k_nk) as explicit monomial exponent rows
struct PolyTK {
  std::size_t nk = 0;
  std::vector<std::vector<int>> monomials;  // each row: [e_t, e_k1, ..., e_knk]
  std::vector<double> coeffs;

  double eval(double t, const std::vector<double>& k) const;
  // closed-form time integral int_0^t of the polynomial at fixed k
  double integral(double t, const std::vector<double>& k) const;
  int degree() const;
  void validate() const;

  // dense basis of total degree <= deg; k exponents included only if with_k
  static PolyTK dense(std::size_t nk, int deg, bool with_k);
  // tensor basis: t up to deg_t crossed with k-monomials of total degree
  // <= deg_k; expresses a time profile whose size varies across the k box
  static PolyTK tensor(std::size_t nk, int deg_t, int deg_k);
};

struct TrackingErrorFn {
  std::string platform;  // "segway" | "rover"
  double T = 0.0;
  std::size_t nk = 0;
  std::vector<PolyTK> g;  // one per shared position axis (x, y)

  double eval(std::size_t axis, double t, const std::vector<double>& k) const;
  double integral(std::size_t axis, double t, const std::vector<double>& k) const;

  std::string to_json() const;
  static TrackingErrorFn from_json(const std::string& text);
  void save(const std::string& path) const;
  static TrackingErrorFn load(const std::string& path);
};

// one simulated grid combination: per-axis rate-mismatch and state-error
// curves sampled on a fixed time grid
struct ErrorCurves {
  std::vector<double> k;        // parameter vector of this run
  std::vector<double> t;
  std::vector<double> rate[2];   // worst-body-point |rate mismatch|, axes x/y
  std::vector<double> state[2];  // worst-body-point |state error|, axes x/y
};

using ErrorCurveFn =
    std::function<ErrorCurves(const std::vector<double>& k, const std::vector<double>& ic)>;
// random (k, ic) draw from the continuous envelope, for holdout checks
using ErrorSampleFn =
    std::function<std::pair<std::vector<double>, std::vector<double>>(Rng&)>;

struct FitConfig {
  int degree_x = 4;
  int degree_y = 3;
  bool k_in_basis = false;     // true: tensor basis t^deg x k-monomials
  int degree_k = 2;            // k total degree for the tensor basis
  double margin = 0.05;        // relative slack (1+margin) on both bounds
  double max_inflation = 5.0;  // cap on the additive constant; throws beyond
  int holdout = 200;           // fresh random draws re-checked after fitting
  std::uint64_t seed = 0x5eedf17;

  static FitConfig from_config(const Config& cfg);
};

// core fit: least-squares polynomial per axis against all rate curves, raised
// by one uniform constant until nonnegative and dominating every sampled
// curve (rate pointwise, state in integral) with the configured margin, then
// holdout-checked.  Throws if the required constant exceeds max_inflation or
// a holdout draw violates either bound.
TrackingErrorFn fit_tracking_error(const ErrorCurveFn& model, const ErrorSampleFn& sampler,
                                   const std::vector<std::vector<double>>& k_grid,
                                   const std::vector<std::vector<double>>& ic_grid,
                                   std::size_t nk, double T, double dt, const FitConfig& fc,
                                   const std::string& platform);

// ---------------------------------------------------------------------------
// platform error models

// segway: k = (k1 yaw rate, k2 speed); ic = (omega0 - k1 offset, v0), with
// omega0 clamped to the physical yaw-rate range so grid combinations stay
// feasible.  Worst body point on the rim of the radius-R footprint, closed
// form.
struct SegwayEnvelope {
  double k1_min = -1.0, k1_max = 1.0;
  double k2_min = 0.0, k2_max = 1.5;
  double v0_min = 0.0, v0_max = 1.5;
  double om0_dev = 1.0;  // |omega0 - k1| cap (planner enforces this at runtime)
  int n_k1 = 5, n_k2 = 3, n_v0 = 3, n_om0 = 3;
};

ErrorCurveFn segway_error_model(const SegwayParams& p, const PdGains& gains, double T, double dt);
ErrorSampleFn segway_error_sampler(const SegwayEnvelope& env);
std::vector<std::vector<double>> segway_k_grid(const SegwayEnvelope& env);
std::vector<std::vector<double>> segway_ic_grid(const SegwayEnvelope& env);
TrackingErrorFn fit_segway_tracking_error(const SegwayParams& p, const PdGains& gains,
                                          const SegwayEnvelope& env, double T, double dt,
                                          FitConfig fc);

// rover: k = (k1 initial yaw rate, k2 final heading, k3 speed);
// ic = (theta0, v0 - k3 offset, omega0 - k1 offset) in the road-aligned plan
// frame, the speed offset clamped to the physical speed range.  k1 names the
// robot's own initial yaw rate, so the initial wheel angle comes from the
// yaw-rate offset (delta0 = the angle realizing omega0 at v0, clamped to the
// wheel bin) rather than varying freely against k1.  Worst body point over
// the four footprint corners; the model-side field is the Taylor subsystem
// field along the plan heading path (so heading mismatch and truncation are
// absorbed into g).
struct RoverEnvelope {
  double k1_min = -1.0, k1_max = 1.0;
  double k2_min = 0.0, k2_max = 0.5;
  double k3_min = 0.5, k3_max = 2.0;
  double th0_min = -0.5, th0_max = 0.0;
  double v0_min = 0.0, v0_max = 2.0;
  double de0_min = -0.5, de0_max = 0.5;
  double k3_dev = 1.0;   // |k3 - v0| cap
  double om0_dev = 0.5;  // |omega0 - k1| cap (planner enforces this at runtime)
  double half_length = 0.25, half_width = 0.145;
  // k-grid density must overdetermine the dense degree-3 basis in (t,k)
  int n_k1 = 5, n_k2 = 3, n_k3 = 5, n_th0 = 3, n_v0 = 5, n_om0 = 3;
};

ErrorCurveFn rover_error_model(const RoverParams& p, const RoverGains& gains, double T, double dt,
                               const RoverEnvelope& env);
ErrorSampleFn rover_error_sampler(const RoverEnvelope& env);
std::vector<std::vector<double>> rover_k_grid(const RoverEnvelope& env);
std::vector<std::vector<double>> rover_ic_grid(const RoverEnvelope& env);
TrackingErrorFn fit_rover_tracking_error(const RoverParams& p, const RoverGains& gains,
                                         const RoverEnvelope& env, double T, double dt,
                                         FitConfig fc);

}  // namespace rtd
