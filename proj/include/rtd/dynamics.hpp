#pragma once

// Platform dynamics: high-fidelity models, trajectory-producing models,
// tracking controllers, braking controllers, and a fixed-step RK4 integrator.
//
// Two platforms are supported:
//  - segway: differential drive, circular footprint, 5 hi-fi states
//            (x, y, theta, omega, v), inputs (omega_des, v_des)
//  - rover:  front-steered car, rectangular footprint, 5 hi-fi states
//            (x, y, theta, v, delta), inputs (v_des, delta_des)
//
// Trajectory-producing ("plan") models are lower-dimensional vector fields
// parameterized by k; the flow of a plan field transports any body point
// rigidly, so plan poses are exact rigid motions.

#include <array>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "rtd/util.hpp"
#include "rtd/vec2.hpp"

namespace rtd {

template <std::size_t N>
using StateN = std::array<double, N>;

// ---------------------------------------------------------------------------
// fixed-step RK4

template <std::size_t N>
struct TrajectoryN {
  double dt = 0.0;
  std::vector<double> t;
  std::vector<StateN<N>> z;  // z[i] at time t[i]

  const StateN<N>& back() const { return z.back(); }

  // linear interpolation between samples; clamps outside [t0, t_end]
  StateN<N> at(double time) const {
    if (z.empty()) throw std::runtime_error("TrajectoryN::at: empty trajectory");
    if (time <= t.front()) return z.front();
    if (time >= t.back()) return z.back();
    std::size_t i = static_cast<std::size_t>((time - t.front()) / dt);
    if (i + 1 >= z.size()) i = z.size() - 2;
    while (i + 1 < z.size() && t[i + 1] < time) ++i;
    while (i > 0 && t[i] > time) --i;
    double w = (time - t[i]) / (t[i + 1] - t[i]);
    StateN<N> out;
    for (std::size_t j = 0; j < N; ++j) out[j] = (1.0 - w) * z[i][j] + w * z[i + 1][j];
    return out;
  }
};

namespace detail {
inline void integrate_check_finite(const double* v, std::size_t n, double tt) {
  for (std::size_t j = 0; j < n; ++j)
    if (!std::isfinite(v[j]))
      throw std::runtime_error("integrate: non-finite state at t=" + num_str(tt));
}
}  // namespace detail

// Classic RK4 with fixed step dt; samples at t = 0, dt, 2*dt, ..., ending
// exactly at t_end (a shorter final step is taken if t_end is not a multiple
// of dt).  deriv(t, z) -> StateN<N>.  Throws if the state goes non-finite.
template <std::size_t N, class F>
TrajectoryN<N> integrate(F&& deriv, StateN<N> z0, double t_end, double dt) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw std::invalid_argument("integrate: dt must be positive");
  if (!(t_end >= 0.0) || !std::isfinite(t_end)) throw std::invalid_argument("integrate: t_end must be >= 0");
  TrajectoryN<N> out;
  out.dt = dt;
  out.t.push_back(0.0);
  out.z.push_back(z0);
  detail::integrate_check_finite(z0.data(), N, 0.0);
  double tt = 0.0;
  auto step = [&](double h) {
    StateN<N> k1 = deriv(tt, out.z.back());
    StateN<N> tmp;
    for (std::size_t j = 0; j < N; ++j) tmp[j] = out.z.back()[j] + 0.5 * h * k1[j];
    StateN<N> k2 = deriv(tt + 0.5 * h, tmp);
    for (std::size_t j = 0; j < N; ++j) tmp[j] = out.z.back()[j] + 0.5 * h * k2[j];
    StateN<N> k3 = deriv(tt + 0.5 * h, tmp);
    for (std::size_t j = 0; j < N; ++j) tmp[j] = out.z.back()[j] + h * k3[j];
    StateN<N> k4 = deriv(tt + h, tmp);
    StateN<N> nxt;
    for (std::size_t j = 0; j < N; ++j)
      nxt[j] = out.z.back()[j] + (h / 6.0) * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
    tt += h;
    detail::integrate_check_finite(nxt.data(), N, tt);
    out.t.push_back(tt);
    out.z.push_back(nxt);
  };
  while (tt + dt <= t_end + 1e-12) step(dt);
  double rem = t_end - tt;
  if (rem > 1e-12) step(rem);
  return out;
}

// ---------------------------------------------------------------------------
// plan frame: pose of the robot at the instant a plan was created.  Plans are
// computed in this local frame (robot at origin, heading +x).

struct PlanFrame {
  Vec2 origin{0.0, 0.0};
  double heading = 0.0;

  Vec2 to_plan(Vec2 world) const { return (world - origin).rotated(-heading); }
  Vec2 to_world(Vec2 plan) const { return origin + plan.rotated(heading); }
  double ang_to_plan(double a) const { return a - heading; }
  double ang_to_world(double a) const { return a + heading; }
};

// velocity of a body point under rigid motion: given the reference-point
// velocity and the yaw rate, pdot = cdot + thetadot * perp(p - c)
inline Vec2 rigid_body_point_deriv(Vec2 pt, Vec2 center, Vec2 center_deriv, double thetadot) {
  return center_deriv + (pt - center).perp() * thetadot;
}

// ---------------------------------------------------------------------------
// disturbance signals for the tracking model zdot = f + g .* d, |d_i| <= 1

struct DisturbanceSignal {
  std::vector<double> edges;               // 0 = e_0 < e_1 < ... < e_m = T
  std::vector<std::vector<double>> vals;   // vals[i] on [e_i, e_{i+1}), each in [-1,1]

  static DisturbanceSignal constant(std::vector<double> v, double T);
  // piecewise-constant with `pieces` intervals, switch times and values uniform
  static DisturbanceSignal random(Rng& rng, std::size_t dims, int pieces, double T);

  const std::vector<double>& at(double t) const;
  void validate() const;  // throws if unsorted edges or any |value| > 1
};

// tracking-model field for the 2-D shared-state block: base + g .* d
// (throws if |d_i| > 1; pass d.y = 0 when g.y = 0)
Vec2 tracking_model_deriv(Vec2 base, Vec2 g, Vec2 d);

// ---------------------------------------------------------------------------
// Segway

// hi-fi state: (x, y, theta, omega, v); input u = (omega_des, v_des)
struct SegwayParams {
  double beta_gamma = 2.95;   // yaw accel gain, gammadot = sat(beta_gamma*(u1 - omega))
  double beta_alpha = 3.00;   // accel gain, vdot = sat(beta_alpha*(u2 - v))
  double gamma_max = 5.9;     // |yaw accel| cap
  double alpha_max = 3.75;    // |accel| cap
  double v_max = 1.5;         // commanded speed cap
  double omega_max = 1.0;     // commanded yaw rate cap
  double yaw_cmd_dev = 1.0;   // planner-side cap on |k1 - omega_0|
  double radius = 0.38;       // circular footprint radius

  static SegwayParams from_config(const Config& cfg);
};

// PD tracking gains; hardware profile zeroes the position terms
struct PdGains {
  double bx = 20.0;
  double by = 20.0;
  double btheta = 10.0;
  double bomega = 20.0;
  double bv = 20.0;

  static PdGains from_config(const Config& cfg, const std::string& section = "segway_gains");
};

// zdot = (v cos th, v sin th, gamma(u1, omega), alpha(u2, v)); throws on
// non-finite state or input
StateN<5> segway_hifi_deriv(const StateN<5>& z, Vec2 u, const SegwayParams& p);

// plan family: constant yaw rate k1, constant speed k2, in the plan frame.
// Pose of the plan reference point at time t (exact closed form: arc for
// k1 != 0, straight line otherwise).  c0 is the reference point at t = 0.
void segway_plan_pose(double t, Vec2 k, Vec2 c0, Vec2* pos, double* theta);

// plan vector field at a body point (rigid rotation about the reference)
Vec2 segway_traj_deriv(Vec2 pt, Vec2 k, Vec2 c0);

// PD tracking controller: u = (u1, u2) tracking the plan (k, c0) expressed in
// the plan frame.  z must already be in plan-frame coordinates.
Vec2 segway_feedback(double t, const StateN<5>& z, Vec2 k, const PdGains& g, Vec2 c0 = {0.0, 0.0});

// braking controller: scales the tracking command by ((tau_tilde - t) /
// (tau_tilde - tau_plan))^4 on [tau_plan, tau_tilde), zero after.
// Throws if tau_tilde <= tau_plan.
Vec2 segway_brake(double t, const StateN<5>& z, Vec2 k, double tau_plan, double tau_tilde,
                  const PdGains& g, Vec2 c0 = {0.0, 0.0});

// time to come to rest from state z under braking (speed decay plus yaw
// decay), capped at tau_stop_cap
double segway_brake_time(const StateN<5>& z, const SegwayParams& p, double tau_stop_cap);

// ---------------------------------------------------------------------------
// Rover

// hi-fi state: (x, y, theta, v, delta); input u = (v_des, delta_des).
// x, y locate the center of mass; l_r is the rear-axle-to-CoM distance.
struct RoverParams {
  // placeholder coefficients for the fitted single-track model; c8 is unused
  double c1 = 0.0765;   // low-speed lateral slip offset (~ l_r)
  double c2 = 0.01;     // speed-dependent lateral slip
  double c3 = 0.32;     // effective wheelbase
  double c4 = 0.01;     // speed-dependent wheelbase stretch
  double c5 = 0.0;      // longitudinal accel bias
  double c6 = -3.0;     // speed tracking gain (stable: negative)
  double c7 = 0.1;      // quadratic speed-error term
  double c8 = 0.0;      // unused
  double c9 = 5.0;      // steering servo rate
  double l_r = 0.0765;  // CoM offset used by the plan family
  double delta_max = 0.5;
  double v_min = 0.0;
  double v_max = 2.0;
  double T_h = 2.0;     // heading-profile horizon of the plan family

  static RoverParams from_config(const Config& cfg);
};

struct RoverGains {
  double bx = 2.0;      // longitudinal position -> speed command
  double btheta = 4.0;  // heading -> wheel angle command
  double by = 2.0;      // lateral position -> wheel angle command

  static RoverGains from_config(const Config& cfg, const std::string& section = "rover_gains");
};

// single-track model with speed-dependent slip:
//   xdot = v cos th - thdot (c1 + c2 v^2) sin th
//   ydot = v sin th + thdot (c1 + c2 v^2) cos th
//   thdot = v tan(delta) / (c3 + c4 v^2)
//   vdot = c5 + c6 (v - u1) + c7 (v - u1)^2
//   deltadot = c9 (u2 - delta)
// Inputs outside [v_min, v_max] x [-delta_max, delta_max] are clamped; if
// `clamped` is non-null it is set accordingly.  Throws on non-finite values.
StateN<5> rover_hifi_deriv(const StateN<5>& z, Vec2 u, const RoverParams& p, bool* clamped = nullptr);

// plan family: k = (k1 initial yaw rate, k2 final heading, k3 speed).
// omega(t) = -2 (T_h k1 - k2) t / T_h^2 + k1, theta(t) = integral of omega,
// so theta(T_h) = k2 exactly.
using RoverK = std::array<double, 3>;
double rover_omega(double t, const RoverK& k, double T_h);
double rover_heading(double t, const RoverK& k, double T_h);

// plan field on (x_c, y_c, theta) for the center of mass:
//   xdot_c = k3 cos th - l_r omega sin th
//   ydot_c = k3 sin th + l_r omega cos th
StateN<3> rover_traj_deriv(double t, const StateN<3>& z, const RoverK& k, const RoverParams& p);

// Taylor-expanded subsystem fields used by the reachability decomposition:
// s = (x, theta) and s = (y, theta), with cos/sin replaced by degree-3
// expansions (valid for |theta| <= 0.6)
Vec2 rover_sub_x_deriv(double t, Vec2 s, const RoverK& k, const RoverParams& p);
Vec2 rover_sub_y_deriv(double t, Vec2 s, const RoverK& k, const RoverParams& p);

// desired plan pose at time t (integrate rover_traj_deriv to produce it);
// omega_ff is the plan yaw rate at the same time, used as feedforward
struct RoverDesired {
  Vec2 pos{0.0, 0.0};
  double theta = 0.0;
  double omega_ff = 0.0;
};

// proportional tracking controller.  z in plan-frame coordinates; des is the
// plan pose at time t.  u1 = speed command, u2 = wheel angle command.
Vec2 rover_feedback(const StateN<5>& z, const RoverK& k, const RoverDesired& des,
                    const RoverParams& p, const RoverGains& g);

// braking: speed command decays as ((tau_tilde - t)/(tau_tilde - tau_plan))^4
// on [tau_plan, tau_tilde), zero after; steering feedback is kept so the
// rover brakes along its lane.  Throws if tau_tilde <= tau_plan.
Vec2 rover_brake(double t, const StateN<5>& z, const RoverK& k, const RoverDesired& des,
                 double tau_plan, double tau_tilde, const RoverParams& p, const RoverGains& g);

double rover_brake_time(const StateN<5>& z, const RoverParams& p, double tau_stop_cap);

}  // namespace rtd
