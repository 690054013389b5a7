#include "rtd/dynamics.hpp"

#include <algorithm>

namespace rtd {

namespace {

double sat(double v, double lim) { return std::clamp(v, -lim, lim); }

void check_finite(const double* v, std::size_t n, const char* who) {
  for (std::size_t i = 0; i < n; ++i)
    if (!std::isfinite(v[i])) throw std::runtime_error(std::string(who) + ": non-finite value");
}

}  // namespace

// ---------------------------------------------------------------------------
// disturbance signals

DisturbanceSignal DisturbanceSignal::constant(std::vector<double> v, double T) {
  DisturbanceSignal d;
  d.edges = {0.0, T};
  d.vals.push_back(std::move(v));
  d.validate();
  return d;
}

DisturbanceSignal DisturbanceSignal::random(Rng& rng, std::size_t dims, int pieces, double T) {
  if (pieces < 1) throw std::invalid_argument("DisturbanceSignal::random: pieces must be >= 1");
  DisturbanceSignal d;
  d.edges.push_back(0.0);
  std::vector<double> cuts;
  for (int i = 0; i + 1 < pieces; ++i) cuts.push_back(rng.uniform(0.0, T));
  std::sort(cuts.begin(), cuts.end());
  for (double c : cuts) d.edges.push_back(c);
  d.edges.push_back(T);
  for (int i = 0; i < pieces; ++i) {
    std::vector<double> v(dims);
    for (auto& vi : v) vi = rng.uniform(-1.0, 1.0);
    d.vals.push_back(std::move(v));
  }
  d.validate();
  return d;
}

void DisturbanceSignal::validate() const {
  if (edges.size() < 2 || vals.size() + 1 != edges.size())
    throw std::invalid_argument("DisturbanceSignal: need m+1 edges for m pieces");
  for (std::size_t i = 0; i + 1 < edges.size(); ++i)
    if (!(edges[i] <= edges[i + 1])) throw std::invalid_argument("DisturbanceSignal: edges not sorted");
  for (const auto& v : vals)
    for (double vi : v)
      if (!(std::fabs(vi) <= 1.0)) throw std::invalid_argument("DisturbanceSignal: |value| > 1");
}

const std::vector<double>& DisturbanceSignal::at(double t) const {
  // piece i covers [e_i, e_{i+1}); the last piece also covers t = T
  std::size_t i = 0;
  while (i + 1 < vals.size() && t >= edges[i + 1]) ++i;
  return vals[i];
}

Vec2 tracking_model_deriv(Vec2 base, Vec2 g, Vec2 d) {
  if (!(std::fabs(d.x) <= 1.0) || !(std::fabs(d.y) <= 1.0))
    throw std::invalid_argument("tracking_model_deriv: |d_i| must be <= 1");
  return {base.x + g.x * d.x, base.y + g.y * d.y};
}

// ---------------------------------------------------------------------------
// Segway

SegwayParams SegwayParams::from_config(const Config& cfg) {
  SegwayParams p;
  p.beta_gamma = cfg.num("segway.beta_gamma", p.beta_gamma);
  p.beta_alpha = cfg.num("segway.beta_alpha", p.beta_alpha);
  p.gamma_max = cfg.num("segway.gamma_max", p.gamma_max);
  p.alpha_max = cfg.num("segway.alpha_max", p.alpha_max);
  p.v_max = cfg.num("segway.v_max", p.v_max);
  p.omega_max = cfg.num("segway.omega_max", p.omega_max);
  p.yaw_cmd_dev = cfg.num("segway.yaw_cmd_dev", p.yaw_cmd_dev);
  p.radius = cfg.num("segway.radius", p.radius);
  return p;
}

PdGains PdGains::from_config(const Config& cfg, const std::string& section) {
  PdGains g;
  g.bx = cfg.num(section + ".bx", g.bx);
  g.by = cfg.num(section + ".by", g.by);
  g.btheta = cfg.num(section + ".btheta", g.btheta);
  g.bomega = cfg.num(section + ".bomega", g.bomega);
  g.bv = cfg.num(section + ".bv", g.bv);
  return g;
}

StateN<5> segway_hifi_deriv(const StateN<5>& z, Vec2 u, const SegwayParams& p) {
  check_finite(z.data(), 5, "segway_hifi_deriv");
  check_finite(&u.x, 2, "segway_hifi_deriv");
  double th = z[2], om = z[3], v = z[4];
  return {v * std::cos(th), v * std::sin(th), om,
          sat(p.beta_gamma * (u.x - om), p.gamma_max),
          sat(p.beta_alpha * (u.y - v), p.alpha_max)};
}

void segway_plan_pose(double t, Vec2 k, Vec2 c0, Vec2* pos, double* theta) {
  double k1 = k.x, k2 = k.y;
  if (theta) *theta = k1 * t;
  if (!pos) return;
  if (std::fabs(k1) < 1e-12) {
    *pos = {c0.x + k2 * t, c0.y};
  } else {
    *pos = {c0.x + (k2 / k1) * std::sin(k1 * t), c0.y + (k2 / k1) * (1.0 - std::cos(k1 * t))};
  }
}

Vec2 segway_traj_deriv(Vec2 pt, Vec2 k, Vec2 c0) {
  // rigid field: reference moves at speed k2 along heading 0 at t = 0 and the
  // whole frame spins at k1, i.e. (k2 - k1 (y - y0), k1 (x - x0))
  return Vec2{k.y, 0.0} + (pt - c0).perp() * k.x;
}

Vec2 segway_feedback(double t, const StateN<5>& z, Vec2 k, const PdGains& g, Vec2 c0) {
  Vec2 des;
  double th_des;
  segway_plan_pose(t, k, c0, &des, &th_des);
  double th = z[2];
  // position error in the body frame of the actual heading
  Vec2 e_world{des.x - z[0], des.y - z[1]};
  double ex = std::cos(th) * e_world.x + std::sin(th) * e_world.y;
  double ey = -std::sin(th) * e_world.x + std::cos(th) * e_world.y;
  double u1 = g.btheta * (th_des - th) + g.bomega * (k.x - z[3]) + g.by * ey;
  double u2 = g.bv * (k.y - z[4]) + g.bx * ex;
  return {u1, u2};
}

Vec2 segway_brake(double t, const StateN<5>& z, Vec2 k, double tau_plan, double tau_tilde,
                  const PdGains& g, Vec2 c0) {
  if (!(tau_tilde > tau_plan)) throw std::invalid_argument("segway_brake: tau_tilde must exceed tau_plan");
  if (t >= tau_tilde) return {0.0, 0.0};
  double s = (tau_tilde - t) / (tau_tilde - tau_plan);
  if (s > 1.0) s = 1.0;  // before tau_plan: full tracking command
  double s4 = s * s * s * s;
  Vec2 u = segway_feedback(t, z, k, g, c0);
  return {s4 * u.x, s4 * u.y};
}

double segway_brake_time(const StateN<5>& z, const SegwayParams& p, double tau_stop_cap) {
  // worst-case time for speed and yaw rate to decay to zero at the accel caps
  double tb = std::fabs(z[4]) / p.alpha_max + std::fabs(z[3]) / p.gamma_max;
  return std::min(std::max(tb, 1e-3), tau_stop_cap);
}

// ---------------------------------------------------------------------------
// Rover

RoverParams RoverParams::from_config(const Config& cfg) {
  RoverParams p;
  p.c1 = cfg.num("rover.c1", p.c1);
  p.c2 = cfg.num("rover.c2", p.c2);
  p.c3 = cfg.num("rover.c3", p.c3);
  p.c4 = cfg.num("rover.c4", p.c4);
  p.c5 = cfg.num("rover.c5", p.c5);
  p.c6 = cfg.num("rover.c6", p.c6);
  p.c7 = cfg.num("rover.c7", p.c7);
  p.c8 = cfg.num("rover.c8", p.c8);
  p.c9 = cfg.num("rover.c9", p.c9);
  p.l_r = cfg.num("rover.l_r", p.l_r);
  p.delta_max = cfg.num("rover.delta_max", p.delta_max);
  p.v_min = cfg.num("rover.v_min", p.v_min);
  p.v_max = cfg.num("rover.v_max", p.v_max);
  p.T_h = cfg.num("rover.T_h", p.T_h);
  return p;
}

RoverGains RoverGains::from_config(const Config& cfg, const std::string& section) {
  RoverGains g;
  g.bx = cfg.num(section + ".bx", g.bx);
  g.btheta = cfg.num(section + ".btheta", g.btheta);
  g.by = cfg.num(section + ".by", g.by);
  return g;
}

StateN<5> rover_hifi_deriv(const StateN<5>& z, Vec2 u, const RoverParams& p, bool* clamped) {
  check_finite(z.data(), 5, "rover_hifi_deriv");
  check_finite(&u.x, 2, "rover_hifi_deriv");
  double u1 = std::clamp(u.x, p.v_min, p.v_max);
  double u2 = sat(u.y, p.delta_max);
  if (clamped) *clamped = (u1 != u.x) || (u2 != u.y);
  double th = z[2], v = z[3], de = z[4];
  double thdot = v * std::tan(de) / (p.c3 + p.c4 * v * v);
  double slip = thdot * (p.c1 + p.c2 * v * v);
  double ev = v - u1;
  return {v * std::cos(th) - slip * std::sin(th), v * std::sin(th) + slip * std::cos(th), thdot,
          p.c5 + p.c6 * ev + p.c7 * ev * ev, p.c9 * (u2 - de)};
}

double rover_omega(double t, const RoverK& k, double T_h) {
  if (!(T_h > 0.0)) throw std::invalid_argument("rover_omega: T_h must be positive");
  return -2.0 * (T_h * k[0] - k[1]) * t / (T_h * T_h) + k[0];
}

double rover_heading(double t, const RoverK& k, double T_h) {
  if (!(T_h > 0.0)) throw std::invalid_argument("rover_heading: T_h must be positive");
  return -(T_h * k[0] - k[1]) * t * t / (T_h * T_h) + k[0] * t;
}

StateN<3> rover_traj_deriv(double t, const StateN<3>& z, const RoverK& k, const RoverParams& p) {
  double om = rover_omega(t, k, p.T_h);
  double th = z[2];
  return {k[2] * std::cos(th) - p.l_r * om * std::sin(th),
          k[2] * std::sin(th) + p.l_r * om * std::cos(th), om};
}

namespace {
// degree-3 Taylor forms; for |th| <= 0.6 the truncation errors are bounded by
// th^4/24 (cos) and |th|^5/120 (sin)
double cos3(double th) { return 1.0 - 0.5 * th * th; }
double sin3(double th) { return th - th * th * th / 6.0; }
}  // namespace

Vec2 rover_sub_x_deriv(double t, Vec2 s, const RoverK& k, const RoverParams& p) {
  double om = rover_omega(t, k, p.T_h);
  double th = s.y;
  return {k[2] * cos3(th) - p.l_r * om * sin3(th), om};
}

Vec2 rover_sub_y_deriv(double t, Vec2 s, const RoverK& k, const RoverParams& p) {
  double om = rover_omega(t, k, p.T_h);
  double th = s.y;
  return {k[2] * sin3(th) + p.l_r * om * cos3(th), om};
}

Vec2 rover_feedback(const StateN<5>& z, const RoverK& k, const RoverDesired& des,
                    const RoverParams& p, const RoverGains& g) {
  double th = z[2], v = z[3];
  Vec2 e_world{des.pos.x - z[0], des.pos.y - z[1]};
  double ex = std::cos(th) * e_world.x + std::sin(th) * e_world.y;
  double ey = -std::sin(th) * e_world.x + std::cos(th) * e_world.y;
  double u1 = std::clamp(k[2] + g.bx * ex, p.v_min, p.v_max);
  // feedforward wheel angle for the plan yaw rate at the current speed
  double vv = std::max(std::fabs(v), 0.05);
  double d_ff = std::atan(des.omega_ff * (p.c3 + p.c4 * v * v) / vv);
  double u2 = sat(d_ff + g.btheta * (des.theta - th) + g.by * ey, p.delta_max);
  return {u1, u2};
}

Vec2 rover_brake(double t, const StateN<5>& z, const RoverK& k, const RoverDesired& des,
                 double tau_plan, double tau_tilde, const RoverParams& p, const RoverGains& g) {
  if (!(tau_tilde > tau_plan)) throw std::invalid_argument("rover_brake: tau_tilde must exceed tau_plan");
  Vec2 u = rover_feedback(z, k, des, p, g);
  if (t >= tau_tilde) return {0.0, u.y};
  double s = (tau_tilde - t) / (tau_tilde - tau_plan);
  if (s > 1.0) s = 1.0;
  double s4 = s * s * s * s;
  return {s4 * u.x, u.y};  // speed command decays; steering stays active
}

double rover_brake_time(const StateN<5>& z, const RoverParams& p, double tau_stop_cap) {
  // with u1 = 0 the speed decays roughly exponentially at rate |c6|; time to
  // fall below v_tol from the current speed, capped
  const double v_tol = 0.02;
  double v = std::max(std::fabs(z[3]), v_tol);
  double tb = std::log(v / v_tol) / std::max(std::fabs(p.c6), 1e-6);
  return std::min(std::max(tb, 1e-3), tau_stop_cap);
}

}  // namespace rtd
