#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>

#include "rtd/dynamics.hpp"

using namespace rtd;

namespace {

// closed-loop segway step: hi-fi model driven by the PD tracker for plan k
StateN<5> segway_tracked_deriv(double t, const StateN<5>& z, Vec2 k, const SegwayParams& p,
                               const PdGains& g) {
  return segway_hifi_deriv(z, segway_feedback(t, z, k, g), p);
}

}  // namespace

TEST_CASE("integrator matches closed forms and lands exactly on t_end") {
  auto zero = [](double, const StateN<2>&) { return StateN<2>{0.0, 0.0}; };
  auto tr0 = integrate<2>(zero, {1.5, -2.0}, 1.0, 0.01);
  CHECK(tr0.t.size() == 101);
  CHECK(tr0.t.back() == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(tr0.back()[0] == 1.5);
  CHECK(tr0.back()[1] == -2.0);

  auto one = [](double, const StateN<1>&) { return StateN<1>{1.0}; };
  auto tr1 = integrate<1>(one, {0.0}, 1.0, 0.01);
  CHECK(tr1.back()[0] == doctest::Approx(1.0).epsilon(1e-14));

  // pure time quadrature: RK4 is exact for cubic integrands
  auto cubic = [](double t, const StateN<1>&) { return StateN<1>{4.0 * t * t * t}; };
  auto trc = integrate<1>(cubic, {0.0}, 2.0, 0.02);
  CHECK(std::fabs(trc.back()[0] - 16.0) < 1e-12);

  // t_end not a multiple of dt: shorter last step, exact endpoint
  auto trp = integrate<1>(one, {0.0}, 0.105, 0.01);
  CHECK(trp.t.back() == doctest::Approx(0.105).epsilon(1e-15));
  CHECK(trp.back()[0] == doctest::Approx(0.105).epsilon(1e-12));

  // interpolation
  auto lin = integrate<1>(one, {0.0}, 1.0, 0.01);
  CHECK(lin.at(0.345)[0] == doctest::Approx(0.345).epsilon(1e-12));
  CHECK(lin.at(-1.0)[0] == 0.0);
  CHECK(lin.at(5.0)[0] == doctest::Approx(1.0).epsilon(1e-14));

  CHECK_THROWS_AS(integrate<1>(one, {0.0}, 1.0, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(integrate<1>(one, {0.0}, -1.0, 0.01), std::invalid_argument);

  auto blows = [](double t, const StateN<1>&) {
    return StateN<1>{t > 0.05 ? std::numeric_limits<double>::quiet_NaN() : 1.0};
  };
  CHECK_THROWS_AS(integrate<1>(blows, {0.0}, 1.0, 0.01), std::runtime_error);
}

TEST_CASE("integrator is deterministic bit for bit") {
  SegwayParams p;
  PdGains g;
  Vec2 k{0.7, 1.1};
  auto deriv = [&](double t, const StateN<5>& z) { return segway_tracked_deriv(t, z, k, p, g); };
  StateN<5> z0{0.0, 0.0, 0.0, 0.2, 0.9};
  auto a = integrate<5>(deriv, z0, 0.8, 0.01);
  auto b = integrate<5>(deriv, z0, 0.8, 0.01);
  REQUIRE(a.z.size() == b.z.size());
  CHECK(std::memcmp(a.z.data(), b.z.data(), a.z.size() * sizeof(StateN<5>)) == 0);
}

TEST_CASE("segway high-fidelity field: cruise, yaw response, saturation") {
  SegwayParams p;

  // straight cruise at commanded speed: pure translation
  auto d = segway_hifi_deriv({0, 0, 0, 0, 1.5}, {0.0, 1.5}, p);
  CHECK(d[0] == doctest::Approx(1.5).epsilon(1e-15));
  CHECK(d[1] == 0.0);
  CHECK(d[2] == 0.0);
  CHECK(d[3] == 0.0);
  CHECK(d[4] == 0.0);

  // unit yaw-rate command from rest: unsaturated yaw acceleration
  d = segway_hifi_deriv({0, 0, 0, 0, 0}, {1.0, 0.0}, p);
  CHECK(d[3] == doctest::Approx(2.95).epsilon(1e-15));

  // two units of yaw-rate error saturates at the cap
  d = segway_hifi_deriv({0, 0, 0, -1.0, 0}, {1.0, 0.0}, p);
  CHECK(d[3] == doctest::Approx(5.9).epsilon(1e-15));

  // accel channel saturates too: 2 m/s of speed error asks for 6 > 3.75
  d = segway_hifi_deriv({0, 0, 0, 0, 0}, {0.0, 2.0}, p);
  CHECK(d[4] == doctest::Approx(3.75).epsilon(1e-15));

  // heading rotates the velocity
  d = segway_hifi_deriv({0, 0, M_PI / 2.0, 0, 1.0}, {0.0, 1.0}, p);
  CHECK(d[0] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(d[1] == doctest::Approx(1.0).epsilon(1e-15));

  CHECK_THROWS_AS(
      segway_hifi_deriv({0, 0, std::numeric_limits<double>::quiet_NaN(), 0, 0}, {0, 0}, p),
      std::runtime_error);
  CHECK_THROWS_AS(segway_hifi_deriv({0, 0, 0, 0, 0}, {std::numeric_limits<double>::infinity(), 0}, p),
                  std::runtime_error);

  // accel channels stay within the caps for random states and inputs
  Rng rng(41);
  for (int i = 0; i < 500; ++i) {
    StateN<5> z{rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-4, 4), rng.uniform(-3, 3),
                rng.uniform(-1, 3)};
    Vec2 u{rng.uniform(-2, 2), rng.uniform(-2, 3)};
    auto dd = segway_hifi_deriv(z, u, p);
    CHECK(std::fabs(dd[3]) <= p.gamma_max + 1e-12);
    CHECK(std::fabs(dd[4]) <= p.alpha_max + 1e-12);
  }
}

TEST_CASE("segway plan field is a rigid motion with exact closed-form poses") {
  // field value at the reference point is (speed, 0); offset points pick up
  // the rotational term
  Vec2 k{1.0, 1.5};
  Vec2 d = segway_traj_deriv({0, 0}, k, {0, 0});
  CHECK(d.x == doctest::Approx(1.5).epsilon(1e-15));
  CHECK(d.y == 0.0);

  d = segway_traj_deriv({0.0, 0.38}, k, {0, 0});
  CHECK(d.x == doctest::Approx(1.12).epsilon(1e-12));
  CHECK(d.y == doctest::Approx(0.0).epsilon(1e-15));

  // zero yaw rate: uniform translation everywhere
  d = segway_traj_deriv({3.0, -2.0}, {0.0, 1.0}, {0, 0});
  CHECK(d.x == 1.0);
  CHECK(d.y == 0.0);

  // closed-form pose matches integrating the field at the reference point
  for (Vec2 kk : {Vec2{0.5, 1.2}, Vec2{-0.9, 0.7}, Vec2{0.0, 1.5}}) {
    auto field = [&](double, const StateN<2>& s) {
      Vec2 v = segway_traj_deriv({s[0], s[1]}, kk, {0, 0});
      return StateN<2>{v.x, v.y};
    };
    auto tr = integrate<2>(field, {0.0, 0.0}, 0.8, 0.01);
    Vec2 pos;
    double th;
    segway_plan_pose(0.8, kk, {0, 0}, &pos, &th);
    CHECK(std::fabs(tr.back()[0] - pos.x) < 1e-9);
    CHECK(std::fabs(tr.back()[1] - pos.y) < 1e-9);
    CHECK(th == doctest::Approx(kk.x * 0.8).epsilon(1e-15));
  }
}

TEST_CASE("segway tracker responds to each error channel as gains dictate") {
  PdGains g;  // bx = by = bomega = bv = 20, btheta = 10

  // pure speed error of 0.1 at bv = 20 commands 2.0
  Vec2 u = segway_feedback(0.0, {0, 0, 0, 0, 0.9}, {0.0, 1.0}, g);
  CHECK(u.x == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(u.y == doctest::Approx(2.0).epsilon(1e-12));

  // pure heading error
  u = segway_feedback(0.0, {0, 0, 0.1, 0, 1.0}, {0.0, 1.0}, g);
  CHECK(u.x == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(u.y == doctest::Approx(0.0).epsilon(1e-12));

  // pure lateral offset (robot is right of the plan): steer left
  u = segway_feedback(0.0, {0, -0.1, 0, 0, 1.0}, {0.0, 1.0}, g);
  CHECK(u.x == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(u.y == doctest::Approx(0.0).epsilon(1e-12));

  // longitudinal offset maps into the speed command through the body frame
  u = segway_feedback(0.0, {-0.1, 0, 0, 0, 1.0}, {0.0, 1.0}, g);
  CHECK(u.x == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(u.y == doctest::Approx(2.0).epsilon(1e-12));

  // hardware profile ignores position and heading errors
  Config hw = Config::from_string(
      "[segway_gains]\nbx = 0\nby = 0\nbtheta = 0\nbomega = 10\nbv = 10\n", "hw");
  PdGains gh = PdGains::from_config(hw);
  CHECK(gh.bx == 0.0);
  CHECK(gh.btheta == 0.0);
  u = segway_feedback(0.0, {5.0, -3.0, 1.0, 0.2, 0.7}, {0.5, 1.0}, gh);
  CHECK(u.x == doctest::Approx(10.0 * 0.3).epsilon(1e-12));
  CHECK(u.y == doctest::Approx(10.0 * 0.3).epsilon(1e-12));
}

TEST_CASE("segway closed loop tracks plans tightly from matched initial conditions") {
  SegwayParams p;
  PdGains g;
  for (Vec2 k : {Vec2{0.5, 1.0}, Vec2{-1.0, 1.5}, Vec2{0.0, 0.8}}) {
    StateN<5> z0{0, 0, 0, k.x, k.y};
    auto deriv = [&](double t, const StateN<5>& z) { return segway_tracked_deriv(t, z, k, p, g); };
    auto tr = integrate<5>(deriv, z0, 0.8, 0.01);
    Vec2 pos;
    double th;
    segway_plan_pose(0.8, k, {0, 0}, &pos, &th);
    double perr = std::hypot(tr.back()[0] - pos.x, tr.back()[1] - pos.y);
    CHECK(perr < 0.1);
    CHECK(std::fabs(tr.back()[2] - th) < 0.15);
  }
}

TEST_CASE("segway braking command fades quartically and cuts to zero") {
  PdGains g;
  Vec2 k{0.3, 1.2};
  StateN<5> z{0.4, 0.1, 0.2, 0.3, 1.0};
  double tp = 0.5, tt = 1.5;

  Vec2 ufb = segway_feedback(0.5, z, k, g);
  Vec2 ub = segway_brake(0.5, z, k, tp, tt, g);
  CHECK(ub.x == doctest::Approx(ufb.x).epsilon(1e-15));
  CHECK(ub.y == doctest::Approx(ufb.y).epsilon(1e-15));

  // before the plan time the scale clamps at one
  ufb = segway_feedback(0.2, z, k, g);
  ub = segway_brake(0.2, z, k, tp, tt, g);
  CHECK(ub.x == doctest::Approx(ufb.x).epsilon(1e-15));

  // midpoint: (1/2)^4
  ufb = segway_feedback(1.0, z, k, g);
  ub = segway_brake(1.0, z, k, tp, tt, g);
  CHECK(ub.x == doctest::Approx(0.0625 * ufb.x).epsilon(1e-12));
  CHECK(ub.y == doctest::Approx(0.0625 * ufb.y).epsilon(1e-12));

  CHECK(segway_brake(1.5, z, k, tp, tt, g).x == 0.0);
  CHECK(segway_brake(2.0, z, k, tp, tt, g).y == 0.0);
  CHECK_THROWS_AS(segway_brake(0.0, z, k, 0.5, 0.5, g), std::invalid_argument);
}

TEST_CASE("segway brake time estimate scales with motion and respects the cap") {
  SegwayParams p;
  CHECK(segway_brake_time({0, 0, 0, 0, 1.5}, p, 1.5) == doctest::Approx(0.4).epsilon(1e-12));
  CHECK(segway_brake_time({0, 0, 0, 1.0, 1.5}, p, 1.5) ==
        doctest::Approx(0.4 + 1.0 / 5.9).epsilon(1e-12));
  CHECK(segway_brake_time({0, 0, 0, 1.0, 1.5}, p, 0.3) == 0.3);
  CHECK(segway_brake_time({0, 0, 0, 0, 0}, p, 1.5) == doctest::Approx(1e-3));
}

TEST_CASE("segway stops within the required distance from top hardware speed") {
  SegwayParams p;
  p.v_max = 1.25;
  PdGains g;
  double v0 = 1.25, tp = 0.5;
  Vec2 k{0.0, v0};
  StateN<5> z0{0, 0, 0, 0, v0};

  // cruise for tau_plan, then brake; tau_tilde from the state at tau_plan
  auto cruise = [&](double t, const StateN<5>& z) { return segway_tracked_deriv(t, z, k, p, g); };
  auto head = integrate<5>(cruise, z0, tp, 0.01);
  StateN<5> zb = head.back();
  double tt = tp + segway_brake_time(zb, p, 1.5);
  auto braking = [&](double t, const StateN<5>& z) {
    return segway_hifi_deriv(z, segway_brake(t + tp, z, k, tp, tt, g), p);
  };
  auto tail = integrate<5>(braking, zb, 2.0, 0.01);

  CHECK(std::fabs(tail.back()[4]) < 0.02);            // at rest
  CHECK(std::fabs(tail.back()[3]) < 0.02);            // no residual spin
  double stop_dist = tail.back()[0] - zb[0];
  CHECK(stop_dist > 0.0);
  CHECK(stop_dist <= 0.625);
}

TEST_CASE("rover high-fidelity field: straight motion, slip, input clamping") {
  RoverParams p;

  // matched straight cruise: theta rate zero, accel equals the bias term
  bool cl = false;
  auto d = rover_hifi_deriv({0, 0, 0, 1.0, 0.0}, {1.0, 0.0}, p, &cl);
  CHECK(d[0] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(d[1] == 0.0);
  CHECK(d[2] == 0.0);
  CHECK(d[3] == doctest::Approx(p.c5).epsilon(1e-15));
  CHECK(d[4] == 0.0);
  CHECK(!cl);

  // steering: thdot = v tan(delta) / (c3 + c4 v^2), plus lateral slip
  double v = 1.2, de = 0.3;
  d = rover_hifi_deriv({0, 0, 0, v, de}, {v, de}, p, &cl);
  double thdot = v * std::tan(de) / (p.c3 + p.c4 * v * v);
  CHECK(d[2] == doctest::Approx(thdot).epsilon(1e-12));
  CHECK(d[1] == doctest::Approx(thdot * (p.c1 + p.c2 * v * v)).epsilon(1e-12));
  CHECK(!cl);

  // out-of-range commands are clamped and flagged
  d = rover_hifi_deriv({0, 0, 0, 1.0, 0.0}, {5.0, 1.0}, p, &cl);
  CHECK(cl);
  CHECK(d[3] == doctest::Approx(p.c5 + p.c6 * (1.0 - p.v_max) + p.c7 * 1.0).epsilon(1e-12));
  CHECK(d[4] == doctest::Approx(p.c9 * p.delta_max).epsilon(1e-12));
  d = rover_hifi_deriv({0, 0, 0, 1.0, 0.0}, {-1.0, -2.0}, p, &cl);
  CHECK(cl);
  CHECK(d[4] == doctest::Approx(-p.c9 * p.delta_max).epsilon(1e-12));

  CHECK_THROWS_AS(
      rover_hifi_deriv({0, 0, 0, std::numeric_limits<double>::infinity(), 0}, {1, 0}, p),
      std::runtime_error);
}

TEST_CASE("rover plan family: yaw profile hits the commanded final heading") {
  double Th = 2.0;
  RoverK k{0.5, 0.0, 1.1};
  CHECK(rover_omega(0.0, k, Th) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(rover_heading(Th, k, Th) == doctest::Approx(0.0).epsilon(1e-12));

  RoverK k2{0.3, 0.4, 1.0};
  CHECK(rover_omega(0.0, k2, Th) == doctest::Approx(0.3).epsilon(1e-15));
  CHECK(rover_heading(Th, k2, Th) == doctest::Approx(0.4).epsilon(1e-12));

  // heading is the integral of the yaw profile
  for (double t : {0.0, 0.4, 1.0, 1.7}) {
    double h = 1e-6;
    double dnum = (rover_heading(t + h, k2, Th) - rover_heading(t - h, k2, Th)) / (2 * h);
    CHECK(dnum == doctest::Approx(rover_omega(t, k2, Th)).epsilon(1e-6));
  }
  CHECK_THROWS_AS(rover_omega(0.0, k, 0.0), std::invalid_argument);

  // plan field at zero heading
  RoverParams p;
  auto d = rover_traj_deriv(0.0, {0, 0, 0}, k, p);
  CHECK(d[0] == doctest::Approx(1.1).epsilon(1e-15));
  CHECK(d[1] == doctest::Approx(p.l_r * 0.5).epsilon(1e-12));
  CHECK(d[2] == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("rover Taylor subsystem fields stay within the truncation bound") {
  RoverParams p;
  RoverK k{1.0, -0.5, 2.0};
  int bad = 0;
  for (int i = 0; i <= 120; ++i) {
    double th = -0.6 + 1.2 * i / 120.0;
    for (double t : {0.0, 0.5, 1.0, 1.8}) {
      double om = rover_omega(t, k, p.T_h);
      double bound = std::fabs(k[2]) * std::pow(th, 4) / 24.0 +
                     p.l_r * std::fabs(om) * std::pow(std::fabs(th), 5) / 120.0 + 1e-14;
      auto trig = rover_traj_deriv(t, {0, 0, th}, k, p);
      Vec2 sx = rover_sub_x_deriv(t, {0.0, th}, k, p);
      Vec2 sy = rover_sub_y_deriv(t, {0.0, th}, k, p);
      if (std::fabs(sx.x - trig[0]) > bound) ++bad;
      if (std::fabs(sy.x - trig[1]) > bound) ++bad;
      CHECK(sx.y == doctest::Approx(om).epsilon(1e-15));
      CHECK(sy.y == doctest::Approx(om).epsilon(1e-15));
    }
  }
  CHECK(bad == 0);
}

TEST_CASE("rover tracker: speed and steering channels, saturation") {
  RoverParams p;
  RoverGains g;
  RoverK k{0.0, 0.0, 1.5};

  // on the plan with no feedforward: command the plan speed, wheels straight
  RoverDesired des{{0, 0}, 0.0, 0.0};
  Vec2 u = rover_feedback({0, 0, 0, 1.5, 0}, k, des, p, g);
  CHECK(u.x == doctest::Approx(1.5).epsilon(1e-12));
  CHECK(u.y == doctest::Approx(0.0).epsilon(1e-12));

  // left of nothing: lateral error steers toward the plan
  u = rover_feedback({0, -0.1, 0, 1.5, 0}, k, des, p, g);
  CHECK(u.y > 0.0);
  u = rover_feedback({0, 0.1, 0, 1.5, 0}, k, des, p, g);
  CHECK(u.y < 0.0);

  // large errors saturate the wheel command and clamp the speed command
  u = rover_feedback({0, -5.0, 0, 1.5, 0}, k, des, p, g);
  CHECK(u.y == doctest::Approx(p.delta_max).epsilon(1e-12));
  u = rover_feedback({-5.0, 0, 0, 1.5, 0}, k, des, p, g);
  CHECK(u.x == doctest::Approx(p.v_max).epsilon(1e-12));
  u = rover_feedback({5.0, 0, 0, 1.5, 0}, k, des, p, g);
  CHECK(u.x == doctest::Approx(p.v_min).epsilon(1e-12));

  // feedforward alone requests the wheel angle matching the plan yaw rate
  RoverDesired turn{{0, 0}, 0.0, 0.8};
  double vv = 1.5;
  u = rover_feedback({0, 0, 0, vv, 0}, k, turn, p, g);
  CHECK(u.y == doctest::Approx(std::atan(0.8 * (p.c3 + p.c4 * vv * vv) / vv)).epsilon(1e-12));
}

TEST_CASE("rover closed loop follows straight and curved plans") {
  RoverParams p;
  RoverGains g;

  // straight plan
  {
    RoverK k{0.0, 0.0, 1.5};
    auto deriv = [&](double t, const StateN<5>& z) {
      RoverDesired des{{k[2] * t, 0.0}, 0.0, 0.0};
      return rover_hifi_deriv(z, rover_feedback(z, k, des, p, g), p);
    };
    auto tr = integrate<5>(deriv, {0, 0, 0, 1.5, 0}, 1.5, 0.01);
    CHECK(std::fabs(tr.back()[0] - 1.5 * 1.5) < 0.05);
    CHECK(std::fabs(tr.back()[1]) < 0.02);
    CHECK(std::fabs(tr.back()[2]) < 0.02);
  }

  // lane-change style plan: integrate the plan field alongside the hi-fi model
  {
    RoverK k{0.5, 0.5, 1.0};
    auto plan = integrate<3>(
        [&](double t, const StateN<3>& s) { return rover_traj_deriv(t, s, k, p); },
        {0, 0, 0}, p.T_h, 0.01);
    auto deriv = [&](double t, const StateN<5>& z) {
      auto s = plan.at(t);
      RoverDesired des{{s[0], s[1]}, s[2], rover_omega(t, k, p.T_h)};
      return rover_hifi_deriv(z, rover_feedback(z, k, des, p, g), p);
    };
    auto tr = integrate<5>(deriv, {0, 0, 0, 1.0, 0}, p.T_h, 0.01);
    auto sT = plan.back();
    double perr = std::hypot(tr.back()[0] - sT[0], tr.back()[1] - sT[1]);
    CHECK(perr < 0.15);
    CHECK(std::fabs(tr.back()[2] - sT[2]) < 0.15);
  }
}

TEST_CASE("rover braking decays the speed command but keeps steering") {
  RoverParams p;
  RoverGains g;
  RoverK k{0.0, 0.0, 2.0};
  RoverDesired des{{0, -0.2}, 0.0, 0.0};
  StateN<5> z{0, 0, 0, 2.0, 0.0};
  double tp = 0.5, tt = 1.5;

  Vec2 ufb = rover_feedback(z, k, des, p, g);
  Vec2 ub = rover_brake(0.5, z, k, des, tp, tt, p, g);
  CHECK(ub.x == doctest::Approx(ufb.x).epsilon(1e-15));
  ub = rover_brake(1.0, z, k, des, tp, tt, p, g);
  CHECK(ub.x == doctest::Approx(0.0625 * ufb.x).epsilon(1e-12));
  CHECK(ub.y == doctest::Approx(ufb.y).epsilon(1e-15));  // steering untouched
  ub = rover_brake(1.6, z, k, des, tp, tt, p, g);
  CHECK(ub.x == 0.0);
  CHECK(ub.y == doctest::Approx(ufb.y).epsilon(1e-15));
  CHECK_THROWS_AS(rover_brake(0.0, z, k, des, 0.5, 0.4, p, g), std::invalid_argument);

  // closed-loop: from top speed the rover ends near rest
  auto braking = [&](double t, const StateN<5>& z2) {
    RoverDesired d2{{z2[0], 0.0}, 0.0, 0.0};
    return rover_hifi_deriv(z2, rover_brake(t + tp, z2, k, d2, tp, tt, p, g), p);
  };
  auto tr = integrate<5>(braking, z, 2.5, 0.01);
  CHECK(std::fabs(tr.back()[3]) < 0.05);

  double cap = 1.2;
  CHECK(rover_brake_time({0, 0, 0, 2.0, 0}, p, cap) <= cap);
  CHECK(rover_brake_time({0, 0, 0, 2.0, 0}, p, 10.0) ==
        doctest::Approx(std::log(2.0 / 0.02) / 3.0).epsilon(1e-9));
  CHECK(rover_brake_time({0, 0, 0, 0.0, 0}, p, 10.0) == doctest::Approx(1e-3));
}

TEST_CASE("rigid body point velocity matches the rotating frame") {
  CHECK(rigid_body_point_deriv({1, 2}, {1, 2}, {0.3, -0.4}, 2.0).x == 0.3);
  CHECK(rigid_body_point_deriv({5, 7}, {1, 2}, {0.3, -0.4}, 0.0).y == -0.4);

  Vec2 d = rigid_body_point_deriv({0, 1}, {0, 0}, {1, 0}, 1.0);
  CHECK(d.x == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(d.y == doctest::Approx(0.0).epsilon(1e-15));

  // pure spin about the origin traces the unit circle
  auto field = [](double, const StateN<2>& s) {
    Vec2 v = rigid_body_point_deriv({s[0], s[1]}, {0, 0}, {0, 0}, 1.0);
    return StateN<2>{v.x, v.y};
  };
  auto tr = integrate<2>(field, {1.0, 0.0}, 1.0, 0.01);
  CHECK(std::fabs(tr.back()[0] - std::cos(1.0)) < 1e-9);
  CHECK(std::fabs(tr.back()[1] - std::sin(1.0)) < 1e-9);
}

TEST_CASE("plan frame round-trips poses") {
  PlanFrame f{{2.0, -1.0}, 0.7};
  Vec2 w{3.3, 0.4};
  Vec2 pp = f.to_plan(w);
  Vec2 back = f.to_world(pp);
  CHECK(back.x == doctest::Approx(w.x).epsilon(1e-12));
  CHECK(back.y == doctest::Approx(w.y).epsilon(1e-12));
  CHECK(f.to_plan(f.origin).x == 0.0);
  CHECK(f.ang_to_world(f.ang_to_plan(1.3)) == doctest::Approx(1.3).epsilon(1e-15));
}

TEST_CASE("tracking model field adds the disturbance envelope correctly") {
  Vec2 base{1.0, -0.5}, g{0.2, 0.1};
  Vec2 d0 = tracking_model_deriv(base, g, {0, 0});
  CHECK(d0.x == 1.0);
  CHECK(d0.y == -0.5);
  Vec2 dp = tracking_model_deriv(base, g, {1, 1});
  CHECK(dp.x == doctest::Approx(1.2).epsilon(1e-15));
  CHECK(dp.y == doctest::Approx(-0.4).epsilon(1e-15));
  Vec2 dm = tracking_model_deriv(base, g, {-1, -1});
  CHECK(dm.x == doctest::Approx(0.8).epsilon(1e-15));
  CHECK_THROWS_AS(tracking_model_deriv(base, g, {1.01, 0}), std::invalid_argument);
  CHECK_THROWS_AS(tracking_model_deriv(base, g, {0, -2.0}), std::invalid_argument);
}

TEST_CASE("disturbance signals stay in the unit box and index by time") {
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    auto d = DisturbanceSignal::random(rng, 2, 8, 1.0);
    REQUIRE(d.vals.size() == 8);
    REQUIRE(d.edges.size() == 9);
    CHECK(d.edges.front() == 0.0);
    CHECK(d.edges.back() == 1.0);
    for (std::size_t i = 0; i + 1 < d.edges.size(); ++i) CHECK(d.edges[i] <= d.edges[i + 1]);
    for (const auto& v : d.vals) {
      REQUIRE(v.size() == 2);
      for (double vi : v) CHECK(std::fabs(vi) <= 1.0);
    }
    CHECK(&d.at(0.0) == &d.vals.front());
    CHECK(&d.at(1.0) == &d.vals.back());
    CHECK(&d.at(d.edges[3] + 1e-12) == &d.vals[3]);
  }

  auto c = DisturbanceSignal::constant({0.5, -1.0}, 2.0);
  CHECK(c.at(0.0)[0] == 0.5);
  CHECK(c.at(1.7)[1] == -1.0);

  DisturbanceSignal bad;
  bad.edges = {0.0, 1.0};
  bad.vals = {{1.5}};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("platform parameters load from config sections with defaults") {
  Config cfg = Config::from_string(
      "[segway]\nv_max = 1.25\nyaw_cmd_dev = 0.5\n"
      "[rover]\nc6 = -2.5\nT_h = 2.0\n",
      "test");
  SegwayParams sp = SegwayParams::from_config(cfg);
  CHECK(sp.v_max == 1.25);
  CHECK(sp.yaw_cmd_dev == 0.5);
  CHECK(sp.beta_gamma == 2.95);  // default preserved
  CHECK(sp.radius == 0.38);

  RoverParams rp = RoverParams::from_config(cfg);
  CHECK(rp.c6 == -2.5);
  CHECK(rp.l_r == 0.0765);
  CHECK(rp.delta_max == 0.5);

  PdGains pg = PdGains::from_config(cfg);
  CHECK(pg.bx == 20.0);
  CHECK(pg.btheta == 10.0);
  RoverGains rg = RoverGains::from_config(cfg);
  CHECK(rg.btheta > 0.0);
}

#include "rtd/tracking_error.hpp"

TEST_CASE("error polynomial basics: basis size, eval, closed-form integral") {
  PolyTK p = PolyTK::dense(0, 4, false);
  CHECK(p.monomials.size() == 5);
  PolyTK q = PolyTK::dense(3, 3, true);
  CHECK(q.monomials.size() == 35);  // C(3+4, 4)
  PolyTK r = PolyTK::dense(2, 3, false);
  CHECK(r.monomials.size() == 4);  // t-only despite nk = 2

  // g = 2 + 3 t^2 + 0.5 t k1
  PolyTK g;
  g.nk = 2;
  g.monomials = {{0, 0, 0}, {2, 0, 0}, {1, 1, 0}};
  g.coeffs = {2.0, 3.0, 0.5};
  g.validate();
  CHECK(g.eval(2.0, {4.0, 9.0}) == doctest::Approx(2 + 12 + 4.0).epsilon(1e-15));
  CHECK(g.integral(2.0, {4.0, 9.0}) == doctest::Approx(4 + 8 + 4.0).epsilon(1e-15));
  CHECK(g.degree() == 2);

  PolyTK bad = g;
  bad.coeffs.pop_back();
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

namespace {

ErrorCurves flat_curves(double T, double dt, double rate, double state_slope) {
  ErrorCurves c;
  for (double t = 0.0; t <= T + 1e-12; t += dt) {
    c.t.push_back(t);
    for (int a = 0; a < 2; ++a) {
      c.rate[a].push_back(rate);
      c.state[a].push_back(state_slope * t);
    }
  }
  return c;
}

}  // namespace

TEST_CASE("perfect tracking admits the zero error function") {
  auto model = [](const std::vector<double>&, const std::vector<double>&) {
    return flat_curves(1.0, 0.01, 0.0, 0.0);
  };
  auto sampler = [](Rng&) {
    return std::make_pair(std::vector<double>{}, std::vector<double>{});
  };
  FitConfig fc;
  fc.degree_x = 2;
  fc.degree_y = 2;
  fc.holdout = 20;
  auto fn = fit_tracking_error(model, sampler, {{}}, {{}}, 0, 1.0, 0.01, fc, "synthetic");
  for (double t = 0.0; t <= 1.0; t += 0.03) {
    CHECK(fn.eval(0, t, {}) >= 0.0);
    CHECK(fn.eval(0, t, {}) < 1e-6);
    CHECK(fn.eval(1, t, {}) < 1e-6);
  }
}

TEST_CASE("known linear rate envelope is recovered with the margin applied") {
  double T = 1.0, dt = 0.01;
  auto model = [&](const std::vector<double>&, const std::vector<double>&) {
    ErrorCurves c;
    for (double t = 0.0; t <= T + 1e-12; t += dt) {
      c.t.push_back(t);
      for (int a = 0; a < 2; ++a) {
        c.rate[a].push_back(0.2 + 0.5 * t);
        c.state[a].push_back(0.2 * t + 0.25 * t * t);  // exact integral of the rate
      }
    }
    return c;
  };
  auto sampler = [](Rng&) {
    return std::make_pair(std::vector<double>{}, std::vector<double>{});
  };
  FitConfig fc;
  fc.degree_x = 2;
  fc.degree_y = 1;
  fc.holdout = 10;
  auto fn = fit_tracking_error(model, sampler, {{}}, {{}}, 0, T, dt, fc, "synthetic");
  for (double t = 0.0; t <= T; t += 0.05) {
    double want = 0.2 + 0.5 * t;
    CHECK(fn.eval(0, t, {}) >= want - 1e-9);
    CHECK(fn.eval(0, t, {}) <= 1.2 * want + 0.05);  // not wildly inflated
    CHECK(fn.eval(1, t, {}) >= want - 1e-9);
  }
}

TEST_CASE("unreachable envelopes hit the inflation cap with advice") {
  // constant basis cannot chase a late spike; the required lift exceeds the cap
  double T = 1.0, dt = 0.01;
  auto model = [&](const std::vector<double>&, const std::vector<double>&) {
    ErrorCurves c;
    for (double t = 0.0; t <= T + 1e-12; t += dt) {
      c.t.push_back(t);
      double r = t > 0.9 ? 10.0 : 0.0;
      for (int a = 0; a < 2; ++a) {
        c.rate[a].push_back(r);
        c.state[a].push_back(0.0);
      }
    }
    return c;
  };
  auto sampler = [](Rng&) {
    return std::make_pair(std::vector<double>{}, std::vector<double>{});
  };
  FitConfig fc;
  fc.degree_x = 0;
  fc.degree_y = 0;
  fc.max_inflation = 5.0;
  fc.holdout = 0;
  CHECK_THROWS_WITH_AS(fit_tracking_error(model, sampler, {{}}, {{}}, 0, T, dt, fc, "synthetic"),
                       doctest::Contains("inflation"), std::runtime_error);
}

TEST_CASE("segway error function dominates fresh draws and admits unit disturbances") {
  SegwayParams p;
  PdGains gains;
  SegwayEnvelope env;  // fast bin: top speed with full yaw-rate range
  env.k2_min = 1.0;
  env.k2_max = 1.5;
  env.v0_min = 1.0;
  env.v0_max = 1.5;
  double T = 0.8, dt = 0.01;
  FitConfig fc;
  fc.holdout = 100;
  TrackingErrorFn fn = fit_segway_tracking_error(p, gains, env, T, dt, fc);

  CHECK(fn.platform == "segway");
  CHECK(fn.g[0].degree() == 4);
  CHECK(fn.g[1].degree() == 3);

  // nonnegative on a dense grid
  for (double t = 0.0; t <= T + 1e-12; t += dt / 3.0) {
    CHECK(fn.eval(0, std::min(t, T), {0.3, 1.2}) >= 0.0);
    CHECK(fn.eval(1, std::min(t, T), {0.3, 1.2}) >= 0.0);
  }

  // independent re-check of both bounds on fresh draws
  auto model = segway_error_model(p, gains, T, dt);
  auto sampler = segway_error_sampler(env);
  Rng rng(20260815);
  for (int i = 0; i < 20; ++i) {
    auto [k, ic] = sampler(rng);
    ErrorCurves c = model(k, ic);
    for (std::size_t a = 0; a < 2; ++a)
      for (std::size_t j = 0; j < c.t.size(); ++j) {
        CHECK(c.rate[a][j] <= fn.eval(a, c.t[j], k) + 1e-9);
        CHECK(c.state[a][j] <= fn.integral(a, c.t[j], k) + 1e-9);
      }
  }

  // disturbance recovery: along simulated closed-loop runs, the pointwise
  // d = (rate mismatch)/g stays within the unit box
  for (int i = 0; i < 10; ++i) {
    auto [k, ic] = sampler(rng);
    Vec2 kk{k[0], k[1]};
    double om0 = std::clamp(k[0] + ic[0], -p.omega_max, p.omega_max);
    auto deriv = [&](double t, const StateN<5>& z) {
      return segway_hifi_deriv(z, segway_feedback(t, z, kk, gains), p);
    };
    auto tr = integrate<5>(deriv, {0, 0, 0, om0, ic[1]}, T, dt);
    for (std::size_t j = 0; j < tr.t.size(); ++j) {
      const auto& z = tr.z[j];
      Vec2 cdot{z[4] * std::cos(z[2]), z[4] * std::sin(z[2])};
      Vec2 f = segway_traj_deriv({z[0], z[1]}, kk, {0, 0});
      double nx = cdot.x - f.x, ny = cdot.y - f.y;
      double gx = fn.eval(0, tr.t[j], k), gy = fn.eval(1, tr.t[j], k);
      if (gx > 1e-12) CHECK(std::fabs(nx) / gx <= 1.0 + 1e-9);
      else CHECK(std::fabs(nx) <= 1e-12);
      if (gy > 1e-12) CHECK(std::fabs(ny) / gy <= 1.0 + 1e-9);
      else CHECK(std::fabs(ny) <= 1e-12);
    }
  }

  // deterministic: refitting yields the identical document
  TrackingErrorFn fn2 = fit_segway_tracking_error(p, gains, env, T, dt, fc);
  CHECK(fn.to_json() == fn2.to_json());
}

TEST_CASE("rover error function covers a lane-change bin including rotated starts") {
  RoverParams p;
  RoverGains gains;
  RoverEnvelope env;  // middle speed bin, negative headings, centered wheel bin
  env.k3_min = 0.75;
  env.k3_max = 1.5;
  env.v0_min = 0.75;
  env.v0_max = 1.5;
  env.de0_min = -0.5 / 7.0;
  env.de0_max = 0.5 / 7.0;
  double T = 1.5, dt = 0.01;
  FitConfig fc;
  fc.degree_x = 3;
  fc.degree_y = 3;
  fc.holdout = 100;
  TrackingErrorFn fn = fit_rover_tracking_error(p, gains, env, T, dt, fc);

  CHECK(fn.platform == "rover");
  CHECK(fn.nk == 3);
  CHECK(fn.g[0].degree() <= 3);
  CHECK(fn.g[0].monomials.size() == 35);

  auto model = rover_error_model(p, gains, T, dt, env);
  auto sampler = rover_error_sampler(env);
  Rng rng(99283);
  for (int i = 0; i < 15; ++i) {
    auto [k, ic] = sampler(rng);
    if (i == 0) ic[0] = -0.45;  // deep initial heading, explicitly exercised
    ErrorCurves c = model(k, ic);
    for (std::size_t a = 0; a < 2; ++a)
      for (std::size_t j = 0; j < c.t.size(); ++j) {
        CHECK(c.rate[a][j] <= fn.eval(a, c.t[j], k) + 1e-9);
        CHECK(c.state[a][j] <= fn.integral(a, c.t[j], k) + 1e-9);
      }
  }
}

TEST_CASE("error function documents round-trip through json and files") {
  PolyTK g;
  g.nk = 2;
  g.monomials = {{0, 0, 0}, {1, 0, 0}, {0, 1, 1}};
  g.coeffs = {0.25, -0.5, 0.125};
  TrackingErrorFn fn;
  fn.platform = "segway";
  fn.T = 0.8;
  fn.nk = 2;
  fn.g = {g, g};

  TrackingErrorFn back = TrackingErrorFn::from_json(fn.to_json());
  CHECK(back.platform == "segway");
  CHECK(back.T == 0.8);
  REQUIRE(back.g.size() == 2);
  CHECK(back.g[0].coeffs == fn.g[0].coeffs);
  CHECK(back.g[1].monomials == fn.g[1].monomials);
  CHECK(back.eval(0, 0.37, {0.5, 1.0}) == doctest::Approx(fn.eval(0, 0.37, {0.5, 1.0})).epsilon(1e-15));

  std::string path = "/tmp/rtd_test_gfn.json";
  fn.save(path);
  TrackingErrorFn loaded = TrackingErrorFn::load(path);
  CHECK(loaded.to_json() == fn.to_json());

  CHECK_THROWS_AS(TrackingErrorFn::from_json("{\"version\": 2}"), std::runtime_error);
  CHECK_THROWS(TrackingErrorFn::from_json("not json"));
}
