#include "rtd/frs_library.hpp"

#include <atomic>
#include <cmath>
#include <cstring>
#include <json.hpp>
#include <stdexcept>

namespace rtd {

namespace {

using nlohmann::json;

// ---------------------------------------------------------------------------
// band memoization.  Fields are evaluated many times per (t, k) box (once per
// propagation chain and Picard iterate), and the error-polynomial range only
// depends on (t, k); a one-entry thread-local memo turns the dominant cost
// into a cache hit.  The nonce distinguishes closure instances that share the
// same lambda type (one static per thread per closure type).

std::atomic<std::uint64_t> field_nonce{1};

struct BandMemo {
  std::uint64_t nonce = 0;
  double key[8] = {0, 0, 0, 0, 0, 0, 0, 0};
  Interval band[2];
  Interval omega;
};

bool memo_hit(const BandMemo& m, std::uint64_t nonce, const double* key, std::size_t n) {
  if (m.nonce != nonce) return false;
  return std::memcmp(m.key, key, n * sizeof(double)) == 0;
}

// magnitude band [-m, m] of a fitted error polynomial over a (t, k) box; the
// fit is nonnegative by construction but the band form keeps any numerically
// negative dip sound
Interval g_band(const PolyTK& p, const Interval& t, const std::vector<Interval>& k) {
  Interval r = poly_range(p, t, k);
  double m = std::max(std::fabs(r.lo), std::fabs(r.hi));
  return {-m, m};
}

double round_down(double v, double cell) { return std::floor(v / cell) * cell; }
double round_up(double v, double cell) { return std::ceil(v / cell) * cell; }

GridAxis sized_axis(const std::string& name, const Interval& hull, double cell, double pad) {
  double lo = round_down(hull.lo - pad, cell);
  double hi = round_up(hull.hi + pad, cell);
  int n = static_cast<int>(std::llround((hi - lo) / cell));
  if (n < 1) n = 1;
  return GridAxis{name, lo, lo + n * cell, n};
}

// Hull the sweeps one parameter cell at a time.  Hulling the whole parameter
// box in a single chain feeds the enclosure's own slack back through the
// nonlinear terms (wide omega -> wide theta -> garbage Taylor range), landing
// on domains tens of meters wide; per-cell parameter ranges stay tight.
std::vector<Interval> domain_hull(const IntervalField& field, const std::vector<Interval>& z0,
                                  const std::vector<GridAxis>& kaxes, double T, double dt) {
  std::vector<int> idx(kaxes.size(), 0);
  std::vector<Interval> kcell(kaxes.size());
  std::vector<Interval> acc;
  for (;;) {
    for (std::size_t i = 0; i < kaxes.size(); ++i)
      kcell[i] = {kaxes[i].edge(idx[i]), kaxes[i].edge(idx[i] + 1)};
    std::vector<Interval> h = sweep_hull(field, z0, kcell, z0.size(), T, dt);
    if (acc.empty()) {
      acc = h;
    } else {
      for (std::size_t i = 0; i < h.size(); ++i) acc[i] = hull(acc[i], h[i]);
    }
    std::size_t a = 0;
    for (; a < idx.size(); ++a) {
      if (++idx[a] < kaxes[a].n) break;
      idx[a] = 0;
    }
    if (a == idx.size()) break;
  }
  return acc;
}

// footprint extents of the rover rectangle rotated by heading a (|a| taken);
// both grow with |a| over the wheel-feasible range, so the max over a heading
// cell sits at its largest magnitude
double rect_x_extent(double a, double hl, double hw) {
  return hl * std::fabs(std::cos(a)) + hw * std::fabs(std::sin(a));
}
double rect_y_extent(double a, double hl, double hw) {
  return hl * std::fabs(std::sin(a)) + hw * std::fabs(std::cos(a));
}

}  // namespace

// ---------------------------------------------------------------------------
// selection

bool FrsSelector::matches(double v, double wheel_angle, double heading) const {
  if (!speed.contains(v)) return false;
  if (!wheel.contains(wheel_angle)) return false;
  if (heading_sign < 0 && heading > 0.0) return false;
  if (heading_sign > 0 && heading < 0.0) return false;
  return true;
}

const FrsEntry& FrsLibrary::select(double v, double wheel_angle, double heading) const {
  for (const auto& e : entries)
    if (e.sel.matches(v, wheel_angle, heading)) return e;
  throw std::domain_error(
      strf("frs select: state (v=%g, wheel=%g, heading=%g) outside the %s library envelope", v,
           wheel_angle, heading, platform.c_str()));
}

void FrsEntry::validate() const {
  if (id.empty()) throw std::invalid_argument("frs entry: empty id");
  if (sel.speed.lo > sel.speed.hi || sel.wheel.lo > sel.wheel.hi)
    throw std::invalid_argument(strf("frs entry %s: malformed selector", id.c_str()));
  if (!(T > 0.0) || !(tau_plan > 0.0) || !(tau_plan < T))
    throw std::invalid_argument(
        strf("frs entry %s: need 0 < tau_plan < T (got tau_plan=%g, T=%g)", id.c_str(), tau_plan,
             T));
  const std::vector<GridAxis>* axes = nullptr;
  std::size_t ns = 0;
  if (const auto* g = std::get_if<GridFRS>(&frs)) {
    g->validate();
    axes = &g->axes;
    ns = g->n_space;
  } else {
    const auto& p = std::get<PolynomialFRS>(frs);
    p.validate();
    axes = &p.axes;
    ns = p.n_space;
  }
  if (kbox.size() != axes->size() - ns)
    throw std::invalid_argument(strf("frs entry %s: %zu parameter bounds for %zu parameter axes",
                                     id.c_str(), kbox.size(), axes->size() - ns));
  for (std::size_t i = 0; i < kbox.size(); ++i) {
    const GridAxis& ax = (*axes)[ns + i];
    if (kbox[i].lo < ax.lo - 1e-9 || kbox[i].hi > ax.hi + 1e-9 || kbox[i].lo > kbox[i].hi)
      throw std::invalid_argument(
          strf("frs entry %s: parameter box [%g, %g] outside axis '%s' [%g, %g]", id.c_str(),
               kbox[i].lo, kbox[i].hi, ax.name.c_str(), ax.lo, ax.hi));
  }
  if (!g.g.empty()) {
    if (g.nk != kbox.size())
      throw std::invalid_argument(strf("frs entry %s: error fit has %zu parameters, box has %zu",
                                       id.c_str(), g.nk, kbox.size()));
    if (g.T < T - 1e-9)
      throw std::invalid_argument(
          strf("frs entry %s: error fit horizon %g shorter than reach horizon %g", id.c_str(), g.T,
               T));
  }
}

void FrsLibrary::validate() const {
  if (platform.empty()) throw std::invalid_argument("frs library: empty platform");
  if (entries.empty()) throw std::invalid_argument("frs library: no entries");
  for (const auto& e : entries) e.validate();
}

// ---------------------------------------------------------------------------
// interval fields

IntervalField segway_tracking_field(const TrackingErrorFn& g) {
  if (g.g.size() != 2 || g.nk != 2)
    throw std::invalid_argument("segway_tracking_field: need a 2-axis fit in (k1, k2)");
  const std::uint64_t nonce = field_nonce.fetch_add(1);
  const PolyTK gx = g.g[0], gy = g.g[1];
  return [nonce, gx, gy](const Interval& t, const Interval* s, const Interval* k, Interval* out) {
    thread_local BandMemo memo;
    const double key[8] = {t.lo, t.hi, k[0].lo, k[0].hi, k[1].lo, k[1].hi, 0.0, 0.0};
    if (!memo_hit(memo, nonce, key, 6)) {
      std::vector<Interval> kv{k[0], k[1]};
      memo.band[0] = g_band(gx, t, kv);
      memo.band[1] = g_band(gy, t, kv);
      memo.nonce = nonce;
      std::memcpy(memo.key, key, sizeof(key));
    }
    out[0] = k[1] - k[0] * s[1] + memo.band[0];
    out[1] = k[0] * s[0] + memo.band[1];
  };
}

Interval rover_omega_range(const Interval& t, const Interval& k1, const Interval& k2, double T_h) {
  // omega(t,k) = k1 (1 - 2t/T_h) + k2 (2t/T_h^2); k1, k2 each occur once so
  // the product form is exact in them (only the shared t loses a sliver)
  Interval a = Interval{1.0, 1.0} - (2.0 / T_h) * t;
  Interval b = (2.0 / (T_h * T_h)) * t;
  return k1 * a + k2 * b;
}

IntervalField rover_subsystem_field(const TrackingErrorFn& g, std::size_t axis,
                                    const RoverParams& p) {
  if (g.g.size() != 2 || g.nk != 3)
    throw std::invalid_argument("rover_subsystem_field: need a 2-axis fit in (k1, k2, k3)");
  if (axis > 1) throw std::invalid_argument("rover_subsystem_field: axis must be 0 (x) or 1 (y)");
  const std::uint64_t nonce = field_nonce.fetch_add(1);
  const PolyTK gp = g.g[axis];
  const double lr = p.l_r, Th = p.T_h;
  const bool xform = axis == 0;
  return [nonce, gp, lr, Th, xform](const Interval& t, const Interval* s, const Interval* k,
                                    Interval* out) {
    thread_local BandMemo memo;
    const double key[8] = {t.lo, t.hi, k[0].lo, k[0].hi, k[1].lo, k[1].hi, k[2].lo, k[2].hi};
    if (!memo_hit(memo, nonce, key, 8)) {
      std::vector<Interval> kv{k[0], k[1], k[2]};
      memo.band[0] = g_band(gp, t, kv);
      memo.omega = rover_omega_range(t, k[0], k[1], Th);
      memo.nonce = nonce;
      std::memcpy(memo.key, key, sizeof(key));
    }
    const Interval th = s[1];
    const Interval cosish = Interval{1.0, 1.0} - 0.5 * iv_pow(th, 2);
    const Interval sinish = th - (1.0 / 6.0) * iv_pow(th, 3);
    if (xform)
      out[0] = k[2] * cosish - lr * (memo.omega * sinish) + memo.band[0];
    else
      out[0] = k[2] * sinish + lr * (memo.omega * cosish) + memo.band[0];
    out[1] = memo.omega;
  };
}

// ---------------------------------------------------------------------------
// bin tables

std::vector<FrsBinDef> segway_bin_defs(const SegwayLibraryOptions& opt) {
  const double om = opt.params.omega_max;
  struct Range {
    double lo, hi, T;
  };
  std::vector<Range> speeds;
  if (opt.hardware) {
    speeds = {{0.0, 0.5, 1.0}, {0.5, opt.params.v_max, 1.0}};
  } else {
    speeds = {{0.0, 0.5, 0.6}, {0.5, 1.0, 0.8}, {1.0, opt.params.v_max, 0.8}};
  }
  std::vector<FrsBinDef> defs;
  for (const auto& r : speeds) {
    FrsBinDef d;
    d.id = strf("segway-v%.2f-%.2f", r.lo, r.hi);
    d.sel.speed = {r.lo, r.hi};
    d.kbox = {{-om, om}, {r.lo, r.hi}};
    d.T = r.T;
    d.tau_plan = 0.5;
    defs.push_back(std::move(d));
  }
  return defs;
}

std::vector<FrsBinDef> rover_bin_defs(const RoverLibraryOptions& opt) {
  const double dmax = opt.params.delta_max;
  const double vmax = opt.params.v_max;
  const double head_max = 0.5;  // heading-bin magnitude; also caps |k2|
  std::vector<FrsBinDef> defs;

  auto k3_range = [&](double vlo, double vhi) {
    return Interval{std::max(0.5, vlo - 1.0), std::min(vmax, vhi + 1.0)};
  };

  if (opt.hardware) {
    FrsBinDef d;
    d.id = "rover-v1.00-1.50-w0-any";
    d.sel.speed = {1.0, 1.5};
    d.sel.wheel = {-dmax, dmax};
    d.sel.heading_sign = 0;
    d.kbox = {{-1.0, 1.0}, {-head_max, head_max}, k3_range(1.0, 1.5)};
    d.th0 = {-head_max, head_max};
    d.T = 1.5;
    d.tau_plan = 0.375;
    defs.push_back(std::move(d));
    return defs;
  }

  struct Range {
    double lo, hi, T;
  };
  const std::vector<Range> speeds = {{0.0, 0.75, 1.25}, {0.75, 1.5, 1.5}, {1.5, vmax, 1.5}};
  const int nwheel = 7;
  for (const auto& sp : speeds)
    for (int w = 0; w < nwheel; ++w) {
      double dlo = -dmax + 2.0 * dmax * w / nwheel;
      double dhi = -dmax + 2.0 * dmax * (w + 1) / nwheel;
      for (int sign : {-1, +1}) {
        FrsBinDef d;
        d.id = strf("rover-v%.2f-%.2f-w%d-%s", sp.lo, sp.hi, w, sign < 0 ? "neg" : "pos");
        d.sel.speed = {sp.lo, sp.hi};
        d.sel.wheel = {dlo, dhi};
        d.sel.heading_sign = sign;
        Interval k2 = sign < 0 ? Interval{0.0, head_max} : Interval{-head_max, 0.0};
        d.kbox = {{-1.0, 1.0}, k2, k3_range(sp.lo, sp.hi)};
        d.th0 = sign < 0 ? Interval{-head_max, 0.0} : Interval{0.0, head_max};
        d.T = sp.T;
        d.tau_plan = 0.5;
        defs.push_back(std::move(d));
      }
    }
  return defs;
}

// ---------------------------------------------------------------------------
// bin builds

FrsEntry build_segway_entry(const SegwayLibraryOptions& opt, const FrsBinDef& def) {
  SegwayEnvelope env;
  env.k1_min = def.kbox[0].lo;
  env.k1_max = def.kbox[0].hi;
  env.k2_min = def.kbox[1].lo;
  env.k2_max = def.kbox[1].hi;
  env.v0_min = def.sel.speed.lo;
  env.v0_max = def.sel.speed.hi;
  env.om0_dev = opt.params.yaw_cmd_dev;
  TrackingErrorFn g =
      fit_segway_tracking_error(opt.params, opt.gains, env, def.T, opt.fit_dt, opt.fit);

  IntervalField field = segway_tracking_field(g);
  const double R = opt.params.radius;
  std::vector<Interval> z0{{-R, R}, {-R, R}};
  std::vector<GridAxis> kaxes = {GridAxis{"k1", def.kbox[0].lo, def.kbox[0].hi, opt.n_k1},
                                 GridAxis{"k2", def.kbox[1].lo, def.kbox[1].hi, opt.n_k2}};
  std::vector<Interval> hull = domain_hull(field, z0, kaxes, def.T, opt.frs_dt);

  FrsSpec spec;
  const double pad = 4.0 * opt.cell + 0.05;
  spec.axes = {sized_axis("x", hull[0], opt.cell, pad), sized_axis("y", hull[1], opt.cell, pad),
               kaxes[0], kaxes[1]};
  spec.n_space = 2;
  spec.z0 = z0;
  spec.z0_cell_filter = [R](const double* lo, const double* hi) {
    double cx = std::max(lo[0], std::min(0.0, hi[0]));
    double cy = std::max(lo[1], std::min(0.0, hi[1]));
    return cx * cx + cy * cy <= R * R + 1e-12;
  };
  spec.T = def.T;
  spec.dt = opt.frs_dt;
  spec.field = field;
  spec.model = def.id;
  spec.threads = opt.threads;

  FrsEntry e;
  e.id = def.id;
  e.sel = def.sel;
  e.frs = compute_grid_frs(spec);
  e.kbox = def.kbox;
  e.T = def.T;
  e.tau_plan = def.tau_plan;
  e.g = std::move(g);
  return e;
}

RoverBinBuild build_rover_entry(const RoverLibraryOptions& opt, const FrsBinDef& def) {
  RoverEnvelope env;
  env.k1_min = def.kbox[0].lo;
  env.k1_max = def.kbox[0].hi;
  env.k2_min = def.kbox[1].lo;
  env.k2_max = def.kbox[1].hi;
  env.k3_min = def.kbox[2].lo;
  env.k3_max = def.kbox[2].hi;
  env.th0_min = def.th0.lo;
  env.th0_max = def.th0.hi;
  env.v0_min = std::max(def.sel.speed.lo, opt.params.v_min);
  env.v0_max = std::min(def.sel.speed.hi, opt.params.v_max);
  env.de0_min = std::max(def.sel.wheel.lo, -opt.params.delta_max);
  env.de0_max = std::min(def.sel.wheel.hi, opt.params.delta_max);
  TrackingErrorFn g =
      fit_rover_tracking_error(opt.params, opt.gains, env, def.T, opt.fit_dt, opt.fit);

  const double hl = env.half_length, hw = env.half_width;
  const double amax = std::max(std::fabs(def.th0.lo), std::fabs(def.th0.hi));
  const double xe = rect_x_extent(amax, hl, hw);
  const double ye = rect_y_extent(amax, hl, hw);

  IntervalField fx = rover_subsystem_field(g, 0, opt.params);
  IntervalField fy = rover_subsystem_field(g, 1, opt.params);
  std::vector<GridAxis> kaxes = {GridAxis{"k1", def.kbox[0].lo, def.kbox[0].hi, opt.n_k1},
                                 GridAxis{"k2", def.kbox[1].lo, def.kbox[1].hi, opt.n_k2},
                                 GridAxis{"k3", def.kbox[2].lo, def.kbox[2].hi, opt.n_k3}};
  std::vector<Interval> hx = domain_hull(fx, {{-xe, xe}, def.th0}, kaxes, def.T, opt.frs_dt);
  std::vector<Interval> hy = domain_hull(fy, {{-ye, ye}, def.th0}, kaxes, def.T, opt.frs_dt);

  const double pad = 4.0 * opt.cell + 0.05;
  GridAxis thax = sized_axis("theta", hull(hx[1], hy[1]), opt.cell, pad);

  Interval th0 = def.th0;
  auto theta_filter = [th0](double tlo, double thi) {
    double a = std::max(th0.lo, tlo);
    double b = std::min(th0.hi, thi);
    if (a > b) return -1.0;  // cell misses the initial heading range
    return std::max(std::fabs(a), std::fabs(b));
  };

  FrsSpec sx;
  sx.axes = {sized_axis("x", hx[0], opt.cell, pad), thax, kaxes[0], kaxes[1], kaxes[2]};
  sx.n_space = 2;
  sx.z0 = {{-xe, xe}, def.th0};
  sx.z0_cell_filter = [hl, hw, theta_filter](const double* lo, const double* hi) {
    double a = theta_filter(lo[1], hi[1]);
    if (a < 0.0) return false;
    double e = rect_x_extent(a, hl, hw);
    return lo[0] <= e && hi[0] >= -e;
  };
  sx.T = def.T;
  sx.dt = opt.frs_dt;
  sx.field = fx;
  sx.model = def.id + "-x";
  sx.threads = opt.threads;

  FrsSpec sy = sx;
  sy.axes[0] = sized_axis("y", hy[0], opt.cell, pad);
  sy.z0 = {{-ye, ye}, def.th0};
  sy.z0_cell_filter = [hl, hw, theta_filter](const double* lo, const double* hi) {
    double a = theta_filter(lo[1], hi[1]);
    if (a < 0.0) return false;
    double e = rect_y_extent(a, hl, hw);
    return lo[0] <= e && hi[0] >= -e;
  };
  sy.field = fy;
  sy.model = def.id + "-y";

  RoverBinBuild out;
  out.sub = compute_subsystem_frs(sx, sy);
  out.entry.id = def.id;
  out.entry.sel = def.sel;
  out.entry.frs = reconstruct_frs(out.sub);
  out.entry.kbox = def.kbox;
  out.entry.T = def.T;
  out.entry.tau_plan = def.tau_plan;
  out.entry.g = std::move(g);
  return out;
}

FrsLibrary build_segway_library(const SegwayLibraryOptions& opt) {
  FrsLibrary lib;
  lib.platform = "segway";
  for (const auto& def : segway_bin_defs(opt)) lib.entries.push_back(build_segway_entry(opt, def));
  lib.validate();
  return lib;
}

FrsLibrary build_rover_library(const RoverLibraryOptions& opt) {
  FrsLibrary lib;
  lib.platform = "rover";
  for (const auto& def : rover_bin_defs(opt))
    lib.entries.push_back(build_rover_entry(opt, def).entry);
  lib.validate();
  return lib;
}

// ---------------------------------------------------------------------------
// options plumbing

SegwayLibraryOptions SegwayLibraryOptions::from_config(const Config& cfg) {
  SegwayLibraryOptions o;
  o.params = SegwayParams::from_config(cfg);
  o.gains = PdGains::from_config(cfg);
  o.hardware = cfg.flag("profile.hardware", o.hardware);
  o.cell = cfg.num("frs.cell", o.cell);
  o.n_k1 = static_cast<int>(cfg.integer("frs.n_k1", o.n_k1));
  o.n_k2 = static_cast<int>(cfg.integer("frs.n_k2", o.n_k2));
  o.frs_dt = cfg.num("frs.dt", o.frs_dt);
  o.fit_dt = cfg.num("fit.dt", o.fit_dt);
  o.fit = FitConfig::from_config(cfg);
  o.threads = static_cast<int>(cfg.integer("frs.threads", o.threads));
  return o;
}

RoverLibraryOptions RoverLibraryOptions::from_config(const Config& cfg) {
  RoverLibraryOptions o;
  o.params = RoverParams::from_config(cfg);
  o.gains = RoverGains::from_config(cfg);
  o.hardware = cfg.flag("profile.hardware", o.hardware);
  o.cell = cfg.num("frs.cell", o.cell);
  o.n_k1 = static_cast<int>(cfg.integer("frs.n_k1", o.n_k1));
  o.n_k2 = static_cast<int>(cfg.integer("frs.n_k2", o.n_k2));
  o.n_k3 = static_cast<int>(cfg.integer("frs.n_k3", o.n_k3));
  o.frs_dt = cfg.num("frs.dt", o.frs_dt);
  o.fit_dt = cfg.num("fit.dt", o.fit_dt);
  o.fit = FitConfig::from_config(cfg);
  o.threads = static_cast<int>(cfg.integer("frs.threads", o.threads));
  return o;
}

// ---------------------------------------------------------------------------
// serialization

namespace {

json interval_json(const Interval& v) { return json::array({v.lo, v.hi}); }

Interval interval_from(const json& j) {
  if (!j.is_array() || j.size() != 2) throw std::runtime_error("library load: malformed interval");
  return {j[0].get<double>(), j[1].get<double>()};
}

}  // namespace

std::string FrsLibrary::to_json() const {
  json j;
  j["version"] = 1;
  j["platform"] = platform;
  j["entries"] = json::array();
  for (const auto& e : entries) {
    json je;
    je["id"] = e.id;
    je["selector"] = {{"speed", interval_json(e.sel.speed)},
                      {"wheel", interval_json(e.sel.wheel)},
                      {"heading_sign", e.sel.heading_sign}};
    je["kbox"] = json::array();
    for (const auto& b : e.kbox) je["kbox"].push_back(interval_json(b));
    je["T"] = e.T;
    je["tau_plan"] = e.tau_plan;
    je["g"] = e.g.g.empty() ? json() : json::parse(e.g.to_json());
    je["frs"] = json::parse(frs_to_json(e.frs));
    j["entries"].push_back(std::move(je));
  }
  return j.dump();
}

FrsLibrary FrsLibrary::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw std::runtime_error(strf("library load: invalid json (%s)", e.what()));
  }
  if (!j.contains("version") || j["version"].get<int>() != 1)
    throw std::runtime_error("library load: unsupported version");
  FrsLibrary lib;
  lib.platform = j.at("platform").get<std::string>();
  for (const auto& je : j.at("entries")) {
    FrsEntry e;
    e.id = je.at("id").get<std::string>();
    const auto& sel = je.at("selector");
    e.sel.speed = interval_from(sel.at("speed"));
    e.sel.wheel = interval_from(sel.at("wheel"));
    e.sel.heading_sign = sel.at("heading_sign").get<int>();
    for (const auto& b : je.at("kbox")) e.kbox.push_back(interval_from(b));
    e.T = je.at("T").get<double>();
    e.tau_plan = je.at("tau_plan").get<double>();
    if (!je.at("g").is_null()) e.g = TrackingErrorFn::from_json(je.at("g").dump());
    e.frs = frs_from_json(je.at("frs").dump());
    lib.entries.push_back(std::move(e));
  }
  lib.validate();
  return lib;
}

void FrsLibrary::save(const std::string& path) const { write_file(path, to_json()); }

FrsLibrary FrsLibrary::load(const std::string& path) {
  try {
    return from_json(read_file(path));
  } catch (const std::runtime_error& e) {
    throw std::runtime_error(strf("%s: %s", path.c_str(), e.what()));
  }
}

}  // namespace rtd
