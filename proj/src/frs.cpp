#include "rtd/frs.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <mutex>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "rtd/util.hpp"

namespace rtd {

namespace {

double ipowd(double b, int e) {
  double r = 1.0;
  for (int i = 0; i < e; ++i) r *= b;
  return r;
}

void check_finite_iv(const Interval& a, const char* who) {
  if (!std::isfinite(a.lo) || !std::isfinite(a.hi) || a.lo > a.hi)
    throw std::runtime_error(strf("%s: malformed interval [%g, %g]", who, a.lo, a.hi));
}

}  // namespace

// ----------------------------------------------------------------- intervals

Interval operator*(Interval a, Interval b) {
  double p1 = a.lo * b.lo, p2 = a.lo * b.hi, p3 = a.hi * b.lo, p4 = a.hi * b.hi;
  return {std::min(std::min(p1, p2), std::min(p3, p4)),
          std::max(std::max(p1, p2), std::max(p3, p4))};
}

Interval iv_pow(Interval a, int e) {
  if (e <= 0) return {1.0, 1.0};
  if (e == 1) return a;
  double pl = ipowd(a.lo, e), ph = ipowd(a.hi, e);
  if (e % 2 == 1 || a.lo >= 0.0) return {pl, ph};
  if (a.hi <= 0.0) return {ph, pl};
  return {0.0, std::max(pl, ph)};  // even power across zero
}

Interval iv_sin(Interval a) {
  if (a.width() >= 2.0 * M_PI) return {-1.0, 1.0};
  Interval r = Interval::of(std::sin(a.lo), std::sin(a.hi));
  double two_pi = 2.0 * M_PI;
  if (std::ceil((a.lo - M_PI / 2) / two_pi) <= std::floor((a.hi - M_PI / 2) / two_pi)) r.hi = 1.0;
  if (std::ceil((a.lo + M_PI / 2) / two_pi) <= std::floor((a.hi + M_PI / 2) / two_pi)) r.lo = -1.0;
  return r;
}

Interval iv_cos(Interval a) { return iv_sin({a.lo + M_PI / 2, a.hi + M_PI / 2}); }

Interval poly_range(const PolyTK& p, Interval t, const std::vector<Interval>& k) {
  if (k.size() != p.nk)
    throw std::invalid_argument(strf("poly_range: %zu parameter intervals for a %zu-parameter "
                                     "polynomial",
                                     k.size(), p.nk));
  Interval acc{0.0, 0.0};
  for (std::size_t m = 0; m < p.monomials.size(); ++m) {
    Interval term = iv_pow(t, p.monomials[m][0]);
    for (std::size_t j = 0; j < p.nk; ++j) term = term * iv_pow(k[j], p.monomials[m][1 + j]);
    acc = acc + p.coeffs[m] * term;
  }
  return acc;
}

// ----------------------------------------------------------------- grid axis

int GridAxis::index(double v) const {
  if (!(v >= lo && v <= hi)) return -1;
  int i = static_cast<int>(std::floor((v - lo) / cell()));
  return std::min(std::max(i, 0), n - 1);
}

std::pair<int, int> GridAxis::cover(double a, double b) const {
  if (b < lo || a > hi || b < a) return {1, 0};
  int i0 = static_cast<int>(std::floor((a - lo) / cell()));
  int i1 = static_cast<int>(std::floor((b - lo) / cell()));
  return {std::min(std::max(i0, 0), n - 1), std::min(std::max(i1, 0), n - 1)};
}

void GridAxis::validate() const {
  if (name.empty()) throw std::invalid_argument("grid axis: empty name");
  if (n < 1) throw std::invalid_argument(strf("grid axis '%s': cell count %d < 1", name.c_str(), n));
  if (!std::isfinite(lo) || !std::isfinite(hi) || !(hi > lo))
    throw std::invalid_argument(strf("grid axis '%s': bad bounds [%g, %g]", name.c_str(), lo, hi));
}

// ------------------------------------------------------------------ grid FRS

std::size_t GridFRS::space_cells() const {
  std::size_t m = 1;
  for (std::size_t i = 0; i < n_space; ++i) m *= static_cast<std::size_t>(axes[i].n);
  return m;
}

std::size_t GridFRS::k_cells() const {
  std::size_t m = 1;
  for (std::size_t i = n_space; i < axes.size(); ++i) m *= static_cast<std::size_t>(axes[i].n);
  return m;
}

void GridFRS::alloc() {
  // one guard word so 64-bit splicing may touch word+1 unconditionally
  bits.assign(k_cells() * words_per_slice() + 1, 0ull);
}

std::size_t GridFRS::space_flat(const int* idx) const {
  std::size_t f = 0, m = 1;
  for (std::size_t i = 0; i < n_space; ++i) {
    f += static_cast<std::size_t>(idx[i]) * m;
    m *= static_cast<std::size_t>(axes[i].n);
  }
  return f;
}

std::size_t GridFRS::k_flat(const int* idx) const {
  std::size_t f = 0, m = 1;
  for (std::size_t i = n_space; i < axes.size(); ++i) {
    f += static_cast<std::size_t>(idx[i - n_space]) * m;
    m *= static_cast<std::size_t>(axes[i].n);
  }
  return f;
}

bool GridFRS::space_index(const double* s, int* idx) const {
  for (std::size_t i = 0; i < n_space; ++i) {
    idx[i] = axes[i].index(s[i]);
    if (idx[i] < 0) return false;
  }
  return true;
}

bool GridFRS::k_index(const double* k, int* idx) const {
  for (std::size_t i = n_space; i < axes.size(); ++i) {
    idx[i - n_space] = axes[i].index(k[i - n_space]);
    if (idx[i - n_space] < 0) return false;
  }
  return true;
}

double GridFRS::value(const double* s, const double* k) const {
  int kidx[16];
  for (std::size_t i = n_space; i < axes.size(); ++i) {
    kidx[i - n_space] = axes[i].index(k[i - n_space]);
    if (kidx[i - n_space] < 0)
      throw std::domain_error(strf("frs: parameter '%s'=%g outside certified range [%g, %g]",
                                   axes[i].name.c_str(), k[i - n_space], axes[i].lo, axes[i].hi));
  }
  std::size_t kf = k_flat(kidx);
  int idx[8];
  if (!space_index(s, idx)) return 0.0;

  int r = dilate_cells;
  int off[8];
  for (std::size_t i = 0; i < n_space; ++i) off[i] = -r;
  for (;;) {
    bool ok = true;
    int cur[8];
    for (std::size_t i = 0; i < n_space; ++i) {
      cur[i] = idx[i] + off[i];
      if (cur[i] < 0 || cur[i] >= axes[i].n) {
        ok = false;
        break;
      }
    }
    if (ok && get(space_flat(cur), kf)) return 1.0;
    // odometer over the neighborhood
    std::size_t a = 0;
    for (; a < n_space; ++a) {
      if (++off[a] <= r) break;
      off[a] = -r;
    }
    if (a == n_space) break;
  }
  return 0.0;
}

double GridFRS::value(Vec2 x, const std::vector<double>& k) const {
  if (n_space != 2)
    throw std::invalid_argument("frs: planar value query needs exactly two space axes");
  if (k.size() != nk())
    throw std::invalid_argument(strf("frs: %zu parameters given, grid has %zu", k.size(), nk()));
  double s[2] = {x.x, x.y};
  return value(s, k.data());
}

std::size_t GridFRS::count() const {
  std::size_t c = 0;
  for (std::uint64_t w : bits) c += static_cast<std::size_t>(__builtin_popcountll(w));
  return c;
}

void GridFRS::validate() const {
  if (axes.empty()) throw std::invalid_argument("frs: no axes");
  if (n_space < 1 || n_space > axes.size())
    throw std::invalid_argument("frs: space axis count out of range");
  for (const auto& a : axes) a.validate();
  if (dilate_cells < 0) throw std::invalid_argument("frs: negative dilation");
  if (bits.size() != k_cells() * words_per_slice() + 1)
    throw std::invalid_argument("frs: occupancy storage size mismatch");
}

// ------------------------------------------------------------ polynomial FRS

void PolynomialFRS::validate() const {
  if (axes.empty()) throw std::invalid_argument("polynomial frs: no axes");
  if (n_space < 1 || n_space > axes.size())
    throw std::invalid_argument("polynomial frs: space axis count out of range");
  for (const auto& a : axes)
    if (!std::isfinite(a.lo) || !std::isfinite(a.hi) || !(a.hi > a.lo))
      throw std::invalid_argument(
          strf("polynomial frs: scaling box [%g, %g] on axis '%s' is not invertible", a.lo, a.hi,
               a.name.c_str()));
  if (monomials.size() != coeffs.size())
    throw std::invalid_argument("polynomial frs: monomial/coefficient count mismatch");
  for (const auto& row : monomials)
    if (row.size() != axes.size())
      throw std::invalid_argument(
          strf("polynomial frs: scaling box count %zu does not match monomial variable count %zu",
               axes.size(), row.size()));
  for (double c : coeffs)
    if (!std::isfinite(c)) throw std::invalid_argument("polynomial frs: non-finite coefficient");
}

double PolynomialFRS::value(const double* s, const double* k) const {
  double scaled[16];
  for (std::size_t i = 0; i < axes.size(); ++i) {
    double v = i < n_space ? s[i] : k[i - n_space];
    if (v < axes[i].lo || v > axes[i].hi) {
      if (i < n_space) return 0.0;  // outside the certified spatial box: unreachable
      throw std::domain_error(strf("frs: parameter '%s'=%g outside certified range [%g, %g]",
                                   axes[i].name.c_str(), v, axes[i].lo, axes[i].hi));
    }
    scaled[i] = 2.0 * (v - axes[i].lo) / (axes[i].hi - axes[i].lo) - 1.0;
  }
  double acc = 0.0;
  for (std::size_t m = 0; m < monomials.size(); ++m) {
    double term = coeffs[m];
    for (std::size_t i = 0; i < axes.size(); ++i) term *= ipowd(scaled[i], monomials[m][i]);
    acc += term;
  }
  return acc;
}

double PolynomialFRS::value(Vec2 x, const std::vector<double>& k) const {
  if (n_space != 2)
    throw std::invalid_argument("polynomial frs: planar value query needs two space axes");
  if (k.size() != axes.size() - n_space)
    throw std::invalid_argument("polynomial frs: parameter count mismatch");
  double s[2] = {x.x, x.y};
  return value(s, k.data());
}

// -------------------------------------------------------------- propagation

namespace {

constexpr std::size_t kMaxDims = 4;
using BoxN = std::array<Interval, kMaxDims>;

struct StepResult {
  BoxN sweep;  // encloses all states over the whole step
  BoxN end;    // encloses states at the end of the step
};

// One verified integration step: finds a box B with C + [0,h]*F(B) inside B,
// so every trajectory from C stays in the returned sweep over the step and
// ends inside `end`.  Domain escape (when axes given, checked with the
// marking slack) and divergence raise runtime_error.
StepResult step_enclosure(const IntervalField& field, std::size_t ns, const BoxN& C, Interval It,
                          double h, const Interval* kiv, const GridAxis* axes, const double* lam,
                          int max_picard, const std::string& model) {
  BoxN D{};
  field(It, C.data(), kiv, D.data());
  BoxN B{};
  for (std::size_t i = 0; i < ns; ++i) {
    check_finite_iv(D[i], "frs field");
    B[i] = C[i] + sweep_scale(h, D[i]);
  }
  for (int it = 0;; ++it) {
    for (std::size_t i = 0; i < ns; ++i) {
      if (B[i].width() > 1e9)
        throw std::runtime_error(
            strf("frs: enclosure diverged on axis %zu at t=%.3f (model %s)", i, It.lo,
                 model.c_str()));
      if (axes) {
        double pad = 0.1 * (axes[i].hi - axes[i].lo);
        if (B[i].lo < axes[i].lo - pad || B[i].hi > axes[i].hi + pad)
          throw std::runtime_error(
              strf("frs: reachable enclosure escapes the domain on axis '%s' at t=%.3f "
                   "(model %s)",
                   axes[i].name.c_str(), It.lo, model.c_str()));
      }
    }
    field(It, B.data(), kiv, D.data());
    BoxN B2{};
    bool verified = true;
    for (std::size_t i = 0; i < ns; ++i) {
      check_finite_iv(D[i], "frs field");
      B2[i] = C[i] + sweep_scale(h, D[i]);
      verified = verified && B[i].contains(B2[i]);
    }
    if (verified) {
      StepResult r;
      r.sweep = B2;
      for (std::size_t i = 0; i < ns; ++i) {
        r.end[i] = C[i] + h * D[i];
        if (axes) {
          Interval marked = B2[i].inflate(lam[i]);
          if (marked.lo < axes[i].lo || marked.hi > axes[i].hi)
            throw std::runtime_error(
                strf("frs: reachable enclosure escapes the domain on axis '%s' at t=%.3f "
                     "(model %s)",
                     axes[i].name.c_str(), It.lo, model.c_str()));
        }
      }
      return r;
    }
    if (it >= max_picard)
      throw std::runtime_error(
          strf("frs: step enclosure did not converge at t=%.3f; reduce dt (model %s)", It.lo,
               model.c_str()));
    double w = 0.0;
    for (std::size_t i = 0; i < ns; ++i) w = std::max(w, B2[i].width());
    double pad = 1e-9 * (1.0 + w) * (it + 1) + (it >= 2 ? 0.05 * (it - 1) * w : 0.0);
    for (std::size_t i = 0; i < ns; ++i) B[i] = hull(B[i], B2[i]).inflate(pad);
  }
}

bool nearly_equal(const Interval& a, const Interval& b) {
  double tol = 1e-12 * (1.0 + std::fabs(a.lo) + std::fabs(a.hi));
  return std::fabs(a.lo - b.lo) <= tol && std::fabs(a.hi - b.hi) <= tol;
}

// Merge boxes whose union is exactly a box: identical on all axes but at
// most one, overlapping or touching there.  Keeps the frontier small without
// giving up tightness; the result only ever covers the same set or less
// paperwork, never less area.
void merge_boxes(std::vector<BoxN>& v, std::size_t ns) {
  if (v.size() < 2) return;
  std::sort(v.begin(), v.end(), [ns](const BoxN& a, const BoxN& b) {
    for (std::size_t i = 0; i < ns; ++i) {
      if (a[i].lo != b[i].lo) return a[i].lo < b[i].lo;
      if (a[i].hi != b[i].hi) return a[i].hi < b[i].hi;
    }
    return false;
  });
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t i = 0; i + 1 < v.size(); ++i) {
      for (std::size_t j = i + 1; j < v.size(); ++j) {
        int diff = -1;
        bool mergeable = true;
        for (std::size_t a = 0; a < ns && mergeable; ++a) {
          if (nearly_equal(v[i][a], v[j][a])) continue;
          if (diff >= 0) {
            mergeable = false;
          } else {
            diff = static_cast<int>(a);
            double tol = 1e-12 * (1.0 + std::fabs(v[i][a].hi) + std::fabs(v[j][a].hi));
            if (v[j][a].lo > v[i][a].hi + tol || v[i][a].lo > v[j][a].hi + tol) mergeable = false;
          }
        }
        if (!mergeable) continue;
        if (diff >= 0) v[i][diff] = hull(v[i][diff], v[j][diff]);
        v.erase(v.begin() + static_cast<std::ptrdiff_t>(j));
        changed = true;
        --j;
      }
    }
  }
}

void propagate_k(const FrsSpec& spec, GridFRS& out, std::size_t kflat, const double* lam) {
  std::size_t ns = spec.n_space;
  std::size_t nk = spec.axes.size() - ns;

  Interval kiv[16];
  {
    std::size_t rem = kflat;
    for (std::size_t j = 0; j < nk; ++j) {
      const GridAxis& ax = spec.axes[ns + j];
      int idx = static_cast<int>(rem % static_cast<std::size_t>(ax.n));
      rem /= static_cast<std::size_t>(ax.n);
      kiv[j] = ax.cell_box(idx);
    }
  }

  // seed: one box per initial cell, then exact-union merge
  std::vector<BoxN> frontier, next;
  {
    int r0[kMaxDims], r1[kMaxDims], idx[kMaxDims];
    for (std::size_t i = 0; i < ns; ++i) {
      auto [a, b] = spec.axes[i].cover(spec.z0[i].lo, spec.z0[i].hi);
      if (a > b) return;  // initial set misses the grid entirely
      r0[i] = a;
      r1[i] = b;
      idx[i] = a;
    }
    for (;;) {
      BoxN c{};
      double clo[kMaxDims], chi[kMaxDims];
      for (std::size_t i = 0; i < ns; ++i) {
        c[i] = spec.axes[i].cell_box(idx[i]);
        clo[i] = c[i].lo;
        chi[i] = c[i].hi;
      }
      if (!spec.z0_cell_filter || spec.z0_cell_filter(clo, chi)) frontier.push_back(c);
      std::size_t a = 0;
      for (; a < ns; ++a) {
        if (++idx[a] <= r1[a]) break;
        idx[a] = r0[a];
      }
      if (a == ns) break;
    }
  }
  if (frontier.empty()) return;
  merge_boxes(frontier, ns);

  // half-open marking: a swept box whose top lands exactly on a cell edge does
  // not claim the upper cell (query-time dilation credits edge points anyway);
  // keeps zero-motion occupancy equal to the seeded cells instead of bleeding
  // one cell per axis per step
  auto mark = [&](const BoxN& b) {
    int r0[kMaxDims], r1[kMaxDims], idx[kMaxDims];
    for (std::size_t i = 0; i < ns; ++i) {
      auto [a, z] = spec.axes[i].cover(b[i].lo, b[i].hi);
      if (a > z) return;
      if (z > a && spec.axes[i].edge(z) >= b[i].hi) --z;
      r0[i] = a;
      r1[i] = z;
      idx[i] = a;
    }
    for (;;) {
      out.set(out.space_flat(idx), kflat);
      std::size_t a = 0;
      for (; a < ns; ++a) {
        if (++idx[a] <= r1[a]) break;
        idx[a] = r0[a];
      }
      if (a == ns) break;
    }
  };

  int nsteps = static_cast<int>(std::ceil(spec.T / spec.dt - 1e-9));
  for (int j = 0; j < nsteps; ++j) {
    double t0 = j * spec.dt;
    double t1 = std::min(spec.T, t0 + spec.dt);
    double h = t1 - t0;
    if (h <= 0.0) break;
    Interval It{t0, t1};
    next.clear();
    for (const BoxN& C : frontier) {
      StepResult r = step_enclosure(spec.field, ns, C, It, h, kiv, spec.axes.data(), lam,
                                    spec.max_picard, spec.model);
      BoxN marked = r.sweep;
      for (std::size_t i = 0; i < ns; ++i) marked[i] = marked[i].inflate(lam[i]);
      mark(marked);
      next.push_back(r.end);
    }
    merge_boxes(next, ns);
    frontier.swap(next);
  }
}

}  // namespace

GridFRS compute_grid_frs(const FrsSpec& spec) {
  if (spec.axes.empty()) throw std::invalid_argument("compute_grid_frs: no axes");
  if (spec.n_space < 1 || spec.n_space > std::min(spec.axes.size(), kMaxDims))
    throw std::invalid_argument("compute_grid_frs: space axis count out of range");
  for (const auto& a : spec.axes) a.validate();
  if (spec.axes.size() - spec.n_space > 16)
    throw std::invalid_argument("compute_grid_frs: too many parameter axes");
  if (!(spec.T > 0.0) || !(spec.dt > 0.0))
    throw std::invalid_argument("compute_grid_frs: horizon and step must be positive");
  if (!spec.field) throw std::invalid_argument("compute_grid_frs: field is required");
  if (spec.z0.size() != spec.n_space)
    throw std::invalid_argument("compute_grid_frs: one initial interval per space axis required");
  for (std::size_t i = 0; i < spec.n_space; ++i)
    if (spec.z0[i].lo < spec.axes[i].lo || spec.z0[i].hi > spec.axes[i].hi ||
        spec.z0[i].lo > spec.z0[i].hi)
      throw std::invalid_argument(
          strf("compute_grid_frs: initial set [%g, %g] outside domain on axis '%s'",
               spec.z0[i].lo, spec.z0[i].hi, spec.axes[i].name.c_str()));

  std::vector<double> lip = spec.lipschitz;
  if (lip.empty()) lip = estimate_lipschitz(spec.field, spec.axes, spec.n_space, spec.T);
  if (lip.size() != spec.n_space)
    throw std::invalid_argument("compute_grid_frs: one Lipschitz bound per space axis required");

  GridFRS out;
  out.axes = spec.axes;
  out.n_space = spec.n_space;
  out.dilate_cells = spec.dilate_cells;
  out.prov.model = spec.model;
  out.prov.T = spec.T;
  out.prov.dt = spec.dt;
  out.prov.lipschitz = lip;
  out.prov.slack.resize(spec.n_space);
  double lam[kMaxDims];
  for (std::size_t i = 0; i < spec.n_space; ++i) {
    lam[i] = lip[i] * spec.dt * spec.dt;
    out.prov.slack[i] = lam[i];
  }
  out.alloc();

  std::size_t kcells = out.k_cells();
  int threads = std::max(1, std::min(spec.threads, 64));
  if (threads == 1 || kcells < 2) {
    for (std::size_t kf = 0; kf < kcells; ++kf) propagate_k(spec, out, kf, lam);
    return out;
  }

  // parameter cells write disjoint word ranges, so workers share nothing
  std::atomic<std::size_t> cursor{0};
  std::mutex err_mtx;
  std::exception_ptr err;
  auto worker = [&]() {
    for (;;) {
      std::size_t kf = cursor.fetch_add(1);
      if (kf >= kcells) return;
      {
        std::lock_guard<std::mutex> lock(err_mtx);
        if (err) return;
      }
      try {
        propagate_k(spec, out, kf, lam);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mtx);
        if (!err) err = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  for (int i = 0; i < threads; ++i) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (err) std::rethrow_exception(err);
  return out;
}

std::vector<Interval> sweep_hull(const IntervalField& field, std::vector<Interval> z0,
                                 const std::vector<Interval>& kbox, std::size_t n_space, double T,
                                 double dt, int max_picard) {
  if (n_space < 1 || n_space > kMaxDims || z0.size() != n_space)
    throw std::invalid_argument("sweep_hull: bad dimensions");
  if (!(T > 0.0) || !(dt > 0.0)) throw std::invalid_argument("sweep_hull: bad horizon");
  double lam[kMaxDims] = {0.0, 0.0, 0.0, 0.0};
  BoxN C{}, acc{};
  for (std::size_t i = 0; i < n_space; ++i) acc[i] = C[i] = z0[i];
  int nsteps = static_cast<int>(std::ceil(T / dt - 1e-9));
  for (int j = 0; j < nsteps; ++j) {
    double t0 = j * dt, t1 = std::min(T, t0 + dt), h = t1 - t0;
    if (h <= 0.0) break;
    StepResult r = step_enclosure(field, n_space, C, {t0, t1}, h, kbox.data(), nullptr, lam,
                                  max_picard, "sweep_hull");
    for (std::size_t i = 0; i < n_space; ++i) acc[i] = hull(acc[i], r.sweep[i]);
    C = r.end;
  }
  return std::vector<Interval>(acc.begin(), acc.begin() + static_cast<std::ptrdiff_t>(n_space));
}

std::vector<double> estimate_lipschitz(const IntervalField& field,
                                       const std::vector<GridAxis>& axes, std::size_t n_space,
                                       double T) {
  if (n_space < 1 || n_space > kMaxDims || n_space > axes.size())
    throw std::invalid_argument("estimate_lipschitz: bad dimensions");
  std::size_t nk = axes.size() - n_space;
  Rng rng = Rng(0x11b5c417u).stream("lipschitz");
  std::vector<double> L(n_space, 0.0);
  Interval s[kMaxDims], k[16], out0[kMaxDims], out1[kMaxDims];
  for (int trial = 0; trial < 64; ++trial) {
    double t = rng.uniform(0.0, T);
    for (std::size_t i = 0; i < n_space; ++i) s[i] = Interval::point(rng.uniform(axes[i].lo, axes[i].hi));
    for (std::size_t j = 0; j < nk; ++j)
      k[j] = Interval::point(rng.uniform(axes[n_space + j].lo, axes[n_space + j].hi));
    field(Interval::point(t), s, k, out0);
    // probe each direction the step remainder depends on: time and space
    for (std::size_t c = 0; c <= n_space; ++c) {
      double delta;
      Interval tp = Interval::point(t);
      Interval sp[kMaxDims];
      for (std::size_t i = 0; i < n_space; ++i) sp[i] = s[i];
      if (c == n_space) {
        delta = std::max(1e-4, 1e-4 * T);
        tp = Interval::point(std::min(t + delta, T));
        delta = tp.lo - t;
        if (delta <= 0.0) continue;
      } else {
        delta = std::max(1e-6, 1e-4 * (axes[c].hi - axes[c].lo));
        double moved = std::min(s[c].lo + delta, axes[c].hi);
        delta = moved - s[c].lo;
        if (delta <= 0.0) continue;
        sp[c] = Interval::point(moved);
      }
      field(tp, sp, k, out1);
      for (std::size_t i = 0; i < n_space; ++i)
        L[i] = std::max(L[i], std::fabs(out1[i].mid() - out0[i].mid()) / delta);
    }
  }
  for (double& v : L) v *= 2.0;  // sampled estimate; factor covers unprobed directions
  return L;
}

// -------------------------------------------------------------- decomposition

void SubsystemFRS::validate() const {
  sub[0].validate();
  sub[1].validate();
  if (sub[0].n_space != 2 || sub[1].n_space != 2)
    throw std::invalid_argument("subsystem frs: each grid needs (position, shared) space axes");
  if (sub[0].axes.size() != sub[1].axes.size())
    throw std::invalid_argument("subsystem frs: axis count mismatch");
  for (std::size_t i = 1; i < sub[0].axes.size(); ++i)
    if (!(sub[0].axes[i] == sub[1].axes[i]))
      throw std::invalid_argument(strf("subsystem frs: shared axis '%s' differs between subsystems",
                                       sub[0].axes[i].name.c_str()));
  if (std::fabs(sub[0].prov.T - sub[1].prov.T) > 1e-12 ||
      std::fabs(sub[0].prov.dt - sub[1].prov.dt) > 1e-12)
    throw std::invalid_argument("subsystem frs: horizon mismatch between subsystems");
}

SubsystemFRS compute_subsystem_frs(const FrsSpec& sx, const FrsSpec& sy) {
  if (sx.n_space != 2 || sy.n_space != 2)
    throw std::invalid_argument("compute_subsystem_frs: each spec needs two space axes");
  if (sx.axes.size() != sy.axes.size())
    throw std::invalid_argument("compute_subsystem_frs: axis count mismatch");
  for (std::size_t i = 1; i < sx.axes.size(); ++i)
    if (!(sx.axes[i] == sy.axes[i]))
      throw std::invalid_argument(
          strf("compute_subsystem_frs: shared axis '%s' differs between specs",
               sx.axes[i].name.c_str()));
  if (std::fabs(sx.T - sy.T) > 1e-12 || std::fabs(sx.dt - sy.dt) > 1e-12)
    throw std::invalid_argument("compute_subsystem_frs: horizon mismatch");
  SubsystemFRS s;
  s.sub[0] = compute_grid_frs(sx);
  s.sub[1] = compute_grid_frs(sy);
  return s;
}

namespace {

inline std::uint64_t read_bits(const std::uint64_t* w, std::size_t off, int len) {
  std::size_t wi = off >> 6;
  int sh = static_cast<int>(off & 63);
  std::uint64_t v = w[wi] >> sh;
  if (sh) v |= w[wi + 1] << (64 - sh);
  if (len < 64) v &= (1ull << len) - 1ull;
  return v;
}

inline void or_bits(std::uint64_t* w, std::size_t off, std::uint64_t v) {
  std::size_t wi = off >> 6;
  int sh = static_cast<int>(off & 63);
  w[wi] |= v << sh;
  if (sh) w[wi + 1] |= v >> (64 - sh);
}

}  // namespace

GridFRS reconstruct_frs(const SubsystemFRS& s) {
  s.validate();
  const GridFRS& A = s.sub[0];
  const GridFRS& B = s.sub[1];

  GridFRS out;
  out.axes.push_back(A.axes[0]);
  out.axes.push_back(B.axes[0]);
  for (std::size_t i = 2; i < A.axes.size(); ++i) out.axes.push_back(A.axes[i]);
  out.n_space = 2;
  out.dilate_cells = std::max(A.dilate_cells, B.dilate_cells);
  out.prov.model = "reconstruct(" + A.prov.model + "|" + B.prov.model + ")";
  out.prov.T = A.prov.T;
  out.prov.dt = A.prov.dt;
  out.prov.slack = {A.prov.slack.empty() ? 0.0 : A.prov.slack[0],
                    B.prov.slack.empty() ? 0.0 : B.prov.slack[0]};
  out.prov.lipschitz = {A.prov.lipschitz.empty() ? 0.0 : A.prov.lipschitz[0],
                        B.prov.lipschitz.empty() ? 0.0 : B.prov.lipschitz[0]};
  out.alloc();

  int nx = A.axes[0].n, ny = B.axes[0].n, nshared = A.axes[1].n;
  std::size_t wpsA = A.words_per_slice(), wpsB = B.words_per_slice(), wpsO = out.words_per_slice();
  std::size_t kcells = out.k_cells();
  int xwords = (nx + 63) / 64, ywords = (ny + 63) / 64;
  std::vector<std::uint64_t> rowx(static_cast<std::size_t>(xwords));
  std::vector<std::uint64_t> rowy(static_cast<std::size_t>(ywords));

  for (std::size_t kf = 0; kf < kcells; ++kf) {
    const std::uint64_t* baseA = A.bits.data() + kf * wpsA;
    const std::uint64_t* baseB = B.bits.data() + kf * wpsB;
    std::uint64_t* baseO = out.bits.data() + kf * wpsO;
    for (int c = 0; c < nshared; ++c) {
      bool anyx = false;
      for (int w = 0; w < xwords; ++w) {
        int len = std::min(64, nx - w * 64);
        rowx[static_cast<std::size_t>(w)] =
            read_bits(baseA, static_cast<std::size_t>(c) * nx + w * 64, len);
        anyx = anyx || rowx[static_cast<std::size_t>(w)];
      }
      if (!anyx) continue;
      bool anyy = false;
      for (int w = 0; w < ywords; ++w) {
        int len = std::min(64, ny - w * 64);
        rowy[static_cast<std::size_t>(w)] =
            read_bits(baseB, static_cast<std::size_t>(c) * ny + w * 64, len);
        anyy = anyy || rowy[static_cast<std::size_t>(w)];
      }
      if (!anyy) continue;
      for (int w = 0; w < ywords; ++w) {
        std::uint64_t yb = rowy[static_cast<std::size_t>(w)];
        while (yb) {
          int iy = w * 64 + __builtin_ctzll(yb);
          yb &= yb - 1;
          for (int xw = 0; xw < xwords; ++xw)
            or_bits(baseO, static_cast<std::size_t>(iy) * nx + xw * 64,
                    rowx[static_cast<std::size_t>(xw)]);
        }
      }
    }
  }
  return out;
}

// --------------------------------------------------------------------- queries

double frs_value(const Frs& frs, Vec2 x, const std::vector<double>& k) {
  return std::visit([&](const auto& f) { return f.value(x, k); }, frs);
}

std::vector<Vec2> reach_projection(const GridFRS& frs, const std::vector<double>& k,
                                   double resolution) {
  if (frs.n_space != 2)
    throw std::invalid_argument("reach_projection: grid needs exactly two space axes");
  if (k.size() != frs.nk())
    throw std::invalid_argument("reach_projection: parameter count mismatch");
  std::vector<Vec2> pts;
  const GridAxis& ax = frs.axes[0];
  const GridAxis& ay = frs.axes[1];
  double s[2];
  if (resolution <= 0.0) {
    for (int iy = 0; iy < ay.n; ++iy)
      for (int ix = 0; ix < ax.n; ++ix) {
        s[0] = ax.center(ix);
        s[1] = ay.center(iy);
        if (frs.value(s, k.data()) >= 1.0) pts.push_back({s[0], s[1]});
      }
    return pts;
  }
  for (double y = ay.lo + resolution / 2; y <= ay.hi; y += resolution)
    for (double x = ax.lo + resolution / 2; x <= ax.hi; x += resolution) {
      s[0] = x;
      s[1] = y;
      if (frs.value(s, k.data()) >= 1.0) pts.push_back({x, y});
    }
  return pts;
}

std::vector<Vec2> filter_unreachable(const GridFRS& frs, const std::vector<Vec2>& pts) {
  if (frs.n_space != 2)
    throw std::invalid_argument("filter_unreachable: grid needs exactly two space axes");
  // mask = union of occupancy over every parameter cell
  std::size_t wps = frs.words_per_slice();
  std::vector<std::uint64_t> mask(wps, 0ull);
  for (std::size_t kf = 0; kf < frs.k_cells(); ++kf)
    for (std::size_t w = 0; w < wps; ++w) mask[w] |= frs.bits[kf * wps + w];

  int nx = frs.axes[0].n, ny = frs.axes[1].n, r = frs.dilate_cells;
  std::vector<Vec2> kept;
  for (const Vec2& p : pts) {
    double s[2] = {p.x, p.y};
    int idx[2];
    if (!frs.space_index(s, idx)) continue;
    bool hit = false;
    for (int dy = -r; dy <= r && !hit; ++dy)
      for (int dx = -r; dx <= r && !hit; ++dx) {
        int ix = idx[0] + dx, iy = idx[1] + dy;
        if (ix < 0 || ix >= nx || iy < 0 || iy >= ny) continue;
        std::size_t b = static_cast<std::size_t>(iy) * nx + static_cast<std::size_t>(ix);
        hit = (mask[b >> 6] >> (b & 63)) & 1u;
      }
    if (hit) kept.push_back(p);
  }
  return kept;
}

// ------------------------------------------------------------------------- io

namespace {

std::vector<std::uint8_t> packed_occupancy(const GridFRS& g) {
  std::size_t total = g.space_cells() * g.k_cells();
  std::vector<std::uint8_t> bytes((total + 7) / 8, 0u);
  std::size_t b = 0;
  for (std::size_t kf = 0; kf < g.k_cells(); ++kf)
    for (std::size_t sf = 0; sf < g.space_cells(); ++sf, ++b)
      if (g.get(sf, kf)) bytes[b >> 3] |= static_cast<std::uint8_t>(1u << (b & 7));
  return bytes;
}

std::string occupancy_checksum(const GridFRS& g) {
  auto bytes = packed_occupancy(g);
  return strf("fnv1a64:%016llx",
              static_cast<unsigned long long>(fnv1a64(bytes.data(), bytes.size())));
}

std::string coeff_checksum(const std::vector<double>& coeffs) {
  return strf("fnv1a64:%016llx",
              static_cast<unsigned long long>(
                  fnv1a64(coeffs.data(), coeffs.size() * sizeof(double))));
}

nlohmann::json axes_to_json(const std::vector<GridAxis>& axes, bool with_n) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& a : axes) {
    nlohmann::json j{{"name", a.name}, {"min", a.lo}, {"max", a.hi}};
    if (with_n) j["n"] = a.n;
    arr.push_back(j);
  }
  return arr;
}

std::vector<GridAxis> axes_from_json(const nlohmann::json& arr, bool with_n) {
  std::vector<GridAxis> axes;
  for (const auto& j : arr) {
    GridAxis a;
    a.name = j.at("name").get<std::string>();
    a.lo = j.at("min").get<double>();
    a.hi = j.at("max").get<double>();
    a.n = with_n ? j.at("n").get<int>() : 1;
    axes.push_back(a);
  }
  return axes;
}

nlohmann::json prov_to_json(const FrsProvenance& p) {
  return nlohmann::json{{"model", p.model},
                        {"T", p.T},
                        {"dt", p.dt},
                        {"slack", p.slack},
                        {"lipschitz", p.lipschitz}};
}

FrsProvenance prov_from_json(const nlohmann::json& j) {
  FrsProvenance p;
  p.model = j.at("model").get<std::string>();
  p.T = j.at("T").get<double>();
  p.dt = j.at("dt").get<double>();
  p.slack = j.at("slack").get<std::vector<double>>();
  p.lipschitz = j.at("lipschitz").get<std::vector<double>>();
  return p;
}

}  // namespace

std::string frs_to_json(const Frs& frs) {
  nlohmann::json j;
  j["version"] = 1;
  if (std::holds_alternative<GridFRS>(frs)) {
    const GridFRS& g = std::get<GridFRS>(frs);
    g.validate();
    j["kind"] = "grid";
    j["n_space"] = g.n_space;
    j["dilate_cells"] = g.dilate_cells;
    j["axes"] = axes_to_json(g.axes, true);
    j["provenance"] = prov_to_json(g.prov);
    // run-length encoding of the logical bit stream, zero-run first
    std::vector<std::uint64_t> runs;
    std::size_t total = g.space_cells() * g.k_cells();
    bool cur = false;
    std::uint64_t len = 0;
    std::size_t b = 0;
    for (std::size_t kf = 0; kf < g.k_cells(); ++kf)
      for (std::size_t sf = 0; sf < g.space_cells(); ++sf, ++b) {
        bool v = g.get(sf, kf);
        if (v == cur) {
          ++len;
        } else {
          runs.push_back(len);
          cur = v;
          len = 1;
        }
      }
    runs.push_back(len);
    j["occupancy"] = {{"encoding", "rle"}, {"bits", total}, {"runs", runs}};
    j["checksum"] = occupancy_checksum(g);
  } else {
    const PolynomialFRS& p = std::get<PolynomialFRS>(frs);
    p.validate();
    j["kind"] = "polynomial";
    j["n_space"] = p.n_space;
    j["axes"] = axes_to_json(p.axes, false);
    j["provenance"] = prov_to_json(p.prov);
    j["monomials"] = p.monomials;
    j["coeffs"] = p.coeffs;
    j["checksum"] = coeff_checksum(p.coeffs);
  }
  return j.dump();
}

Frs frs_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const std::exception& e) {
    throw std::runtime_error(strf("frs load: invalid json: %s", e.what()));
  }
  int version = j.at("version").get<int>();
  if (version != 1)
    throw std::runtime_error(strf("frs load: unsupported version %d (expected 1)", version));
  std::string kind = j.at("kind").get<std::string>();
  if (kind == "grid") {
    GridFRS g;
    g.axes = axes_from_json(j.at("axes"), true);
    g.n_space = j.at("n_space").get<std::size_t>();
    g.dilate_cells = j.at("dilate_cells").get<int>();
    g.prov = prov_from_json(j.at("provenance"));
    g.alloc();
    const auto& occ = j.at("occupancy");
    if (occ.at("encoding").get<std::string>() != "rle")
      throw std::runtime_error("frs load: unknown occupancy encoding");
    std::size_t total = occ.at("bits").get<std::size_t>();
    if (total != g.space_cells() * g.k_cells())
      throw std::runtime_error("frs load: occupancy bit count does not match the axes");
    auto runs = occ.at("runs").get<std::vector<std::uint64_t>>();
    std::size_t scells = g.space_cells();
    std::size_t b = 0;
    bool cur = false;
    std::uint64_t used = 0;
    for (std::uint64_t run : runs) {
      if (b + run > total)
        throw std::runtime_error(
            strf("frs load: occupancy runs cover more than %llu bits",
                 static_cast<unsigned long long>(total)));
      if (cur)
        for (std::uint64_t i = 0; i < run; ++i) {
          std::size_t bit = b + i;
          g.set(bit % scells, bit / scells);
        }
      b += run;
      used += run;
      cur = !cur;
    }
    if (used != total)
      throw std::runtime_error(
          strf("frs load: occupancy runs cover %llu bits, expected %llu",
               static_cast<unsigned long long>(used), static_cast<unsigned long long>(total)));
    std::string want = j.at("checksum").get<std::string>();
    std::string got = occupancy_checksum(g);
    if (want != got)
      throw std::runtime_error(
          strf("frs load: checksum mismatch (stored %s, computed %s)", want.c_str(), got.c_str()));
    g.validate();
    return g;
  }
  if (kind == "polynomial") {
    PolynomialFRS p;
    p.axes = axes_from_json(j.at("axes"), false);
    p.n_space = j.at("n_space").get<std::size_t>();
    p.prov = prov_from_json(j.at("provenance"));
    p.monomials = j.at("monomials").get<std::vector<std::vector<int>>>();
    p.coeffs = j.at("coeffs").get<std::vector<double>>();
    p.validate();
    std::string want = j.at("checksum").get<std::string>();
    std::string got = coeff_checksum(p.coeffs);
    if (want != got)
      throw std::runtime_error(
          strf("frs load: checksum mismatch (stored %s, computed %s)", want.c_str(), got.c_str()));
    return p;
  }
  throw std::runtime_error(strf("frs load: unknown kind '%s'", kind.c_str()));
}

void save_frs(const std::string& path, const Frs& frs) { write_file(path, frs_to_json(frs)); }

Frs load_frs(const std::string& path) {
  try {
    return frs_from_json(read_file(path));
  } catch (const std::runtime_error& e) {
    throw std::runtime_error(strf("%s: %s", path.c_str(), e.what()));
  }
}

}  // namespace rtd
