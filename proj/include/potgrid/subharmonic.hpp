#pragma once

#include <cmath>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "potgrid/geometry.hpp"
#include "potgrid/io.hpp"

namespace potgrid {

struct SubmeanWitness {
  int ix = 0, iy = 0;
  double radius = 0;
  double margin = 0;
};

/// Certificate for the sub-mean-value inequality at the tested cells and
/// radii only; a pass is not a proof over untested scales.
struct SubmeanVerdict {
  bool passed = true;
  double worst_margin = std::numeric_limits<double>::infinity();
  std::vector<SubmeanWitness> witnesses;
  long tested_count = 0;
};

inline std::vector<double> default_submean_radii(double h) { return {4 * h, 8 * h, 16 * h}; }

inline double default_submean_tol(const GridFunction& u) {
  double range = u.range();
  double scale = std::max(std::fabs(u.min_finite()), std::fabs(u.max_finite()));
  return 1e-6 * range + 1e-12 * (1.0 + scale);
}

/// Off-lattice sampling scheme for circle means. Bilinear never overshoots
/// the local cell values, which makes it safe-sided on convex kinks and
/// under-resolved steep fields; bicubic (Catmull-Rom) reproduces quadratics
/// exactly, which the tight analytic margin checks need.
enum class Interp { bilinear, bicubic };

namespace submean_detail {

// Catmull-Rom weights (Keys a = -1/2): reproduce quadratics exactly.
inline void cr_weights(double t, double w[4]) {
  double t2 = t * t, t3 = t2 * t;
  w[0] = -0.5 * t + t2 - 0.5 * t3;
  w[1] = 1.0 - 2.5 * t2 + 1.5 * t3;
  w[2] = 0.5 * t + 2.0 * t2 - 1.5 * t3;
  w[3] = -0.5 * t2 + 0.5 * t3;
}

struct SampleStencil {
  int bx = 0, by = 0;  // padded-array cell of the top-left stencil tap
  int taps = 4;
  double wx[4] = {0, 0, 0, 0};
  double wy[4] = {0, 0, 0, 0};
};

struct CircleSampler {
  double radius = 0;
  std::vector<SampleStencil> samples;

  CircleSampler(double rho, double h, Interp interp) : radius(rho) {
    int m = std::max<int>(16, static_cast<int>(std::ceil(2 * M_PI * rho / h)));
    samples.resize(static_cast<size_t>(m));
    for (int k = 0; k < m; ++k) {
      double th = 2 * M_PI * k / m;
      double gx = rho * std::cos(th) / h, gy = rho * std::sin(th) / h;
      double fx = std::floor(gx), fy = std::floor(gy);
      SampleStencil& s = samples[static_cast<size_t>(k)];
      if (interp == Interp::bicubic) {
        s.taps = 4;
        s.bx = static_cast<int>(fx) - 1;
        s.by = static_cast<int>(fy) - 1;
        cr_weights(gx - fx, s.wx);
        cr_weights(gy - fy, s.wy);
      } else {
        s.taps = 2;
        s.bx = static_cast<int>(fx);
        s.by = static_cast<int>(fy);
        s.wx[0] = 1.0 - (gx - fx);
        s.wx[1] = gx - fx;
        s.wy[0] = 1.0 - (gy - fy);
        s.wy[1] = gy - fy;
      }
    }
  }
};

/// Values padded with a NaN border wide enough for every sampling stencil;
/// unsupported cells are NaN and the -inf sentinel is replaced by the floor,
/// so one NaN check per sample covers both lattice bounds and support.
struct PaddedValues {
  int pad = 0;
  int pnx = 0, pny = 0;
  std::vector<double> v;

  PaddedValues(const GridFunction& u, double floor_value, int pad_cells) {
    const GridSpec& g = u.grid();
    pad = pad_cells;
    pnx = g.nx + 2 * pad;
    pny = g.ny + 2 * pad;
    v.assign(static_cast<size_t>(pnx) * pny, std::numeric_limits<double>::quiet_NaN());
    for (int iy = 0; iy < g.ny; ++iy)
      for (int ix = 0; ix < g.nx; ++ix) {
        int k = g.index(ix, iy);
        if (!u.supported(k)) continue;
        v[static_cast<size_t>((iy + pad) * pnx + ix + pad)] =
            u.neg_inf_at(k) ? floor_value : u.at(k);
      }
  }

  double sample(int ix, int iy, const SampleStencil& s) const {
    int x0 = ix + pad + s.bx, y0 = iy + pad + s.by;
    double acc = 0;
    for (int b = 0; b < s.taps; ++b) {
      const double* row = &v[static_cast<size_t>((y0 + b) * pnx + x0)];
      double line = 0;
      for (int a = 0; a < s.taps; ++a) line += s.wx[a] * row[a];
      acc += s.wy[b] * line;
    }
    return acc;  // NaN when any tap is off-support
  }
};

}  // namespace submean_detail

/// Compares u(x) against trapezoidal circle means with off-lattice sampling.
/// Tested cells are those whose sampling stencils stay inside the support
/// for every radius. -inf centers pass automatically; -inf on a circle
/// contributes the configured floor (min finite - 10 * range).
inline SubmeanVerdict submean_test(const GridFunction& u, std::span<const double> radii,
                                   double tol, Interp interp = Interp::bilinear) {
  const GridSpec& g = u.grid();
  if (radii.empty()) throw std::invalid_argument("no radii given");
  for (double rho : radii)
    if (rho < 2 * g.h * (1 - 1e-12)) throw std::invalid_argument("radius below 2h");
  if (!u.has_finite_value()) throw std::invalid_argument("grid function has no finite values");

  double floor_value = u.min_finite() - 10.0 * u.range();
  double max_rho = *std::max_element(radii.begin(), radii.end());
  int pad = static_cast<int>(std::ceil(max_rho / g.h)) + 3;
  submean_detail::PaddedValues vals(u, floor_value, pad);
  std::vector<submean_detail::CircleSampler> samplers;
  for (double rho : radii) samplers.emplace_back(rho, g.h, interp);

  SubmeanVerdict out;
  out.worst_margin = std::numeric_limits<double>::infinity();
  bool any_eligible = false;
  std::vector<double> means(radii.size());

  for (int iy = 0; iy < g.ny; ++iy)
    for (int ix = 0; ix < g.nx; ++ix) {
      int k = g.index(ix, iy);
      if (!u.supported(k)) continue;
      bool eligible = true;
      for (size_t r = 0; r < samplers.size() && eligible; ++r) {
        double acc = 0;
        for (const auto& s : samplers[r].samples) acc += vals.sample(ix, iy, s);
        double mean = acc / double(samplers[r].samples.size());
        if (std::isnan(mean)) {
          eligible = false;
        } else {
          means[r] = mean;
        }
      }
      if (!eligible) continue;
      any_eligible = true;
      out.tested_count += static_cast<long>(radii.size());
      if (u.neg_inf_at(k)) continue;  // -inf center satisfies the inequality
      double ux = u.at(k);
      for (size_t r = 0; r < radii.size(); ++r) {
        double margin = means[r] - ux;
        out.worst_margin = std::min(out.worst_margin, margin);
        if (margin < -tol) out.witnesses.push_back({ix, iy, radii[r], margin});
      }
    }

  if (!any_eligible) throw std::invalid_argument("domain too small for radii");
  out.passed = out.witnesses.empty();
  return out;
}

inline std::string verdict_report_text(const SubmeanVerdict& v) {
  std::ostringstream out;
  out << "submean verdict: " << (v.passed ? "PASS" : "FAIL") << '\n';
  out << "tested pairs: " << v.tested_count << '\n';
  out << "worst margin: " << format_double(v.worst_margin) << '\n';
  out << "violations: " << v.witnesses.size() << '\n';
  size_t shown = std::min<size_t>(v.witnesses.size(), 100);
  for (size_t i = 0; i < shown; ++i) {
    const auto& w = v.witnesses[i];
    out << w.ix << ' ' << w.iy << ' ' << format_double(w.radius) << ' '
        << format_double(w.margin) << '\n';
  }
  return out.str();
}

struct FamilyMaxResult {
  bool passed = false;
  double boundary_bound = 0;  // M: sup of members over the boundary cells
  double max_interior = 0;    // sup of members over all cells
};

/// Boundary sup bounds the family sup over the closure, up to tol. Members
/// must individually satisfy the sub-mean inequality on their common mask;
/// that is the caller's obligation (set recheck to verify here).
inline FamilyMaxResult family_max_principle(std::span<const GridFunction> members, double tol,
                                            bool recheck_members = false) {
  if (members.empty()) throw std::invalid_argument("empty family");
  for (size_t i = 1; i < members.size(); ++i)
    GridFunction::require_compatible(members[0], members[i]);
  const DomainMask& omega = members[0].support();
  const GridSpec& g = omega.grid();

  if (recheck_members) {
    auto radii = default_submean_radii(g.h);
    for (const GridFunction& m : members) {
      SubmeanVerdict v = submean_test(m, radii, 1e-4 * std::max(1.0, m.range()));
      if (!v.passed)
        throw std::invalid_argument("family member fails the sub-mean recheck");
    }
  }

  DomainMask bd = omega.boundary_cells();
  bool any_bd = false, any_all = false;
  double m_bd = 0, m_all = 0;
  for (int iy = 0; iy < g.ny; ++iy)
    for (int ix = 0; ix < g.nx; ++ix) {
      int k = g.index(ix, iy);
      if (!omega.at(k)) continue;
      for (const GridFunction& m : members) {
        if (m.neg_inf_at(k)) continue;
        double v = m.at(k);
        if (!any_all || v > m_all) m_all = v;
        any_all = true;
        if (bd.at(k)) {
          if (!any_bd || v > m_bd) m_bd = v;
          any_bd = true;
        }
      }
    }
  if (!any_bd || !any_all)
    throw std::invalid_argument("family has no finite values on the mask");
  return {m_all <= m_bd + tol, m_bd, m_all};
}

/// Checks v <= lambda + tol on the morphological interior of the closure of
/// omega, given the strict bound v < lambda on omega itself. Cells outside
/// the support of v are out of scope.
inline bool bounded_by_on_interior_closure(const GridFunction& v, const DomainMask& omega,
                                           double lambda, double tol) {
  const GridSpec& g = v.grid();
  require_same_grid(g, omega.grid());
  for (int k = 0; k < g.size(); ++k)
    if (omega.at(k) && v.supported(k) && !v.neg_inf_at(k) && !(v.at(k) < lambda))
      throw std::invalid_argument("hypothesis failed");

  DomainMask test = morph_interior(morph_closure(omega, 2 * g.h), 2 * g.h);
  for (int k = 0; k < g.size(); ++k) {
    if (!test.at(k) || !v.supported(k) || v.neg_inf_at(k)) continue;
    if (v.at(k) > lambda + tol) return false;
  }
  return true;
}

/// Single-pass sliding maximum over the radius-r lattice neighborhood; the
/// discrete stand-in for the upper regularization.
inline GridFunction usc_regularize(const GridFunction& u, double r) {
  const GridSpec& g = u.grid();
  if (r < g.h * (1 - 1e-12)) throw std::invalid_argument("closure radius below resolution");
  int reach = static_cast<int>(std::floor(r / g.h * (1 + 1e-12)));
  std::vector<std::pair<int, int>> offsets;
  for (int dy = -reach; dy <= reach; ++dy)
    for (int dx = -reach; dx <= reach; ++dx)
      if (detail::within_radius(g.h * std::sqrt(double(dx) * dx + double(dy) * dy), r))
        offsets.emplace_back(dx, dy);

  GridFunction out(u.support());
  for (int iy = 0; iy < g.ny; ++iy)
    for (int ix = 0; ix < g.nx; ++ix) {
      int k = g.index(ix, iy);
      if (!u.supported(k)) continue;
      bool any = false;
      double best = 0;
      for (auto [dx, dy] : offsets) {
        int jx = ix + dx, jy = iy + dy;
        if (!g.in_bounds(jx, jy)) continue;
        int j = g.index(jx, jy);
        if (!u.supported(j) || u.neg_inf_at(j)) continue;
        double v = u.at(j);
        if (!any || v > best) best = v;
        any = true;
      }
      if (any)
        out.set(k, best);
      else
        out.set_neg_inf(k);
    }
  return out;
}

}  // namespace potgrid
