#pragma once

#include <cmath>
#include <filesystem>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "potgrid/geometry.hpp"
#include "potgrid/harmonic.hpp"
#include "potgrid/io.hpp"

namespace potgrid {

/// One layer of the blow-up construction: a far shell Kp where the fitted
/// harmonic must be small and a thin band An at distance unit/(n+1) from S
/// where it must reach n+1, with a fixed 1/2 error budget.
struct LayerSpec {
  int n = 1;
  DomainMask Kp;
  DomainMask An;
  double target_low = 0.0;
  double target_high = 2.0;   // n + 1
  double error_budget = 0.5;
  double band_distance = 0.0; // unit / (n+1), physical
};

struct Layer {
  LayerSpec spec;
  HarmonicModel model;
  GridFunction v;  // max(|H|-1, 0) away from the charge cells
  double achieved_sup_error = std::numeric_limits<double>::infinity();
  bool certified = false;
  int degree_used = 0;
  int charges_used = 0;
  std::string fit_mode;  // which escalation attempt produced the model
};

struct BlowupConfig {
  int nu_max = 4;
  double unit = 0.0;        // 0: (domain width)/8
  double cap_radius = 0.0;  // 0: half the domain width
  Point xi0;                // used when xi0_set
  bool xi0_set = false;
  std::vector<int> degree_ladder{8, 12, 16, 24};
  std::vector<int> charge_ladder{32, 64, 128, 256};
  double ridge_rel = 0.0;  // the escalation fits run ridge-free through QR
};

struct WitnessPoint {
  int n = 0;
  Point zeta;
  double distance_to_x1 = 0;
  double u_value = 0;
};

struct BuildReport {
  DomainMask omega;
  DomainMask S0;
  Point xi0;
  double unit = 0;
  double cap_radius = 0;
  std::vector<Layer> layers;
  DomainMask common_support;            // omega minus every charge cell
  std::vector<GridFunction> u_partial;  // partial sums, nu = 1..nu_max
  std::vector<WitnessPoint> witnesses;
  DomainMask far_shell;  // {unit/2 <= d <= 2 unit} inside the cap
  double M_off = 0;      // max of the full partial sum on the far shell
  bool mixed_uncertified = false;
};

namespace blowup_detail {

inline DomainMask cap_ball(const DomainMask& omega, Point xi0, double R) {
  const GridSpec& g = omega.grid();
  DomainMask out(g);
  for (int iy = 0; iy < g.ny; ++iy)
    for (int ix = 0; ix < g.nx; ++ix)
      if (omega.at(ix, iy) && dist(g.center(ix, iy), xi0) <= R * (1 + 1e-12))
        out.set(ix, iy, true);
  return out;
}

inline Point snap_to_mask(const DomainMask& m, Point p) {
  const GridSpec& g = m.grid();
  double best = std::numeric_limits<double>::infinity();
  Point out = p;
  for (int iy = 0; iy < g.ny; ++iy)
    for (int ix = 0; ix < g.nx; ++ix)
      if (m.at(ix, iy)) {
        double d = dist(g.center(ix, iy), p);
        if (d < best) {
          best = d;
          out = g.center(ix, iy);
        }
      }
  return out;
}

/// Charge sites: m cells spaced evenly along the lexicographic order of the
/// candidate set. With offset <= h/2 the candidates are the S cells (the
/// medial axis for the whitelisted thin geometries); otherwise the ring of
/// cells at distance ~offset from S, which stays inside the hole of the
/// layer compacta and keeps charge strengths moderate.
inline std::vector<Point> charge_sites(const DomainMask& S, int m,
                                       const GridFunction& dS, double offset,
                                       int extend_cells = 0) {
  const GridSpec& g = S.grid();
  std::vector<int> cells;
  if (offset <= g.h / 2) {
    cells = S.cell_indices();
  } else {
    for (double tol : {g.h / 2, g.h}) {
      cells.clear();
      for (int k = 0; k < g.size(); ++k)
        if (std::fabs(dS.at(k) - offset) <= tol) cells.push_back(k);
      if (!cells.empty()) break;
    }
  }
  std::vector<Point> out;
  if (cells.empty()) return out;
  int len = static_cast<int>(cells.size());
  int last_k = -1;
  for (int j = 0; j < m; ++j) {
    int idx = m == 1 ? 0 : static_cast<int>(std::llround(double(j) * (len - 1) / (m - 1)));
    int k = cells[static_cast<size_t>(std::clamp(idx, 0, len - 1))];
    if (k == last_k) continue;
    last_k = k;
    int ix = k % g.nx, iy = k / g.nx;
    out.push_back(g.center(ix, iy));
    // continue a line that runs into the lattice frame straight past the
    // domain, so the fitted field has no end discontinuity inside it
    if (extend_cells > 0) {
      if (iy == 0)
        for (int e = 1; e <= extend_cells; ++e) out.push_back({g.cx(ix), g.cy(0) - e * g.h});
      if (iy == g.ny - 1)
        for (int e = 1; e <= extend_cells; ++e)
          out.push_back({g.cx(ix), g.cy(g.ny - 1) + e * g.h});
      if (ix == 0)
        for (int e = 1; e <= extend_cells; ++e) out.push_back({g.cx(0) - e * g.h, g.cy(iy)});
      if (ix == g.nx - 1)
        for (int e = 1; e <= extend_cells; ++e)
          out.push_back({g.cx(g.nx - 1) + e * g.h, g.cy(iy)});
    }
  }
  return out;
}

}  // namespace blowup_detail

/// Shell/band geometry for layers 1..nu_max around S inside the cap ball.
inline std::vector<LayerSpec> plan_layers(const DomainMask& S, Point xi0, int nu_max,
                                          const DomainMask& omega, double R, double unit) {
  const GridSpec& g = S.grid();
  require_same_grid(g, omega.grid());
  if (S.empty()) throw std::invalid_argument("empty blow-up target set");
  if (!S.is_subset_of(omega)) throw std::invalid_argument("target set not inside the domain");
  if (nu_max < 1) throw std::invalid_argument("need at least one layer");
  if (morph_interior(S, 2 * g.h).count() != 0 &&
      morph_interior_rel(S, 2 * g.h, omega).count() != 0)
    throw std::invalid_argument("target set is not nowhere dense at resolution");
  if (unit / (nu_max + 1) < 2 * g.h * (1 - 1e-12))
    throw std::invalid_argument("increase resolution or lower nu_max");
  {
    double snap = dist(blowup_detail::snap_to_mask(S, xi0), xi0);
    if (snap > g.h) throw std::invalid_argument("xi0 does not lie on the target set");
  }

  GridFunction dS = distance_to_set(S, DomainMask::full(g));
  for (int k = 0; k < g.size(); ++k)
    if (dS.at(k) <= 3 * unit * (1 + 1e-12) && !omega.at(k))
      throw std::invalid_argument("domain must contain the 3-unit collar of the target set");

  DomainMask ball = blowup_detail::cap_ball(omega, xi0, R);
  std::vector<LayerSpec> out;
  for (int n = 1; n <= nu_max; ++n) {
    LayerSpec spec;
    spec.n = n;
    spec.target_high = n + 1.0;
    spec.band_distance = unit / (n + 1);
    spec.Kp = DomainMask(g);
    spec.An = DomainMask(g);
    double lo = unit / n, hi = 2 * unit;
    for (int k = 0; k < g.size(); ++k) {
      if (!ball.at(k)) continue;
      double d = dS.at(k);
      if (d >= lo * (1 - 1e-12) && d <= hi * (1 + 1e-12)) spec.Kp.set(k, true);
      if (std::fabs(d - spec.band_distance) <= g.h * (1 + 1e-12)) spec.An.set(k, true);
    }
    if (spec.An.count() == 0) throw std::invalid_argument("empty band at layer " + std::to_string(n));
    if (spec.Kp.count() == 0) throw std::invalid_argument("empty shell at layer " + std::to_string(n));
    if (spec.Kp.intersect(spec.An).count() != 0)
      throw std::invalid_argument("increase resolution or lower nu_max");
    out.push_back(std::move(spec));
  }
  return out;
}

/// Fits the layer target (0 on the shell, n+1 on the band) escalating degree
/// and charge count until the 1/2 budget certifies; an uncertified layer is
/// returned flagged, never silently accepted.
namespace blowup_detail {

/// Shortfall-style certification error: the shell must stay below the budget
/// in |H| and the band must exceed n+1 minus the budget in |H|. The bump
/// v = max(|H|-1, 0) only consumes those two one-sided bounds.
inline double certification_error(const HarmonicModel& model, const LayerSpec& spec,
                                  const GridSpec& g) {
  double kp_err = 0, an_short = -std::numeric_limits<double>::infinity();
  for (int iy = 0; iy < g.ny; ++iy)
    for (int ix = 0; ix < g.nx; ++ix) {
      int k = g.index(ix, iy);
      bool in_kp = spec.Kp.at(k), in_an = spec.An.at(k);
      if (!in_kp && !in_an) continue;
      double a = std::fabs(model.eval(g.cx(ix), g.cy(iy)));
      if (in_kp) kp_err = std::max(kp_err, a);
      if (in_an) an_short = std::max(an_short, spec.target_high - a);
    }
  return std::max(kp_err, an_short);
}

inline void append_sites(std::vector<Point>& out, const std::vector<Point>& extra) {
  for (const Point& p : extra) {
    bool dup = false;
    for (const Point& q : out)
      if (dist(p, q) < 1e-12) {
        dup = true;
        break;
      }
    if (!dup) out.push_back(p);
  }
}

inline std::vector<Point> drop_near_compact(std::vector<Point> sites, const DomainMask& K) {
  const GridSpec& g = K.grid();
  std::vector<Point> out;
  for (const Point& p : sites) {
    int ix = g.nearest_ix(p.x), iy = g.nearest_iy(p.y);
    if (dist(p, g.center(ix, iy)) < g.h / 2 && K.at(ix, iy)) continue;
    out.push_back(p);
  }
  return out;
}

}  // namespace blowup_detail

/// Fits the layer's harmonic bump generator. Two target styles escalate over
/// charge counts: a uniform n+1 band target with charge lines in the gap
/// between the compacta (the wide-gap layers), and a lattice-alternating band
/// target realizing the grid's sharpest harmonic decay mode
/// exp(-pi dx/h) cos(pi y/h) (the tight layers, whose band sits one or two
/// cells from the shell). Certification only reads |H|, which is what the
/// bump consumes.
inline Layer build_layer(const LayerSpec& spec, const DomainMask& S, const DomainMask& omega,
                         const BlowupConfig& cfg, Point xi0) {
  const GridSpec& g = S.grid();
  DomainMask K = spec.Kp.unite(spec.An);

  GridFunction dS = distance_to_set(S, DomainMask::full(g));
  double an_outer = 0, kp_inner = std::numeric_limits<double>::infinity();
  for (int k = 0; k < g.size(); ++k) {
    if (spec.An.at(k)) an_outer = std::max(an_outer, dS.at(k));
    if (spec.Kp.at(k)) kp_inner = std::min(kp_inner, dS.at(k));
  }

  // both compacta get equal total weight in the least squares, or the thin
  // band would be drowned out by the shell; graded band targets are weighted
  // back to relative accuracy
  double an_weight = std::max(1.0, double(spec.Kp.count()) / std::max(1, spec.An.count()));
  GridFunction target_uniform(K, 0.0);
  GridFunction weights_uniform(K, 1.0);
  for (int k = 0; k < g.size(); ++k)
    if (spec.An.at(k)) {
      target_uniform.set(k, spec.target_high);
      weights_uniform.set(k, an_weight);
    }

  auto alternating_target = [&](bool along_y, GridFunction& weights_out) {
    GridFunction t(K, 0.0);
    for (int iy = 0; iy < g.ny; ++iy)
      for (int ix = 0; ix < g.nx; ++ix) {
        int k = g.index(ix, iy);
        if (!spec.An.at(k)) continue;
        double amp = spec.target_high * std::exp(M_PI * (an_outer - dS.at(k)) / g.h);
        int parity = along_y ? iy : ix;
        t.set(k, (parity % 2 == 0 ? amp : -amp));
        double rel = spec.target_high / amp;
        weights_out.set(k, an_weight * rel * rel);
      }
    return t;
  };
  GridFunction weights_alt_y(K, 1.0), weights_alt_x(K, 1.0);
  GridFunction target_alt_y = alternating_target(true, weights_alt_y);
  GridFunction target_alt_x = alternating_target(false, weights_alt_x);

  auto uniform_sites = [&](int m) {
    double ga = an_outer + (kp_inner - an_outer) / 3.0;
    double gb = an_outer + 2.0 * (kp_inner - an_outer) / 3.0;
    std::vector<Point> sites = blowup_detail::charge_sites(S, m / 2, dS, 0.0, 12);
    blowup_detail::append_sites(sites, blowup_detail::charge_sites(S, m / 4, dS, ga, 12));
    blowup_detail::append_sites(sites, blowup_detail::charge_sites(S, m / 4, dS, gb, 12));
    return blowup_detail::drop_near_compact(std::move(sites), K);
  };
  // alternating charges on the medial axis itself keep the blow-up centered
  // on S; the strength scale (n+1) exp(pi an_outer/h) must stay far from the
  // double-precision cliff, or the fit falls back to a ring just inside the
  // band (whose peak then sits off S but well below the axis layers' peaks)
  std::vector<Point> axis_sites = blowup_detail::drop_near_compact(
      blowup_detail::charge_sites(S, g.size(), dS, 0.0, 24), K);
  std::vector<Point> ring_sites = blowup_detail::drop_near_compact(
      blowup_detail::charge_sites(S, g.size(), dS,
                                  std::max(g.h, spec.band_distance - 3 * g.h), 24),
      K);
  bool axis_alt_feasible =
      spec.target_high * std::exp(M_PI * an_outer / g.h) <= 1e13;

  struct Attempt {
    std::string name;
    const GridFunction* target;
    const GridFunction* weights;
    const std::vector<Point>* sites;
  };
  std::vector<Attempt> attempts;
  if (axis_alt_feasible) {
    attempts.push_back({"alt-y-axis", &target_alt_y, &weights_alt_y, &axis_sites});
    attempts.push_back({"alt-x-axis", &target_alt_x, &weights_alt_x, &axis_sites});
  }
  std::vector<std::vector<Point>> uniform_site_sets;
  for (int m : cfg.charge_ladder) uniform_site_sets.push_back(uniform_sites(m));
  size_t cheap = std::min<size_t>(2, uniform_site_sets.size());
  for (size_t i = 0; i < cheap; ++i)
    attempts.push_back({"uniform@" + std::to_string(cfg.charge_ladder[i]), &target_uniform,
                        &weights_uniform, &uniform_site_sets[i]});
  attempts.push_back({"alt-y-ring", &target_alt_y, &weights_alt_y, &ring_sites});
  attempts.push_back({"alt-x-ring", &target_alt_x, &weights_alt_x, &ring_sites});
  for (size_t i = cheap; i < uniform_site_sets.size(); ++i)
    attempts.push_back({"uniform@" + std::to_string(cfg.charge_ladder[i]), &target_uniform,
                        &weights_uniform, &uniform_site_sets[i]});

  int degree = cfg.degree_ladder.empty() ? 24 : cfg.degree_ladder.back();
  Layer layer;
  layer.spec = spec;
  for (const Attempt& at : attempts) {
    if (at.sites->empty()) continue;
    FitConfig fit;
    fit.max_degree = degree;
    fit.charge_locations = *at.sites;
    fit.ridge_rel = cfg.ridge_rel;
    fit.center = xi0;
    fit.center_set = true;
    fit.row_weights = at.weights;
    FitResult res = fit_harmonic_on_compact(K, *at.target, fit);
    double cert_err = blowup_detail::certification_error(res.model, spec, g);
    if (cert_err < layer.achieved_sup_error) {
      layer.model = std::move(res.model);
      layer.achieved_sup_error = cert_err;
      layer.degree_used = fit.max_degree;
      layer.charges_used = static_cast<int>(at.sites->size());
      layer.fit_mode = at.name;
    }
    if (layer.achieved_sup_error < spec.error_budget) break;
  }
  layer.certified = layer.achieved_sup_error < spec.error_budget;

  // v lives on every domain cell at least h/2 away from a charge
  DomainMask support(g);
  for (int iy = 0; iy < g.ny; ++iy)
    for (int ix = 0; ix < g.nx; ++ix) {
      if (!omega.at(ix, iy)) continue;
      Point p = g.center(ix, iy);
      bool clear = true;
      for (const auto& q : layer.model.charges)
        if (dist(p, q.location) < g.h / 2) {
          clear = false;
          break;
        }
      if (clear) support.set(ix, iy, true);
    }
  GridFunction v(support);
  for (int iy = 0; iy < g.ny; ++iy)
    for (int ix = 0; ix < g.nx; ++ix) {
      int k = g.index(ix, iy);
      if (!support.at(k)) continue;
      v.set(k, std::max(std::fabs(layer.model.eval(g.cx(ix), g.cy(iy))) - 1.0, 0.0));
    }
  layer.v = std::move(v);
  return layer;
}

inline DomainMask common_layer_support(std::span<const Layer> layers, const DomainMask& omega) {
  DomainMask support = omega;
  for (const Layer& l : layers) support = support.intersect(l.v.support());
  return support;
}

/// Partial sum of the first nu bump layers on the common support.
inline GridFunction assemble(std::span<const Layer> layers, int nu, const DomainMask& omega,
                             bool* mixed_uncertified = nullptr) {
  if (nu < 0 || nu > static_cast<int>(layers.size()))
    throw std::invalid_argument("partial sum index out of range");
  DomainMask support = common_layer_support(layers, omega);
  GridFunction acc(support, 0.0);
  for (int n = 0; n < nu; ++n) {
    if (!layers[static_cast<size_t>(n)].certified && mixed_uncertified)
      *mixed_uncertified = true;
    acc = pointwise_sum(acc, layers[static_cast<size_t>(n)].v.restricted(support));
  }
  return acc;
}

/// Blow-up witnesses: the band cell nearest to the required distance from x1
/// per layer, with the partial sum u_n evaluated there.
inline std::vector<WitnessPoint> witness_sequence(const DomainMask& S, Point x1,
                                                  std::span<const Layer> layers,
                                                  const DomainMask& omega) {
  const GridSpec& g = S.grid();
  if (dist(blowup_detail::snap_to_mask(S, x1), x1) > g.h)
    throw std::invalid_argument("witness anchor does not lie on the target set");
  DomainMask support = common_layer_support(layers, omega);
  std::vector<WitnessPoint> out;
  for (size_t i = 0; i < layers.size(); ++i) {
    const Layer& layer = layers[i];
    if (!layer.certified)
      throw std::invalid_argument("witness sequence requires certified layers");
    double want = layer.spec.band_distance;
    int best_k = -1;
    double best_dev = std::numeric_limits<double>::infinity();
    double best_dist = 0;
    for (int k = 0; k < g.size(); ++k) {
      if (!layer.spec.An.at(k) || !support.at(k)) continue;
      double d = dist(g.center(k % g.nx, k / g.nx), x1);
      double dev = std::fabs(d - want);
      if (dev < best_dev) {
        best_dev = dev;
        best_k = k;
        best_dist = d;
      }
    }
    if (best_k < 0 || best_dev > g.h * (1 + 1e-12))
      throw std::invalid_argument("no band cell at the witness distance for layer " +
                                  std::to_string(layer.spec.n));
    GridFunction u_n = assemble(layers, static_cast<int>(i) + 1, omega);
    out.push_back({layer.spec.n, g.center(best_k % g.nx, best_k / g.nx), best_dist,
                   u_n.at(best_k)});
  }
  return out;
}

/// End-to-end construction for a whitelisted thin set S spanning the domain.
inline BuildReport build_wiegerinck(const DomainMask& S, const DomainMask& omega,
                                    BlowupConfig cfg) {
  const GridSpec& g = S.grid();
  double W = g.width();
  double unit = cfg.unit > 0 ? cfg.unit : W / 8.0;
  double R = cfg.cap_radius > 0 ? cfg.cap_radius : W / 2.0;
  Point xi0 = cfg.xi0_set ? cfg.xi0 : blowup_detail::snap_to_mask(S, [&] {
    double sx = 0, sy = 0;
    int c = 0;
    for (int iy = 0; iy < g.ny; ++iy)
      for (int ix = 0; ix < g.nx; ++ix)
        if (S.at(ix, iy)) {
          sx += g.cx(ix);
          sy += g.cy(iy);
          ++c;
        }
    return Point{sx / c, sy / c};
  }());

  BuildReport rep;
  rep.omega = omega;
  rep.S0 = S;
  rep.xi0 = xi0;
  rep.unit = unit;
  rep.cap_radius = R;

  std::vector<LayerSpec> specs = plan_layers(S, xi0, cfg.nu_max, omega, R, unit);
  for (const LayerSpec& spec : specs)
    rep.layers.push_back(build_layer(spec, S, omega, cfg, xi0));

  rep.common_support = common_layer_support(rep.layers, omega);
  for (int nu = 1; nu <= cfg.nu_max; ++nu)
    rep.u_partial.push_back(assemble(rep.layers, nu, omega, &rep.mixed_uncertified));

  bool all_certified = true;
  for (const Layer& l : rep.layers) all_certified = all_certified && l.certified;
  if (all_certified) rep.witnesses = witness_sequence(S, xi0, rep.layers, omega);

  // far shell: tail layers vanish here when certified
  GridFunction dS = distance_to_set(S, DomainMask::full(g));
  DomainMask ball = blowup_detail::cap_ball(omega, xi0, R);
  rep.far_shell = DomainMask(g);
  for (int k = 0; k < g.size(); ++k)
    if (ball.at(k) && rep.common_support.at(k) && dS.at(k) >= unit / 2 * (1 - 1e-12) &&
        dS.at(k) <= 2 * unit * (1 + 1e-12))
      rep.far_shell.set(k, true);
  const GridFunction& u_top = rep.u_partial.back();
  bool any = false;
  for (int k = 0; k < g.size(); ++k)
    if (rep.far_shell.at(k)) {
      double v = u_top.at(k);
      if (!any || v > rep.M_off) rep.M_off = v;
      any = true;
    }
  return rep;
}

inline void write_build_report(const std::filesystem::path& dir, const BuildReport& rep) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  write_mask_csv(dir / "S0.csv", rep.S0);
  write_mask_pgm(dir / "S0.pgm", rep.S0);
  write_mask_csv(dir / "omega.csv", rep.omega);

  std::ostringstream cert;
  cert << "layer degree charges sup_error certified\n";
  for (const Layer& l : rep.layers) {
    cert << l.spec.n << ' ' << l.degree_used << ' ' << l.charges_used << ' '
         << format_double(l.achieved_sup_error) << ' ' << (l.certified ? 1 : 0) << '\n';
    std::string base = "layer_" + std::to_string(l.spec.n);
    write_text_file(dir / (base + "_model.txt"), l.model.to_text());
    write_grid_function_csv(dir / (base + "_v.csv"), l.v);
    write_pgm(dir / (base + "_v.pgm"), l.v);
    write_mask_csv(dir / (base + "_Kp.csv"), l.spec.Kp);
    write_mask_csv(dir / (base + "_An.csv"), l.spec.An);
  }
  write_text_file(dir / "certification.txt", cert.str());

  for (size_t i = 0; i < rep.u_partial.size(); ++i) {
    std::string base = "u_partial_" + std::to_string(i + 1);
    write_grid_function_csv(dir / (base + ".csv"), rep.u_partial[i]);
    write_pgm(dir / (base + ".pgm"), rep.u_partial[i]);
  }

  std::ostringstream wit;
  wit << "n zeta_x zeta_y dist_to_x1 u_value\n";
  for (const WitnessPoint& w : rep.witnesses)
    wit << w.n << ' ' << format_double(w.zeta.x) << ' ' << format_double(w.zeta.y) << ' '
        << format_double(w.distance_to_x1) << ' ' << format_double(w.u_value) << '\n';
  write_text_file(dir / "witnesses.txt", wit.str());

  std::map<std::string, std::string> info{
      {"xi0_x", format_double(rep.xi0.x)},       {"xi0_y", format_double(rep.xi0.y)},
      {"unit", format_double(rep.unit)},         {"cap_radius", format_double(rep.cap_radius)},
      {"M_off", format_double(rep.M_off)},       {"layers", std::to_string(rep.layers.size())},
      {"mixed_uncertified", rep.mixed_uncertified ? "1" : "0"}};
  write_kv(dir / "build_info.txt", info);
}

}  // namespace potgrid
