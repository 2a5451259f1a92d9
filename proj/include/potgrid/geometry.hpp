#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace potgrid {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

inline double dist(Point a, Point b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

/// Rectangular lattice: cell (ix, iy) is the closed square of side h centered
/// at origin + h*(ix, iy). Distances between cells are center-to-center.
struct GridSpec {
  double origin_x = 0.0;
  double origin_y = 0.0;
  double h = 1.0;
  int nx = 4;
  int ny = 4;

  GridSpec() = default;
  GridSpec(double ox, double oy, double spacing, int nx_, int ny_)
      : origin_x(ox), origin_y(oy), h(spacing), nx(nx_), ny(ny_) {
    if (!(h > 0.0)) throw std::invalid_argument("grid spacing must be positive");
    if (nx < 4 || ny < 4) throw std::invalid_argument("grid must be at least 4x4");
  }

  /// Unit square [0,1]^2 sampled with n cells per side (centers span [0,1]).
  static GridSpec unit_square(int n) { return GridSpec(0.0, 0.0, 1.0 / (n - 1), n, n); }

  int size() const { return nx * ny; }
  int index(int ix, int iy) const { return iy * nx + ix; }
  bool in_bounds(int ix, int iy) const { return ix >= 0 && ix < nx && iy >= 0 && iy < ny; }
  double cx(int ix) const { return origin_x + h * ix; }
  double cy(int iy) const { return origin_y + h * iy; }
  Point center(int ix, int iy) const { return {cx(ix), cy(iy)}; }
  double width() const { return nx * h; }
  double height() const { return ny * h; }

  /// Cell coordinates (possibly fractional) of a physical point.
  double to_gx(double x) const { return (x - origin_x) / h; }
  double to_gy(double y) const { return (y - origin_y) / h; }
  int nearest_ix(double x) const {
    return std::clamp(static_cast<int>(std::lround(to_gx(x))), 0, nx - 1);
  }
  int nearest_iy(double y) const {
    return std::clamp(static_cast<int>(std::lround(to_gy(y))), 0, ny - 1);
  }

  bool operator==(const GridSpec&) const = default;
};

inline void require_same_grid(const GridSpec& a, const GridSpec& b) {
  if (!(a == b)) throw std::invalid_argument("grid mismatch");
}

/// Boolean lattice subset. Cells outside the lattice window belong to the set
/// exactly when offgrid_in_set() — complement() toggles that flag, which keeps
/// the closure/interior duality exact at the lattice frame.
class DomainMask {
 public:
  DomainMask() : DomainMask(GridSpec()) {}
  explicit DomainMask(GridSpec grid, bool filled = false)
      : grid_(grid), cells_(static_cast<size_t>(grid.size()), filled ? 1 : 0) {}

  static DomainMask full(GridSpec grid) { return DomainMask(grid, true); }

  const GridSpec& grid() const { return grid_; }

  bool at(int k) const { return cells_[static_cast<size_t>(k)] != 0; }
  bool at(int ix, int iy) const { return at(grid_.index(ix, iy)); }
  /// Membership with off-lattice cells resolved by the offgrid flag.
  bool at_ext(int ix, int iy) const {
    return grid_.in_bounds(ix, iy) ? at(ix, iy) : offgrid_in_set_;
  }
  void set(int k, bool v) { cells_[static_cast<size_t>(k)] = v ? 1 : 0; }
  void set(int ix, int iy, bool v) { set(grid_.index(ix, iy), v); }

  bool offgrid_in_set() const { return offgrid_in_set_; }
  void set_offgrid_in_set(bool v) { offgrid_in_set_ = v; }

  int count() const {
    int c = 0;
    for (uint8_t v : cells_) c += v;
    return c;
  }
  bool empty() const { return count() == 0 && !offgrid_in_set_; }

  std::vector<int> cell_indices() const {
    std::vector<int> out;
    for (int k = 0; k < grid_.size(); ++k)
      if (at(k)) out.push_back(k);
    return out;
  }

  /// All 4-neighbors in the set (off-lattice neighbors resolved by the flag).
  bool interior_at(int ix, int iy) const {
    return at(ix, iy) && at_ext(ix - 1, iy) && at_ext(ix + 1, iy) &&
           at_ext(ix, iy - 1) && at_ext(ix, iy + 1);
  }
  bool boundary_at(int ix, int iy) const { return at(ix, iy) && !interior_at(ix, iy); }

  DomainMask interior_cells() const {
    DomainMask out(grid_);
    for (int iy = 0; iy < grid_.ny; ++iy)
      for (int ix = 0; ix < grid_.nx; ++ix)
        if (interior_at(ix, iy)) out.set(ix, iy, true);
    return out;
  }
  DomainMask boundary_cells() const {
    DomainMask out(grid_);
    for (int iy = 0; iy < grid_.ny; ++iy)
      for (int ix = 0; ix < grid_.nx; ++ix)
        if (boundary_at(ix, iy)) out.set(ix, iy, true);
    return out;
  }

  DomainMask complement() const {
    DomainMask out(grid_);
    for (int k = 0; k < grid_.size(); ++k) out.set(k, !at(k));
    out.offgrid_in_set_ = !offgrid_in_set_;
    return out;
  }

  DomainMask unite(const DomainMask& o) const {
    require_same_grid(grid_, o.grid_);
    DomainMask out(grid_);
    for (int k = 0; k < grid_.size(); ++k) out.set(k, at(k) || o.at(k));
    out.offgrid_in_set_ = offgrid_in_set_ || o.offgrid_in_set_;
    return out;
  }
  DomainMask intersect(const DomainMask& o) const {
    require_same_grid(grid_, o.grid_);
    DomainMask out(grid_);
    for (int k = 0; k < grid_.size(); ++k) out.set(k, at(k) && o.at(k));
    out.offgrid_in_set_ = offgrid_in_set_ && o.offgrid_in_set_;
    return out;
  }
  DomainMask minus(const DomainMask& o) const {
    require_same_grid(grid_, o.grid_);
    DomainMask out(grid_);
    for (int k = 0; k < grid_.size(); ++k) out.set(k, at(k) && !o.at(k));
    out.offgrid_in_set_ = offgrid_in_set_ && !o.offgrid_in_set_;
    return out;
  }

  bool is_subset_of(const DomainMask& o) const {
    require_same_grid(grid_, o.grid_);
    for (int k = 0; k < grid_.size(); ++k)
      if (at(k) && !o.at(k)) return false;
    if (offgrid_in_set_ && !o.offgrid_in_set_) return false;
    return true;
  }

  bool operator==(const DomainMask&) const = default;

  template <class Pred>
  static DomainMask from_predicate(GridSpec grid, Pred&& pred) {
    DomainMask out(grid);
    for (int iy = 0; iy < grid.ny; ++iy)
      for (int ix = 0; ix < grid.nx; ++ix)
        if (pred(grid.cx(ix), grid.cy(iy))) out.set(ix, iy, true);
    return out;
  }

 private:
  GridSpec grid_;
  std::vector<uint8_t> cells_;
  bool offgrid_in_set_ = false;
};

/// Real values on the supported cells of a mask. -inf is stored as an explicit
/// sentinel flag so arithmetic kernels never see an IEEE infinity; +inf and
/// NaN are rejected.
class GridFunction {
 public:
  GridFunction() : GridFunction(DomainMask()) {}
  explicit GridFunction(DomainMask support, double init = 0.0)
      : support_(std::move(support)),
        values_(static_cast<size_t>(support_.grid().size()),
                std::numeric_limits<double>::quiet_NaN()),
        ninf_(static_cast<size_t>(support_.grid().size()), 0) {
    check_value(init);
    for (int k = 0; k < support_.grid().size(); ++k)
      if (support_.at(k)) values_[static_cast<size_t>(k)] = init;
  }

  template <class F>
  static GridFunction sample(const DomainMask& support, F&& f) {
    GridFunction out(support);
    const GridSpec& g = support.grid();
    for (int iy = 0; iy < g.ny; ++iy)
      for (int ix = 0; ix < g.nx; ++ix)
        if (support.at(ix, iy)) out.set(g.index(ix, iy), f(g.cx(ix), g.cy(iy)));
    return out;
  }

  const DomainMask& support() const { return support_; }
  const GridSpec& grid() const { return support_.grid(); }

  bool supported(int k) const { return support_.at(k); }
  bool neg_inf_at(int k) const { return ninf_[static_cast<size_t>(k)] != 0; }
  /// Finite value at a supported, non-sentinel cell; NaN outside the support.
  double at(int k) const { return values_[static_cast<size_t>(k)]; }
  double at(int ix, int iy) const { return at(grid().index(ix, iy)); }

  void set(int k, double v) {
    require_supported(k);
    check_value(v);
    values_[static_cast<size_t>(k)] = v;
    ninf_[static_cast<size_t>(k)] = 0;
  }
  void set(int ix, int iy, double v) { set(grid().index(ix, iy), v); }
  void set_neg_inf(int k) {
    require_supported(k);
    values_[static_cast<size_t>(k)] = 0.0;
    ninf_[static_cast<size_t>(k)] = 1;
  }

  bool has_finite_value() const {
    for (int k = 0; k < grid().size(); ++k)
      if (supported(k) && !neg_inf_at(k)) return true;
    return false;
  }

  double min_finite() const { return fold_finite(true); }
  double max_finite() const { return fold_finite(false); }
  double range() const { return max_finite() - min_finite(); }

  /// Restriction to a sub-mask of the support.
  GridFunction restricted(const DomainMask& sub) const {
    if (!sub.is_subset_of(support_))
      throw std::invalid_argument("restriction target is not a subset of the support");
    GridFunction out(sub);
    for (int k = 0; k < grid().size(); ++k) {
      if (!sub.at(k)) continue;
      if (neg_inf_at(k))
        out.set_neg_inf(k);
      else
        out.set(k, at(k));
    }
    return out;
  }

  static void require_compatible(const GridFunction& a, const GridFunction& b) {
    if (!(a.support_ == b.support_))
      throw std::invalid_argument("grid function supports differ");
  }

 private:
  static void check_value(double v) {
    if (std::isnan(v) || v == std::numeric_limits<double>::infinity())
      throw std::invalid_argument("grid function values must be finite or the -inf sentinel");
    if (v == -std::numeric_limits<double>::infinity())
      throw std::invalid_argument("use set_neg_inf for the -inf sentinel");
  }
  void require_supported(int k) const {
    if (!support_.at(k)) throw std::invalid_argument("cell outside support");
  }
  double fold_finite(bool want_min) const {
    bool any = false;
    double acc = 0.0;
    for (int k = 0; k < grid().size(); ++k) {
      if (!supported(k) || neg_inf_at(k)) continue;
      double v = at(k);
      if (!any || (want_min ? v < acc : v > acc)) acc = v;
      any = true;
    }
    if (!any) throw std::invalid_argument("grid function has no finite values");
    return acc;
  }

  DomainMask support_;
  std::vector<double> values_;
  std::vector<uint8_t> ninf_;
};

inline GridFunction pointwise_sum(const GridFunction& a, const GridFunction& b) {
  GridFunction::require_compatible(a, b);
  GridFunction out(a.support());
  for (int k = 0; k < a.grid().size(); ++k) {
    if (!a.supported(k)) continue;
    if (a.neg_inf_at(k) || b.neg_inf_at(k))
      out.set_neg_inf(k);
    else
      out.set(k, a.at(k) + b.at(k));
  }
  return out;
}

inline GridFunction pointwise_max(const GridFunction& a, const GridFunction& b) {
  GridFunction::require_compatible(a, b);
  GridFunction out(a.support());
  for (int k = 0; k < a.grid().size(); ++k) {
    if (!a.supported(k)) continue;
    if (a.neg_inf_at(k) && b.neg_inf_at(k)) {
      out.set_neg_inf(k);
    } else if (a.neg_inf_at(k)) {
      out.set(k, b.at(k));
    } else if (b.neg_inf_at(k)) {
      out.set(k, a.at(k));
    } else {
      out.set(k, std::max(a.at(k), b.at(k)));
    }
  }
  return out;
}

inline GridFunction affine(const GridFunction& u, double scale, double shift) {
  if (scale < 0.0) throw std::invalid_argument("affine rescale requires scale >= 0");
  GridFunction out(u.support());
  for (int k = 0; k < u.grid().size(); ++k) {
    if (!u.supported(k)) continue;
    if (u.neg_inf_at(k))
      out.set_neg_inf(k);
    else
      out.set(k, scale * u.at(k) + shift);
  }
  return out;
}

namespace detail {

constexpr double kInf = std::numeric_limits<double>::infinity();

/// 1-D squared distance transform (lower envelope of parabolas).
inline void dt_1d(const std::vector<double>& f, std::vector<double>& d, int n) {
  static thread_local std::vector<int> v;
  static thread_local std::vector<double> z;
  v.assign(static_cast<size_t>(n), 0);
  z.assign(static_cast<size_t>(n) + 1, 0.0);
  int k = 0;
  v[0] = 0;
  z[0] = -kInf;
  z[1] = kInf;
  for (int q = 1; q < n; ++q) {
    if (f[static_cast<size_t>(q)] == kInf) continue;
    if (f[static_cast<size_t>(v[static_cast<size_t>(k)])] == kInf) {
      v[static_cast<size_t>(k)] = q;
      continue;
    }
    double s;
    for (;;) {
      int p = v[static_cast<size_t>(k)];
      s = ((f[static_cast<size_t>(q)] + q * double(q)) - (f[static_cast<size_t>(p)] + p * double(p))) /
          (2.0 * q - 2.0 * p);
      if (s <= z[static_cast<size_t>(k)] && k > 0) {
        --k;
      } else {
        break;
      }
    }
    ++k;
    v[static_cast<size_t>(k)] = q;
    z[static_cast<size_t>(k)] = s;
    z[static_cast<size_t>(k) + 1] = kInf;
  }
  k = 0;
  for (int q = 0; q < n; ++q) {
    while (z[static_cast<size_t>(k) + 1] < q) ++k;
    int p = v[static_cast<size_t>(k)];
    double fp = f[static_cast<size_t>(p)];
    d[static_cast<size_t>(q)] = fp == kInf ? kInf : (q - p) * double(q - p) + fp;
  }
}

/// Exact squared Euclidean distance (in cell units) to the in-lattice cells of
/// `target`, at every lattice cell. Infinity where the target is empty.
inline std::vector<double> squared_distance_map(const DomainMask& target) {
  const GridSpec& g = target.grid();
  std::vector<double> f(static_cast<size_t>(g.size()), kInf);
  for (int k = 0; k < g.size(); ++k)
    if (target.at(k)) f[static_cast<size_t>(k)] = 0.0;

  std::vector<double> row(static_cast<size_t>(g.nx)), drow(static_cast<size_t>(g.nx));
  for (int iy = 0; iy < g.ny; ++iy) {
    for (int ix = 0; ix < g.nx; ++ix) row[static_cast<size_t>(ix)] = f[static_cast<size_t>(g.index(ix, iy))];
    dt_1d(row, drow, g.nx);
    for (int ix = 0; ix < g.nx; ++ix) f[static_cast<size_t>(g.index(ix, iy))] = drow[static_cast<size_t>(ix)];
  }
  std::vector<double> col(static_cast<size_t>(g.ny)), dcol(static_cast<size_t>(g.ny));
  for (int ix = 0; ix < g.nx; ++ix) {
    for (int iy = 0; iy < g.ny; ++iy) col[static_cast<size_t>(iy)] = f[static_cast<size_t>(g.index(ix, iy))];
    dt_1d(col, dcol, g.ny);
    for (int iy = 0; iy < g.ny; ++iy) f[static_cast<size_t>(g.index(ix, iy))] = dcol[static_cast<size_t>(iy)];
  }
  return f;
}

/// Squared distance (cell units) from cell (ix, iy) to the nearest off-lattice
/// cell center.
inline double squared_offgrid_distance(const GridSpec& g, int ix, int iy) {
  int d = std::min(std::min(ix + 1, g.nx - ix), std::min(iy + 1, g.ny - iy));
  return double(d) * double(d);
}

/// Distance map in physical units, honoring the offgrid flag of the target.
inline std::vector<double> distance_map(const DomainMask& target) {
  const GridSpec& g = target.grid();
  std::vector<double> sq = squared_distance_map(target);
  std::vector<double> out(static_cast<size_t>(g.size()));
  for (int iy = 0; iy < g.ny; ++iy)
    for (int ix = 0; ix < g.nx; ++ix) {
      int k = g.index(ix, iy);
      double s = sq[static_cast<size_t>(k)];
      if (target.offgrid_in_set())
        s = std::min(s, squared_offgrid_distance(g, ix, iy));
      out[static_cast<size_t>(k)] = s == kInf ? kInf : g.h * std::sqrt(s);
    }
  return out;
}

inline bool within_radius(double dist, double r) {
  return dist <= r * (1.0 + 1e-12) + 1e-12 * r;
}

}  // namespace detail

/// d(x, target) at every cell of eval_on, exact center-to-center Euclidean.
inline GridFunction distance_to_set(const DomainMask& target, const DomainMask& eval_on) {
  require_same_grid(target.grid(), eval_on.grid());
  if (target.empty()) throw std::invalid_argument("distance to empty set undefined");
  std::vector<double> d = detail::distance_map(target);
  GridFunction out(eval_on);
  for (int k = 0; k < target.grid().size(); ++k)
    if (eval_on.at(k)) out.set(k, d[static_cast<size_t>(k)]);
  return out;
}

/// Dilation by the closed Euclidean disk of radius r.
inline DomainMask morph_closure(const DomainMask& m, double r) {
  const GridSpec& g = m.grid();
  if (r < g.h) throw std::invalid_argument("closure radius below resolution");
  DomainMask out(g);
  out.set_offgrid_in_set(m.offgrid_in_set());
  if (m.empty()) return out;
  std::vector<double> d = detail::distance_map(m);
  for (int k = 0; k < g.size(); ++k)
    if (detail::within_radius(d[static_cast<size_t>(k)], r)) out.set(k, true);
  return out;
}

/// Erosion: cells whose full radius-r disk lies inside m. Off-lattice cells
/// count against membership unless m extends off-grid.
inline DomainMask morph_interior(const DomainMask& m, double r) {
  const GridSpec& g = m.grid();
  if (r < g.h) throw std::invalid_argument("closure radius below resolution");
  DomainMask comp = m.complement();
  DomainMask out(g);
  out.set_offgrid_in_set(m.offgrid_in_set());
  if (comp.empty()) {
    for (int k = 0; k < g.size(); ++k) out.set(k, true);
    return out;
  }
  std::vector<double> d = detail::distance_map(comp);
  for (int k = 0; k < g.size(); ++k)
    if (m.at(k) && !detail::within_radius(d[static_cast<size_t>(k)], r)) out.set(k, true);
  return out;
}

/// Erosion relative to an ambient mask: cells of the ambient whose radius-r
/// disk, clipped to the ambient, lies inside m. Cells outside the ambient are
/// treated as don't-care.
inline DomainMask morph_interior_rel(const DomainMask& m, double r, const DomainMask& ambient) {
  const GridSpec& g = m.grid();
  require_same_grid(g, ambient.grid());
  if (r < g.h) throw std::invalid_argument("closure radius below resolution");
  DomainMask blockers = ambient.minus(m);  // ambient cells not in m
  blockers.set_offgrid_in_set(false);
  DomainMask out(g);
  if (blockers.count() == 0) {
    for (int k = 0; k < g.size(); ++k) out.set(k, m.at(k) && ambient.at(k));
    return out;
  }
  std::vector<double> d = detail::distance_map(blockers);
  for (int k = 0; k < g.size(); ++k)
    if (m.at(k) && ambient.at(k) && !detail::within_radius(d[static_cast<size_t>(k)], r))
      out.set(k, true);
  return out;
}

struct Component {
  DomainMask mask;
  bool touches_ambient_boundary = false;
};

/// 8-connected components of m inside an ambient mask; a component touches the
/// ambient boundary when one of its cells is within sqrt(2)*h of a boundary
/// cell of the ambient.
inline std::vector<Component> components(const DomainMask& m, const DomainMask& ambient) {
  require_same_grid(m.grid(), ambient.grid());
  if (!m.is_subset_of(ambient))
    throw std::invalid_argument("component mask not contained in ambient");
  const GridSpec& g = m.grid();
  DomainMask ambient_bd = ambient.boundary_cells();
  std::vector<int> label(static_cast<size_t>(g.size()), -1);
  std::vector<Component> out;
  std::vector<int> stack;
  for (int iy0 = 0; iy0 < g.ny; ++iy0)
    for (int ix0 = 0; ix0 < g.nx; ++ix0) {
      int k0 = g.index(ix0, iy0);
      if (!m.at(k0) || label[static_cast<size_t>(k0)] >= 0) continue;
      int id = static_cast<int>(out.size());
      Component comp{DomainMask(g), false};
      stack.assign(1, k0);
      label[static_cast<size_t>(k0)] = id;
      while (!stack.empty()) {
        int k = stack.back();
        stack.pop_back();
        comp.mask.set(k, true);
        int ix = k % g.nx, iy = k / g.nx;
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            if (dx == 0 && dy == 0) {
              if (ambient_bd.at(ix, iy)) comp.touches_ambient_boundary = true;
              continue;
            }
            int jx = ix + dx, jy = iy + dy;
            if (!g.in_bounds(jx, jy)) continue;
            if (ambient_bd.at(jx, jy)) comp.touches_ambient_boundary = true;
            int j = g.index(jx, jy);
            if (m.at(j) && label[static_cast<size_t>(j)] < 0) {
              label[static_cast<size_t>(j)] = id;
              stack.push_back(j);
            }
          }
      }
      out.push_back(std::move(comp));
    }
  return out;
}

/// Two-sided Hausdorff distance between the cell-center sets of two masks.
inline double hausdorff_distance(const DomainMask& a, const DomainMask& b) {
  require_same_grid(a.grid(), b.grid());
  if (a.count() == 0 || b.count() == 0)
    throw std::invalid_argument("hausdorff distance of an empty mask");
  std::vector<double> da = detail::distance_map(a);
  std::vector<double> db = detail::distance_map(b);
  double worst = 0.0;
  for (int k = 0; k < a.grid().size(); ++k) {
    if (a.at(k)) worst = std::max(worst, db[static_cast<size_t>(k)]);
    if (b.at(k)) worst = std::max(worst, da[static_cast<size_t>(k)]);
  }
  return worst;
}

}  // namespace potgrid
