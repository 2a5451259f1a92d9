#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "potgrid/geometry.hpp"
#include "potgrid/io.hpp"

namespace potgrid {

/// Dirichlet data on the boundary cells of a mask.
struct BoundaryData {
  DomainMask domain;
  std::vector<double> values;  // full lattice; meaningful at boundary cells

  template <class F>
  static BoundaryData from_function(const DomainMask& domain, F&& f) {
    const GridSpec& g = domain.grid();
    BoundaryData bd{domain, std::vector<double>(static_cast<size_t>(g.size()), 0.0)};
    for (int iy = 0; iy < g.ny; ++iy)
      for (int ix = 0; ix < g.nx; ++ix)
        if (domain.boundary_at(ix, iy)) {
          double v = f(g.cx(ix), g.cy(iy));
          if (!std::isfinite(v))
            throw std::invalid_argument("boundary data must be finite");
          bd.values[static_cast<size_t>(g.index(ix, iy))] = v;
        }
    return bd;
  }
};

struct DirichletError : std::runtime_error {
  double residual;
  DirichletError(const std::string& msg, double r) : std::runtime_error(msg), residual(r) {}
};

/// Discrete harmonic extension: SOR relaxation of the 5-point stencil at the
/// interior cells, boundary cells pinned. The residual is the stencil defect
/// max |u_E + u_W + u_N + u_S - 4 u|; the discrete maximum principle holds up
/// to that defect.
inline GridFunction solve_dirichlet(const BoundaryData& bd, double tol = 1e-9,
                                    long max_sweeps = 1'000'000) {
  if (!(tol > 0)) throw std::invalid_argument("tolerance must be positive");
  const DomainMask& dom = bd.domain;
  const GridSpec& g = dom.grid();

  std::vector<int> interior;
  double bd_lo = 0, bd_hi = 0, bd_sum = 0;
  int bd_count = 0;
  for (int iy = 0; iy < g.ny; ++iy)
    for (int ix = 0; ix < g.nx; ++ix) {
      if (dom.interior_at(ix, iy)) interior.push_back(g.index(ix, iy));
      if (dom.boundary_at(ix, iy)) {
        double v = bd.values[static_cast<size_t>(g.index(ix, iy))];
        if (bd_count == 0) bd_lo = bd_hi = v;
        bd_lo = std::min(bd_lo, v);
        bd_hi = std::max(bd_hi, v);
        bd_sum += v;
        ++bd_count;
      }
    }
  if (interior.empty()) throw std::invalid_argument("domain interior is empty");
  if (bd_count == 0) throw std::invalid_argument("domain has no boundary cells");

  // interior starts at the boundary mean, boundary cells are pinned
  std::vector<double> u(static_cast<size_t>(g.size()), 0.0);
  double mean = bd_sum / bd_count;
  for (int iy = 0; iy < g.ny; ++iy)
    for (int ix = 0; ix < g.nx; ++ix) {
      int k = g.index(ix, iy);
      if (!dom.at(k)) continue;
      u[static_cast<size_t>(k)] =
          dom.boundary_at(ix, iy) ? bd.values[static_cast<size_t>(k)] : mean;
    }

  double omega = 2.0 / (1.0 + std::sin(M_PI / std::max(g.nx, g.ny)));
  double residual = std::numeric_limits<double>::infinity();
  for (long sweep = 0; sweep < max_sweeps; ++sweep) {
    for (int k : interior) {
      double avg = 0.25 * (u[static_cast<size_t>(k - 1)] + u[static_cast<size_t>(k + 1)] +
                           u[static_cast<size_t>(k - g.nx)] + u[static_cast<size_t>(k + g.nx)]);
      u[static_cast<size_t>(k)] += omega * (avg - u[static_cast<size_t>(k)]);
    }
    if (sweep % 8 == 7 || sweep + 1 == max_sweeps) {
      residual = 0.0;
      for (int k : interior) {
        double defect = u[static_cast<size_t>(k - 1)] + u[static_cast<size_t>(k + 1)] +
                        u[static_cast<size_t>(k - g.nx)] + u[static_cast<size_t>(k + g.nx)] -
                        4.0 * u[static_cast<size_t>(k)];
        residual = std::max(residual, std::fabs(defect));
      }
      if (residual <= tol) break;
    }
  }
  if (residual > tol)
    throw DirichletError("dirichlet relaxation did not converge; residual " +
                             format_double(residual),
                         residual);

  GridFunction out(dom);
  for (int k = 0; k < g.size(); ++k)
    if (dom.at(k)) out.set(k, u[static_cast<size_t>(k)]);
  return out;
}

/// Poisson integral over the circle |z - c| = rho with M equispaced samples
/// (trapezoidal rule on the periodic integrand).
inline double poisson_extend_disk(std::span<const double> f, Point c, double rho, Point x) {
  size_t m = f.size();
  if (m < 16) throw std::invalid_argument("need at least 16 circle samples");
  double r2 = (x.x - c.x) * (x.x - c.x) + (x.y - c.y) * (x.y - c.y);
  if (!(r2 < rho * rho)) throw std::invalid_argument("evaluation point outside the open disk");
  double acc = 0.0;
  for (size_t k = 0; k < m; ++k) {
    double th = 2.0 * M_PI * double(k) / double(m);
    double zx = c.x + rho * std::cos(th), zy = c.y + rho * std::sin(th);
    double d2 = (x.x - zx) * (x.x - zx) + (x.y - zy) * (x.y - zy);
    acc += f[k] * (rho * rho - r2) / d2;
  }
  return acc / double(m);
}

/// Finite combination of harmonic basis elements: scaled harmonic polynomials
/// Re/Im ((z - center)/scale)^k plus logarithmic point charges.
struct HarmonicModel {
  struct PolyTerm {
    int degree = 0;
    bool imaginary = false;
    double coeff = 0.0;
  };
  struct Charge {
    Point location;
    double strength = 0.0;
  };

  Point center;
  double scale = 1.0;
  std::vector<PolyTerm> poly;
  std::vector<Charge> charges;

  double eval(double x, double y) const {
    double zx = (x - center.x) / scale, zy = (y - center.y) / scale;
    // charge strengths can be large with heavy cancellation, so the charge
    // sum runs in extended precision
    long double acc = 0.0L;
    double px = 1.0, py = 0.0;  // (px, py) = (zx + i zy)^k by recurrence
    int k = 0;
    for (const PolyTerm& t : poly) {
      while (k < t.degree) {
        double nx = px * zx - py * zy, ny = px * zy + py * zx;
        px = nx;
        py = ny;
        ++k;
      }
      acc += static_cast<long double>(t.coeff) * (t.imaginary ? py : px);
    }
    for (const Charge& q : charges) {
      long double dx = x - q.location.x, dy = y - q.location.y;
      acc += static_cast<long double>(q.strength) * 0.5L * logl(dx * dx + dy * dy);
    }
    return static_cast<double>(acc);
  }

  std::string to_text() const {
    std::ostringstream out;
    out << "harmonic_model v1\n";
    out << "center " << format_double(center.x) << ' ' << format_double(center.y) << '\n';
    out << "scale " << format_double(scale) << '\n';
    out << "poly " << poly.size() << '\n';
    for (const PolyTerm& t : poly)
      out << t.degree << ' ' << (t.imaginary ? "im" : "re") << ' ' << format_double(t.coeff)
          << '\n';
    out << "charges " << charges.size() << '\n';
    for (const Charge& q : charges)
      out << format_double(q.location.x) << ' ' << format_double(q.location.y) << ' '
          << format_double(q.strength) << '\n';
    return out.str();
  }

  static HarmonicModel from_text(const std::string& text) {
    std::istringstream in(text);
    std::string tag, ver;
    in >> tag >> ver;
    if (tag != "harmonic_model") throw std::invalid_argument("not a harmonic model file");
    HarmonicModel m;
    std::string key;
    in >> key >> m.center.x >> m.center.y;
    in >> key >> m.scale;
    size_t n = 0;
    in >> key >> n;
    m.poly.resize(n);
    for (auto& t : m.poly) {
      std::string kind;
      in >> t.degree >> kind >> t.coeff;
      t.imaginary = kind == "im";
    }
    in >> key >> n;
    m.charges.resize(n);
    for (auto& q : m.charges) in >> q.location.x >> q.location.y >> q.strength;
    if (!in) throw std::invalid_argument("truncated harmonic model file");
    return m;
  }
};

/// Sorted-by-degree poly terms keep eval's power recurrence single-pass.
inline std::vector<HarmonicModel::PolyTerm> make_poly_basis(int max_degree) {
  std::vector<HarmonicModel::PolyTerm> out;
  for (int k = 0; k <= max_degree; ++k) {
    out.push_back({k, false, 0.0});
    if (k >= 1) out.push_back({k, true, 0.0});
  }
  return out;
}

struct FitConfig {
  int max_degree = 12;
  std::vector<Point> charge_locations;
  double ridge_rel = 1e-10;  // ridge = ridge_rel * max diagonal of the normal matrix
  Point center;              // used when center_set
  bool center_set = false;
  double scale = 0.0;        // 0: max distance from center over K
  const GridFunction* row_weights = nullptr;  // optional least-squares weights on K
};

struct FitResult {
  HarmonicModel model;
  double sup_error = 0.0;
};

/// Least squares over the cells of K in the harmonic polynomial + log-charge
/// basis. Returns the achieved sup error; acceptance against an error budget
/// is the caller's business.
inline FitResult fit_harmonic_on_compact(const DomainMask& K, const GridFunction& target,
                                         const FitConfig& cfg) {
  const GridSpec& g = K.grid();
  require_same_grid(g, target.grid());
  std::vector<int> cells = K.cell_indices();
  if (cells.empty()) throw std::invalid_argument("empty compact");
  for (int k : cells)
    if (!target.supported(k) || target.neg_inf_at(k))
      throw std::invalid_argument("fit target must be finite on the compact");

  Point center = cfg.center;
  if (!cfg.center_set) {
    double sx = 0, sy = 0;
    for (int k : cells) {
      sx += g.cx(k % g.nx);
      sy += g.cy(k / g.nx);
    }
    center = {sx / double(cells.size()), sy / double(cells.size())};
  }
  double scale = cfg.scale;
  if (scale <= 0) {
    for (int k : cells)
      scale = std::max(scale, dist(center, g.center(k % g.nx, k / g.nx)));
    scale = std::max(scale, g.h);
  }

  // Charges must stay clear of the compact: half a cell keeps evaluation
  // finite at every K cell.
  for (const Point& p : cfg.charge_locations)
    for (int k : cells)
      if (dist(p, g.center(k % g.nx, k / g.nx)) < 0.5 * g.h * (1 - 1e-9))
        throw std::invalid_argument("charge inside K");

  HarmonicModel model;
  model.center = center;
  model.scale = scale;
  model.poly = make_poly_basis(cfg.max_degree);
  for (const Point& p : cfg.charge_locations) model.charges.push_back({p, 0.0});

  const size_t n_poly = model.poly.size();
  const size_t n_basis = n_poly + model.charges.size();
  const size_t rows = cells.size();

  Eigen::MatrixXd A(rows, n_basis);
  Eigen::VectorXd b(rows);
  Eigen::VectorXd w = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(rows));
  for (size_t r = 0; r < rows; ++r) {
    int k = cells[r];
    double x = g.cx(k % g.nx), y = g.cy(k / g.nx);
    double zx = (x - center.x) / scale, zy = (y - center.y) / scale;
    double px = 1.0, py = 0.0;
    int deg = 0;
    for (size_t c = 0; c < n_poly; ++c) {
      const auto& t = model.poly[c];
      while (deg < t.degree) {
        double nx = px * zx - py * zy, ny = px * zy + py * zx;
        px = nx;
        py = ny;
        ++deg;
      }
      A(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = t.imaginary ? py : px;
    }
    for (size_t c = 0; c < model.charges.size(); ++c) {
      const Point& p = model.charges[c].location;
      double dx = x - p.x, dy = y - p.y;
      A(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(n_poly + c)) =
          0.5 * std::log(dx * dx + dy * dy);
    }
    b(static_cast<Eigen::Index>(r)) = target.at(k);
    if (cfg.row_weights) {
      double wv = cfg.row_weights->at(k);
      if (!(wv >= 0)) throw std::invalid_argument("negative least-squares weight");
      w(static_cast<Eigen::Index>(r)) = wv;
    }
  }

  Eigen::VectorXd coef;
  if (cfg.ridge_rel > 0) {
    Eigen::MatrixXd N = A.transpose() * w.asDiagonal() * A;
    Eigen::VectorXd rhs = A.transpose() * (w.asDiagonal() * b);
    double ridge = cfg.ridge_rel * N.diagonal().maxCoeff();
    for (Eigen::Index i = 0; i < N.rows(); ++i) N(i, i) += ridge;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(N);
    coef = ldlt.solve(rhs);
    if (ldlt.info() != Eigen::Success || !coef.allFinite())
      throw std::runtime_error("basis degenerate");
  } else {
    // ridge-free path: rank-revealing QR on the weighted design keeps the
    // nearly collinear charge columns usable
    Eigen::VectorXd sw = w.array().sqrt();
    Eigen::MatrixXd Aw = sw.asDiagonal() * A;
    Eigen::VectorXd bw = sw.asDiagonal() * b;
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Aw);
    coef = qr.solve(bw);
    if (!coef.allFinite()) throw std::runtime_error("basis degenerate");
  }

  for (size_t c = 0; c < n_poly; ++c) model.poly[c].coeff = coef(static_cast<Eigen::Index>(c));
  for (size_t c = 0; c < model.charges.size(); ++c)
    model.charges[c].strength = coef(static_cast<Eigen::Index>(n_poly + c));

  double sup = 0.0;
  Eigen::VectorXd fitted = A * coef;
  for (size_t r = 0; r < rows; ++r)
    sup = std::max(sup, std::fabs(fitted(static_cast<Eigen::Index>(r)) - b(static_cast<Eigen::Index>(r))));
  return {std::move(model), sup};
}

/// Exact analytic evaluation at arbitrary points; refuses points closer than
/// min_charge_dist to a charge.
inline std::vector<double> eval_model(const HarmonicModel& m, std::span<const Point> pts,
                                      double min_charge_dist = 0.0) {
  std::vector<double> out;
  out.reserve(pts.size());
  for (const Point& p : pts) {
    for (const auto& q : m.charges)
      if (dist(p, q.location) < min_charge_dist)
        throw std::invalid_argument("evaluation at charge location");
    out.push_back(m.eval(p.x, p.y));
  }
  return out;
}

}  // namespace potgrid
