#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "potgrid/harmonic.hpp"
#include "potgrid/mask_spec.hpp"

using namespace potgrid;

namespace {

double cubic(double x, double y) { return x * x * x - 3 * x * y * y; }
double quartic(double x, double y) {  // Re z^4
  return x * x * x * x - 6 * x * x * y * y + y * y * y * y;
}

double interior_sup_error(const GridFunction& u, double (*f)(double, double)) {
  const GridSpec& g = u.grid();
  double worst = 0;
  for (int iy = 0; iy < g.ny; ++iy)
    for (int ix = 0; ix < g.nx; ++ix)
      if (u.support().interior_at(ix, iy))
        worst = std::max(worst, std::fabs(u.at(ix, iy) - f(g.cx(ix), g.cy(iy))));
  return worst;
}

}  // namespace

TEST_CASE("dirichlet: constants extend to constants") {
  GridSpec g = GridSpec::unit_square(33);
  DomainMask disk = parse_mask_spec("disk(0.5,0.5,0.4)", g);
  auto bd = BoundaryData::from_function(disk, [](double, double) { return 3.25; });
  GridFunction u = solve_dirichlet(bd, 1e-12);
  for (int k = 0; k < g.size(); ++k)
    if (disk.at(k)) CHECK(u.at(k) == Catch::Approx(3.25).margin(1e-10));
}

TEST_CASE("dirichlet: x^2-y^2 is exactly discrete harmonic") {
  GridSpec g = GridSpec::unit_square(65);
  DomainMask square = DomainMask::full(g);
  auto f = [](double x, double y) { return x * x - y * y; };
  auto bd = BoundaryData::from_function(square, f);
  double tol = 1e-11;
  GridFunction u = solve_dirichlet(bd, tol);
  double err = 0;
  for (int iy = 0; iy < g.ny; ++iy)
    for (int ix = 0; ix < g.nx; ++ix)
      err = std::max(err, std::fabs(u.at(ix, iy) - f(g.cx(ix), g.cy(iy))));
  CHECK(err <= 10 * tol + 1e-8);
}

TEST_CASE("dirichlet: harmonic cubic solved to solver accuracy") {
  // x^3 - 3xy^2 is killed exactly by the 5-point stencil (its fourth
  // derivatives vanish), so the error is solver tolerance, far below C*h^2.
  for (int n : {33, 65}) {
    GridSpec g = GridSpec::unit_square(n);
    auto bd = BoundaryData::from_function(DomainMask::full(g), cubic);
    GridFunction u = solve_dirichlet(bd, 1e-12);
    double h2 = g.h * g.h;
    CHECK(interior_sup_error(u, cubic) <= h2);
  }
}

TEST_CASE("dirichlet: quartic shows genuine O(h^2) Richardson ratios") {
  double e1 = 0, e2 = 0, e3 = 0;
  {
    GridSpec g = GridSpec::unit_square(33);
    e1 = interior_sup_error(solve_dirichlet(BoundaryData::from_function(DomainMask::full(g), quartic), 1e-12), quartic);
  }
  {
    GridSpec g = GridSpec::unit_square(65);
    e2 = interior_sup_error(solve_dirichlet(BoundaryData::from_function(DomainMask::full(g), quartic), 1e-12), quartic);
  }
  {
    GridSpec g = GridSpec::unit_square(129);
    e3 = interior_sup_error(solve_dirichlet(BoundaryData::from_function(DomainMask::full(g), quartic), 1e-12), quartic);
  }
  CHECK(e1 / e2 == Catch::Approx(4.0).epsilon(0.25));
  CHECK(e2 / e3 == Catch::Approx(4.0).epsilon(0.25));
}

TEST_CASE("dirichlet: discrete maximum principle and mean value property") {
  GridSpec g = GridSpec::unit_square(49);
  DomainMask disk = parse_mask_spec("disk(0.5,0.5,0.42)", g);
  std::mt19937 rng(17);
  std::uniform_real_distribution<double> a(-2, 2);
  double c1 = a(rng), c2 = a(rng), c3 = a(rng);
  auto f = [&](double x, double y) {
    return c1 * std::sin(3 * x + 1) + c2 * std::cos(2 * y) + c3 * x * y;
  };
  auto bd = BoundaryData::from_function(disk, f);
  double tol = 1e-11;
  GridFunction u = solve_dirichlet(bd, tol);

  double lo = 1e300, hi = -1e300;
  for (int iy = 0; iy < g.ny; ++iy)
    for (int ix = 0; ix < g.nx; ++ix)
      if (disk.boundary_at(ix, iy)) {
        lo = std::min(lo, u.at(ix, iy));
        hi = std::max(hi, u.at(ix, iy));
      }
  for (int iy = 0; iy < g.ny; ++iy)
    for (int ix = 0; ix < g.nx; ++ix)
      if (disk.at(ix, iy)) {
        CHECK(u.at(ix, iy) >= lo - 1e-8);
        CHECK(u.at(ix, iy) <= hi + 1e-8);
      }
  // discrete mean value at interior cells
  for (int iy = 1; iy + 1 < g.ny; ++iy)
    for (int ix = 1; ix + 1 < g.nx; ++ix)
      if (disk.interior_at(ix, iy)) {
        double avg = 0.25 * (u.at(ix - 1, iy) + u.at(ix + 1, iy) + u.at(ix, iy - 1) +
                             u.at(ix, iy + 1));
        CHECK(std::fabs(avg - u.at(ix, iy)) <= tol);
      }
}

TEST_CASE("dirichlet: non-convergence carries the residual") {
  GridSpec g = GridSpec::unit_square(33);
  auto bd = BoundaryData::from_function(DomainMask::full(g), cubic);
  try {
    solve_dirichlet(bd, 1e-12, 3);
    FAIL("expected DirichletError");
  } catch (const DirichletError& e) {
    CHECK(e.residual > 0);
  }
}

TEST_CASE("poisson disk extension") {
  std::vector<double> ones(256, 1.0);
  CHECK(std::fabs(poisson_extend_disk(ones, {0, 0}, 1.0, {0.3, -0.2}) - 1.0) < 1e-10);

  int M = 1024;
  std::vector<double> cosx(M);
  for (int k = 0; k < M; ++k) cosx[k] = std::cos(2 * M_PI * k / M);
  CHECK(std::fabs(poisson_extend_disk(cosx, {0, 0}, 1.0, {0, 0})) < 1e-12);
  // boundary data of Re z: value at (r, 0) is r
  CHECK(poisson_extend_disk(cosx, {0, 0}, 1.0, {0.37, 0.0}) == Catch::Approx(0.37).margin(1e-6));

  CHECK_THROWS(poisson_extend_disk(ones, {0, 0}, 1.0, {1.2, 0}));
  std::vector<double> few(8, 1.0);
  CHECK_THROWS(poisson_extend_disk(few, {0, 0}, 1.0, {0, 0}));
}

TEST_CASE("poisson kernel positivity") {
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> v(0.0, 3.0), pos(-0.6, 0.6);
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<double> f(64);
    for (auto& x : f) x = v(rng);
    double val = poisson_extend_disk(f, {0, 0}, 1.0, {pos(rng), pos(rng)});
    CHECK(val >= 0.0);
  }
}

TEST_CASE("fit: target in the basis span is reproduced") {
  GridSpec g = GridSpec::unit_square(65);
  DomainMask annulus = parse_mask_spec("difference(disk(0.5,0.5,0.45), disk(0.5,0.5,0.2))", g);
  GridFunction target = GridFunction::sample(annulus, [](double x, double y) {
    double zx = x - 0.5, zy = y - 0.5;
    return zx * zx - zy * zy;  // Re (z-c)^2
  });
  FitConfig cfg;
  cfg.max_degree = 3;
  auto [model, sup] = fit_harmonic_on_compact(annulus, target, cfg);
  CHECK(sup <= 1e-8);
}

TEST_CASE("fit: zero target gives zero model") {
  GridSpec g = GridSpec::unit_square(33);
  DomainMask k = parse_mask_spec("disk(0.5,0.5,0.3)", g);
  GridFunction target(k, 0.0);
  FitConfig cfg;
  cfg.max_degree = 4;
  auto [model, sup] = fit_harmonic_on_compact(k, target, cfg);
  CHECK(sup == 0.0);
  for (const auto& t : model.poly) CHECK(std::fabs(t.coeff) < 1e-12);
}

TEST_CASE("fit: two-level ring target with central charges") {
  GridSpec g = GridSpec::unit_square(97);
  DomainMask outer = parse_mask_spec("difference(disk(0.5,0.5,0.43), disk(0.5,0.5,0.41))", g);
  DomainMask inner = parse_mask_spec("difference(disk(0.5,0.5,0.19), disk(0.5,0.5,0.17))", g);
  DomainMask K = outer.unite(inner);
  GridFunction target(K, 0.0);
  for (int k = 0; k < g.size(); ++k)
    if (inner.at(k)) target.set(k, 3.0);

  FitConfig cfg;
  cfg.max_degree = 6;
  cfg.center = {0.5, 0.5};
  cfg.center_set = true;
  // two staggered charge rings in the central hole give radial freedom
  for (int j = 0; j < 8; ++j) {
    double th = 2 * M_PI * j / 8;
    cfg.charge_locations.push_back({0.5 + 0.05 * std::cos(th), 0.5 + 0.05 * std::sin(th)});
    cfg.charge_locations.push_back(
        {0.5 + 0.10 * std::cos(th + M_PI / 8), 0.5 + 0.10 * std::sin(th + M_PI / 8)});
  }
  auto [model, sup] = fit_harmonic_on_compact(K, target, cfg);
  CHECK(sup < 0.5);

  // refined-sampling oracle: evaluate the model on a 4x refined sampling of K
  GridSpec fine = GridSpec::unit_square(4 * 96 + 1);
  DomainMask outer_f = parse_mask_spec("difference(disk(0.5,0.5,0.43), disk(0.5,0.5,0.41))", fine);
  DomainMask inner_f = parse_mask_spec("difference(disk(0.5,0.5,0.19), disk(0.5,0.5,0.17))", fine);
  double sup_fine = 0;
  for (int iy = 0; iy < fine.ny; ++iy)
    for (int ix = 0; ix < fine.nx; ++ix) {
      double want;
      if (outer_f.at(ix, iy))
        want = 0.0;
      else if (inner_f.at(ix, iy))
        want = 3.0;
      else
        continue;
      sup_fine = std::max(sup_fine, std::fabs(model.eval(fine.cx(ix), fine.cy(iy)) - want));
    }
  CHECK(sup_fine < 0.5);
}

TEST_CASE("fit: sup error is monotone in max_degree with ridge 0") {
  GridSpec g = GridSpec::unit_square(49);
  DomainMask K = parse_mask_spec("difference(disk(0.5,0.5,0.4), disk(0.5,0.5,0.25))", g);
  GridFunction target = GridFunction::sample(
      K, [](double x, double y) { return std::exp(x) * std::cos(y); });
  double prev = 1e300;
  for (int deg : {1, 2, 4, 6, 8}) {
    FitConfig cfg;
    cfg.max_degree = deg;
    cfg.ridge_rel = 0.0;
    cfg.center = {0.5, 0.5};
    cfg.center_set = true;
    auto [model, sup] = fit_harmonic_on_compact(K, target, cfg);
    CHECK(sup <= prev * (1 + 1e-9));
    prev = sup;
  }
}

TEST_CASE("fit rejects charges inside the compact") {
  GridSpec g = GridSpec::unit_square(33);
  DomainMask K = parse_mask_spec("disk(0.5,0.5,0.3)", g);
  GridFunction target(K, 1.0);
  FitConfig cfg;
  cfg.charge_locations.push_back({0.5, 0.5});
  CHECK_THROWS_WITH(fit_harmonic_on_compact(K, target, cfg), "charge inside K");
}

TEST_CASE("eval_model basics and charge guard") {
  HarmonicModel zero;
  std::vector<Point> pts{{0, 0}, {1, 2}, {-3, 0.5}};
  for (double v : eval_model(zero, pts)) CHECK(v == 0.0);

  HarmonicModel one_charge;
  one_charge.charges.push_back({{2.0, 1.0}, 1.0});
  double e = std::exp(1.0);
  std::vector<Point> at_e{{2.0 + e, 1.0}};
  CHECK(eval_model(one_charge, at_e)[0] == Catch::Approx(1.0));
  std::vector<Point> at_charge{{2.0, 1.0}};
  CHECK_THROWS(eval_model(one_charge, at_charge, 0.5));
}

TEST_CASE("fit residual replay: eval_model reproduces recorded sup error") {
  GridSpec g = GridSpec::unit_square(41);
  DomainMask K = parse_mask_spec("difference(disk(0.5,0.5,0.35), disk(0.5,0.5,0.2))", g);
  GridFunction target = GridFunction::sample(K, [](double x, double y) { return x + 2 * y * y; });
  FitConfig cfg;
  cfg.max_degree = 5;
  auto [model, sup] = fit_harmonic_on_compact(K, target, cfg);
  double replay = 0;
  for (int iy = 0; iy < g.ny; ++iy)
    for (int ix = 0; ix < g.nx; ++ix)
      if (K.at(ix, iy))
        replay = std::max(replay, std::fabs(model.eval(g.cx(ix), g.cy(iy)) - target.at(ix, iy)));
  CHECK(replay == Catch::Approx(sup).epsilon(1e-9));
}

TEST_CASE("model text round trip is exact") {
  HarmonicModel m;
  m.center = {0.123456789012345, -7.5};
  m.scale = 1.75;
  m.poly = {{0, false, 1.0 / 3.0}, {2, false, -0.37281901234567891}, {2, true, 5e-17}};
  m.charges = {{{0.1, 0.9}, -2.5}, {{-3, 4}, 1e-12}};
  HarmonicModel r = HarmonicModel::from_text(m.to_text());
  CHECK(r.center.x == m.center.x);
  CHECK(r.scale == m.scale);
  REQUIRE(r.poly.size() == m.poly.size());
  for (size_t i = 0; i < m.poly.size(); ++i) {
    CHECK(r.poly[i].degree == m.poly[i].degree);
    CHECK(r.poly[i].imaginary == m.poly[i].imaginary);
    CHECK(r.poly[i].coeff == m.poly[i].coeff);
  }
  REQUIRE(r.charges.size() == m.charges.size());
  for (size_t i = 0; i < m.charges.size(); ++i) {
    CHECK(r.charges[i].location.x == m.charges[i].location.x);
    CHECK(r.charges[i].strength == m.charges[i].strength);
  }
}

TEST_CASE("model laplacian shrinks O(h^2) under refinement") {
  HarmonicModel m;
  m.center = {0.5, 0.5};
  m.scale = 1.0;
  m.poly = {{3, false, 0.7}, {4, true, -0.2}};
  m.charges = {{{-0.5, 0.5}, 1.3}};
  auto worst_lap = [&](int n) {
    GridSpec g = GridSpec::unit_square(n);
    double worst = 0;
    for (int iy = 1; iy + 1 < g.ny; ++iy)
      for (int ix = 1; ix + 1 < g.nx; ++ix) {
        double lap = m.eval(g.cx(ix - 1), g.cy(iy)) + m.eval(g.cx(ix + 1), g.cy(iy)) +
                     m.eval(g.cx(ix), g.cy(iy - 1)) + m.eval(g.cx(ix), g.cy(iy + 1)) -
                     4 * m.eval(g.cx(ix), g.cy(iy));
        worst = std::max(worst, std::fabs(lap / (g.h * g.h)));
      }
    return worst;
  };
  double l1 = worst_lap(33), l2 = worst_lap(65);
  CHECK(l1 / l2 > 3.0);
  CHECK(l1 / l2 < 5.0);
}
