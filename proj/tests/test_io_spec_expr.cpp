#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <random>

#include "potgrid/expr.hpp"
#include "potgrid/io.hpp"
#include "potgrid/mask_spec.hpp"

using namespace potgrid;
namespace fs = std::filesystem;

namespace {
fs::path temp_dir() {
  fs::path d = fs::temp_directory_path() / "potgrid_io_test";
  fs::create_directories(d);
  return d;
}
}  // namespace

TEST_CASE("grid function csv round trip is exact") {
  GridSpec g(0.25, -0.5, 1.0 / 3.0, 9, 7);
  std::mt19937 rng(99);
  std::uniform_real_distribution<double> val(-1e3, 1e3);
  std::bernoulli_distribution coin(0.8);

  DomainMask support(g);
  for (int k = 0; k < g.size(); ++k) support.set(k, coin(rng));
  support.set(0, true);
  GridFunction u(support);
  for (int k = 0; k < g.size(); ++k)
    if (support.at(k)) u.set(k, val(rng));
  u.set_neg_inf(0);

  fs::path p = temp_dir() / "u.csv";
  write_grid_function_csv(p, u);
  GridFunction v = read_grid_function_csv(p);

  REQUIRE(v.grid() == g);
  REQUIRE(v.support() == support);
  for (int k = 0; k < g.size(); ++k) {
    if (!support.at(k)) continue;
    CHECK(v.neg_inf_at(k) == u.neg_inf_at(k));
    if (!u.neg_inf_at(k)) CHECK(v.at(k) == u.at(k));  // bit-exact via %.17g
  }
}

TEST_CASE("mask csv round trip") {
  GridSpec g(0, 0, 0.5, 8, 8);
  std::mt19937 rng(3);
  std::bernoulli_distribution coin(0.4);
  DomainMask m(g);
  for (int k = 0; k < g.size(); ++k) m.set(k, coin(rng));
  fs::path p = temp_dir() / "m.csv";
  write_mask_csv(p, m);
  CHECK(read_mask_csv(p) == m);
}

TEST_CASE("pgm output has stable header and sidecar") {
  GridSpec g(0, 0, 1.0, 4, 4);
  GridFunction u(DomainMask::full(g), 0.0);
  u.set(3, 3, 10.0);
  fs::path p = temp_dir() / "u.pgm";
  write_pgm(p, u);
  std::string text = read_text_file(p);
  CHECK(text.substr(0, 3) == "P2\n");
  CHECK(text.find("4 4\n255\n") != std::string::npos);
  auto kv = read_kv(p.string() + ".scale");
  CHECK(kv.at("value_max") == "10");
}

TEST_CASE("kv config round trip and ordering") {
  fs::path p = temp_dir() / "c.cfg";
  write_kv(p, {{"zeta", "1"}, {"alpha", "two"}, {"mid", "3.5"}});
  std::string text = read_text_file(p);
  CHECK(text == "alpha=two\nmid=3.5\nzeta=1\n");
  auto kv = read_kv(p);
  CHECK(kv.size() == 3);
  CHECK(kv.at("alpha") == "two");
}

TEST_CASE("mask spec primitives") {
  GridSpec g = GridSpec::unit_square(31);  // h = 1/30
  DomainMask r = parse_mask_spec("rect(0.2,0.2,0.8,0.8)", g);
  CHECK(r.count() == 19 * 19);

  DomainMask d = parse_mask_spec("disk(0.5,0.5,0.25)", g);
  CHECK(d.count() > 0);
  for (int iy = 0; iy < g.ny; ++iy)
    for (int ix = 0; ix < g.nx; ++ix)
      CHECK(d.at(ix, iy) == (std::hypot(g.cx(ix) - 0.5, g.cy(iy) - 0.5) <= 0.25));

  DomainMask s = parse_mask_spec("segment(0.5,0.0,0.5,1.0)", g);
  CHECK(s.count() == g.ny);  // one full column at x = 0.5

  DomainMask u = parse_mask_spec("union(rect(0,0,0.3,0.3), rect(0.7,0.7,1,1))", g);
  CHECK(u.count() == 2 * 10 * 10);

  DomainMask diff = parse_mask_spec("difference(full, rect(0.2,0.2,0.8,0.8))", g);
  CHECK(diff.count() == g.size() - r.count());

  CHECK_THROWS(parse_mask_spec("blob(1,2)", g));
  CHECK_THROWS(parse_mask_spec("rect(0,0,1)", g));
}

TEST_CASE("cantor bars cardinalities shrink with depth") {
  GridSpec g = GridSpec::unit_square(82);  // 81 cell gaps per side
  int prev = g.size();
  for (int depth = 1; depth <= 3; ++depth) {
    DomainMask c = parse_mask_spec("cantor_bars(" + std::to_string(depth) + ")", g);
    CHECK(c.count() < prev);
    CHECK(c.count() > 0);
    prev = c.count();
    // bars span the full height
    for (int ix = 0; ix < g.nx; ++ix) {
      bool col = c.at(ix, 0);
      for (int iy = 1; iy < g.ny; ++iy) CHECK(c.at(ix, iy) == col);
    }
  }
}

TEST_CASE("expression parser evaluates the documented grammar") {
  auto f = parse_expression("x^2 + y^2");
  CHECK(f(3, 4) == Catch::Approx(25));
  auto p = parse_expression("2*x*y - x/4 + 1.5");
  CHECK(p(2, 3) == Catch::Approx(12 - 0.5 + 1.5));
  auto pw = parse_expression("2^3^1");  // right associative
  CHECK(pw(0, 0) == Catch::Approx(8));
  auto um = parse_expression("-x^2");
  CHECK(um(2, 0) == Catch::Approx(-4));

  auto lg = parse_expression("log(dist(2,0.5))");
  CHECK(lg(2, 0.5 + std::exp(1.0)) == Catch::Approx(1.0));

  auto re3 = parse_expression("re(3)");
  CHECK(re3(1.0, 2.0) == Catch::Approx(1 - 3 * 1 * 4));  // Re (x+iy)^3 = x^3-3xy^2
  auto im2 = parse_expression("im(2)");
  CHECK(im2(1.5, 2.5) == Catch::Approx(2 * 1.5 * 2.5));

  auto mm = parse_expression("max(x, min(y, 1))");
  CHECK(mm(0.2, 5) == Catch::Approx(1));
  CHECK(mm(-4, 0.5) == Catch::Approx(0.5));

  CHECK_THROWS(parse_expression("x +"));
  CHECK_THROWS(parse_expression("foo(x)"));
  CHECK_THROWS(parse_expression("x ) y"));
}

TEST_CASE("sample_field maps -inf to the sentinel and rejects +inf") {
  GridSpec g = GridSpec::unit_square(9);
  DomainMask full = DomainMask::full(g);
  GridFunction u = sample_field(full, parse_expression("log(dist(0,0))"));
  CHECK(u.neg_inf_at(g.index(0, 0)));  // log 0 at the origin cell
  CHECK(u.at(g.nx - 1, 0) == Catch::Approx(0.0));

  CHECK_THROWS(sample_field(full, parse_expression("1/(x-x)")));
}
