#pragma once

#include <cctype>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "potgrid/geometry.hpp"

namespace potgrid {

namespace mask_detail {

inline double segment_distance(double px, double py, double ax, double ay, double bx, double by) {
  double vx = bx - ax, vy = by - ay;
  double len2 = vx * vx + vy * vy;
  double t = len2 > 0 ? ((px - ax) * vx + (py - ay) * vy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return std::hypot(px - (ax + t * vx), py - (ay + t * vy));
}

struct Parser {
  const std::string& s;
  const GridSpec& grid;
  size_t pos = 0;

  Parser(const std::string& text, const GridSpec& g) : s(text), grid(g) {}

  [[noreturn]] void fail(const std::string& what) const {
    throw std::invalid_argument("mask spec error at offset " + std::to_string(pos) + ": " + what);
  }
  void skip_ws() {
    while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
  }
  bool eat(char c) {
    skip_ws();
    if (pos < s.size() && s[pos] == c) {
      ++pos;
      return true;
    }
    return false;
  }

  double number() {
    skip_ws();
    char* after = nullptr;
    double v = std::strtod(s.c_str() + pos, &after);
    size_t end = static_cast<size_t>(after - s.c_str());
    if (end == pos) fail("bad number");
    pos = end;
    return v;
  }

  std::string ident() {
    skip_ws();
    size_t start = pos;
    while (pos < s.size() &&
           (std::isalnum(static_cast<unsigned char>(s[pos])) || s[pos] == '_'))
      ++pos;
    if (pos == start) fail("expected primitive name");
    return s.substr(start, pos - start);
  }

  DomainMask parse() {
    std::string name = ident();
    if (name == "full") return DomainMask::full(grid);
    if (!eat('(')) fail("expected ( after " + name);
    DomainMask out(grid);
    if (name == "rect") {
      double x0 = number();
      expect_comma();
      double y0 = number();
      expect_comma();
      double x1 = number();
      expect_comma();
      double y1 = number();
      out = DomainMask::from_predicate(grid, [=](double x, double y) {
        return x >= x0 && x <= x1 && y >= y0 && y <= y1;
      });
    } else if (name == "disk") {
      double cx = number();
      expect_comma();
      double cy = number();
      expect_comma();
      double r = number();
      out = DomainMask::from_predicate(grid, [=](double x, double y) {
        return std::hypot(x - cx, y - cy) <= r;
      });
    } else if (name == "segment") {
      double x0 = number();
      expect_comma();
      double y0 = number();
      expect_comma();
      double x1 = number();
      expect_comma();
      double y1 = number();
      double w = grid.h / 2;
      if (eat(',')) w = number();
      out = DomainMask::from_predicate(grid, [=, this](double x, double y) {
        return segment_distance(x, y, x0, y0, x1, y1) <= w * (1 + 1e-12);
      });
    } else if (name == "cantor_bars") {
      int depth = static_cast<int>(number());
      if (depth < 0 || depth > 12) fail("cantor depth out of range");
      double a = grid.origin_x, b = grid.origin_x + grid.h * (grid.nx - 1);
      std::vector<std::pair<double, double>> ivals{{a, b}};
      for (int d = 0; d < depth; ++d) {
        std::vector<std::pair<double, double>> next;
        for (auto [lo, hi] : ivals) {
          double third = (hi - lo) / 3.0;
          next.emplace_back(lo, lo + third);
          next.emplace_back(hi - third, hi);
        }
        ivals = std::move(next);
      }
      out = DomainMask::from_predicate(grid, [&](double x, double) {
        for (auto [lo, hi] : ivals)
          if (x >= lo - 1e-12 && x <= hi + 1e-12) return true;
        return false;
      });
    } else if (name == "union") {
      out = parse();
      while (eat(',')) out = out.unite(parse());
      if (!eat(')')) fail("expected )");
      return out;
    } else if (name == "difference") {
      DomainMask lhs = parse();
      expect_comma();
      DomainMask rhs = parse();
      if (!eat(')')) fail("expected )");
      return lhs.minus(rhs);
    } else {
      fail("unknown primitive '" + name + "'");
    }
    if (!eat(')')) fail("expected )");
    return out;
  }

  void expect_comma() {
    if (!eat(',')) fail("expected ,");
  }
};

}  // namespace mask_detail

/// Build a mask from a primitive spec like
///   union(rect(0.1,0.1,0.9,0.9), disk(0.5,0.5,0.3))
/// Coordinates are physical; `segment` takes an optional half-width.
inline DomainMask parse_mask_spec(const std::string& text, const GridSpec& grid) {
  mask_detail::Parser p(text, grid);
  DomainMask m = p.parse();
  p.skip_ws();
  if (p.pos != text.size()) p.fail("trailing input");
  return m;
}

}  // namespace potgrid
