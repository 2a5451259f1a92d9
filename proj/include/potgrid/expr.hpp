#pragma once

#include <cctype>
#include <cmath>
#include <complex>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "potgrid/geometry.hpp"

namespace potgrid {

/// Scalar field of the two plane coordinates, parsed from a small expression
/// grammar: variables x, y; operators + - * / ^; functions log, exp, sqrt,
/// abs, sin, cos, min, max, dist(a,b) and re(k)/im(k) for the harmonic
/// polynomials Re/Im (x+iy)^k.
class ScalarField {
 public:
  using Fn = std::function<double(double, double)>;

  ScalarField() = default;
  explicit ScalarField(Fn fn) : fn_(std::move(fn)) {}

  double operator()(double x, double y) const { return fn_(x, y); }
  bool valid() const { return static_cast<bool>(fn_); }

 private:
  Fn fn_;
};

namespace expr_detail {

struct Parser {
  const std::string& s;
  size_t pos = 0;

  explicit Parser(const std::string& text) : s(text) {}

  [[noreturn]] void fail(const std::string& what) const {
    throw std::invalid_argument("expression error at offset " + std::to_string(pos) + ": " + what);
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
  char peek() {
    skip_ws();
    return pos < s.size() ? s[pos] : '\0';
  }

  ScalarField::Fn parse_expr() {
    auto lhs = parse_term();
    for (;;) {
      if (eat('+')) {
        auto rhs = parse_term();
        lhs = [lhs, rhs](double x, double y) { return lhs(x, y) + rhs(x, y); };
      } else if (eat('-')) {
        auto rhs = parse_term();
        lhs = [lhs, rhs](double x, double y) { return lhs(x, y) - rhs(x, y); };
      } else {
        return lhs;
      }
    }
  }

  ScalarField::Fn parse_term() {
    auto lhs = parse_unary();
    for (;;) {
      if (eat('*')) {
        auto rhs = parse_unary();
        lhs = [lhs, rhs](double x, double y) { return lhs(x, y) * rhs(x, y); };
      } else if (eat('/')) {
        auto rhs = parse_unary();
        lhs = [lhs, rhs](double x, double y) { return lhs(x, y) / rhs(x, y); };
      } else {
        return lhs;
      }
    }
  }

  ScalarField::Fn parse_unary() {
    if (eat('-')) {
      auto inner = parse_unary();
      return [inner](double x, double y) { return -inner(x, y); };
    }
    if (eat('+')) return parse_unary();
    return parse_power();
  }

  ScalarField::Fn parse_power() {
    auto base = parse_primary();
    if (eat('^')) {
      auto expo = parse_unary();  // right-associative
      return [base, expo](double x, double y) { return std::pow(base(x, y), expo(x, y)); };
    }
    return base;
  }

  ScalarField::Fn parse_primary() {
    skip_ws();
    if (pos >= s.size()) fail("unexpected end of expression");
    char c = s[pos];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parse_ident();
    if (c == '(') {
      ++pos;
      auto inner = parse_expr();
      if (!eat(')')) fail("missing )");
      return inner;
    }
    fail(std::string("unexpected character '") + c + "'");
  }

  ScalarField::Fn parse_number() {
    size_t end = pos;
    char* after = nullptr;
    double v = std::strtod(s.c_str() + pos, &after);
    end = static_cast<size_t>(after - s.c_str());
    if (end == pos) fail("bad number");
    pos = end;
    return [v](double, double) { return v; };
  }

  std::vector<ScalarField::Fn> parse_args(size_t want) {
    if (!eat('(')) fail("expected (");
    std::vector<ScalarField::Fn> args;
    if (!eat(')')) {
      for (;;) {
        args.push_back(parse_expr());
        if (eat(')')) break;
        if (!eat(',')) fail("expected , or )");
      }
    }
    if (args.size() != want) fail("wrong argument count");
    return args;
  }

  ScalarField::Fn parse_ident() {
    size_t start = pos;
    while (pos < s.size() &&
           (std::isalnum(static_cast<unsigned char>(s[pos])) || s[pos] == '_'))
      ++pos;
    std::string name = s.substr(start, pos - start);
    if (name == "x") return [](double x, double) { return x; };
    if (name == "y") return [](double, double y) { return y; };
    if (name == "pi") return [](double, double) { return M_PI; };
    if (name == "log") {
      auto a = parse_args(1);
      return [f = a[0]](double x, double y) { return std::log(f(x, y)); };
    }
    if (name == "exp") {
      auto a = parse_args(1);
      return [f = a[0]](double x, double y) { return std::exp(f(x, y)); };
    }
    if (name == "sqrt") {
      auto a = parse_args(1);
      return [f = a[0]](double x, double y) { return std::sqrt(f(x, y)); };
    }
    if (name == "abs") {
      auto a = parse_args(1);
      return [f = a[0]](double x, double y) { return std::fabs(f(x, y)); };
    }
    if (name == "sin") {
      auto a = parse_args(1);
      return [f = a[0]](double x, double y) { return std::sin(f(x, y)); };
    }
    if (name == "cos") {
      auto a = parse_args(1);
      return [f = a[0]](double x, double y) { return std::cos(f(x, y)); };
    }
    if (name == "min") {
      auto a = parse_args(2);
      return [f = a[0], g = a[1]](double x, double y) { return std::min(f(x, y), g(x, y)); };
    }
    if (name == "max") {
      auto a = parse_args(2);
      return [f = a[0], g = a[1]](double x, double y) { return std::max(f(x, y), g(x, y)); };
    }
    if (name == "dist") {
      auto a = parse_args(2);
      return [f = a[0], g = a[1]](double x, double y) {
        return std::hypot(x - f(x, y), y - g(x, y));
      };
    }
    if (name == "re" || name == "im") {
      auto a = parse_args(1);
      bool imag = name == "im";
      return [f = a[0], imag](double x, double y) {
        int k = static_cast<int>(std::lround(f(x, y)));
        std::complex<double> z(x, y);
        std::complex<double> p = std::pow(z, k);
        return imag ? p.imag() : p.real();
      };
    }
    fail("unknown identifier '" + name + "'");
  }
};

}  // namespace expr_detail

inline ScalarField parse_expression(const std::string& text) {
  expr_detail::Parser p(text);
  auto fn = p.parse_expr();
  p.skip_ws();
  if (p.pos != text.size()) p.fail("trailing input");
  return ScalarField(std::move(fn));
}

/// Sample an expression on a mask; -inf becomes the sentinel, +inf/NaN is an
/// error naming the offending cell.
inline GridFunction sample_field(const DomainMask& support, const ScalarField& f) {
  const GridSpec& g = support.grid();
  GridFunction out(support);
  for (int iy = 0; iy < g.ny; ++iy)
    for (int ix = 0; ix < g.nx; ++ix) {
      if (!support.at(ix, iy)) continue;
      double v = f(g.cx(ix), g.cy(iy));
      int k = g.index(ix, iy);
      if (v == -std::numeric_limits<double>::infinity()) {
        out.set_neg_inf(k);
      } else if (std::isnan(v) || v == std::numeric_limits<double>::infinity()) {
        throw std::invalid_argument("expression not finite at cell (" + std::to_string(ix) +
                                    "," + std::to_string(iy) + ")");
      } else {
        out.set(k, v);
      }
    }
  return out;
}

}  // namespace potgrid
