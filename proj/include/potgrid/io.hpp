#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "potgrid/geometry.hpp"

namespace potgrid {

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out << text;
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open for reading: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---------------------------------------------------------------------------
// key=value config files (sorted, one per line)

inline std::map<std::string, std::string> read_kv(const std::filesystem::path& path) {
  std::map<std::string, std::string> out;
  std::istringstream in(read_text_file(path));
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("malformed config line: " + line);
    out[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return out;
}

inline void write_kv(const std::filesystem::path& path,
                     const std::map<std::string, std::string>& kv) {
  std::ostringstream out;
  for (const auto& [k, v] : kv) out << k << '=' << v << '\n';
  write_text_file(path, out.str());
}

// ---------------------------------------------------------------------------
// Grid sidecar: geometry needed to rebuild masks/functions from CSV.

inline void write_grid_sidecar(const std::filesystem::path& path, const GridSpec& g) {
  std::map<std::string, std::string> kv{
      {"origin_x", format_double(g.origin_x)}, {"origin_y", format_double(g.origin_y)},
      {"h", format_double(g.h)},               {"nx", std::to_string(g.nx)},
      {"ny", std::to_string(g.ny)}};
  write_kv(path, kv);
}

inline GridSpec read_grid_sidecar(const std::filesystem::path& path) {
  auto kv = read_kv(path);
  return GridSpec(std::stod(kv.at("origin_x")), std::stod(kv.at("origin_y")),
                  std::stod(kv.at("h")), std::stoi(kv.at("nx")), std::stoi(kv.at("ny")));
}

// ---------------------------------------------------------------------------
// CSV: row-major, one value per cell, `nan` outside the support, `-inf` for
// the sentinel. A .grid sidecar carries the lattice geometry.

inline void write_grid_function_csv(const std::filesystem::path& path, const GridFunction& u) {
  const GridSpec& g = u.grid();
  std::ostringstream out;
  for (int iy = 0; iy < g.ny; ++iy) {
    for (int ix = 0; ix < g.nx; ++ix) {
      if (ix) out << ',';
      int k = g.index(ix, iy);
      if (!u.supported(k))
        out << "nan";
      else if (u.neg_inf_at(k))
        out << "-inf";
      else
        out << format_double(u.at(k));
    }
    out << '\n';
  }
  write_text_file(path, out.str());
  write_grid_sidecar(path.string() + ".grid", g);
}

inline GridFunction read_grid_function_csv(const std::filesystem::path& path) {
  GridSpec g = read_grid_sidecar(path.string() + ".grid");
  std::istringstream in(read_text_file(path));
  std::vector<std::string> tokens;
  tokens.reserve(static_cast<size_t>(g.size()));
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) tokens.push_back(cell);
  }
  if (static_cast<int>(tokens.size()) != g.size())
    throw std::runtime_error("csv size does not match grid sidecar: " + path.string());
  DomainMask support(g);
  for (int k = 0; k < g.size(); ++k) support.set(k, tokens[static_cast<size_t>(k)] != "nan");
  GridFunction u(support);
  for (int k = 0; k < g.size(); ++k) {
    if (!support.at(k)) continue;
    if (tokens[static_cast<size_t>(k)] == "-inf")
      u.set_neg_inf(k);
    else
      u.set(k, std::stod(tokens[static_cast<size_t>(k)]));
  }
  return u;
}

inline void write_mask_csv(const std::filesystem::path& path, const DomainMask& m) {
  const GridSpec& g = m.grid();
  std::ostringstream out;
  for (int iy = 0; iy < g.ny; ++iy) {
    for (int ix = 0; ix < g.nx; ++ix) {
      if (ix) out << ',';
      out << (m.at(ix, iy) ? '1' : '0');
    }
    out << '\n';
  }
  write_text_file(path, out.str());
  write_grid_sidecar(path.string() + ".grid", g);
}

inline DomainMask read_mask_csv(const std::filesystem::path& path) {
  GridSpec g = read_grid_sidecar(path.string() + ".grid");
  std::istringstream in(read_text_file(path));
  DomainMask m(g);
  std::string line;
  int k = 0;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) {
      if (k >= g.size()) throw std::runtime_error("mask csv larger than grid: " + path.string());
      m.set(k++, cell == "1");
    }
  }
  if (k != g.size()) throw std::runtime_error("mask csv smaller than grid: " + path.string());
  return m;
}

// ---------------------------------------------------------------------------
// PGM "P2" heatmaps; the affine value->gray mapping goes to a sidecar.

inline void write_pgm(const std::filesystem::path& path, const GridFunction& u) {
  const GridSpec& g = u.grid();
  double lo = u.min_finite(), hi = u.max_finite();
  double span = hi > lo ? hi - lo : 1.0;
  std::ostringstream out;
  out << "P2\n" << g.nx << ' ' << g.ny << "\n255\n";
  for (int iy = 0; iy < g.ny; ++iy) {
    for (int ix = 0; ix < g.nx; ++ix) {
      int k = g.index(ix, iy);
      int gray = 0;
      if (u.supported(k) && !u.neg_inf_at(k))
        gray = static_cast<int>(std::lround((u.at(k) - lo) / span * 255.0));
      out << gray << (ix + 1 == g.nx ? '\n' : ' ');
    }
  }
  write_text_file(path, out.str());
  write_kv(path.string() + ".scale",
           {{"value_min", format_double(lo)},
            {"value_max", format_double(hi)},
            {"gray_min", "0"},
            {"gray_max", "255"},
            {"unsupported_gray", "0"}});
}

inline void write_mask_pgm(const std::filesystem::path& path, const DomainMask& m) {
  const GridSpec& g = m.grid();
  std::ostringstream out;
  out << "P2\n" << g.nx << ' ' << g.ny << "\n255\n";
  for (int iy = 0; iy < g.ny; ++iy)
    for (int ix = 0; ix < g.nx; ++ix)
      out << (m.at(ix, iy) ? 255 : 0) << (ix + 1 == g.nx ? '\n' : ' ');
  write_text_file(path, out.str());
}

}  // namespace potgrid
