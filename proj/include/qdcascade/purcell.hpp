#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "qdcascade/errors.hpp"

namespace qdc {

// F_P = 2(ħg)² / (ħγ ħκ) · (ħκ)² / (ΔE² + (ħκ)²). All arguments in µeV.
inline double purcell_factor(double hbar_g, double hbar_kappa, double hbar_gamma_rad, double delta_E = 0.0) {
  const double k2 = hbar_kappa * hbar_kappa;
  return 2.0 * hbar_g * hbar_g / (hbar_gamma_rad * hbar_kappa) * k2 / (delta_E * delta_E + k2);
}

// ħg = sqrt(F_P E_c / 2Q) sqrt(ħγ)
inline double coupling_from_purcell(double F_P, double E_c, double Q, double hbar_gamma_rad) {
  return std::sqrt(F_P * E_c / (2.0 * Q)) * std::sqrt(hbar_gamma_rad);
}

// On-resonance inverses at fixed ħg or fixed ħκ.
inline double kappa_for_purcell(double F_P, double hbar_g, double hbar_gamma_rad) {
  return 2.0 * hbar_g * hbar_g / (hbar_gamma_rad * F_P);
}
inline double coupling_for_purcell(double F_P, double hbar_kappa, double hbar_gamma_rad) {
  return std::sqrt(0.5 * F_P * hbar_gamma_rad * hbar_kappa);
}

struct PurcellPoint {
  double F_P = 0.0;
  double hbar_g = 0.0;
  double hbar_kappa = 0.0;
  double Q = 0.0;
  double E_c = 0.0;
  double Delta_E = 0.0;
};

inline PurcellPoint purcell_point(double hbar_g, double hbar_kappa, double hbar_gamma_rad, double E_c,
                                  double delta_E = 0.0) {
  return {purcell_factor(hbar_g, hbar_kappa, hbar_gamma_rad, delta_E), hbar_g, hbar_kappa,
          E_c / hbar_kappa, E_c, delta_E};
}

struct SurfacePoint {
  double F_P;
  double hbar_g;
  double value;
};

struct RidgeFit {
  double alpha = 0.0;  // µeV per unit F_P
  double beta = 0.0;   // µeV
  double residual_rms = 0.0;
  std::vector<SurfacePoint> points;  // (F_P*, ħg, value at the grid maximum)
};

// Abscissa of the vertex of the parabola through three points.
inline double parabola_vertex(double x0, double y0, double x1, double y1, double x2, double y2) {
  const double a = (x1 - x0) * (y1 - y2), b = (x1 - x2) * (y1 - y0);
  const double den = a - b;
  if (den == 0.0) return x1;
  return x1 - 0.5 * ((x1 - x0) * a - (x1 - x2) * b) / den;
}

// Rows are grouped by ħg; each row's maximum over F_P is refined with a
// three-point parabola, then ħg = α F_P* + β is fitted by least squares.
inline RidgeFit ridge_fit(const std::vector<SurfacePoint>& surface) {
  std::map<double, std::vector<SurfacePoint>> rows;
  for (const auto& p : surface) {
    if (!std::isfinite(p.value)) continue;
    bool placed = false;
    for (auto& [g, v] : rows)
      if (std::abs(g - p.hbar_g) <= 1e-9 * std::max(1.0, std::abs(g))) {
        v.push_back(p);
        placed = true;
        break;
      }
    if (!placed) rows[p.hbar_g].push_back(p);
  }
  if (rows.size() < 4) throw DegenerateRidge("ridge fit needs at least 4 rows of constant hbar_g", rows.size());

  RidgeFit fit;
  std::size_t row_index = 0;
  for (auto& [g, pts] : rows) {
    std::sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) { return a.F_P < b.F_P; });
    const std::size_t n = pts.size();
    std::size_t best = 0;
    for (std::size_t k = 1; k < n; ++k)
      if (pts[k].value > pts[best].value) best = k;
    if (n < 3 || best == 0 || best + 1 == n) {
      std::ostringstream msg;
      msg << "maximum of row hbar_g = " << g << " lies on the F_P grid boundary";
      throw DegenerateRidge(msg.str(), row_index);
    }
    const double f = parabola_vertex(pts[best - 1].F_P, pts[best - 1].value, pts[best].F_P,
                                     pts[best].value, pts[best + 1].F_P, pts[best + 1].value);
    fit.points.push_back({f, g, pts[best].value});
    ++row_index;
  }

  const double m = static_cast<double>(fit.points.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& p : fit.points) {
    sx += p.F_P;
    sy += p.hbar_g;
    sxx += p.F_P * p.F_P;
    sxy += p.F_P * p.hbar_g;
  }
  const double den = m * sxx - sx * sx;
  if (den == 0.0) throw DegenerateRidge("all ridge maxima share the same F_P", 0);
  fit.alpha = (m * sxy - sx * sy) / den;
  fit.beta = (sy - fit.alpha * sx) / m;
  double ss = 0.0;
  for (const auto& p : fit.points) {
    const double r = p.hbar_g - (fit.alpha * p.F_P + fit.beta);
    ss += r * r;
  }
  fit.residual_rms = std::sqrt(ss / m);
  return fit;
}

// Reads F_P, hbar_g and the target column from a results CSV with a header line.
// Rows with an empty or non-numeric target are skipped.
inline std::vector<SurfacePoint> read_surface_csv(const std::string& path, const std::string& target) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  auto split = [](const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
  };
  std::string line;
  if (!std::getline(in, line)) throw IoError(path + ": empty file");
  const auto header = split(line);
  auto col = [&](const std::string& name) {
    for (std::size_t k = 0; k < header.size(); ++k)
      if (header[k] == name) return k;
    throw IoError(path + ": missing column " + name);
  };
  const std::size_t cf = col("F_P"), cg = col("hbar_g"), cv = col(target);
  std::vector<SurfacePoint> pts;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() < header.size()) throw IoError(path + ": short row");
    try {
      std::size_t used = 0;
      const double v = std::stod(cells[cv], &used);
      if (used != cells[cv].size()) continue;
      pts.push_back({std::stod(cells[cf]), std::stod(cells[cg]), v});
    } catch (const std::invalid_argument&) {
      continue;
    } catch (const std::out_of_range&) {
      continue;
    }
  }
  return pts;
}

}  // namespace qdc
