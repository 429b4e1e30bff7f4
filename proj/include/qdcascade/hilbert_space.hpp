#pragma once

#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

#include "qdcascade/config.hpp"

namespace qdc {

using cplx = std::complex<double>;
using Operator = Eigen::MatrixXcd;

enum class Level : int { G = 0, XH = 1, XV = 2, XX = 3 };
enum class Mode : int { H = 0, V = 1 };
enum class ChannelKind { XX, X };

inline const char* level_name(Level l) {
  switch (l) {
    case Level::G: return "G";
    case Level::XH: return "X_H";
    case Level::XV: return "X_V";
    case Level::XX: return "XX";
  }
  return "?";
}

inline Level exciton_of(Mode m) { return m == Mode::H ? Level::XH : Level::XV; }

// Number of electronic excitations carried by a level.
inline int excitations(Level l) {
  return l == Level::G ? 0 : (l == Level::XX ? 2 : 1);
}

// Product basis {G, X_H, X_V, XX} x |n_H> x |n_V>, electronic-major:
//   index = level * (n_max+1)^2 + n_H * (n_max+1) + n_V
class HilbertSpace {
 public:
  explicit HilbertSpace(int n_max) : n_max_(n_max) {
    if (n_max < 0) throw std::invalid_argument("n_max must be >= 0");
  }

  int n_max() const noexcept { return n_max_; }
  int photon_states() const noexcept { return (n_max_ + 1) * (n_max_ + 1); }
  int dim() const noexcept { return 4 * photon_states(); }

  int index(Level l, int n_h, int n_v) const {
    if (n_h < 0 || n_v < 0 || n_h > n_max_ || n_v > n_max_)
      throw std::out_of_range("photon number outside truncation");
    return static_cast<int>(l) * photon_states() + n_h * (n_max_ + 1) + n_v;
  }

  Level level_of(int i) const { return static_cast<Level>(i / photon_states()); }
  int n_h_of(int i) const { return (i % photon_states()) / (n_max_ + 1); }
  int n_v_of(int i) const { return i % (n_max_ + 1); }
  int photons_of(int i, Mode m) const { return m == Mode::H ? n_h_of(i) : n_v_of(i); }

  // Electronic excitations plus photons; conserved by the cavity coupling.
  int excitation_number(int i) const {
    return excitations(level_of(i)) + n_h_of(i) + n_v_of(i);
  }

  std::string label(int i) const {
    return std::string("|") + level_name(level_of(i)) + "," + std::to_string(n_h_of(i)) + "," +
           std::to_string(n_v_of(i)) + ">";
  }

  bool operator==(const HilbertSpace&) const = default;

 private:
  int n_max_;
};

inline HilbertSpace build_space(const ValidatedConfig& vc) {
  return HilbertSpace(vc.config.cavity.n_max);
}

inline Operator identity(const HilbertSpace& s) {
  return Operator::Identity(s.dim(), s.dim());
}

inline Eigen::VectorXcd basis_vector(const HilbertSpace& s, Level l, int n_h, int n_v) {
  Eigen::VectorXcd v = Eigen::VectorXcd::Zero(s.dim());
  v(s.index(l, n_h, n_v)) = 1.0;
  return v;
}

// |i><j| tensored with the photon identity.
inline Operator projector(const HilbertSpace& s, Level i, Level j) {
  Operator op = Operator::Zero(s.dim(), s.dim());
  for (int nh = 0; nh <= s.n_max(); ++nh)
    for (int nv = 0; nv <= s.n_max(); ++nv) op(s.index(i, nh, nv), s.index(j, nh, nv)) = 1.0;
  return op;
}

inline Operator annihilator(const HilbertSpace& s, Mode m) {
  Operator op = Operator::Zero(s.dim(), s.dim());
  for (int k = 0; k < s.dim(); ++k) {
    const int n = s.photons_of(k, m);
    if (n == 0) continue;
    const Level l = s.level_of(k);
    const int nh = s.n_h_of(k), nv = s.n_v_of(k);
    const int target = m == Mode::H ? s.index(l, nh - 1, nv) : s.index(l, nh, nv - 1);
    op(target, k) = std::sqrt(static_cast<double>(n));
  }
  return op;
}

inline Operator number_operator(const HilbertSpace& s, Mode m) {
  Operator op = Operator::Zero(s.dim(), s.dim());
  for (int k = 0; k < s.dim(); ++k) op(k, k) = static_cast<double>(s.photons_of(k, m));
  return op;
}

// a_XX = |X_i><XX| + b_i ,  a_X = |G><X_i| (+ b_i if include_cavity).
inline Operator emission_channel(const HilbertSpace& s, ChannelKind kind, Mode m,
                                 bool include_cavity = false) {
  const Level x = exciton_of(m);
  if (kind == ChannelKind::XX) return projector(s, x, Level::XX) + annihilator(s, m);
  Operator op = projector(s, Level::G, x);
  if (include_cavity) op += annihilator(s, m);
  return op;
}

}  // namespace qdc
