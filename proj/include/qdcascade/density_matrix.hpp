#pragma once

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

#include "qdcascade/hilbert_space.hpp"

namespace qdc {

class DensityMatrix {
 public:
  DensityMatrix() = default;
  explicit DensityMatrix(Operator m) : m_(std::move(m)) {}

  static DensityMatrix pure(const Eigen::VectorXcd& psi) {
    return DensityMatrix(psi * psi.adjoint() / psi.squaredNorm());
  }
  static DensityMatrix basis(const HilbertSpace& s, Level l, int n_h = 0, int n_v = 0) {
    return pure(basis_vector(s, l, n_h, n_v));
  }

  const Operator& matrix() const noexcept { return m_; }
  Operator& matrix() noexcept { return m_; }
  Eigen::Index dim() const noexcept { return m_.rows(); }

  cplx trace() const { return m_.trace(); }
  double trace_error() const { return std::abs(m_.trace() - 1.0); }
  double hermiticity_error() const {
    return m_.size() == 0 ? 0.0 : (m_ - m_.adjoint()).cwiseAbs().maxCoeff();
  }
  double purity() const { return (m_ * m_).trace().real(); }

  // Smallest eigenvalue of the Hermitian part.
  double min_eigenvalue() const {
    const Operator h = 0.5 * (m_ + m_.adjoint());
    Eigen::SelfAdjointEigenSolver<Operator> es(h, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
  }

  cplx expectation(const Operator& op) const { return (op * m_).trace(); }

  bool is_valid(double herm_tol = 1e-10, double trace_tol = 1e-8, double eig_tol = 1e-8) const {
    return hermiticity_error() <= herm_tol && trace_error() <= trace_tol &&
           min_eigenvalue() >= -eig_tol;
  }

 private:
  Operator m_;
};

inline double population(const HilbertSpace& s, const Operator& rho, Level l) {
  double p = 0.0;
  for (int nh = 0; nh <= s.n_max(); ++nh)
    for (int nv = 0; nv <= s.n_max(); ++nv) {
      const int k = s.index(l, nh, nv);
      p += rho(k, k).real();
    }
  return p;
}

inline double mean_photons(const HilbertSpace& s, const Operator& rho, Mode m) {
  double n = 0.0;
  for (int k = 0; k < s.dim(); ++k) n += s.photons_of(k, m) * rho(k, k).real();
  return n;
}

}  // namespace qdc
