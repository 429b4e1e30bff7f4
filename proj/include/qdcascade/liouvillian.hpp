#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "qdcascade/hilbert_space.hpp"
#include "qdcascade/units.hpp"

namespace qdc {

using SparseSuper = Eigen::SparseMatrix<cplx, Eigen::ColMajor>;

// Lindblad operator sqrt(rate/2) * op, so that populations decay at exactly `rate`.
struct CollapseOp {
  Operator op;
  double hbar_rate = 0.0;
  std::string label;
};

// Adds amplitude(t) * coupling + conj(amplitude(t)) * coupling^† to H.
struct DriveTerm {
  Operator coupling;
  std::function<cplx(double)> amplitude;
  std::string label;
};

// 2 O ρ O† - O†O ρ - ρ O†O
inline Operator lindblad_term(const Operator& O, const Operator& rho) {
  const Operator OdO = O.adjoint() * O;
  return 2.0 * O * rho * O.adjoint() - OdO * rho - rho * OdO;
}

namespace detail {

// Triplets of (Bt ⊗ A), i.e. the column-major vectorization of X -> A X B.
inline void add_kron(std::vector<Eigen::Triplet<cplx>>& out, const Operator& Bt, const Operator& A,
                     cplx coef) {
  const Eigen::Index d = A.rows();
  for (Eigen::Index c = 0; c < d; ++c)
    for (Eigen::Index cp = 0; cp < d; ++cp) {
      const cplx b = Bt(c, cp);
      if (b == cplx(0.0)) continue;
      for (Eigen::Index rp = 0; rp < d; ++rp)
        for (Eigen::Index r = 0; r < d; ++r) {
          const cplx a = A(r, rp);
          if (a == cplx(0.0)) continue;
          out.emplace_back(static_cast<int>(c * d + r), static_cast<int>(cp * d + rp),
                           coef * b * a);
        }
    }
}

inline void add_commutator(std::vector<Eigen::Triplet<cplx>>& t, const Operator& H) {
  // (i/ħ)[H, ρ]
  const cplx f(0.0, 1.0 / kHbar);
  const Operator I = Operator::Identity(H.rows(), H.cols());
  add_kron(t, I, H, f);
  add_kron(t, H.transpose(), I, -f);
}

inline SparseSuper from_triplets(std::vector<Eigen::Triplet<cplx>>& t, Eigen::Index n) {
  SparseSuper s(n, n);
  s.setFromTriplets(t.begin(), t.end());
  s.prune(cplx(0.0));
  s.makeCompressed();
  return s;
}

inline double norm1(const SparseSuper& s) {
  double best = 0.0;
  for (int k = 0; k < s.outerSize(); ++k) {
    double col = 0.0;
    for (SparseSuper::InnerIterator it(s, k); it; ++it) col += std::abs(it.value());
    best = std::max(best, col);
  }
  return best;
}

}  // namespace detail

// dρ/dt = (i/ħ)[H(t), ρ] + Σ_k (γ_k/2) L_{O_k}(ρ)
class Liouvillian {
 public:
  Liouvillian(Operator h0, std::vector<CollapseOp> collapse, std::vector<DriveTerm> drives = {},
              double frame_reference_energy = 0.0,
              double drive_end = std::numeric_limits<double>::infinity())
      : h0_(std::move(h0)),
        collapse_(std::move(collapse)),
        drives_(std::move(drives)),
        frame_reference_(frame_reference_energy),
        drive_end_(drives_.empty() ? 0.0 : drive_end) {
    build_superoperators();
  }

  int dim() const noexcept { return static_cast<int>(h0_.rows()); }
  const Operator& static_hamiltonian() const noexcept { return h0_; }
  const std::vector<CollapseOp>& collapse_ops() const noexcept { return collapse_; }
  const std::vector<DriveTerm>& drives() const noexcept { return drives_; }
  double frame_reference_energy() const noexcept { return frame_reference_; }

  // Drives are treated as exactly zero from this time on.
  double drive_end() const noexcept { return drive_end_; }
  bool driven() const noexcept { return !drives_.empty() && drive_end_ > 0.0; }

  Operator hamiltonian_at(double t) const {
    Operator h = h0_;
    if (t < drive_end_)
      for (const auto& d : drives_) {
        const cplx a = d.amplitude(t);
        h += a * d.coupling + std::conj(a) * d.coupling.adjoint();
      }
    return h;
  }

  // Right-hand side in matrix form; used by oracles and tests.
  Operator apply(double t, const Operator& rho) const {
    const Operator h = hamiltonian_at(t);
    Operator out = cplx(0.0, 1.0 / kHbar) * (h * rho - rho * h);
    for (const auto& c : collapse_) out += 0.5 * rate_of(c.hbar_rate) * lindblad_term(c.op, rho);
    return out;
  }

  const SparseSuper& static_superoperator() const noexcept { return s0_; }
  const std::vector<std::pair<SparseSuper, SparseSuper>>& drive_superoperators() const noexcept {
    return sdrive_;
  }
  double static_norm1() const noexcept { return s0_norm1_; }
  double drive_norm1(std::size_t k) const { return sdrive_norm1_[k]; }

  // Y = S(t) X on vectorized (column-major) density matrices, one per column.
  Eigen::MatrixXcd superoperator_apply(double t, const Eigen::MatrixXcd& X) const {
    Eigen::MatrixXcd y = s0_ * X;
    if (t < drive_end_)
      for (std::size_t k = 0; k < drives_.size(); ++k) {
        const cplx a = drives_[k].amplitude(t);
        if (a == cplx(0.0)) continue;
        y.noalias() += a * (sdrive_[k].first * X);
        y.noalias() += std::conj(a) * (sdrive_[k].second * X);
      }
    return y;
  }

  // Dense superoperator at time t, for small-system oracles.
  Eigen::MatrixXcd dense_superoperator(double t) const {
    const Eigen::Index n = Eigen::Index(dim()) * dim();
    return superoperator_apply(t, Eigen::MatrixXcd::Identity(n, n));
  }

 private:
  void build_superoperators() {
    const Eigen::Index n = Eigen::Index(dim()) * dim();
    std::vector<Eigen::Triplet<cplx>> t;
    detail::add_commutator(t, h0_);
    const Operator I = Operator::Identity(dim(), dim());
    for (const auto& c : collapse_) {
      const double g = 0.5 * rate_of(c.hbar_rate);
      if (g == 0.0) continue;
      const Operator OdO = c.op.adjoint() * c.op;
      detail::add_kron(t, c.op.conjugate(), c.op, 2.0 * g);
      detail::add_kron(t, I, OdO, -g);
      detail::add_kron(t, OdO.transpose(), I, -g);
    }
    s0_ = detail::from_triplets(t, n);
    s0_norm1_ = detail::norm1(s0_);
    for (const auto& d : drives_) {
      std::vector<Eigen::Triplet<cplx>> a, b;
      detail::add_commutator(a, d.coupling);
      detail::add_commutator(b, d.coupling.adjoint());
      sdrive_.emplace_back(detail::from_triplets(a, n), detail::from_triplets(b, n));
      sdrive_norm1_.push_back(
          std::max(detail::norm1(sdrive_.back().first), detail::norm1(sdrive_.back().second)));
    }
  }

  Operator h0_;
  std::vector<CollapseOp> collapse_;
  std::vector<DriveTerm> drives_;
  double frame_reference_;
  double drive_end_;
  SparseSuper s0_;
  double s0_norm1_ = 0.0;
  std::vector<std::pair<SparseSuper, SparseSuper>> sdrive_;
  std::vector<double> sdrive_norm1_;
};

// Connected components of the sparsity graph of a superoperator. Each block is
// an invariant subspace of vec(ρ) under the static dynamics.
inline std::vector<std::vector<int>> superoperator_blocks(const SparseSuper& s) {
  const int n = static_cast<int>(s.rows());
  std::vector<int> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (int k = 0; k < s.outerSize(); ++k)
    for (SparseSuper::InnerIterator it(s, k); it; ++it) {
      const int a = find(static_cast<int>(it.row())), b = find(static_cast<int>(it.col()));
      if (a != b) parent[std::max(a, b)] = std::min(a, b);
    }
  std::vector<int> slot(n, -1);
  std::vector<std::vector<int>> blocks;
  for (int i = 0; i < n; ++i) {
    const int r = find(i);
    if (slot[r] < 0) {
      slot[r] = static_cast<int>(blocks.size());
      blocks.emplace_back();
    }
    blocks[slot[r]].push_back(i);
  }
  return blocks;
}

}  // namespace qdc
