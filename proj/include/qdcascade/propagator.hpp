#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <cstdio>
#include <memory>
#include <ostream>
#include <vector>

#include <Eigen/Dense>

#include "qdcascade/density_matrix.hpp"
#include "qdcascade/errors.hpp"
#include "qdcascade/liouvillian.hpp"
#include "qdcascade/time_grid.hpp"

namespace qdc {

struct IntegratorOptions {
  // Bound on h * ||S||_1 for each RK4 substep. The static maps are cheap to
  // build, so they get a much tighter bound than the explicit driven path.
  double max_step_phase = 0.005;
  double driven_step_phase = 0.25;
  double eigen_tolerance = 1e-6;
  bool check_positivity = true;
};

// I + z + z^2/2 + z^3/6 + z^4/24
inline Eigen::MatrixXcd rk4_polynomial(const Eigen::MatrixXcd& z) {
  const Eigen::Index n = z.rows();
  const Eigen::MatrixXcd I = Eigen::MatrixXcd::Identity(n, n);
  Eigen::MatrixXcd p = I + z / 4.0;
  p = I + (z * p) / 3.0;
  p = I + (z * p) / 2.0;
  return I + z * p;
}

inline Eigen::MatrixXcd matrix_power(Eigen::MatrixXcd base, long e) {
  Eigen::MatrixXcd result = Eigen::MatrixXcd::Identity(base.rows(), base.cols());
  bool first = true;
  while (e > 0) {
    if (e & 1) {
      if (first) {
        result = base;
        first = false;
      } else {
        result = result * base;
      }
    }
    e >>= 1;
    if (e > 0) base = base * base;
  }
  return result;
}

// Exact matrices of n composed RK4 substeps of the time-independent part of a
// Liouvillian, one per invariant block, for one lattice unit and for one coarse step.
class StaticPropagator {
 public:
  struct Block {
    std::vector<int> idx;
    Eigen::MatrixXcd unit_map;
    Eigen::MatrixXcd coarse_map;
    long substeps = 1;
  };

  StaticPropagator(const Liouvillian& L, double unit, long coarse_ratio, double max_step_phase)
      : unit_(unit), ratio_(coarse_ratio), dim2_(L.static_superoperator().rows()) {
    const SparseSuper& s = L.static_superoperator();
    const auto comps = superoperator_blocks(s);
    block_of_.assign(dim2_, -1);
    std::vector<int> local(dim2_, -1);
    for (std::size_t b = 0; b < comps.size(); ++b) {
      Block blk;
      blk.idx = comps[b];
      const int m = static_cast<int>(blk.idx.size());
      for (int k = 0; k < m; ++k) {
        local[blk.idx[k]] = k;
        block_of_[blk.idx[k]] = static_cast<int>(b);
      }
      Eigen::MatrixXcd sb = Eigen::MatrixXcd::Zero(m, m);
      for (int k = 0; k < m; ++k)
        for (SparseSuper::InnerIterator it(s, blk.idx[k]); it; ++it)
          sb(local[it.row()], k) = it.value();
      const double norm = sb.cwiseAbs().colwise().sum().maxCoeff();
      blk.substeps = std::max(1L, static_cast<long>(std::ceil(unit * norm / max_step_phase)));
      const double h = unit / static_cast<double>(blk.substeps);
      blk.unit_map = matrix_power(rk4_polynomial(h * sb), blk.substeps);
      blk.coarse_map = matrix_power(blk.unit_map, ratio_);
      blocks_.push_back(std::move(blk));
    }
  }

  double unit() const noexcept { return unit_; }
  long ratio() const noexcept { return ratio_; }
  Eigen::Index vec_dim() const noexcept { return dim2_; }
  const std::vector<Block>& blocks() const noexcept { return blocks_; }
  int block_of(Eigen::Index k) const { return block_of_[k]; }

  std::vector<int> all_blocks() const {
    std::vector<int> ids(blocks_.size());
    for (std::size_t b = 0; b < ids.size(); ++b) ids[b] = static_cast<int>(b);
    return ids;
  }

  // Blocks on which v has a nonzero entry.
  std::vector<int> support(const Eigen::VectorXcd& v) const {
    std::vector<char> hit(blocks_.size(), 0);
    for (Eigen::Index k = 0; k < v.size(); ++k)
      if (v(k) != cplx(0.0)) hit[block_of_[k]] = 1;
    std::vector<int> ids;
    for (std::size_t b = 0; b < hit.size(); ++b)
      if (hit[b]) ids.push_back(static_cast<int>(b));
    return ids;
  }

  // v <- M(units) v, or M(units)^T v, restricted to the given blocks.
  void advance(Eigen::VectorXcd& v, long units, const std::vector<int>& block_ids,
               bool transpose = false) const {
    if (units <= 0) return;
    const long q = units / ratio_, r = units % ratio_;
    Eigen::VectorXcd x, y;
    for (int b : block_ids) {
      const Block& blk = blocks_[b];
      const Eigen::Index m = static_cast<Eigen::Index>(blk.idx.size());
      x.resize(m);
      for (Eigen::Index k = 0; k < m; ++k) x(k) = v(blk.idx[k]);
      for (long s = 0; s < q; ++s) {
        if (transpose)
          y.noalias() = blk.coarse_map.transpose() * x;
        else
          y.noalias() = blk.coarse_map * x;
        x.swap(y);
      }
      for (long s = 0; s < r; ++s) {
        if (transpose)
          y.noalias() = blk.unit_map.transpose() * x;
        else
          y.noalias() = blk.unit_map * x;
        x.swap(y);
      }
      for (Eigen::Index k = 0; k < m; ++k) v(blk.idx[k]) = x(k);
    }
  }

  void advance(Eigen::VectorXcd& v, long units) const { advance(v, units, all_blocks()); }

 private:
  double unit_;
  long ratio_;
  Eigen::Index dim2_;
  std::vector<Block> blocks_;
  std::vector<int> block_of_;
};

using RowMat = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowBlock = Eigen::Ref<RowMat, 0, Eigen::OuterStride<>>;

// Explicit RK4 with the full time-dependent superoperator. Static and drive
// parts share one sparsity pattern whose values are refreshed per stage, and
// the state is row-major so every column of a batch advances together.
class DrivenStepper {
 public:
  explicit DrivenStepper(const Liouvillian& L) : L_(&L) {
    const SparseSuper& s0 = L.static_superoperator();
    const Eigen::Index n = s0.rows();
    std::vector<Eigen::Triplet<cplx>> t;
    auto mark = [&t](const SparseSuper& m) {
      for (int k = 0; k < m.outerSize(); ++k)
        for (SparseSuper::InnerIterator it(m, k); it; ++it) t.emplace_back(it.row(), it.col(), 1.0);
    };
    mark(s0);
    for (const auto& [a, b] : L.drive_superoperators()) {
      mark(a);
      mark(b);
    }
    s_.resize(n, n);
    s_.setFromTriplets(t.begin(), t.end());
    s_.makeCompressed();
    base_ = scatter(s0);
    for (const auto& [a, b] : L.drive_superoperators()) drive_.emplace_back(scatter(a), scatter(b));
  }

  // X <- Φ(t + dt, t) X, with dt split so that each substep has h·||S||_1 <= step_phase.
  void step(RowBlock X, double t, double dt, double step_phase) {
    double norm = L_->static_norm1();
    for (std::size_t k = 0; k < L_->drives().size(); ++k) {
      const auto& a = L_->drives()[k].amplitude;
      const double amax = std::max({std::abs(a(t)), std::abs(a(t + 0.5 * dt)), std::abs(a(t + dt))});
      norm += 2.0 * amax * L_->drive_norm1(k);
    }
    const long n = std::max(1L, static_cast<long>(std::ceil(dt * norm / step_phase)));
    const double h = dt / static_cast<double>(n);
    k_.resize(X.rows(), X.cols());
    acc_.resize(X.rows(), X.cols());
    tmp_.resize(X.rows(), X.cols());
    for (long s = 0; s < n; ++s) {
      const double ts = t + static_cast<double>(s) * h;
      set_time(ts);
      k_.noalias() = s_ * X;
      acc_ = k_;
      tmp_ = X + (0.5 * h) * k_;
      set_time(ts + 0.5 * h);
      k_.noalias() = s_ * tmp_;
      acc_ += 2.0 * k_;
      tmp_ = X + (0.5 * h) * k_;
      k_.noalias() = s_ * tmp_;
      acc_ += 2.0 * k_;
      tmp_ = X + h * k_;
      set_time(ts + h);
      k_.noalias() = s_ * tmp_;
      acc_ += k_;
      X += (h / 6.0) * acc_;
    }
  }

 private:
  using Pattern = Eigen::SparseMatrix<cplx, Eigen::RowMajor>;

  // Values of m laid out on the merged pattern.
  Eigen::VectorXcd scatter(const SparseSuper& m) const {
    Eigen::VectorXcd v = Eigen::VectorXcd::Zero(s_.nonZeros());
    const int* outer = s_.outerIndexPtr();
    const int* inner = s_.innerIndexPtr();
    for (int k = 0; k < m.outerSize(); ++k)
      for (SparseSuper::InnerIterator it(m, k); it; ++it) {
        const int r = static_cast<int>(it.row()), c = static_cast<int>(it.col());
        const int* pos = std::lower_bound(inner + outer[r], inner + outer[r + 1], c);
        v(pos - inner) += it.value();
      }
    return v;
  }

  void set_time(double t) {
    Eigen::Map<Eigen::VectorXcd> vals(s_.valuePtr(), s_.nonZeros());
    vals = base_;
    if (t >= L_->drive_end()) return;
    for (std::size_t k = 0; k < drive_.size(); ++k) {
      const cplx a = L_->drives()[k].amplitude(t);
      if (a == cplx(0.0)) continue;
      vals += a * drive_[k].first + std::conj(a) * drive_[k].second;
    }
  }

  const Liouvillian* L_;
  Pattern s_;
  Eigen::VectorXcd base_;
  std::vector<std::pair<Eigen::VectorXcd, Eigen::VectorXcd>> drive_;
  RowMat k_, acc_, tmp_;
};

// First lattice position at which the drive is off.
inline long drive_end_lattice(const Liouvillian& L, const TimeGrid& grid) {
  if (!L.driven()) return 0;
  const double e = L.drive_end() / grid.unit();
  if (!std::isfinite(e)) return grid.end_lattice();
  return std::clamp(static_cast<long>(std::ceil(e - 1e-9)), 0L, grid.end_lattice());
}

struct Trajectory {
  TimeGrid grid;
  std::vector<DensityMatrix> states;
  double max_trace_error = 0.0;
  double max_hermiticity_error = 0.0;
  double min_eigenvalue = 0.0;

  std::size_t size() const noexcept { return states.size(); }
  const Operator& rho(std::size_t i) const { return states[i].matrix(); }
};

inline Trajectory propagate(const Liouvillian& L, const DensityMatrix& rho0, const TimeGrid& grid,
                            const StaticPropagator& sp, const IntegratorOptions& opt = {}) {
  const int d = L.dim();
  if (rho0.dim() != d) throw GridMismatch("initial state dimension does not match Liouvillian");
  if (sp.unit() != grid.unit() || sp.vec_dim() != Eigen::Index(d) * d)
    throw GridMismatch("static propagator was built for a different grid or system");
  Trajectory tr;
  tr.grid = grid;
  tr.states.reserve(grid.size());
  tr.min_eigenvalue = std::numeric_limits<double>::infinity();

  RowMat v = Eigen::Map<const Eigen::VectorXcd>(rho0.matrix().data(), Eigen::Index(d) * d);
  const long pulse_end = drive_end_lattice(L, grid);
  DrivenStepper stepper(L);
  const auto all = sp.all_blocks();
  long pos = 0;

  auto record = [&](double t) {
    DensityMatrix rho(Eigen::Map<const Operator>(v.data(), d, d));
    const double te = rho.trace_error(), he = rho.hermiticity_error();
    tr.max_trace_error = std::max(tr.max_trace_error, te);
    tr.max_hermiticity_error = std::max(tr.max_hermiticity_error, he);
    if (opt.check_positivity) {
      const double ev = rho.min_eigenvalue();
      tr.min_eigenvalue = std::min(tr.min_eigenvalue, ev);
      if (ev < -opt.eigen_tolerance) throw StepUnstable(t, ev);
    }
    tr.states.push_back(std::move(rho));
  };

  record(0.0);
  for (std::size_t k = 1; k < grid.size(); ++k) {
    const long target = grid.lattice(k);
    while (pos < target && pos < pulse_end) {
      stepper.step(v, static_cast<double>(pos) * grid.unit(), grid.unit(), opt.driven_step_phase);
      ++pos;
    }
    if (pos < target) {
      Eigen::VectorXcd col = v.col(0);
      sp.advance(col, target - pos, all);
      v.col(0) = col;
      pos = target;
    }
    record(grid.time(k));
  }
  return tr;
}

inline Trajectory propagate(const Liouvillian& L, const DensityMatrix& rho0, const TimeGrid& grid,
                            const IntegratorOptions& opt = {}) {
  const StaticPropagator sp(L, grid.unit(), grid.ratio(), opt.max_step_phase);
  return propagate(L, rho0, grid, sp, opt);
}

inline void write_trajectory_csv(std::ostream& os, const Trajectory& tr, const HilbertSpace& s) {
  os << "t_ps,P_G,P_XH,P_XV,P_XX,n_H,n_V,trace_error\n";
  char buf[512];
  for (std::size_t i = 0; i < tr.size(); ++i) {
    const Operator& r = tr.rho(i);
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                  tr.grid.time(i), population(s, r, Level::G), population(s, r, Level::XH),
                  population(s, r, Level::XV), population(s, r, Level::XX),
                  mean_photons(s, r, Mode::H), mean_photons(s, r, Mode::V),
                  tr.states[i].trace_error());
    os << buf;
  }
}

}  // namespace qdc
