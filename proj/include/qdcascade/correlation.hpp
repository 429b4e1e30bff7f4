#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qdcascade/errors.hpp"
#include "qdcascade/liouvillian.hpp"
#include "qdcascade/propagator.hpp"
#include "qdcascade/time_grid.hpp"

namespace qdc {

// G(t, τ) = Tr[ B Φ(t+τ, t)( A ρ(t) R ) ]
struct Correlator {
  Operator left;
  Operator right;
  Operator observable;
  std::string label;
};

// <a†(t+τ) a(t)>
inline Correlator first_order(const Operator& a, std::string label = "G1") {
  return {a, Operator::Identity(a.rows(), a.cols()), a.adjoint(), std::move(label)};
}

// <a†(t) b†(t+τ) b(t+τ) a(t)>
inline Correlator second_order(const Operator& a, const Operator& b, std::string label = "G2") {
  return {a, a.adjoint(), b.adjoint() * b, std::move(label)};
}

// <a_i†(t) a_j†(t+τ) a_k(t+τ) a_l(t)>
inline Correlator fourth_order(const Operator& a_i, const Operator& a_j, const Operator& a_k,
                               const Operator& a_l, std::string label = "G2") {
  return {a_l, a_i.adjoint(), a_j.adjoint() * a_k, std::move(label)};
}

// <x(t+τ)>
inline Correlator delayed_expectation(const Operator& x, std::string label = "delayed") {
  const Operator I = Operator::Identity(x.rows(), x.cols());
  return {I, I, x, std::move(label)};
}

// Values on the triangular grid, flat row-major (see TwoTimeGrid::row_offset).
struct CorrelationMap {
  TwoTimeGrid grid;
  std::vector<cplx> values;

  cplx operator()(std::size_t i, std::size_t j) const { return values[grid.row_offset(i) + j]; }
  cplx& operator()(std::size_t i, std::size_t j) { return values[grid.row_offset(i) + j]; }
  std::size_t rows() const { return grid.rows(); }
  std::size_t row_size(std::size_t i) const { return grid.row_size(i); }
};

struct EngineOptions {
  bool freeze_pulse_in_tau = false;
  IntegratorOptions integrator;
};

enum class RowSelection { All, PulseOnly, StaticOnly };

class CorrelationEngine {
 public:
  CorrelationEngine(const Liouvillian& L, const Trajectory& tr, const TwoTimeGrid& grid,
                    EngineOptions opt = {}, std::shared_ptr<const StaticPropagator> sp = nullptr)
      : L_(&L), tr_(&tr), grid_(grid), opt_(opt), sp_(std::move(sp)) {
    if (!(tr.grid == grid.t_grid()) || tr.size() != grid.rows())
      throw GridMismatch("trajectory samples do not match the requested two-time grid");
    if (tr.size() > 0 && tr.rho(0).rows() != L.dim())
      throw GridMismatch("trajectory dimension does not match the Liouvillian");
    if (!sp_)
      sp_ = std::make_shared<StaticPropagator>(L, grid.unit(), grid.t_grid().ratio(),
                                               opt.integrator.max_step_phase);
    if (sp_->unit() != grid.unit())
      throw GridMismatch("static propagator lattice differs from the grid");
    pulse_end_ = opt.freeze_pulse_in_tau ? 0 : drive_end_lattice(L, grid.t_grid());
    pulse_rows_ = grid.t_grid().count_below(pulse_end_);
  }

  const TwoTimeGrid& grid() const noexcept { return grid_; }
  const Trajectory& trajectory() const noexcept { return *tr_; }
  const Liouvillian& liouvillian() const noexcept { return *L_; }
  const StaticPropagator& propagator() const noexcept { return *sp_; }
  // Rows whose τ-propagation starts while the drive is still on.
  std::size_t pulse_rows() const noexcept { return pulse_rows_; }

  // Calls visit(row, node, values) once for every grid point of every selected
  // row, where values[c] is correlator c at that point. Within a row, nodes
  // arrive in increasing τ.
  template <class Visitor>
  void scan(const std::vector<Correlator>& cs, Visitor&& visit,
            RowSelection sel = RowSelection::All) const {
    const std::size_t nc = cs.size();
    if (nc == 0) return;
    const TimeGrid& tg = grid_.t_grid();
    const std::size_t nrows = tg.size(), P = pulse_rows_;
    const long LT = tg.end_lattice();
    const bool do_pulse = sel != RowSelection::StaticOnly && P > 0;
    const bool do_static = sel != RowSelection::PulseOnly && P < nrows;

    std::vector<Eigen::VectorXcd> b(nc);
    for (std::size_t c = 0; c < nc; ++c) b[c] = vec(cs[c].observable.transpose());

    // Explicit propagation of the pulse rows up to the end of the drive.
    std::vector<RowMat> after_pulse(nc);
    if (do_pulse) {
      std::vector<int> type_of;
      std::vector<std::size_t> type_rep;
      group_by_source(cs, type_of, type_rep);
      std::vector<RowMat> X(type_rep.size(), RowMat::Zero(sp_->vec_dim(), Eigen::Index(P)));
      DrivenStepper stepper(*L_);
      RowMat V;
      std::size_t started = 0;
      for (long L = 0;; ++L) {
        while (started < P && tg.lattice(started) == L) {
          for (std::size_t t = 0; t < type_rep.size(); ++t)
            X[t].col(Eigen::Index(started)) = source_vec(cs[type_rep[t]], started);
          ++started;
        }
        if (L >= pulse_end_) break;
        if (started > 0) {
          V.resize(Eigen::Index(started), Eigen::Index(nc));
          for (std::size_t c = 0; c < nc; ++c)
            V.col(Eigen::Index(c)) = X[type_of[c]].leftCols(Eigen::Index(started)).transpose() * b[c];
          for (std::size_t i = 0; i < started; ++i) {
            const long tau = L - tg.lattice(i);
            const long node = node_index(i, tau);
            if (node >= 0) visit(i, std::size_t(node), V.row(Eigen::Index(i)).data());
          }
          const double t = static_cast<double>(L) * tg.unit();
          for (auto& x : X)
            stepper.step(x.leftCols(Eigen::Index(started)), t, tg.unit(), opt_.integrator.driven_step_phase);
        }
      }
      for (std::size_t c = 0; c < nc; ++c) after_pulse[c] = X[type_of[c]];
    }

    // Static evolution: sweep the lattice offset d once, carrying the
    // Heisenberg-picture observables w_c(d) = M(d)^T vec(B_c^T).
    std::vector<char> need(std::size_t(LT) + 1, 0);
    const std::size_t s0 = P;
    if (do_static) {
      const long emax = grid_.row_end(s0);
      for (std::size_t k = 0; k < tg.size() && tg.lattice(k) < emax; ++k) need[tg.lattice(k)] = 1;
      for (std::size_t i = s0; i < nrows; ++i) need[grid_.row_end(i)] = 1;
    }
    if (do_pulse) {
      for (std::size_t i = 0; i < P; ++i) {
        const long s = pulse_end_ - tg.lattice(i), e = grid_.row_end(i);
        for (std::size_t k = tg.count_below(s); k < tg.size() && tg.lattice(k) < e; ++k)
          need[tg.lattice(k) - s] = 1;
        need[e - s] = 1;
      }
    }

    struct Channel {
      std::vector<int> blocks;
      std::vector<int> idx;
      Eigen::MatrixXcd sig_static;  // rows s0.., columns idx
      Eigen::MatrixXcd sig_pulse;
      Eigen::VectorXcd w;
      Eigen::VectorXcd wsub;
      bool zero = false;
    };
    std::vector<Channel> ch(nc);
    for (std::size_t c = 0; c < nc; ++c) {
      Channel& C = ch[c];
      std::vector<char> hit(sp_->blocks().size(), 0);
      std::vector<Eigen::VectorXcd> src;
      if (do_static) {
        src.reserve(nrows - s0);
        for (std::size_t i = s0; i < nrows; ++i) {
          src.push_back(source_vec(cs[c], i));
          mark_support(src.back(), hit);
        }
      }
      if (do_pulse)
        for (std::size_t i = 0; i < P; ++i)
          mark_support(after_pulse[c].col(Eigen::Index(i)), hit);
      bool any = false;
      for (std::size_t blk = 0; blk < hit.size(); ++blk) {
        if (!hit[blk]) continue;
        C.blocks.push_back(int(blk));
        for (int k : sp_->blocks()[blk].idx) {
          C.idx.push_back(k);
          if (b[c](k) != cplx(0.0)) any = true;
        }
      }
      std::sort(C.idx.begin(), C.idx.end());
      C.zero = !any;
      const Eigen::Index m = Eigen::Index(C.idx.size());
      if (do_static) {
        C.sig_static.resize(Eigen::Index(nrows - s0), m);
        for (std::size_t r = 0; r < src.size(); ++r)
          for (Eigen::Index k = 0; k < m; ++k) C.sig_static(Eigen::Index(r), k) = src[r](C.idx[k]);
      }
      if (do_pulse) {
        C.sig_pulse.resize(Eigen::Index(P), m);
        for (std::size_t i = 0; i < P; ++i)
          for (Eigen::Index k = 0; k < m; ++k)
            C.sig_pulse(Eigen::Index(i), k) = after_pulse[c](C.idx[k], Eigen::Index(i));
      }
      C.w = b[c];
      C.wsub.resize(m);
    }
    after_pulse.clear();

    RowMat V;
    std::vector<cplx> one(nc);
    long cur = 0;
    for (long d = 0; d <= LT; ++d) {
      if (!need[d]) continue;
      for (auto& C : ch) {
        if (C.zero) continue;
        sp_->advance(C.w, d - cur, C.blocks, true);
        for (Eigen::Index k = 0; k < C.wsub.size(); ++k) C.wsub(k) = C.w(C.idx[k]);
      }
      cur = d;

      if (do_static) {
        if (tg.find(d) >= 0) {
          const std::size_t cut = tg.count_below(LT - d);
          if (cut > s0) {
            const Eigen::Index nact = Eigen::Index(cut - s0);
            V.resize(nact, Eigen::Index(nc));
            for (std::size_t c = 0; c < nc; ++c) {
              if (ch[c].zero)
                V.col(Eigen::Index(c)).setZero();
              else
                V.col(Eigen::Index(c)).noalias() = ch[c].sig_static.topRows(nact) * ch[c].wsub;
            }
            const std::size_t node = std::size_t(tg.find(d));
            for (Eigen::Index r = 0; r < nact; ++r) visit(s0 + std::size_t(r), node, V.row(r).data());
          }
        }
        const long row = tg.find(LT - d);
        if (row >= long(s0)) {
          for (std::size_t c = 0; c < nc; ++c)
            one[c] = ch[c].zero ? cplx(0.0) : row_dot(ch[c].sig_static, std::size_t(row) - s0, ch[c].wsub);
          visit(std::size_t(row), grid_.row_global_count(std::size_t(row)), one.data());
        }
      }
      if (do_pulse) {
        for (std::size_t i = 0; i < P; ++i) {
          const long tau = d + pulse_end_ - tg.lattice(i);
          const long node = node_index(i, tau);
          if (node < 0) continue;
          for (std::size_t c = 0; c < nc; ++c)
            one[c] = ch[c].zero ? cplx(0.0) : row_dot(ch[c].sig_pulse, i, ch[c].wsub);
          visit(i, std::size_t(node), one.data());
        }
      }
    }
  }

  // ∫ G_c(t_i, τ) dτ over each row (trapezoid on the row's nodes); rows x correlators.
  Eigen::MatrixXcd row_integrals(const std::vector<Correlator>& cs) const {
    const std::size_t nc = cs.size();
    const TimeGrid& tg = grid_.t_grid();
    const std::size_t nrows = tg.size(), P = pulse_rows_;
    Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(Eigen::Index(nrows), Eigen::Index(nc));
    if (nc == 0) return out;
    if (P > 0)
      scan(
          cs,
          [&](std::size_t i, std::size_t j, const cplx* v) {
            const double w = grid_.tau_weight(i, j);
            for (std::size_t c = 0; c < nc; ++c) out(Eigen::Index(i), Eigen::Index(c)) += w * v[c];
          },
          RowSelection::PulseOnly);
    if (P >= nrows) return out;

    // Static rows share the global τ nodes, so the weighted sum of Heisenberg
    // observables is a running prefix completed by each row's last interval.
    const long LT = tg.end_lattice();
    const double unit = tg.unit();
    const long emax = grid_.row_end(P);
    for (std::size_t c = 0; c < nc; ++c) {
      const Eigen::VectorXcd bc = vec(cs[c].observable.transpose());
      std::vector<Eigen::VectorXcd> src;
      src.reserve(nrows - P);
      std::vector<char> hit(sp_->blocks().size(), 0);
      for (std::size_t i = P; i < nrows; ++i) {
        src.push_back(source_vec(cs[c], i));
        mark_support(src.back(), hit);
      }
      std::vector<int> blocks;
      for (std::size_t blk = 0; blk < hit.size(); ++blk)
        if (hit[blk]) blocks.push_back(int(blk));
      Eigen::VectorXcd w = bc, prefix = Eigen::VectorXcd::Zero(bc.size()), wlast;
      long xlast = -1, cur = 0;
      for (long d = 0; d <= emax; ++d) {
        const bool node = d < emax && tg.find(d) >= 0;
        const long row = tg.find(LT - d);
        const bool end = row >= long(P);
        if (!node && !end) continue;
        sp_->advance(w, d - cur, blocks, true);
        cur = d;
        if (end && xlast >= 0) {
          const Eigen::VectorXcd acc = prefix + (0.5 * double(d - xlast) * unit) * (wlast + w);
          out(row, Eigen::Index(c)) = (src[std::size_t(row) - P].array() * acc.array()).sum();
        }
        if (node) {
          if (xlast >= 0) prefix += (0.5 * double(d - xlast) * unit) * (wlast + w);
          wlast = w;
          xlast = d;
        }
      }
    }
    return out;
  }

  CorrelationMap evaluate(const Correlator& c) const {
    CorrelationMap m{grid_, std::vector<cplx>(grid_.total_points(), cplx(0.0))};
    scan({c}, [&](std::size_t i, std::size_t j, const cplx* v) { m(i, j) = v[0]; });
    return m;
  }

 private:
  static Eigen::VectorXcd vec(const Operator& m) {
    return Eigen::Map<const Eigen::VectorXcd>(m.data(), m.size());
  }

  Eigen::VectorXcd source_vec(const Correlator& c, std::size_t row) const {
    const Operator s = c.left * tr_->rho(row) * c.right;
    return vec(s);
  }

  template <class V>
  void mark_support(const V& v, std::vector<char>& hit) const {
    for (Eigen::Index k = 0; k < v.size(); ++k)
      if (v(k) != cplx(0.0)) hit[sp_->block_of(k)] = 1;
  }

  static cplx row_dot(const Eigen::MatrixXcd& sig, std::size_t r, const Eigen::VectorXcd& w) {
    return (sig.row(Eigen::Index(r)).transpose().array() * w.array()).sum();
  }

  // Position of lattice offset tau within row i, or -1 if tau is not one of its nodes.
  long node_index(std::size_t i, long tau) const {
    const long e = grid_.row_end(i);
    if (tau == e) return long(grid_.row_global_count(i));
    if (tau > e) return -1;
    return grid_.t_grid().find(tau);
  }

  static void group_by_source(const std::vector<Correlator>& cs, std::vector<int>& type_of,
                              std::vector<std::size_t>& rep) {
    type_of.assign(cs.size(), -1);
    for (std::size_t c = 0; c < cs.size(); ++c) {
      for (std::size_t t = 0; t < rep.size(); ++t) {
        const Correlator& r = cs[rep[t]];
        if (r.left == cs[c].left && r.right == cs[c].right) {
          type_of[c] = int(t);
          break;
        }
      }
      if (type_of[c] < 0) {
        type_of[c] = int(rep.size());
        rep.push_back(c);
      }
    }
  }

  const Liouvillian* L_;
  const Trajectory* tr_;
  TwoTimeGrid grid_;
  EngineOptions opt_;
  std::shared_ptr<const StaticPropagator> sp_;
  long pulse_end_ = 0;
  std::size_t pulse_rows_ = 0;
};

inline CorrelationMap g1(const CorrelationEngine& e, const Operator& a) {
  return e.evaluate(first_order(a));
}

inline CorrelationMap g2(const CorrelationEngine& e, const Operator& a, const Operator& b) {
  return e.evaluate(second_order(a, b));
}

// ∫_0^T dt ∫_0^{T-t} dτ f(t, τ) with the grid's trapezoid weights.
inline cplx double_integral(const CorrelationMap& m) {
  cplx total = 0.0;
  for (std::size_t i = 0; i < m.rows(); ++i) {
    cplx row = 0.0;
    for (std::size_t j = 0; j < m.row_size(i); ++j) row += m.grid.tau_weight(i, j) * m(i, j);
    total += m.grid.t_weight(i) * row;
  }
  return total;
}

template <class F>
double double_integral(const TwoTimeGrid& g, F&& f) {
  double total = 0.0;
  for (std::size_t i = 0; i < g.rows(); ++i) {
    const double t = g.t_grid().time(i);
    double row = 0.0;
    for (std::size_t j = 0; j < g.row_size(i); ++j) row += g.tau_weight(i, j) * f(t, g.tau(i, j));
    total += g.t_weight(i) * row;
  }
  return total;
}

}  // namespace qdc
