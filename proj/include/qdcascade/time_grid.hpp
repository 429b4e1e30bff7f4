#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "qdcascade/config.hpp"
#include "qdcascade/errors.hpp"

namespace qdc {

// All grid times are integer multiples of dt_fine ("lattice units"), so that
// t + τ and T - t land exactly on representable points.
class TimeGrid {
 public:
  TimeGrid() = default;

  explicit TimeGrid(const GridParams& g) : unit_(g.dt_fine) {
    const long ratio = std::lround(g.dt_coarse / g.dt_fine);
    const long fine_units = std::lround(g.fine_window / g.dt_fine);
    const long coarse_steps = std::lround((g.t_end - g.fine_window) / g.dt_coarse);
    if (ratio < 1 || fine_units < 1 || coarse_steps < 0 ||
        std::abs(ratio * g.dt_fine - g.dt_coarse) > 1e-9 * g.dt_coarse)
      throw GridMismatch("grid parameters are not commensurate with dt_fine");
    ratio_ = ratio;
    for (long k = 0; k <= fine_units; ++k) nodes_.push_back(k);
    for (long k = 1; k <= coarse_steps; ++k) nodes_.push_back(fine_units + k * ratio);
    build_weights();
  }

  // Arbitrary strictly increasing lattice nodes starting at 0.
  TimeGrid(double unit, std::vector<long> nodes, long ratio = 1)
      : unit_(unit), ratio_(ratio), nodes_(std::move(nodes)) {
    if (nodes_.empty() || nodes_.front() != 0) throw GridMismatch("grid must start at t = 0");
    for (std::size_t i = 1; i < nodes_.size(); ++i)
      if (nodes_[i] <= nodes_[i - 1]) throw GridMismatch("grid nodes must be increasing");
    build_weights();
  }

  double unit() const noexcept { return unit_; }
  long ratio() const noexcept { return ratio_; }
  std::size_t size() const noexcept { return nodes_.size(); }
  const std::vector<long>& lattice() const noexcept { return nodes_; }
  long lattice(std::size_t i) const { return nodes_[i]; }
  long end_lattice() const { return nodes_.back(); }
  double time(std::size_t i) const { return static_cast<double>(nodes_[i]) * unit_; }
  double t_end() const { return time(size() - 1); }
  const std::vector<double>& weights() const noexcept { return weights_; }

  std::vector<double> times() const {
    std::vector<double> t(size());
    for (std::size_t i = 0; i < size(); ++i) t[i] = time(i);
    return t;
  }

  // Number of nodes strictly below lattice position L.
  std::size_t count_below(long L) const {
    return static_cast<std::size_t>(std::lower_bound(nodes_.begin(), nodes_.end(), L) -
                                    nodes_.begin());
  }

  // Index of the node at lattice position L, or -1.
  long find(long L) const {
    auto it = std::lower_bound(nodes_.begin(), nodes_.end(), L);
    if (it == nodes_.end() || *it != L) return -1;
    return static_cast<long>(it - nodes_.begin());
  }

  bool operator==(const TimeGrid& o) const {
    return unit_ == o.unit_ && nodes_ == o.nodes_;
  }

 private:
  void build_weights() {
    const std::size_t n = nodes_.size();
    weights_.assign(n, 0.0);
    for (std::size_t i = 0; i + 1 < n; ++i) {
      const double h = static_cast<double>(nodes_[i + 1] - nodes_[i]) * unit_;
      weights_[i] += 0.5 * h;
      weights_[i + 1] += 0.5 * h;
    }
  }

  double unit_ = 1.0;
  long ratio_ = 1;
  std::vector<long> nodes_;
  std::vector<double> weights_;
};

// Triangular t-τ domain. Row i (time t_i) uses the global τ nodes below
// E_i = T - t_i followed by E_i itself, with trapezoid weights.
class TwoTimeGrid {
 public:
  TwoTimeGrid() = default;
  explicit TwoTimeGrid(const GridParams& g) : t_(g) { init(); }
  explicit TwoTimeGrid(TimeGrid t) : t_(std::move(t)) { init(); }

  const TimeGrid& t_grid() const noexcept { return t_; }
  const TimeGrid& tau_nodes() const noexcept { return t_; }
  std::size_t rows() const noexcept { return t_.size(); }
  double unit() const noexcept { return t_.unit(); }

  long row_end(std::size_t i) const { return t_.end_lattice() - t_.lattice(i); }
  // Global τ nodes used by row i (all strictly below the row end).
  std::size_t row_global_count(std::size_t i) const { return below_[i]; }
  std::size_t row_size(std::size_t i) const { return below_[i] + 1; }

  long tau_lattice(std::size_t i, std::size_t j) const {
    return j < below_[i] ? t_.lattice(j) : row_end(i);
  }
  double tau(std::size_t i, std::size_t j) const {
    return static_cast<double>(tau_lattice(i, j)) * t_.unit();
  }

  double tau_weight(std::size_t i, std::size_t j) const {
    const std::size_t m = below_[i];
    if (m == 0) return 0.0;
    const long prev = j == 0 ? tau_lattice(i, 0) : tau_lattice(i, j - 1);
    const long next = j == m ? tau_lattice(i, m) : tau_lattice(i, j + 1);
    return 0.5 * static_cast<double>(next - prev) * t_.unit();
  }

  std::vector<double> row_taus(std::size_t i) const {
    std::vector<double> v(row_size(i));
    for (std::size_t j = 0; j < v.size(); ++j) v[j] = tau(i, j);
    return v;
  }
  std::vector<double> row_weights(std::size_t i) const {
    std::vector<double> v(row_size(i));
    for (std::size_t j = 0; j < v.size(); ++j) v[j] = tau_weight(i, j);
    return v;
  }

  double t_weight(std::size_t i) const { return t_.weights()[i]; }
  std::size_t total_points() const { return offsets_.back(); }
  // Start of row i in a flat row-major layout.
  std::size_t row_offset(std::size_t i) const { return offsets_[i]; }

  bool operator==(const TwoTimeGrid& o) const { return t_ == o.t_; }

 private:
  void init() {
    below_.resize(t_.size());
    offsets_.assign(t_.size() + 1, 0);
    for (std::size_t i = 0; i < t_.size(); ++i) {
      below_[i] = t_.count_below(row_end(i));
      offsets_[i + 1] = offsets_[i] + below_[i] + 1;
    }
  }

  TimeGrid t_;
  std::vector<std::size_t> below_;
  std::vector<std::size_t> offsets_;
};

}  // namespace qdc
