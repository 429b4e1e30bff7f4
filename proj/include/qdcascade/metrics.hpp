#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qdcascade/cascade_model.hpp"
#include "qdcascade/correlation.hpp"
#include "qdcascade/errors.hpp"
#include "qdcascade/propagator.hpp"

namespace qdc {

inline constexpr double kMetricSlack = 1e-3;
inline constexpr double kZeroEmission = 1e-12;
inline constexpr double kTailPopulation = 1e-3;

using TwoPhotonDensityMatrix = Eigen::Matrix4cd;

struct PhotonMetrics {
  double I_X = 0.0, I_XX = 0.0;
  double V_X = 0.0, V_XX = 0.0;
  double C = 0.0;
  double G2bar_X = 0.0, G2bar_XX = 0.0;
  double fom = 0.0;
  TwoPhotonDensityMatrix rho2ph = TwoPhotonDensityMatrix::Zero();
  double tail_population = 0.0;
  bool tail_warning = false;
  double max_trace_error = 0.0;
  double min_eigenvalue = 0.0;
};

inline double checked_unit_interval(const std::string& what, double x) {
  if (!std::isfinite(x) || x < -kMetricSlack || x > 1.0 + kMetricSlack) throw OutOfRange(what, x);
  return x;
}

inline double analytic_visibility(double r) {
  if (!(r > 0.0)) throw std::invalid_argument("analytic_visibility needs r > 0");
  return r / (1.0 + r);
}

// Per-row τ-integrals for one emission channel a; everything the visibility and
// the HOM formula need. Index i runs over the t grid.
struct ChannelIntegrals {
  std::vector<double> n;          // <a†a>(t_i)
  std::vector<cplx> a;            // <a>(t_i)
  std::vector<double> n_delayed;  // ∫ <a†a>(t_i+τ) dτ
  std::vector<double> g2;         // ∫ G2(t_i,τ) dτ
  std::vector<double> g1_abs2;    // ∫ |G1(t_i,τ)|² dτ
  std::vector<double> a_abs2;     // ∫ |<a>(t_i+τ)|² dτ
};

inline double visibility(const ChannelIntegrals& ch, const std::vector<double>& t_weights) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < t_weights.size(); ++i) {
    num += t_weights[i] * ch.g1_abs2[i];
    den += t_weights[i] * ch.n[i];
  }
  if (den < kZeroEmission) throw ZeroEmission("visibility: no emission in channel");
  return 2.0 * num / (den * den);
}

inline double indistinguishability(const ChannelIntegrals& ch, const std::vector<double>& t_weights) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < t_weights.size(); ++i) {
    const double w = t_weights[i];
    num += w * (ch.n[i] * ch.n_delayed[i] + ch.g2[i] - ch.g1_abs2[i]);
    den += w * (2.0 * ch.n[i] * ch.n_delayed[i] - std::norm(ch.a[i]) * ch.a_abs2[i]);
  }
  if (std::abs(den) < kZeroEmission) throw ZeroEmission("indistinguishability: no emission in channel");
  return checked_unit_interval("indistinguishability", 1.0 - num / den);
}

inline double visibility(const CorrelationMap& g1_map) {
  const TwoTimeGrid& g = g1_map.grid;
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < g.rows(); ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < g.row_size(i); ++j) row += g.tau_weight(i, j) * std::norm(g1_map(i, j));
    num += g.t_weight(i) * row;
    den += g.t_weight(i) * g1_map(i, 0).real();
  }
  if (den < kZeroEmission) throw ZeroEmission("visibility: no emission in channel");
  return 2.0 * num / (den * den);
}

// Full-map inputs for the HOM formula.
struct ChannelMaps {
  std::vector<double> n;     // <a†a>(t)
  std::vector<cplx> a;       // <a>(t)
  CorrelationMap n_delayed;  // <a†a>(t+τ)
  CorrelationMap a_delayed;  // <a>(t+τ)
  CorrelationMap g1;
  CorrelationMap g2;
};

inline double indistinguishability(const ChannelMaps& m) {
  const TwoTimeGrid& g = m.g1.grid;
  if (!(m.g2.grid == g) || !(m.n_delayed.grid == g) || !(m.a_delayed.grid == g) ||
      m.n.size() != g.rows() || m.a.size() != g.rows())
    throw GridMismatch("indistinguishability inputs live on different grids");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < g.rows(); ++i) {
    double rn = 0.0, rd = 0.0;
    for (std::size_t j = 0; j < g.row_size(i); ++j) {
      const double w = g.tau_weight(i, j);
      const double nn = m.n[i] * m.n_delayed(i, j).real();
      rn += w * (nn + m.g2(i, j).real() - std::norm(m.g1(i, j)));
      rd += w * (2.0 * nn - std::norm(m.a_delayed(i, j) * std::conj(m.a[i])));
    }
    num += g.t_weight(i) * rn;
    den += g.t_weight(i) * rd;
  }
  if (std::abs(den) < kZeroEmission) throw ZeroEmission("indistinguishability: no emission in channel");
  return checked_unit_interval("indistinguishability", 1.0 - num / den);
}

// C = max(0, λ1 - λ2 - λ3 - λ4), λ the descending square roots of the
// eigenvalues of ρ (σy⊗σy) ρ* (σy⊗σy), computed through √ρ ρ̃ √ρ.
inline double concurrence(const TwoPhotonDensityMatrix& rho) {
  Eigen::Matrix4cd yy = Eigen::Matrix4cd::Zero();
  yy(0, 3) = -1.0;
  yy(1, 2) = 1.0;
  yy(2, 1) = 1.0;
  yy(3, 0) = -1.0;
  const Eigen::Matrix4cd h = 0.5 * (rho + rho.adjoint());
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4cd> es(h);
  const Eigen::Vector4d ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  const Eigen::Matrix4cd sq = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().adjoint();
  const Eigen::Matrix4cd tilde = yy * h.conjugate() * yy;
  const Eigen::Matrix4cd r = sq * tilde * sq;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4cd> er(0.5 * (r + r.adjoint()), Eigen::EigenvaluesOnly);
  std::array<double, 4> l;
  for (int k = 0; k < 4; ++k) l[k] = std::sqrt(std::max(0.0, er.eigenvalues()(k)));
  std::sort(l.begin(), l.end(), std::greater<>());
  return std::max(0.0, l[0] - l[1] - l[2] - l[3]);
}

// Unit trace, Hermitized.
inline TwoPhotonDensityMatrix normalize_two_photon(const TwoPhotonDensityMatrix& raw) {
  const double tr = raw.trace().real();
  if (!(std::abs(tr) >= kZeroEmission)) throw ZeroEmission("two-photon density matrix has zero trace");
  const TwoPhotonDensityMatrix r = raw / tr;
  return 0.5 * (r + r.adjoint());
}

struct Channels {
  Operator xx[2];  // a_XX,H and a_XX,V
  Operator x[2];   // a_X,H and a_X,V
};

inline Channels emission_channels(const HilbertSpace& s, bool x_includes_cavity) {
  Channels c;
  for (Mode m : {Mode::H, Mode::V}) {
    c.xx[int(m)] = emission_channel(s, ChannelKind::XX, m);
    c.x[int(m)] = emission_channel(s, ChannelKind::X, m, x_includes_cavity);
  }
  return c;
}

// The 16 polarization-resolved correlators, entry (2i+j, 2k+l) in the
// {HH, HV, VH, VV} basis, first letter the XX photon.
inline std::vector<Correlator> two_photon_correlators(const Channels& ch, ConcurrenceOrder order) {
  std::vector<Correlator> cs;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      for (int k = 0; k < 2; ++k)
        for (int l = 0; l < 2; ++l) {
          if (order == ConcurrenceOrder::Cascade)
            cs.push_back(fourth_order(ch.xx[i], ch.x[j], ch.x[l], ch.xx[k]));
          else
            cs.push_back(fourth_order(ch.x[j], ch.xx[i], ch.xx[k], ch.x[l]));
        }
  return cs;
}

inline TwoPhotonDensityMatrix two_photon_dm(const CorrelationEngine& e, const Channels& ch,
                                            ConcurrenceOrder order = ConcurrenceOrder::Cascade) {
  const auto cs = two_photon_correlators(ch, order);
  const Eigen::MatrixXcd rows = e.row_integrals(cs);
  const auto& tw = e.grid().t_grid().weights();
  TwoPhotonDensityMatrix raw;
  for (int a = 0; a < 16; ++a) {
    cplx s = 0.0;
    for (std::size_t i = 0; i < tw.size(); ++i) s += tw[i] * rows(Eigen::Index(i), a);
    raw(a / 4, a % 4) = s;
  }
  return normalize_two_photon(raw);
}

// Row integrals for the visibility and HOM formula for each channel.
inline std::vector<ChannelIntegrals> channel_integrals(const CorrelationEngine& e,
                                                       const std::vector<Operator>& channels) {
  const std::size_t nch = channels.size();
  const std::size_t rows = e.grid().rows();
  std::vector<ChannelIntegrals> out(nch);
  std::vector<Correlator> linear, pair;
  for (const auto& a : channels) {
    linear.push_back(second_order(a, a));
    linear.push_back(delayed_expectation(a.adjoint() * a));
    pair.push_back(first_order(a));
    pair.push_back(delayed_expectation(a));
  }
  const Eigen::MatrixXcd lin = e.row_integrals(linear);
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(Eigen::Index(rows), Eigen::Index(pair.size()));
  const TwoTimeGrid& g = e.grid();
  e.scan(pair, [&](std::size_t i, std::size_t j, const cplx* v) {
    const double w = g.tau_weight(i, j);
    for (std::size_t c = 0; c < pair.size(); ++c) acc(Eigen::Index(i), Eigen::Index(c)) += w * std::norm(v[c]);
  });
  const Trajectory& tr = e.trajectory();
  for (std::size_t c = 0; c < nch; ++c) {
    ChannelIntegrals& ci = out[c];
    const Operator& a = channels[c];
    const Operator n_op = a.adjoint() * a;
    ci.n.resize(rows);
    ci.a.resize(rows);
    ci.n_delayed.resize(rows);
    ci.g2.resize(rows);
    ci.g1_abs2.resize(rows);
    ci.a_abs2.resize(rows);
    for (std::size_t i = 0; i < rows; ++i) {
      ci.n[i] = (n_op * tr.rho(i)).trace().real();
      ci.a[i] = (a * tr.rho(i)).trace();
      ci.g2[i] = lin(Eigen::Index(i), Eigen::Index(2 * c)).real();
      ci.n_delayed[i] = lin(Eigen::Index(i), Eigen::Index(2 * c + 1)).real();
      ci.g1_abs2[i] = acc(Eigen::Index(i), Eigen::Index(2 * c));
      ci.a_abs2[i] = acc(Eigen::Index(i), Eigen::Index(2 * c + 1));
    }
  }
  return out;
}

// Remaining excitation at the end of the window: 1 - <G,0,0|ρ(T)|G,0,0>.
inline double tail_population(const Trajectory& tr, const HilbertSpace& s) {
  const Operator& r = tr.rho(tr.size() - 1);
  const int g = s.index(Level::G, 0, 0);
  return 1.0 - r(g, g).real();
}

struct BundleOptions {
  IntegratorOptions integrator;
};

inline PhotonMetrics metrics_bundle(const ValidatedConfig& vc, const BundleOptions& bo = {}) {
  const CascadeModel model(vc);
  const auto sp = std::make_shared<StaticPropagator>(model.liouvillian, model.grid.unit(),
                                                     model.grid.ratio(), bo.integrator.max_step_phase);
  const Trajectory tr = propagate(model.liouvillian, model.rho0, model.grid, *sp, bo.integrator);
  const TwoTimeGrid grid(model.grid);
  EngineOptions eo;
  eo.freeze_pulse_in_tau = vc.config.options.freeze_pulse_in_tau;
  eo.integrator = bo.integrator;
  const CorrelationEngine engine(model.liouvillian, tr, grid, eo, sp);

  const Channels ch = emission_channels(model.space, vc.config.options.x_channel_includes_cavity);
  const auto ci = channel_integrals(engine, {ch.x[0], ch.xx[0]});
  const auto& tw = grid.t_grid().weights();

  PhotonMetrics pm;
  pm.I_X = indistinguishability(ci[0], tw);
  pm.I_XX = indistinguishability(ci[1], tw);
  pm.V_X = checked_unit_interval("visibility X", visibility(ci[0], tw));
  pm.V_XX = checked_unit_interval("visibility XX", visibility(ci[1], tw));
  for (std::size_t i = 0; i < tw.size(); ++i) {
    pm.G2bar_X += tw[i] * ci[0].g2[i];
    pm.G2bar_XX += tw[i] * ci[1].g2[i];
  }
  pm.rho2ph = two_photon_dm(engine, ch, vc.config.options.concurrence_order);
  pm.C = checked_unit_interval("concurrence", concurrence(pm.rho2ph));
  pm.fom = pm.I_X * pm.I_XX * pm.C;
  pm.tail_population = tail_population(tr, model.space);
  pm.tail_warning = pm.tail_population > kTailPopulation;
  pm.max_trace_error = tr.max_trace_error;
  pm.min_eigenvalue = tr.min_eigenvalue;
  return pm;
}

inline PhotonMetrics metrics_bundle(const SystemConfig& c, const BundleOptions& bo = {}) {
  return metrics_bundle(validate(c), bo);
}

}  // namespace qdc
