#pragma once

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "qdcascade/config.hpp"
#include "qdcascade/density_matrix.hpp"
#include "qdcascade/hilbert_space.hpp"
#include "qdcascade/liouvillian.hpp"
#include "qdcascade/time_grid.hpp"

namespace qdc {

// Pulses are switched off this many widths after their center.
inline constexpr double kPulseCutoffWidths = 8.0;

// Rabi frequency [1/ps]. Its modulus integrates to area·π.
inline cplx pulse_envelope(const PulseParams& p, double frame_reference, double t) {
  if (!p.laser_energy) throw std::invalid_argument("pulse_envelope needs a laser energy");
  if (p.area == 0.0) return 0.0;
  const double x = (t - p.center_t0) / p.width_tau;
  const double amp = p.area * std::numbers::pi / (std::sqrt(2.0 * std::numbers::pi) * p.width_tau) *
                     std::exp(-0.5 * x * x);
  const double phase = -(*p.laser_energy - frame_reference) * t / kHbar;
  return std::polar(amp, phase);
}

inline cplx pulse_envelope(const ValidatedConfig& vc, double t) {
  return pulse_envelope(vc.config.pulse, vc.frame_reference, t);
}

// Time-independent part of H in the frame rotating at the cavity energy.
inline Operator static_hamiltonian(const ValidatedConfig& vc, const HilbertSpace& s) {
  const double ref = vc.frame_reference;
  const double level_energy[4] = {0.0, vc.E_XH - ref, vc.E_XV - ref, vc.E_XX - 2.0 * ref};
  const double photon_energy = vc.E_cavity - ref;
  Operator h = Operator::Zero(s.dim(), s.dim());
  for (int k = 0; k < s.dim(); ++k)
    h(k, k) = level_energy[static_cast<int>(s.level_of(k))] +
              photon_energy * (s.n_h_of(k) + s.n_v_of(k));
  const auto& cav = vc.config.cavity;
  if (cav.enabled && cav.hbar_g != 0.0) {
    for (Mode m : {Mode::H, Mode::V}) {
      const Level x = exciton_of(m);
      const Operator bd = annihilator(s, m).adjoint();
      const Operator c = projector(s, Level::G, x) * bd + projector(s, x, Level::XX) * bd;
      h += cav.hbar_g * (c + Operator(c.adjoint()));
    }
  }
  return h;
}

// Laser couplings |G><X_i| + |X_i><XX| with their amplitudes ħΩ_i(t)/2.
inline std::vector<DriveTerm> pulse_drives(const ValidatedConfig& vc, const HilbertSpace& s) {
  const auto& p = vc.config.pulse;
  std::vector<DriveTerm> out;
  if (!p.enabled || p.area == 0.0) return out;
  const double theta = p.polarization_angle_deg * std::numbers::pi / 180.0;
  const double weights[2] = {std::cos(theta), std::sin(theta)};
  for (Mode m : {Mode::H, Mode::V}) {
    const double w = weights[static_cast<int>(m)];
    if (std::abs(w) < 1e-15) continue;
    const Level x = exciton_of(m);
    DriveTerm d;
    d.coupling = projector(s, Level::G, x) + projector(s, x, Level::XX);
    const PulseParams pulse = p;
    const double ref = vc.frame_reference;
    d.amplitude = [pulse, ref, w](double t) { return 0.5 * kHbar * w * pulse_envelope(pulse, ref, t); };
    d.label = m == Mode::H ? "pulse_H" : "pulse_V";
    out.push_back(std::move(d));
  }
  return out;
}

inline double pulse_end_time(const ValidatedConfig& vc) {
  const auto& p = vc.config.pulse;
  if (!p.enabled || p.area == 0.0) return 0.0;
  return std::max(0.0, p.center_t0 + kPulseCutoffWidths * p.width_tau);
}

inline Operator build_hamiltonian(const ValidatedConfig& vc, const HilbertSpace& s, double t) {
  Operator h = static_hamiltonian(vc, s);
  if (t < pulse_end_time(vc))
    for (const auto& d : pulse_drives(vc, s)) {
      const cplx a = d.amplitude(t);
      h += a * d.coupling + std::conj(a) * d.coupling.adjoint();
    }
  return h;
}

inline std::vector<CollapseOp> collapse_set(const ValidatedConfig& vc, const HilbertSpace& s) {
  const auto& el = vc.config.electronic;
  const double xx_channel = 0.5 * el.xx_rate_ratio * el.hbar_gamma_rad;
  std::vector<CollapseOp> c;
  c.push_back({projector(s, Level::XH, Level::XX), xx_channel, "XX->X_H"});
  c.push_back({projector(s, Level::XV, Level::XX), xx_channel, "XX->X_V"});
  c.push_back({projector(s, Level::G, Level::XH), el.hbar_gamma_rad, "X_H->G"});
  c.push_back({projector(s, Level::G, Level::XV), el.hbar_gamma_rad, "X_V->G"});
  if (vc.config.cavity.enabled) {
    c.push_back({annihilator(s, Mode::H), vc.config.cavity.hbar_kappa, "cavity_H"});
    c.push_back({annihilator(s, Mode::V), vc.config.cavity.hbar_kappa, "cavity_V"});
  }
  if (vc.config.dephasing.enabled) {
    const double g = vc.config.dephasing.hbar_gamma_deph;
    c.push_back({projector(s, Level::XH, Level::XH), g, "dephasing_X_H"});
    c.push_back({projector(s, Level::XV, Level::XV), g, "dephasing_X_V"});
    c.push_back({projector(s, Level::XX, Level::XX), g, "dephasing_XX"});
  }
  return c;
}

inline Liouvillian make_liouvillian(const ValidatedConfig& vc, const HilbertSpace& s) {
  return Liouvillian(static_hamiltonian(vc, s), collapse_set(vc, s), pulse_drives(vc, s),
                     vc.frame_reference, pulse_end_time(vc));
}

inline DensityMatrix initial_density(const ValidatedConfig& vc, const HilbertSpace& s) {
  switch (vc.config.initial_state) {
    case InitialState::Ground: return DensityMatrix::basis(s, Level::G);
    case InitialState::Biexciton: return DensityMatrix::basis(s, Level::XX);
    case InitialState::ExcitonH: return DensityMatrix::basis(s, Level::XH);
  }
  return DensityMatrix::basis(s, Level::G);
}

// Everything needed to integrate one configuration.
struct CascadeModel {
  ValidatedConfig vc;
  HilbertSpace space;
  Liouvillian liouvillian;
  DensityMatrix rho0;
  TimeGrid grid;

  explicit CascadeModel(const ValidatedConfig& v)
      : vc(v),
        space(build_space(v)),
        liouvillian(make_liouvillian(v, space)),
        rho0(initial_density(v, space)),
        grid(v.config.grid) {}
};

}  // namespace qdc
