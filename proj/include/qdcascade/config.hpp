#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "qdcascade/errors.hpp"
#include "qdcascade/units.hpp"

namespace qdc {

// All energies in µeV, all times in ps.

struct ElectronicParams {
  double E_X = 800000.0;      // mean exciton energy
  double E_FSP = 2.0;         // fine-structure splitting, X_H/X_V at E_X ± E_FSP/2
  double E_Bind = 5000.0;     // biexciton binding energy, E_XX = 2 E_X - E_Bind
  double hbar_gamma_rad = 2.5;  // radiative rate of each X_i -> G channel
  // Total biexciton decay rate over exciton decay rate. Each XX -> X_i channel
  // decays at xx_rate_ratio/2 * gamma_rad, so 2.0 is the plain diamond system.
  double xx_rate_ratio = 2.0;

  bool operator==(const ElectronicParams&) const = default;
};

struct CavityParams {
  bool enabled = true;
  std::optional<double> E_cavity;  // defaults to E_XX - E_X
  double hbar_g = 200.0;
  double hbar_kappa = 3000.0;
  int n_max = 1;

  bool operator==(const CavityParams&) const = default;
};

struct PulseParams {
  bool enabled = false;
  double area = 1.0;        // in units of π
  double width_tau = 4.0;
  double center_t0 = 20.0;
  std::optional<double> laser_energy;  // defaults to two-photon resonance E_XX/2
  double polarization_angle_deg = 45.0;  // 0 drives H only, 90 drives V only

  bool operator==(const PulseParams&) const = default;
};

struct GridParams {
  double t_end = 1500.0;
  double fine_window = 200.0;
  double dt_fine = 0.1;
  double dt_coarse = 0.5;

  bool operator==(const GridParams&) const = default;
};

// Markovian pure-dephasing stand-in; not a phonon model.
struct DephasingParams {
  bool enabled = false;
  double hbar_gamma_deph = 0.0;

  bool operator==(const DephasingParams&) const = default;
};

enum class InitialState { Ground, Biexciton, ExcitonH };

enum class ConcurrenceOrder {
  Cascade,   // XX photon at t, X photon at t + τ
  Reversed,  // X photon at t, XX photon at t + τ
};

struct ModelOptions {
  // Adds b_i to the exciton emission channel. Not part of the published model.
  bool x_channel_includes_cavity = false;
  // Switches the drive off while propagating along τ.
  bool freeze_pulse_in_tau = false;
  ConcurrenceOrder concurrence_order = ConcurrenceOrder::Cascade;

  bool operator==(const ModelOptions&) const = default;
};

struct SystemConfig {
  ElectronicParams electronic;
  CavityParams cavity;
  PulseParams pulse;
  GridParams grid;
  DephasingParams dephasing;
  InitialState initial_state = InitialState::Biexciton;
  ModelOptions options;

  bool operator==(const SystemConfig&) const = default;
};

struct ValidatedConfig {
  SystemConfig config;  // optionals filled in
  double E_XX = 0.0;
  double E_XH = 0.0;
  double E_XV = 0.0;
  double E_cavity = 0.0;
  double laser_energy = 0.0;
  double Q = 0.0;
  // Rotating-frame reference; equal to the cavity energy.
  double frame_reference = 0.0;

  bool operator==(const ValidatedConfig&) const = default;
};

namespace detail {

inline bool is_multiple(double value, double step) {
  const double n = value / step;
  return std::abs(n - std::round(n)) <= 1e-9 * std::max(1.0, std::abs(n));
}

}  // namespace detail

inline ValidatedConfig validate(const SystemConfig& input) {
  std::vector<InvalidField> bad;
  auto require = [&](bool ok, const char* path, const char* reason) {
    if (!ok) bad.push_back({path, reason});
  };
  auto finite = [](double x) { return std::isfinite(x); };

  const auto& el = input.electronic;
  require(finite(el.E_X) && el.E_X > 0.0, "electronic.E_X", "must be positive");
  require(finite(el.E_FSP) && el.E_FSP >= 0.0, "electronic.E_FSP", "must be >= 0");
  require(finite(el.E_Bind), "electronic.E_Bind", "must be finite");
  require(finite(el.hbar_gamma_rad) && el.hbar_gamma_rad > 0.0, "electronic.hbar_gamma_rad",
          "must be positive");
  require(finite(el.xx_rate_ratio) && el.xx_rate_ratio > 0.0, "electronic.xx_rate_ratio",
          "must be positive");

  const auto& cav = input.cavity;
  require(finite(cav.hbar_g) && cav.hbar_g >= 0.0, "cavity.hbar_g", "must be >= 0");
  require(finite(cav.hbar_kappa) && cav.hbar_kappa > 0.0, "cavity.hbar_kappa", "must be positive");
  require(cav.n_max >= 1, "cavity.n_max", "photon truncation must be >= 1");
  require(cav.n_max <= 6, "cavity.n_max", "photon truncation above 6 is not supported");
  if (cav.E_cavity)
    require(finite(*cav.E_cavity) && *cav.E_cavity > 0.0, "cavity.E_cavity", "must be positive");

  const auto& pulse = input.pulse;
  require(finite(pulse.area) && pulse.area >= 0.0, "pulse.area", "must be >= 0");
  if (pulse.enabled)
    require(finite(pulse.width_tau) && pulse.width_tau > 0.0, "pulse.width_tau",
            "must be positive when the pulse is enabled");
  require(finite(pulse.center_t0), "pulse.center_t0", "must be finite");
  require(finite(pulse.polarization_angle_deg), "pulse.polarization_angle_deg", "must be finite");
  if (pulse.laser_energy)
    require(finite(*pulse.laser_energy) && *pulse.laser_energy > 0.0, "pulse.laser_energy",
            "must be positive");

  const auto& g = input.grid;
  const bool steps_ok = finite(g.dt_fine) && finite(g.dt_coarse) && g.dt_fine > 0.0 &&
                        g.dt_fine <= g.dt_coarse;
  require(steps_ok, "grid.dt_fine", "requires 0 < dt_fine <= dt_coarse");
  const bool window_ok = finite(g.fine_window) && finite(g.t_end) && g.fine_window > 0.0 &&
                         g.fine_window <= g.t_end;
  require(window_ok, "grid.fine_window", "requires 0 < fine_window <= t_end");
  if (steps_ok && window_ok) {
    require(detail::is_multiple(g.dt_coarse, g.dt_fine), "grid.dt_coarse",
            "must be an integer multiple of dt_fine");
    require(detail::is_multiple(g.fine_window, g.dt_fine), "grid.fine_window",
            "must be an integer multiple of dt_fine");
    require(detail::is_multiple(g.t_end - g.fine_window, g.dt_coarse), "grid.t_end",
            "t_end - fine_window must be an integer multiple of dt_coarse");
  }

  const auto& deph = input.dephasing;
  require(finite(deph.hbar_gamma_deph) && deph.hbar_gamma_deph >= 0.0, "dephasing.hbar_gamma_deph",
          "must be >= 0");

  if (!bad.empty()) throw ValidationError(std::move(bad));

  ValidatedConfig out;
  out.config = input;
  out.E_XX = 2.0 * el.E_X - el.E_Bind;
  out.E_XH = el.E_X + 0.5 * el.E_FSP;
  out.E_XV = el.E_X - 0.5 * el.E_FSP;
  out.E_cavity = cav.E_cavity.value_or(out.E_XX - el.E_X);
  out.laser_energy = pulse.laser_energy.value_or(el.E_X - 0.5 * el.E_Bind);
  out.config.cavity.E_cavity = out.E_cavity;
  out.config.pulse.laser_energy = out.laser_energy;
  out.Q = out.E_cavity / cav.hbar_kappa;
  out.frame_reference = out.E_cavity;
  return out;
}

// Per-channel rates in 1/ps.
inline double exciton_rate(const ValidatedConfig& vc) {
  return rate_of(vc.config.electronic.hbar_gamma_rad);
}
inline double biexciton_channel_rate(const ValidatedConfig& vc) {
  const auto& el = vc.config.electronic;
  return rate_of(0.5 * el.xx_rate_ratio * el.hbar_gamma_rad);
}

}  // namespace qdc
