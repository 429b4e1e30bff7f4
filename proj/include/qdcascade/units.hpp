#pragma once

// Energies are in µeV, times in ps. Rates are carried around as energies (ħγ)
// and converted to inverse picoseconds only where the equations of motion need them.

namespace qdc {

inline constexpr double kHbar = 658.2119569;  // µeV·ps

static_assert(kHbar > 0.0);

// ħγ [µeV] -> γ [1/ps]
constexpr double rate_of(double hbar_rate) { return hbar_rate / kHbar; }

// γ [1/ps] -> ħγ [µeV]
constexpr double energy_of(double rate) { return rate * kHbar; }

// 1/γ in ps for a rate given as ħγ.
constexpr double lifetime_of(double hbar_rate) { return kHbar / hbar_rate; }

}  // namespace qdc
