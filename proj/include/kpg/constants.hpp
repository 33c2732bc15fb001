#pragma once

// Physical constants (2018 CODATA) and the internal unit system:
// length nm, energy meV, magnetic field tesla, voltage volt, time second.

namespace kpg::constants {

inline constexpr double hbar_si = 1.054571817e-34;   // J s
inline constexpr double m0_si = 9.1093837015e-31;    // kg
inline constexpr double e_si = 1.602176634e-19;      // C (exact)
inline constexpr double h_si = 6.62607015e-34;       // J s (exact)
inline constexpr double mu_b_si = 9.2740100783e-24;  // J/T

// hbar^2 / (2 m0) in meV nm^2  (~38.1)
inline constexpr double hbar2_over_2m0 =
    hbar_si * hbar_si / (2.0 * m0_si * e_si) * 1e3 * 1e18;

// Bohr magneton in meV/T (~5.788e-2)
inline constexpr double mu_b = mu_b_si / e_si * 1e3;

// Peierls phase prefactor e/hbar in rad / (T nm^2)
inline constexpr double e_over_hbar = e_si / hbar_si * 1e-18;

// Frequency equivalent of 1 meV: E/h in Hz (~241.8 GHz)
inline constexpr double mev_to_hz = e_si * 1e-3 / h_si;
inline constexpr double ghz_to_mev = 1e9 / mev_to_hz;

// 1 eV in meV, for deformation-potential inputs quoted in eV.
inline constexpr double ev_to_mev = 1e3;

// Bare electron gyromagnetic factor.
inline constexpr double g0 = 2.0023;

}  // namespace kpg::constants
