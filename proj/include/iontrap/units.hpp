#pragma once
#include <cmath>

// Physical constants (SI, CODATA 2018) and the natural-unit scales used by
// the quantum modules. Classical modules work in plain SI; quantum modules
// set hbar = 1 and measure everything against a reference mass and frequency.
namespace iontrap {

constexpr double kElementaryCharge = 1.602176634e-19;    // C
constexpr double kAtomicMassUnit   = 1.66053906660e-27;  // kg
constexpr double kHbar             = 1.054571817e-34;    // J s
constexpr double kEpsilon0         = 8.8541878128e-12;   // F/m

constexpr double amu_to_kg(double m_amu) { return m_amu * kAtomicMassUnit; }

struct NaturalScales {
    double mass_kg;    // reference mass
    double omega_si;   // reference angular frequency, rad/s

    double length_m() const { return std::sqrt(kHbar / (mass_kg * omega_si)); }
    double time_s() const { return 1.0 / omega_si; }
    double energy_j() const { return kHbar * omega_si; }
};

}  // namespace iontrap
