#pragma once
#include <vector>

#include "iontrap/vec3.hpp"

// Ideal-quadrupole trap parametrization: rf/dc coefficient sets, Mathieu
// parameters, secular frequencies, pseudopotential.
namespace iontrap {

struct IonSpecies {
    double mass;    // kg
    double charge;  // C, signed
};

// mass in atomic mass units, charge in units of e
IonSpecies ion_from_amu(double mass_amu, double charge_e);

struct TrapDrive {
    double u_rf = 0.0;       // V, rf amplitude (half the peak-to-peak value)
    double omega_rf = 0.0;   // rad/s
    std::vector<double> u_dc;  // V per dc electrode
};

struct QuadrupoleCoefficients {
    double alpha_dc, beta_dc, gamma_dc;  // 1/m^2
    double alpha_rf, beta_rf, gamma_rf;  // 1/m^2
};

// Validates the two Laplace zero-sum constraints (1e-12 relative); throws
// ConfigError on violation.
QuadrupoleCoefficients make_quadrupole(double alpha_dc, double beta_dc, double gamma_dc,
                                       double alpha_rf, double beta_rf, double gamma_rf);

// Linear-trap choice: alpha_rf = 0, beta_rf = -gamma_rf, dc symmetric
// (beta_dc = gamma_dc = -alpha_dc / 2).
QuadrupoleCoefficients linear_trap_quadrupole(double alpha_dc, double beta_rf);

struct MathieuParams {
    double a;  // dimensionless
    double q;
};

struct MathieuPair {
    MathieuParams y;
    MathieuParams z;
};

// Textbook sign convention (written for a negative ion on the y axis):
//   q_y = +2|q| U_rf beta_rf  / (m w^2),  a_y = -4|q| U_dc beta_dc  / (m w^2)
//   q_z = -2|q| U_rf gamma_rf / (m w^2),  a_z = +4|q| U_dc gamma_dc / (m w^2)
// U_dc is the single scale voltage of the quadrupole form. Stability and
// secular frequencies built from these match a physical trajectory only up
// to the per-axis sign conventions; use mathieu_parameters_signed when the
// parameters must agree with the equation of motion for a signed charge.
MathieuPair mathieu_parameters(const IonSpecies& ion, double u_rf, double u_dc, double omega_rf,
                               const QuadrupoleCoefficients& c);
// convenience wrapper; drive.u_dc must hold exactly one entry (the scale voltage)
MathieuPair mathieu_parameters(const IonSpecies& ion, const TrapDrive& drive,
                               const QuadrupoleCoefficients& c);

// EOM-consistent parameters for a signed charge along one axis with dc
// curvature c_dc and rf curvature c_rf:
//   a = 4 q U_dc c_dc / (m w^2),  q_u = -2 q U_rf c_rf / (m w^2)
MathieuParams mathieu_parameters_signed(const IonSpecies& ion, double u_rf, double u_dc,
                                        double omega_rf, double c_dc, double c_rf);

// w_u = beta_u w_rf / 2 with beta_u = sqrt(a + q^2/2); throws NumericalError
// when a + q^2/2 < 0 (unstable parameters).
double secular_frequency(const MathieuParams& p, double omega_rf);

// lowest-order criterion 0 <= beta_u <= 1
bool stability_region_check(const MathieuParams& p);

// w_x = sqrt(|q| U_dc alpha_dc / m); throws NumericalError on a negative
// radicand (anti-trapping dc curvature).
double axial_frequency(const IonSpecies& ion, double u_dc, double alpha_dc);

// Phi_eff = |q| |grad Phi|^2 / (4 m w_rf^2), in V
double pseudopotential(const Vec3& grad_phi, const IonSpecies& ion, double omega_rf);

// lowest-order secular motion with micromotion envelope:
// u(t) = u0 cos(w_u t) (1 + (q_u/2) cos(w_rf t))
double lowest_order_orbit(double u0, double t, const MathieuParams& p, double omega_rf);

// Phi(x, t) for the ideal quadrupole form; gradient for force evaluation.
struct QuadrupolePotential {
    QuadrupoleCoefficients coeff;
    double u_dc = 0.0;     // V
    double u_rf = 0.0;     // V amplitude
    double omega_rf = 0.0; // rad/s

    double value(const Vec3& x, double t) const;
    Vec3 gradient(const Vec3& x, double t) const;
};

}  // namespace iontrap
