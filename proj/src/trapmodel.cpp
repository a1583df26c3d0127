#include "iontrap/trapmodel.hpp"

#include <cmath>

#include "iontrap/errors.hpp"
#include "iontrap/units.hpp"

namespace iontrap {

IonSpecies ion_from_amu(double mass_amu, double charge_e) {
    if (!(mass_amu > 0.0)) throw ConfigError("ion mass must be positive");
    if (charge_e == 0.0) throw ConfigError("ion charge must be nonzero");
    return {amu_to_kg(mass_amu), charge_e * kElementaryCharge};
}

static void check_zero_sum(double a, double b, double c, const char* which) {
    double sum = a + b + c;
    double scale = std::max({std::abs(a), std::abs(b), std::abs(c), 1e-300});
    if (std::abs(sum) > 1e-12 * scale)
        throw ConfigError(std::string("quadrupole coefficients violate Laplace constraint (") + which + ")");
}

QuadrupoleCoefficients make_quadrupole(double alpha_dc, double beta_dc, double gamma_dc,
                                       double alpha_rf, double beta_rf, double gamma_rf) {
    check_zero_sum(alpha_dc, beta_dc, gamma_dc, "dc");
    check_zero_sum(alpha_rf, beta_rf, gamma_rf, "rf");
    return {alpha_dc, beta_dc, gamma_dc, alpha_rf, beta_rf, gamma_rf};
}

QuadrupoleCoefficients linear_trap_quadrupole(double alpha_dc, double beta_rf) {
    return make_quadrupole(alpha_dc, -alpha_dc / 2.0, -alpha_dc / 2.0, 0.0, beta_rf, -beta_rf);
}

MathieuPair mathieu_parameters(const IonSpecies& ion, double u_rf, double u_dc, double omega_rf,
                               const QuadrupoleCoefficients& c) {
    if (!(omega_rf > 0.0)) throw ConfigError("omega_rf must be positive");
    if (!std::isfinite(u_rf) || !std::isfinite(u_dc)) throw ConfigError("non-finite drive voltage");
    double qa = std::abs(ion.charge);
    double denom = ion.mass * omega_rf * omega_rf;
    MathieuPair p;
    p.y.q = 2.0 * qa * u_rf * c.beta_rf / denom;
    p.y.a = -4.0 * qa * u_dc * c.beta_dc / denom;
    p.z.q = -2.0 * qa * u_rf * c.gamma_rf / denom;
    p.z.a = 4.0 * qa * u_dc * c.gamma_dc / denom;
    return p;
}

MathieuPair mathieu_parameters(const IonSpecies& ion, const TrapDrive& drive,
                               const QuadrupoleCoefficients& c) {
    if (drive.u_dc.size() != 1)
        throw ConfigError("quadrupole Mathieu analysis needs a single dc scale voltage");
    return mathieu_parameters(ion, drive.u_rf, drive.u_dc[0], drive.omega_rf, c);
}

MathieuParams mathieu_parameters_signed(const IonSpecies& ion, double u_rf, double u_dc,
                                        double omega_rf, double c_dc, double c_rf) {
    if (!(omega_rf > 0.0)) throw ConfigError("omega_rf must be positive");
    double denom = ion.mass * omega_rf * omega_rf;
    MathieuParams p;
    p.a = 4.0 * ion.charge * u_dc * c_dc / denom;
    p.q = -2.0 * ion.charge * u_rf * c_rf / denom;
    return p;
}

double secular_frequency(const MathieuParams& p, double omega_rf) {
    double beta2 = p.a + p.q * p.q / 2.0;
    if (beta2 < 0.0) throw NumericalError("unstable Mathieu parameters: a + q^2/2 < 0");
    return std::sqrt(beta2) * omega_rf / 2.0;
}

bool stability_region_check(const MathieuParams& p) {
    double beta2 = p.a + p.q * p.q / 2.0;
    return beta2 >= 0.0 && beta2 <= 1.0;
}

double axial_frequency(const IonSpecies& ion, double u_dc, double alpha_dc) {
    double rad = std::abs(ion.charge) * u_dc * alpha_dc / ion.mass;
    if (rad < 0.0) throw NumericalError("anti-trapping axial curvature: |q| U_dc alpha_dc < 0");
    return std::sqrt(rad);
}

double pseudopotential(const Vec3& grad_phi, const IonSpecies& ion, double omega_rf) {
    if (!(omega_rf > 0.0)) throw ConfigError("omega_rf must be positive");
    return std::abs(ion.charge) * dot(grad_phi, grad_phi) / (4.0 * ion.mass * omega_rf * omega_rf);
}

double lowest_order_orbit(double u0, double t, const MathieuParams& p, double omega_rf) {
    double wu = secular_frequency(p, omega_rf);
    return u0 * std::cos(wu * t) * (1.0 + 0.5 * p.q * std::cos(omega_rf * t));
}

double QuadrupolePotential::value(const Vec3& x, double t) const {
    double qdc = coeff.alpha_dc * x[0] * x[0] + coeff.beta_dc * x[1] * x[1] + coeff.gamma_dc * x[2] * x[2];
    double qrf = coeff.alpha_rf * x[0] * x[0] + coeff.beta_rf * x[1] * x[1] + coeff.gamma_rf * x[2] * x[2];
    return 0.5 * u_dc * qdc + 0.5 * u_rf * std::cos(omega_rf * t) * qrf;
}

Vec3 QuadrupolePotential::gradient(const Vec3& x, double t) const {
    double crf = std::cos(omega_rf * t);
    return {u_dc * coeff.alpha_dc * x[0] + u_rf * crf * coeff.alpha_rf * x[0],
            u_dc * coeff.beta_dc * x[1] + u_rf * crf * coeff.beta_rf * x[1],
            u_dc * coeff.gamma_dc * x[2] + u_rf * crf * coeff.gamma_rf * x[2]};
}

}  // namespace iontrap
