#pragma once
#include <complex>
#include <functional>
#include <vector>

#include <Eigen/Dense>

// 1D quantum dynamics on a uniform grid, in units with hbar = 1: Numerov
// shooting, Fourier-grid Hamiltonian diagonalization, split-operator and
// Chebyshev propagators.
namespace iontrap {

struct SpatialGrid {
    double x0 = 0.0;
    double dx = 1.0;
    int n = 0;

    double x(int i) const { return x0 + i * dx; }
    double length() const { return n * dx; }
    double k_max() const;  // pi / dx
};

// n must be even and positive
SpatialGrid make_grid(double x_min, double length, int n);

// smallest even N with N >= L sqrt(2 m V_max) / (beta pi); beta < 1 keeps the
// classical momentum at V_max below the grid Nyquist momentum
int optimal_grid_points(double length, double mass, double v_max, double beta = 0.9);

struct WaveFunction {
    SpatialGrid grid;
    std::vector<std::complex<double>> amp;
};

// inner products carry the dx quadrature weight
std::complex<double> inner_product(const WaveFunction& a, const WaveFunction& b);
double norm(const WaveFunction& wf);
void normalize(WaveFunction& wf);

// minimum-uncertainty Gaussian of an oscillator with frequency omega,
// centered at (x0, p0)
WaveFunction coherent_state(const SpatialGrid& grid, double mass, double omega, double x0,
                            double p0);

// raw two-term Numerov recursion for psi'' = g psi given the first two
// values; no rescaling or normalization is applied. Throws NumericalError if
// a step denominator 1 - dx^2 g / 12 is not positive (grid too coarse).
std::vector<double> numerov_integrate(const SpatialGrid& grid, const std::vector<double>& g,
                                      double psi0, double psi1);

// shooting eigenvalues of -psi''/(2m) + v psi = E psi: scan [e_lo, e_hi],
// bisect sign changes of the log-derivative mismatch at the rightmost
// classical turning point, reject mismatch poles. Throws NumericalError if
// fewer than n_states roots are found.
std::vector<double> numerov_eigenvalues(const SpatialGrid& grid, const std::vector<double>& v,
                                        double mass, int n_states, double e_lo, double e_hi,
                                        int scan_points = 200);
std::vector<double> numerov_eigenvalues(const SpatialGrid& grid, const std::vector<double>& v,
                                        double mass, int n_states);

// dense Fourier-grid Hamiltonian (kinetic part exact for band-limited
// states) plus diagonal potential
Eigen::MatrixXd hamiltonian_matrix(const SpatialGrid& grid, const std::vector<double>& v,
                                   double mass);

struct EigenSolution {
    std::vector<double> energies;
    std::vector<WaveFunction> states;  // normalized with the dx weight
};

EigenSolution eigensolve(const SpatialGrid& grid, const std::vector<double>& v, double mass,
                         int n_states);

// psi -> T psi via FFT, k = 0 first, Nyquist at +k_max
void apply_kinetic(WaveFunction& wf, double mass);

// same operator with the FFT plans kept alive across calls, for propagators
// built outside this module
class KineticApplier {
  public:
    KineticApplier(const SpatialGrid& grid, double mass);
    ~KineticApplier();
    KineticApplier(const KineticApplier&) = delete;
    KineticApplier& operator=(const KineticApplier&) = delete;

    void apply(const std::vector<std::complex<double>>& in,
               std::vector<std::complex<double>>& out);

  private:
    struct Impl;
    Impl* impl_;
};

struct SpectralBounds {
    double e_lo = 0.0;
    double e_hi = 0.0;
};

// [min v, max v + k_max^2 / 2m], padded by 1% of the span at the top only
SpectralBounds spectral_bounds(const SpatialGrid& grid, const std::vector<double>& v,
                               double mass);

// exp(-i V dt/2) exp(-i T dt) exp(-i V dt/2), one interval per call with the
// potential frozen by the caller (use the interval midpoint for moving
// potentials); plans are reused across steps
class SplitOperatorPropagator {
  public:
    SplitOperatorPropagator(const SpatialGrid& grid, double mass, double dt);
    ~SplitOperatorPropagator();
    SplitOperatorPropagator(const SplitOperatorPropagator&) = delete;
    SplitOperatorPropagator& operator=(const SplitOperatorPropagator&) = delete;

    void step(WaveFunction& wf, const std::vector<double>& v);
    double dt() const { return dt_; }

  private:
    struct Impl;
    Impl* impl_;
    double dt_;
};

// Bessel functions J_0..J_n(x) by downward (Miller) recurrence
std::vector<double> bessel_j_downward(int n, double x);

// expansion weights a_n of exp(-i z H') = sum a_n T_n(H') for |H'| <= 1:
// a_0 = J_0(z), a_n = 2 (-i)^n J_n(z), trimmed at |a_n| < 1e-15
std::vector<std::complex<double>> chebyshev_coefficients(double z);

// one Chebyshev-expanded step of exp(-i H dt) with H = T + diag(v) mapped to
// [-1, 1] via the supplied spectral bounds; negative dt propagates backward
class ChebyshevPropagator {
  public:
    ChebyshevPropagator(const SpatialGrid& grid, double mass, double dt, SpectralBounds bounds);
    ~ChebyshevPropagator();
    ChebyshevPropagator(const ChebyshevPropagator&) = delete;
    ChebyshevPropagator& operator=(const ChebyshevPropagator&) = delete;

    void step(WaveFunction& wf, const std::vector<double>& v);
    double dt() const { return dt_; }

  private:
    struct Impl;
    Impl* impl_;
    double dt_;
};

// generic Chebyshev application of prefactor * exp(-i z H') given an
// apply-callback for the normalized operator H' (spectrum within [-1, 1]);
// used by the spinor light-ion Hamiltonian as well
using ApplyOp = std::function<void(const std::vector<std::complex<double>>&,
                                   std::vector<std::complex<double>>&)>;
void chebyshev_exp_apply(const ApplyOp& h_prime, std::vector<std::complex<double>>& psi, double z,
                         std::complex<double> prefactor);

// convenience drivers; both abort with NumericalError if the norm grows by
// more than 1e-8 in a step
void propagate_split_operator(WaveFunction& wf, const std::vector<double>& v, double mass,
                              double dt, int n_steps);
void propagate_chebyshev(WaveFunction& wf, const std::vector<double>& v, double mass, double dt,
                         int n_steps);

}  // namespace iontrap
