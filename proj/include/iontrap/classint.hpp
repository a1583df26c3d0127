#pragma once
#include <functional>
#include <vector>

// Classical trajectories: one-step integrators (explicit Euler, implicit
// midpoint, general Butcher-tableau Runge-Kutta, adaptive embedded pair,
// Stormer-Verlet, partitioned Runge-Kutta), Coulomb forces, energy checks.
namespace iontrap {

// Flat layout: n degrees of freedom. Spatial runs use 3 per particle.
struct PhaseState {
    double t = 0.0;
    std::vector<double> x;
    std::vector<double> v;
};

// acceleration as a function of time and positions; must not depend on velocity
using ForceField = std::function<std::vector<double>(double t, const std::vector<double>& x)>;
// potential energy in J as a function of time and positions
using PotentialEnergy = std::function<double(double t, const std::vector<double>& x)>;

struct ButcherTableau {
    std::vector<std::vector<double>> a;  // s x s stage matrix
    std::vector<double> b;               // s weights
    std::vector<double> c;               // s nodes
    std::vector<double> b_err;           // embedded weights; empty when absent

    size_t stages() const { return b.size(); }
    bool is_explicit() const;
};

// Validates c_i = sum_j a_ij and sum b_i = 1, both to 1e-12.
ButcherTableau make_tableau(std::vector<std::vector<double>> a, std::vector<double> b,
                            std::vector<double> c, std::vector<double> b_err = {});

// 7-stage embedded 4(5) pair. b carries the propagating weights
// (35/384, ...); b_err the companion row (5179/57600, ...) used for the
// error estimate h * sum (b_i - b_err_i) k_i.
const ButcherTableau& dormand_prince_tableau();

struct PartitionedTableau {
    ButcherTableau pos;  // unprimed: combines position-derivative stages k
    ButcherTableau vel;  // primed: combines acceleration stages l
};

// 3-stage Lobatto IIIA (positions) with IIIB (velocities), order 4.
const PartitionedTableau& lobatto3_pair();

struct Trajectory {
    std::vector<PhaseState> states;  // strictly increasing t
    long accepted = 0;
    long rejected = 0;
    double max_error_estimate = 0.0;
};

PhaseState step_euler_explicit(const PhaseState& s, const ForceField& f, double h);

// Fixed-point solve of the implicit relation, relative tol 1e-13, cap 50
// iterations; throws NumericalError when the iteration does not contract.
PhaseState step_implicit_midpoint(const PhaseState& s, const ForceField& f, double h);

struct RkStepResult {
    PhaseState state;
    std::vector<double> error;  // h * sum (b_i - b_err_i) k_i; empty without b_err
};

RkStepResult step_rk(const PhaseState& s, const ForceField& f, double h,
                     const ButcherTableau& tab);

// Embedded-pair driver: accept when max|err_i| <= tol * (1 + max|y_i|),
// step factor 0.9 * (target/err)^(1/5) clipped to [0.2, 5].
Trajectory integrate_adaptive(const PhaseState& s0, const ForceField& f, double t_end,
                              double tol, double h_init = 0.0);

// kick-drift-kick with f evaluated at t_n and t_{n+1}
PhaseState step_stormer_verlet(const PhaseState& s, const ForceField& f, double h);

PhaseState step_partitioned_rk(const PhaseState& s, const ForceField& f, double h,
                               const PartitionedTableau& pair);

using Stepper = std::function<PhaseState(const PhaseState&, const ForceField&, double)>;

// n equal steps of size h, recording every record_every-th state (and always
// the last one)
Trajectory integrate_fixed(const PhaseState& s0, const ForceField& f, double h, long n,
                           const Stepper& step, long record_every = 1);

// Pairwise Coulomb accelerations for particles at x (3 per particle).
// Throws NumericalError when two particles coincide.
std::vector<double> coulomb_accelerations(const std::vector<double>& x,
                                          const std::vector<double>& charge,
                                          const std::vector<double>& mass);

// kinetic + potential; mass_per_dof holds one mass entry per degree of freedom
double total_energy(const PhaseState& s, const std::vector<double>& mass_per_dof,
                    const PotentialEnergy& pot);

}  // namespace iontrap
