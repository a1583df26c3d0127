#pragma once
#include "iontrap/krotov.hpp"
#include "iontrap/qdyn.hpp"

// Laser-ion interaction on a grid, natural units (hbar = m = trap omega = 1),
// interaction picture with the internal splitting removed:
//   H = p^2/2 + x^2/2 + (Omega/2) (|up><down| e^{i(k x - delta t - phi)} + h.c.)
// eta is the standard Lamb-Dicke parameter k sqrt(hbar / 2 m omega), so the
// position phase on the natural grid is exp(i sqrt(2) eta x) and the blue
// sideband (delta = +1) Rabi frequency is Omega eta sqrt(n+1) to leading
// order. Spinors are flat vectors: first n entries |down>, next n |up>.
namespace iontrap {

struct LightIonParams {
    double rabi = 0.1;   // Omega
    double eta = 0.1;    // Lamb-Dicke parameter
    double delta = 1.0;  // laser detuning; +1 drives the blue sideband
};

CVec make_spinor(const WaveFunction& down, const WaveFunction& up);
WaveFunction spinor_down(const SpatialGrid& grid, const CVec& s);
WaveFunction spinor_up(const SpatialGrid& grid, const CVec& s);

// coupling term only (no motional part)
void apply_coupling(const SpatialGrid& grid, const LightIonParams& par, double phi, double t,
                    const CVec& in, CVec& out);
// its derivative with respect to the laser phase phi
void apply_coupling_dphi(const SpatialGrid& grid, const LightIonParams& par, double phi, double t,
                         const CVec& in, CVec& out);

// ideal resonant carrier pi/2 rotation, motional state untouched:
// |down> -> (|down> + e^{i phase} |up>)/sqrt2,
// |up>   -> (-e^{-i phase} |down> + |up>)/sqrt2
void pi_half_pulse_map(CVec& spinor, double phase);

// one Chebyshev step of the full spinor Hamiltonian with phi and the
// explicit time dependence frozen at t_mid; dt < 0 steps backward
class LightIonPropagator {
  public:
    LightIonPropagator(const SpatialGrid& grid, const LightIonParams& par);
    ~LightIonPropagator();
    LightIonPropagator(const LightIonPropagator&) = delete;
    LightIonPropagator& operator=(const LightIonPropagator&) = delete;

    void step(CVec& spinor, double phi, double t_mid, double dt);

  private:
    struct Impl;
    Impl* impl_;
};

// truth-table states |down,0>, |up,0>, |down,1>, |up,1> and their targets
// with phases (-, +, -, -)
std::vector<CVec> gate_basis_states(const SpatialGrid& grid);
std::vector<CVec> gate_target_states(const SpatialGrid& grid);

struct Pulse {
    double duration = 0.0;
    double phase = 0.0;
};

struct GateResult {
    std::vector<CVec> states;
    double fidelity = 0.0;  // phase-sensitive F~
};

// propagate the four basis states through a pulse sequence (laser phase
// jumps between pulses, time runs continuously) and evaluate F~
GateResult composite_pulse_gate(const SpatialGrid& grid, const LightIonParams& par,
                                const std::vector<Pulse>& pulses, double dt_max);

// four equal blue-sideband pulses with phases (0, chi, 0, chi): each pulse
// area theta = 2 pi (sqrt2 - 1) in the n=0 manifold makes the pair product a
// pi rotation simultaneously in the sqrt2-related n=0 and n=1 manifolds, so
// the sequence is -identity on both; durations carry the Debye-Waller
// calibration exp(eta^2/2)
std::vector<Pulse> derived_composite_sequence(const LightIonParams& par);

// control problem over the laser phase phi(t) for krotov_optimize
ControlProblem gate_control_problem(const SpatialGrid& grid, const LightIonParams& par,
                                    double lambda);

}  // namespace iontrap
