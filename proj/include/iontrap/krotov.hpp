#pragma once
#include <complex>
#include <functional>
#include <vector>

#include "iontrap/qdyn.hpp"

// Krotov-type optimal control over piecewise-constant controls. States are
// plain complex vectors so the same driver serves grid wavefunctions, spinor
// states and small matrix toy models.
namespace iontrap {

using CVec = std::vector<std::complex<double>>;

struct ControlSet {
    double dt = 0.0;
    std::vector<std::vector<double>> values;  // [control][step]

    int n_controls() const { return static_cast<int>(values.size()); }
    int steps() const { return values.empty() ? 0 : static_cast<int>(values[0].size()); }
    double horizon() const { return steps() * dt; }
    double t_node(int k) const { return k * dt; }
    double t_mid(int k) const { return (k + 0.5) * dt; }
    std::vector<double> at(int k) const;
};

ControlSet make_controls(int n_controls, int steps, double dt, double value = 0.0);

struct ControlProblem {
    std::vector<CVec> initial;
    std::vector<CVec> target;
    double inner_weight = 1.0;  // dx for grid states, 1 otherwise

    // apply exp(-i H(eps) dt) in place with H frozen at t_mid; dt < 0 runs
    // the step backward
    std::function<void(CVec&, const std::vector<double>& eps, double t_mid, double dt)> step;
    // out = (dH / d eps_i) in, evaluated at the given controls and time
    std::function<void(const CVec& in, CVec& out, int i, const std::vector<double>& eps, double t)>
        grad_op;

    std::vector<double> lambda;   // update weights, one per control
    bool use_shape = true;        // multiply updates by sin^2(pi t / T)
    bool phase_sensitive = false;  // true: gate functional F~, false: |overlap|^2
};

std::complex<double> overlap(const CVec& a, const CVec& b, double weight);
// mean of |<target_s|state_s>|^2
double fidelity(const std::vector<CVec>& states, const std::vector<CVec>& targets, double weight);
// F~ = Re(sum_s <target_s|state_s>) / (2 S) + 1/2, sensitive to relative phases
double phase_fidelity(const std::vector<CVec>& states, const std::vector<CVec>& targets,
                      double weight);
// J = -F~ or -fidelity per problem.phase_sensitive
double objective(const ControlProblem& p, const std::vector<CVec>& finals);

std::vector<CVec> propagate_forward(const ControlProblem& p, const ControlSet& c);

struct TraceRow {
    int iter = 0;
    double j = 0.0;
    double fidelity = 0.0;
};

struct OptimizeOptions {
    int max_iter = 100;
    double fidelity_goal = 1.0;
    bool verbose = false;
};

struct OptimizeResult {
    ControlSet controls;
    std::vector<TraceRow> trace;  // row 0 evaluates the guess
    double fidelity = 0.0;
    std::vector<CVec> final_states;
    bool reached_goal = false;
};

// immediate-update Krotov: backward pass with the old controls, then a
// forward sweep applying each node's update before stepping through it
OptimizeResult krotov_optimize(const ControlProblem& p, const ControlSet& guess,
                               const OptimizeOptions& opt);

// steepest descent with backtracking line search on J; same update direction
// as the Krotov sweep but applied all at once per iteration
OptimizeResult gradient_optimize(const ControlProblem& p, const ControlSet& guess,
                                 const OptimizeOptions& opt);

// analytic dJ / d eps_i(k) from interval-midpoint states; exact for the
// piecewise-constant dynamics when [H, dH/deps] = 0, O(dt^2) otherwise
std::vector<std::vector<double>> objective_gradient(const ControlProblem& p, const ControlSet& c);

// problem whose Hamiltonian is T + v_static + sum_i eps_i basis_i on a grid;
// initial/target states and lambda are left for the caller to fill in
ControlProblem grid_control_problem(const SpatialGrid& grid, double mass,
                                    std::vector<double> v_static,
                                    std::vector<std::vector<double>> basis, SpectralBounds bounds);

}  // namespace iontrap
