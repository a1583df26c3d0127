#include "iontrap/krotov.hpp"

#include <cmath>
#include <iostream>
#include <memory>
#include <numbers>
#include <string>

#include "iontrap/errors.hpp"

namespace iontrap {

std::vector<double> ControlSet::at(int k) const {
    std::vector<double> eps(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) eps[i] = values[i][static_cast<std::size_t>(k)];
    return eps;
}

ControlSet make_controls(int n_controls, int steps, double dt, double value) {
    if (n_controls <= 0 || steps <= 0 || !(dt > 0.0))
        throw ConfigError("make_controls: need positive control count, steps and dt");
    ControlSet c;
    c.dt = dt;
    c.values.assign(static_cast<std::size_t>(n_controls),
                    std::vector<double>(static_cast<std::size_t>(steps), value));
    return c;
}

std::complex<double> overlap(const CVec& a, const CVec& b, double weight) {
    if (a.size() != b.size()) throw ConfigError("overlap: size mismatch");
    std::complex<double> s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::conj(a[i]) * b[i];
    return s * weight;
}

double fidelity(const std::vector<CVec>& states, const std::vector<CVec>& targets, double weight) {
    if (states.size() != targets.size() || states.empty())
        throw ConfigError("fidelity: state sets do not match");
    double f = 0.0;
    for (std::size_t s = 0; s < states.size(); ++s)
        f += std::norm(overlap(targets[s], states[s], weight));
    return f / static_cast<double>(states.size());
}

double phase_fidelity(const std::vector<CVec>& states, const std::vector<CVec>& targets,
                      double weight) {
    if (states.size() != targets.size() || states.empty())
        throw ConfigError("phase_fidelity: state sets do not match");
    std::complex<double> s = 0.0;
    for (std::size_t k = 0; k < states.size(); ++k) s += overlap(targets[k], states[k], weight);
    return s.real() / (2.0 * static_cast<double>(states.size())) + 0.5;
}

double objective(const ControlProblem& p, const std::vector<CVec>& finals) {
    return p.phase_sensitive ? -phase_fidelity(finals, p.target, p.inner_weight)
                             : -fidelity(finals, p.target, p.inner_weight);
}

namespace {

void validate(const ControlProblem& p, const ControlSet& c) {
    if (p.initial.empty() || p.initial.size() != p.target.size())
        throw ConfigError("control problem: initial and target state sets do not match");
    if (!p.step || !p.grad_op) throw ConfigError("control problem: missing step or gradient");
    if (c.n_controls() <= 0 || c.steps() <= 0 || !(c.dt > 0.0))
        throw ConfigError("control problem: empty control set");
    if (p.lambda.size() != static_cast<std::size_t>(c.n_controls()))
        throw ConfigError("control problem: lambda count does not match controls");
    for (double l : p.lambda)
        if (!(l > 0.0)) throw ConfigError("control problem: lambda must be positive");
}

double shape(const ControlProblem& p, double t, double horizon) {
    if (!p.use_shape) return 1.0;
    const double s = std::sin(std::numbers::pi * t / horizon);
    return s * s;
}

// boundary co-states: the functional gradient of J with respect to <psi(T)|
// up to a positive constant
std::vector<CVec> terminal_costates(const ControlProblem& p, const std::vector<CVec>& finals) {
    std::vector<CVec> chi(finals.size());
    for (std::size_t s = 0; s < finals.size(); ++s) {
        if (p.phase_sensitive) {
            chi[s] = p.target[s];
            continue;
        }
        const std::complex<double> c = overlap(p.target[s], finals[s], p.inner_weight);
        if (std::abs(c) < 1e-14)
            throw NumericalError("krotov: terminal overlap vanished, no update direction");
        chi[s].resize(p.target[s].size());
        for (std::size_t i = 0; i < chi[s].size(); ++i) chi[s][i] = c * p.target[s][i];
    }
    return chi;
}

// forward pass storing the state at every node, nodes[s][k], k = 0..steps
std::vector<std::vector<CVec>> forward_nodes(const ControlProblem& p, const ControlSet& c) {
    std::vector<std::vector<CVec>> nodes(p.initial.size());
    for (std::size_t s = 0; s < p.initial.size(); ++s) {
        nodes[s].reserve(static_cast<std::size_t>(c.steps()) + 1);
        nodes[s].push_back(p.initial[s]);
        CVec psi = p.initial[s];
        for (int k = 0; k < c.steps(); ++k) {
            p.step(psi, c.at(k), c.t_mid(k), c.dt);
            nodes[s].push_back(psi);
        }
    }
    return nodes;
}

std::vector<CVec> finals_of(const std::vector<std::vector<CVec>>& nodes) {
    std::vector<CVec> f(nodes.size());
    for (std::size_t s = 0; s < nodes.size(); ++s) f[s] = nodes[s].back();
    return f;
}

std::vector<std::vector<CVec>> backward_nodes(const ControlProblem& p, const ControlSet& c,
                                              const std::vector<CVec>& chi_terminal) {
    std::vector<std::vector<CVec>> nodes(chi_terminal.size());
    for (std::size_t s = 0; s < chi_terminal.size(); ++s) {
        nodes[s].assign(static_cast<std::size_t>(c.steps()) + 1, CVec());
        CVec chi = chi_terminal[s];
        nodes[s][static_cast<std::size_t>(c.steps())] = chi;
        for (int k = c.steps() - 1; k >= 0; --k) {
            p.step(chi, c.at(k), c.t_mid(k), -c.dt);
            nodes[s][static_cast<std::size_t>(k)] = chi;
        }
    }
    return nodes;
}

}  // namespace

std::vector<CVec> propagate_forward(const ControlProblem& p, const ControlSet& c) {
    validate(p, c);
    std::vector<CVec> psi = p.initial;
    for (int k = 0; k < c.steps(); ++k) {
        const auto eps = c.at(k);
        for (auto& s : psi) p.step(s, eps, c.t_mid(k), c.dt);
    }
    return psi;
}

OptimizeResult krotov_optimize(const ControlProblem& p, const ControlSet& guess,
                               const OptimizeOptions& opt) {
    validate(p, guess);
    const double horizon = guess.horizon();
    ControlSet controls = guess;

    auto nodes = forward_nodes(p, controls);
    double j = objective(p, finals_of(nodes));
    double fid = p.phase_sensitive ? phase_fidelity(finals_of(nodes), p.target, p.inner_weight)
                                   : fidelity(finals_of(nodes), p.target, p.inner_weight);
    OptimizeResult res;
    res.trace.push_back({0, j, fid});
    if (opt.verbose) std::cerr << "krotov iter 0 J " << j << " fidelity " << fid << "\n";

    for (int iter = 1; iter <= opt.max_iter && fid < opt.fidelity_goal; ++iter) {
        const auto chi_nodes = backward_nodes(p, controls, terminal_costates(p, finals_of(nodes)));

        ControlSet updated = controls;
        std::vector<CVec> psi = p.initial;
        CVec gpsi;
        for (int k = 0; k < controls.steps(); ++k) {
            const auto eps_old = controls.at(k);
            const double sh = shape(p, controls.t_node(k), horizon);
            std::vector<double> eps_new = eps_old;
            for (int i = 0; i < controls.n_controls(); ++i) {
                double im = 0.0;
                for (std::size_t s = 0; s < psi.size(); ++s) {
                    p.grad_op(psi[s], gpsi, i, eps_old, controls.t_node(k));
                    im += overlap(chi_nodes[s][static_cast<std::size_t>(k)], gpsi, p.inner_weight)
                              .imag();
                }
                eps_new[static_cast<std::size_t>(i)] +=
                    2.0 * sh / p.lambda[static_cast<std::size_t>(i)] * im;
            }
            for (int i = 0; i < controls.n_controls(); ++i)
                updated.values[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)] =
                    eps_new[static_cast<std::size_t>(i)];
            for (std::size_t s = 0; s < psi.size(); ++s) {
                p.step(psi[s], eps_new, controls.t_mid(k), controls.dt);
                nodes[s][static_cast<std::size_t>(k) + 1] = psi[s];
            }
        }
        controls = std::move(updated);

        const double j_new = objective(p, finals_of(nodes));
        const double f_new = p.phase_sensitive
                                 ? phase_fidelity(finals_of(nodes), p.target, p.inner_weight)
                                 : fidelity(finals_of(nodes), p.target, p.inner_weight);
        if (j_new > j + 1e-12)
            std::cerr << "krotov: warning, J rose from " << j << " to " << j_new << " at iteration "
                      << iter << "\n";
        j = j_new;
        fid = f_new;
        res.trace.push_back({iter, j, fid});
        if (opt.verbose) std::cerr << "krotov iter " << iter << " J " << j << " fidelity " << fid
                                   << "\n";
    }

    res.controls = std::move(controls);
    res.fidelity = fid;
    res.final_states = finals_of(nodes);
    res.reached_goal = fid >= opt.fidelity_goal;
    return res;
}

std::vector<std::vector<double>> objective_gradient(const ControlProblem& p, const ControlSet& c) {
    validate(p, c);
    const int steps = c.steps();
    const int nc = c.n_controls();

    // midpoint states: half-step with the same frozen Hamiltonian as the
    // full step, so psi(k+1) = step(dt/2) applied to psi_mid(k)
    std::vector<std::vector<CVec>> psi_mid(p.initial.size());
    std::vector<CVec> psi = p.initial;
    for (std::size_t s = 0; s < psi.size(); ++s) psi_mid[s].resize(static_cast<std::size_t>(steps));
    for (int k = 0; k < steps; ++k) {
        const auto eps = c.at(k);
        for (std::size_t s = 0; s < psi.size(); ++s) {
            CVec half = psi[s];
            p.step(half, eps, c.t_mid(k), 0.5 * c.dt);
            psi_mid[s][static_cast<std::size_t>(k)] = half;
            p.step(psi[s], eps, c.t_mid(k), c.dt);
        }
    }

    std::vector<CVec> chi = terminal_costates(p, psi);
    std::vector<std::vector<CVec>> chi_mid(chi.size());
    for (std::size_t s = 0; s < chi.size(); ++s) chi_mid[s].resize(static_cast<std::size_t>(steps));
    for (int k = steps - 1; k >= 0; --k) {
        const auto eps = c.at(k);
        for (std::size_t s = 0; s < chi.size(); ++s) {
            CVec half = chi[s];
            p.step(half, eps, c.t_mid(k), -0.5 * c.dt);
            chi_mid[s][static_cast<std::size_t>(k)] = half;
            p.step(chi[s], eps, c.t_mid(k), -c.dt);
        }
    }

    // dJ/deps for the mean functionals: the 1/S (and the phase flavor's extra
    // 1/4) must be carried so the result matches finite differences of J, not
    // just the descent direction
    const double n_states = static_cast<double>(p.initial.size());
    const double scale =
        p.phase_sensitive ? c.dt / (2.0 * n_states) : 2.0 * c.dt / n_states;
    std::vector<std::vector<double>> grad(static_cast<std::size_t>(nc),
                                          std::vector<double>(static_cast<std::size_t>(steps)));
    CVec gpsi;
    for (int k = 0; k < steps; ++k) {
        const auto eps = c.at(k);
        for (int i = 0; i < nc; ++i) {
            double im = 0.0;
            for (std::size_t s = 0; s < p.initial.size(); ++s) {
                p.grad_op(psi_mid[s][static_cast<std::size_t>(k)], gpsi, i, eps, c.t_mid(k));
                im += overlap(chi_mid[s][static_cast<std::size_t>(k)], gpsi, p.inner_weight).imag();
            }
            grad[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)] = -scale * im;
        }
    }
    return grad;
}

OptimizeResult gradient_optimize(const ControlProblem& p, const ControlSet& guess,
                                 const OptimizeOptions& opt) {
    validate(p, guess);
    const double horizon = guess.horizon();
    ControlSet controls = guess;

    std::vector<CVec> finals = propagate_forward(p, controls);
    double j = objective(p, finals);
    double fid = p.phase_sensitive ? phase_fidelity(finals, p.target, p.inner_weight)
                                   : fidelity(finals, p.target, p.inner_weight);
    OptimizeResult res;
    res.trace.push_back({0, j, fid});

    for (int iter = 1; iter <= opt.max_iter && fid < opt.fidelity_goal; ++iter) {
        const auto grad = objective_gradient(p, controls);

        // descent direction with the Krotov shape and weights; g2 is the
        // negated directional derivative of J along it
        std::vector<std::vector<double>> dir(grad.size());
        double g2 = 0.0;
        for (std::size_t i = 0; i < grad.size(); ++i) {
            dir[i].resize(grad[i].size());
            for (std::size_t k = 0; k < grad[i].size(); ++k) {
                const double sh = shape(p, controls.t_mid(static_cast<int>(k)), horizon);
                dir[i][k] = -sh / p.lambda[i] * grad[i][k];
                g2 -= dir[i][k] * grad[i][k];
            }
        }
        if (!(g2 > 0.0)) break;  // zero gradient: already optimal

        double gamma = 1.0;
        bool accepted = false;
        ControlSet trial = controls;
        while (gamma >= 1e-14) {
            for (std::size_t i = 0; i < grad.size(); ++i)
                for (std::size_t k = 0; k < grad[i].size(); ++k)
                    trial.values[i][k] = controls.values[i][k] + gamma * dir[i][k];
            finals = propagate_forward(p, trial);
            const double j_try = objective(p, finals);
            if (j_try <= j - 1e-4 * gamma * g2) {
                controls = trial;
                j = j_try;
                accepted = true;
                break;
            }
            gamma *= 0.5;
        }
        if (!accepted) break;  // line search stagnated

        fid = p.phase_sensitive ? phase_fidelity(finals, p.target, p.inner_weight)
                                : fidelity(finals, p.target, p.inner_weight);
        res.trace.push_back({iter, j, fid});
        if (opt.verbose) std::cerr << "gradient iter " << iter << " J " << j << " fidelity " << fid
                                   << "\n";
    }

    res.controls = std::move(controls);
    res.fidelity = fid;
    res.final_states = propagate_forward(p, res.controls);
    res.reached_goal = fid >= opt.fidelity_goal;
    return res;
}

ControlProblem grid_control_problem(const SpatialGrid& grid, double mass,
                                    std::vector<double> v_static,
                                    std::vector<std::vector<double>> basis,
                                    SpectralBounds bounds) {
    if (v_static.size() != static_cast<std::size_t>(grid.n))
        throw ConfigError("grid_control_problem: static potential does not match the grid");
    for (const auto& b : basis)
        if (b.size() != static_cast<std::size_t>(grid.n))
            throw ConfigError("grid_control_problem: basis vector does not match the grid");
    if (!(bounds.e_hi > bounds.e_lo))
        throw ConfigError("grid_control_problem: empty spectral range");

    auto kin = std::make_shared<KineticApplier>(grid, mass);
    auto vs = std::make_shared<const std::vector<double>>(std::move(v_static));
    auto bs = std::make_shared<const std::vector<std::vector<double>>>(std::move(basis));
    const double e_mid = 0.5 * (bounds.e_lo + bounds.e_hi);
    const double de_half = 0.5 * (bounds.e_hi - bounds.e_lo);
    const std::size_t n = static_cast<std::size_t>(grid.n);

    ControlProblem p;
    p.inner_weight = grid.dx;
    p.step = [kin, vs, bs, e_mid, de_half, n](CVec& psi, const std::vector<double>& eps,
                                              double /*t_mid*/, double dt) {
        if (psi.size() != n) throw ConfigError("grid control step: state size mismatch");
        if (eps.size() != bs->size()) throw ConfigError("grid control step: control count mismatch");
        std::vector<double> v = *vs;
        for (std::size_t i = 0; i < eps.size(); ++i)
            for (std::size_t g = 0; g < n; ++g) v[g] += eps[i] * (*bs)[i][g];

        double before = 0.0;
        for (const auto& z : psi) before += std::norm(z);
        const auto h_prime = [&](const CVec& in, CVec& out) {
            kin->apply(in, out);
            for (std::size_t g = 0; g < n; ++g) out[g] = (out[g] + (v[g] - e_mid) * in[g]) / de_half;
        };
        chebyshev_exp_apply(h_prime, psi, de_half * dt,
                            std::exp(std::complex<double>(0.0, -e_mid * dt)));
        double after = 0.0;
        for (const auto& z : psi) after += std::norm(z);
        if (after > before * (1.0 + 1e-8))
            throw NumericalError("grid control step: norm grew, spectral bounds likely violated");
    };
    p.grad_op = [bs, n](const CVec& in, CVec& out, int i, const std::vector<double>& /*eps*/,
                        double /*t*/) {
        out.resize(in.size());
        const auto& b = (*bs)[static_cast<std::size_t>(i)];
        for (std::size_t g = 0; g < n; ++g) out[g] = b[g] * in[g];
    };
    return p;
}

}  // namespace iontrap
