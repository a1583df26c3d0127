#include "iontrap/lightion.hpp"

#include <cmath>
#include <memory>
#include <numbers>

#include "iontrap/errors.hpp"

namespace iontrap {

namespace {

std::size_t half_size(const SpatialGrid& grid, const CVec& s, const char* who) {
    const auto n = static_cast<std::size_t>(grid.n);
    if (s.size() != 2 * n) throw ConfigError(std::string(who) + ": spinor size mismatch");
    return n;
}

std::vector<double> trap_potential(const SpatialGrid& grid) {
    std::vector<double> v(static_cast<std::size_t>(grid.n));
    for (int i = 0; i < grid.n; ++i) {
        const double x = grid.x(i);
        v[static_cast<std::size_t>(i)] = 0.5 * x * x;
    }
    return v;
}

void check_params(const LightIonParams& par) {
    if (!(par.rabi > 0.0) || !(par.eta > 0.0))
        throw ConfigError("light-ion: rabi and eta must be positive");
}

}  // namespace

CVec make_spinor(const WaveFunction& down, const WaveFunction& up) {
    if (down.amp.size() != up.amp.size())
        throw ConfigError("make_spinor: component size mismatch");
    CVec s(2 * down.amp.size());
    std::copy(down.amp.begin(), down.amp.end(), s.begin());
    std::copy(up.amp.begin(), up.amp.end(),
              s.begin() + static_cast<std::ptrdiff_t>(down.amp.size()));
    return s;
}

WaveFunction spinor_down(const SpatialGrid& grid, const CVec& s) {
    const std::size_t n = half_size(grid, s, "spinor_down");
    return {grid, CVec(s.begin(), s.begin() + static_cast<std::ptrdiff_t>(n))};
}

WaveFunction spinor_up(const SpatialGrid& grid, const CVec& s) {
    const std::size_t n = half_size(grid, s, "spinor_up");
    return {grid, CVec(s.begin() + static_cast<std::ptrdiff_t>(n), s.end())};
}

void apply_coupling(const SpatialGrid& grid, const LightIonParams& par, double phi, double t,
                    const CVec& in, CVec& out) {
    const std::size_t n = half_size(grid, in, "apply_coupling");
    out.assign(in.size(), 0.0);
    const double half_rabi = 0.5 * par.rabi;
    const double k_eff = std::numbers::sqrt2 * par.eta;
    for (std::size_t i = 0; i < n; ++i) {
        const double theta = k_eff * grid.x(static_cast<int>(i)) - par.delta * t - phi;
        const std::complex<double> e(std::cos(theta), std::sin(theta));
        out[n + i] = half_rabi * e * in[i];
        out[i] = half_rabi * std::conj(e) * in[n + i];
    }
}

void apply_coupling_dphi(const SpatialGrid& grid, const LightIonParams& par, double phi, double t,
                         const CVec& in, CVec& out) {
    apply_coupling(grid, par, phi, t, in, out);
    const std::size_t n = half_size(grid, in, "apply_coupling_dphi");
    const std::complex<double> mi(0.0, -1.0);
    for (std::size_t i = 0; i < n; ++i) {
        out[n + i] *= mi;   // d/dphi e^{+i theta} = -i e^{+i theta}
        out[i] *= -mi;
    }
}

void pi_half_pulse_map(CVec& spinor, double phase) {
    if (spinor.size() % 2 != 0) throw ConfigError("pi_half_pulse_map: odd spinor size");
    const std::size_t n = spinor.size() / 2;
    const double c = std::numbers::sqrt2 / 2.0;
    const std::complex<double> e(std::cos(phase), std::sin(phase));
    for (std::size_t i = 0; i < n; ++i) {
        const std::complex<double> d = spinor[i];
        const std::complex<double> u = spinor[n + i];
        spinor[i] = c * (d - std::conj(e) * u);
        spinor[n + i] = c * (e * d + u);
    }
}

struct LightIonPropagator::Impl {
    SpatialGrid grid;
    LightIonParams par;
    KineticApplier kin;
    std::vector<double> v;
    double e_mid = 0.0;
    double de_half = 0.0;
    CVec tin, tout;

    Impl(const SpatialGrid& g, const LightIonParams& p)
        : grid(g), par(p), kin(g, 1.0), v(trap_potential(g)) {
        SpectralBounds b = spectral_bounds(g, v, 1.0);
        b.e_lo -= 0.5 * p.rabi;
        b.e_hi += 0.5 * p.rabi;
        e_mid = 0.5 * (b.e_lo + b.e_hi);
        de_half = 0.5 * (b.e_hi - b.e_lo);
        tin.resize(static_cast<std::size_t>(g.n));
        tout.resize(static_cast<std::size_t>(g.n));
    }
};

LightIonPropagator::LightIonPropagator(const SpatialGrid& grid, const LightIonParams& par)
    : impl_(nullptr) {
    check_params(par);
    impl_ = new Impl(grid, par);
}

LightIonPropagator::~LightIonPropagator() { delete impl_; }

void LightIonPropagator::step(CVec& spinor, double phi, double t_mid, double dt) {
    Impl& im = *impl_;
    const std::size_t n = half_size(im.grid, spinor, "light-ion step");

    double before = 0.0;
    for (const auto& z : spinor) before += std::norm(z);

    const double half_rabi = 0.5 * im.par.rabi;
    const double k_eff = std::numbers::sqrt2 * im.par.eta;
    const auto h_prime = [&](const CVec& in, CVec& out) {
        out.resize(in.size());
        for (int comp = 0; comp < 2; ++comp) {
            const std::size_t off = comp == 0 ? 0 : n;
            std::copy(in.begin() + static_cast<std::ptrdiff_t>(off),
                      in.begin() + static_cast<std::ptrdiff_t>(off + n), im.tin.begin());
            im.kin.apply(im.tin, im.tout);
            for (std::size_t i = 0; i < n; ++i)
                out[off + i] = im.tout[i] + (im.v[i] - im.e_mid) * in[off + i];
        }
        for (std::size_t i = 0; i < n; ++i) {
            const double theta = k_eff * im.grid.x(static_cast<int>(i)) - im.par.delta * t_mid - phi;
            const std::complex<double> e(std::cos(theta), std::sin(theta));
            out[n + i] += half_rabi * e * in[i];
            out[i] += half_rabi * std::conj(e) * in[n + i];
        }
        for (auto& z : out) z /= im.de_half;
    };

    chebyshev_exp_apply(h_prime, spinor, im.de_half * dt,
                        std::exp(std::complex<double>(0.0, -im.e_mid * dt)));

    double after = 0.0;
    for (const auto& z : spinor) after += std::norm(z);
    if (after > before * (1.0 + 1e-8))
        throw NumericalError("light-ion step: norm grew, propagation unstable");
}

std::vector<CVec> gate_basis_states(const SpatialGrid& grid) {
    const EigenSolution sol = eigensolve(grid, trap_potential(grid), 1.0, 2);
    WaveFunction zero{grid, CVec(static_cast<std::size_t>(grid.n), 0.0)};
    return {make_spinor(sol.states[0], zero), make_spinor(zero, sol.states[0]),
            make_spinor(sol.states[1], zero), make_spinor(zero, sol.states[1])};
}

std::vector<CVec> gate_target_states(const SpatialGrid& grid) {
    std::vector<CVec> t = gate_basis_states(grid);
    static const double sign[4] = {-1.0, 1.0, -1.0, -1.0};
    for (std::size_t s = 0; s < t.size(); ++s)
        for (auto& z : t[s]) z *= sign[s];
    return t;
}

GateResult composite_pulse_gate(const SpatialGrid& grid, const LightIonParams& par,
                                const std::vector<Pulse>& pulses, double dt_max) {
    check_params(par);
    if (!(dt_max > 0.0)) throw ConfigError("composite_pulse_gate: dt_max must be positive");
    for (const auto& p : pulses)
        if (!(p.duration > 0.0)) throw ConfigError("composite_pulse_gate: pulse duration must be positive");

    GateResult res;
    res.states = gate_basis_states(grid);
    LightIonPropagator prop(grid, par);
    double t = 0.0;
    for (const auto& pulse : pulses) {
        const int nsub = std::max(1, static_cast<int>(std::ceil(pulse.duration / dt_max)));
        const double dt = pulse.duration / nsub;
        for (int j = 0; j < nsub; ++j) {
            const double t_mid = t + (j + 0.5) * dt;
            for (auto& s : res.states) prop.step(s, pulse.phase, t_mid, dt);
        }
        t += pulse.duration;
    }
    res.fidelity = phase_fidelity(res.states, gate_target_states(grid), grid.dx);
    return res;
}

std::vector<Pulse> derived_composite_sequence(const LightIonParams& par) {
    check_params(par);
    const double theta = 2.0 * std::numbers::pi * (std::numbers::sqrt2 - 1.0);
    const double cot = std::cos(theta / 2.0) / std::sin(theta / 2.0);
    const double chi = std::acos(cot * cot);
    const double duration = theta / (par.rabi * par.eta) * std::exp(0.5 * par.eta * par.eta);
    return {{duration, 0.0}, {duration, chi}, {duration, 0.0}, {duration, chi}};
}

ControlProblem gate_control_problem(const SpatialGrid& grid, const LightIonParams& par,
                                    double lambda) {
    check_params(par);
    if (!(lambda > 0.0)) throw ConfigError("gate_control_problem: lambda must be positive");

    auto prop = std::make_shared<LightIonPropagator>(grid, par);
    ControlProblem p;
    p.initial = gate_basis_states(grid);
    p.target = gate_target_states(grid);
    p.inner_weight = grid.dx;
    p.phase_sensitive = true;
    p.lambda = {lambda};
    p.step = [prop](CVec& psi, const std::vector<double>& eps, double t_mid, double dt) {
        prop->step(psi, eps.at(0), t_mid, dt);
    };
    p.grad_op = [grid, par](const CVec& in, CVec& out, int i, const std::vector<double>& eps,
                            double t) {
        if (i != 0) throw ConfigError("gate_control_problem: single control only");
        apply_coupling_dphi(grid, par, eps.at(0), t, in, out);
    };
    return p;
}

}  // namespace iontrap
