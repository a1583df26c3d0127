#include "iontrap/classint.hpp"

#include <algorithm>
#include <cmath>

#include "iontrap/errors.hpp"
#include "iontrap/units.hpp"

namespace iontrap {

namespace {

double max_abs(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0.0;
    for (size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

}  // namespace

bool ButcherTableau::is_explicit() const {
    for (size_t i = 0; i < a.size(); ++i)
        for (size_t j = i; j < a[i].size(); ++j)
            if (a[i][j] != 0.0) return false;
    return true;
}

ButcherTableau make_tableau(std::vector<std::vector<double>> a, std::vector<double> b,
                            std::vector<double> c, std::vector<double> b_err) {
    size_t s = b.size();
    if (a.size() != s || c.size() != s || (!b_err.empty() && b_err.size() != s))
        throw ConfigError("tableau dimensions disagree");
    double bsum = 0.0;
    for (double w : b) bsum += w;
    if (std::abs(bsum - 1.0) > 1e-12) throw ConfigError("tableau weights do not sum to 1");
    for (size_t i = 0; i < s; ++i) {
        if (a[i].size() != s) throw ConfigError("tableau stage matrix not square");
        double rs = 0.0;
        for (double v : a[i]) rs += v;
        if (std::abs(rs - c[i]) > 1e-12) throw ConfigError("tableau row sum does not match c");
    }
    return {std::move(a), std::move(b), std::move(c), std::move(b_err)};
}

const ButcherTableau& dormand_prince_tableau() {
    static const ButcherTableau tab = make_tableau(
        {{0, 0, 0, 0, 0, 0, 0},
         {1.0 / 5, 0, 0, 0, 0, 0, 0},
         {3.0 / 40, 9.0 / 40, 0, 0, 0, 0, 0},
         {44.0 / 45, -56.0 / 15, 32.0 / 9, 0, 0, 0, 0},
         {19372.0 / 6561, -25360.0 / 2187, 64448.0 / 6561, -212.0 / 729, 0, 0, 0},
         {9017.0 / 3168, -355.0 / 33, 46732.0 / 5247, 49.0 / 176, -5103.0 / 18656, 0, 0},
         {35.0 / 384, 0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84, 0}},
        {35.0 / 384, 0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84, 0},
        {0, 1.0 / 5, 3.0 / 10, 4.0 / 5, 8.0 / 9, 1, 1},
        {5179.0 / 57600, 0, 7571.0 / 16695, 393.0 / 640, -92097.0 / 339200, 187.0 / 2100,
         1.0 / 40});
    return tab;
}

const PartitionedTableau& lobatto3_pair() {
    static const PartitionedTableau pair = {
        make_tableau({{0, 0, 0}, {5.0 / 24, 1.0 / 3, -1.0 / 24}, {1.0 / 6, 2.0 / 3, 1.0 / 6}},
                     {1.0 / 6, 2.0 / 3, 1.0 / 6}, {0, 0.5, 1}),
        make_tableau({{1.0 / 6, -1.0 / 6, 0}, {1.0 / 6, 1.0 / 3, 0}, {1.0 / 6, 5.0 / 6, 0}},
                     {1.0 / 6, 2.0 / 3, 1.0 / 6}, {0, 0.5, 1})};
    return pair;
}

PhaseState step_euler_explicit(const PhaseState& s, const ForceField& f, double h) {
    std::vector<double> a = f(s.t, s.x);
    PhaseState out = s;
    out.t = s.t + h;
    for (size_t i = 0; i < s.x.size(); ++i) {
        out.x[i] = s.x[i] + h * s.v[i];
        out.v[i] = s.v[i] + h * a[i];
    }
    return out;
}

PhaseState step_implicit_midpoint(const PhaseState& s, const ForceField& f, double h) {
    size_t n = s.x.size();
    double tm = s.t + 0.5 * h;
    // iterate on the midpoint-argument state
    std::vector<double> xm = s.x, vm = s.v, xm_prev(n), vm_prev(n);
    std::vector<double> a = f(s.t, s.x);
    for (size_t i = 0; i < n; ++i) {
        xm[i] = s.x[i] + 0.5 * h * s.v[i];
        vm[i] = s.v[i] + 0.5 * h * a[i];
    }
    double scale = std::max({max_abs(s.x), max_abs(s.v), 1.0});
    for (int it = 0; it < 50; ++it) {
        xm_prev = xm;
        vm_prev = vm;
        a = f(tm, xm);
        for (size_t i = 0; i < n; ++i) {
            xm[i] = s.x[i] + 0.5 * h * vm[i];
            vm[i] = s.v[i] + 0.5 * h * a[i];
        }
        double d = std::max(max_abs_diff(xm, xm_prev), max_abs_diff(vm, vm_prev));
        if (d <= 1e-13 * scale) {
            PhaseState out;
            out.t = s.t + h;
            out.x.resize(n);
            out.v.resize(n);
            for (size_t i = 0; i < n; ++i) {
                out.x[i] = 2.0 * xm[i] - s.x[i];
                out.v[i] = 2.0 * vm[i] - s.v[i];
            }
            return out;
        }
    }
    throw NumericalError("implicit midpoint: fixed point did not converge in 50 iterations");
}

RkStepResult step_rk(const PhaseState& s, const ForceField& f, double h,
                     const ButcherTableau& tab) {
    size_t n = s.x.size();
    size_t ns = tab.stages();
    // stage derivatives on the concatenated state y = (x, v): kx = stage
    // velocity, kv = stage acceleration
    std::vector<std::vector<double>> kx(ns, std::vector<double>(n)),
        kv(ns, std::vector<double>(n));
    std::vector<double> xs(n), vs(n);

    auto eval_stage = [&](size_t i) {
        for (size_t d = 0; d < n; ++d) {
            double ax = 0.0, av = 0.0;
            for (size_t j = 0; j < ns; ++j) {
                ax += tab.a[i][j] * kx[j][d];
                av += tab.a[i][j] * kv[j][d];
            }
            xs[d] = s.x[d] + h * ax;
            vs[d] = s.v[d] + h * av;
        }
        std::vector<double> a = f(s.t + tab.c[i] * h, xs);
        kx[i] = vs;
        kv[i] = a;
    };

    if (tab.is_explicit()) {
        for (size_t i = 0; i < ns; ++i) eval_stage(i);
    } else {
        std::vector<double> a0 = f(s.t, s.x);
        for (size_t i = 0; i < ns; ++i) {
            kx[i] = s.v;
            kv[i] = a0;
        }
        double scale = std::max({max_abs(s.x), max_abs(s.v), 1.0});
        bool done = false;
        for (int it = 0; it < 50 && !done; ++it) {
            double d = 0.0;
            for (size_t i = 0; i < ns; ++i) {
                std::vector<double> px = kx[i], pv = kv[i];
                eval_stage(i);
                d = std::max({d, max_abs_diff(px, kx[i]), max_abs_diff(pv, kv[i])});
            }
            done = d <= 1e-13 * scale;
        }
        if (!done) throw NumericalError("implicit RK: stage fixed point did not converge");
    }

    RkStepResult res;
    res.state.t = s.t + h;
    res.state.x.resize(n);
    res.state.v.resize(n);
    for (size_t d = 0; d < n; ++d) {
        double sx = 0.0, sv = 0.0;
        for (size_t i = 0; i < ns; ++i) {
            sx += tab.b[i] * kx[i][d];
            sv += tab.b[i] * kv[i][d];
        }
        res.state.x[d] = s.x[d] + h * sx;
        res.state.v[d] = s.v[d] + h * sv;
    }
    if (!tab.b_err.empty()) {
        res.error.resize(2 * n);
        for (size_t d = 0; d < n; ++d) {
            double ex = 0.0, ev = 0.0;
            for (size_t i = 0; i < ns; ++i) {
                double db = tab.b[i] - tab.b_err[i];
                ex += db * kx[i][d];
                ev += db * kv[i][d];
            }
            res.error[d] = h * ex;
            res.error[n + d] = h * ev;
        }
    }
    return res;
}

Trajectory integrate_adaptive(const PhaseState& s0, const ForceField& f, double t_end,
                              double tol, double h_init) {
    if (!(tol > 0.0)) throw ConfigError("adaptive tolerance must be positive");
    const ButcherTableau& tab = dormand_prince_tableau();
    Trajectory traj;
    traj.states.push_back(s0);
    PhaseState s = s0;
    double span = t_end - s0.t;
    if (span <= 0.0) return traj;
    double h = h_init > 0.0 ? h_init : span / 100.0;
    while (s.t < t_end) {
        h = std::min(h, t_end - s.t);
        if (h < 1e-14 * std::max(std::abs(s.t), 1.0))
            throw NumericalError("adaptive integrator: step size underflow (stiff problem?)");
        RkStepResult r = step_rk(s, f, h, tab);
        double err = max_abs(r.error);
        double ynorm = std::max(max_abs(r.state.x), max_abs(r.state.v));
        double target = tol * (1.0 + ynorm);
        traj.max_error_estimate = std::max(traj.max_error_estimate, err);
        if (err <= target) {
            s = r.state;
            traj.states.push_back(s);
            ++traj.accepted;
        } else {
            ++traj.rejected;
        }
        double factor = err > 0.0 ? 0.9 * std::pow(target / err, 0.2) : 5.0;
        h *= std::clamp(factor, 0.2, 5.0);
    }
    return traj;
}

PhaseState step_stormer_verlet(const PhaseState& s, const ForceField& f, double h) {
    size_t n = s.x.size();
    std::vector<double> a = f(s.t, s.x);
    PhaseState out;
    out.t = s.t + h;
    out.x.resize(n);
    out.v.resize(n);
    std::vector<double> vh(n);
    for (size_t i = 0; i < n; ++i) {
        vh[i] = s.v[i] + 0.5 * h * a[i];
        out.x[i] = s.x[i] + h * vh[i];
    }
    std::vector<double> a1 = f(s.t + h, out.x);
    for (size_t i = 0; i < n; ++i) out.v[i] = vh[i] + 0.5 * h * a1[i];
    return out;
}

PhaseState step_partitioned_rk(const PhaseState& s, const ForceField& f, double h,
                               const PartitionedTableau& pair) {
    size_t n = s.x.size();
    size_t ns = pair.pos.stages();
    // k: position-derivative stages; l: acceleration stages
    std::vector<std::vector<double>> k(ns, s.v), l(ns, f(s.t, s.x));
    std::vector<double> ys(n), vs(n);
    double scale = std::max({max_abs(s.x), max_abs(s.v), 1.0});
    bool done = false;
    for (int it = 0; it < 50 && !done; ++it) {
        double d = 0.0;
        for (size_t i = 0; i < ns; ++i) {
            for (size_t dd = 0; dd < n; ++dd) {
                double ay = 0.0, av = 0.0;
                for (size_t j = 0; j < ns; ++j) {
                    ay += pair.pos.a[i][j] * k[j][dd];
                    av += pair.vel.a[i][j] * l[j][dd];
                }
                ys[dd] = s.x[dd] + h * ay;
                vs[dd] = s.v[dd] + h * av;
            }
            std::vector<double> a = f(s.t + pair.vel.c[i] * h, ys);
            d = std::max({d, max_abs_diff(k[i], vs), max_abs_diff(l[i], a)});
            k[i] = vs;
            l[i] = a;
        }
        done = d <= 1e-13 * scale;
    }
    if (!done) throw NumericalError("partitioned RK: stage fixed point did not converge");
    PhaseState out;
    out.t = s.t + h;
    out.x.resize(n);
    out.v.resize(n);
    for (size_t dd = 0; dd < n; ++dd) {
        double sx = 0.0, sv = 0.0;
        for (size_t i = 0; i < ns; ++i) {
            sx += pair.pos.b[i] * k[i][dd];
            sv += pair.vel.b[i] * l[i][dd];
        }
        out.x[dd] = s.x[dd] + h * sx;
        out.v[dd] = s.v[dd] + h * sv;
    }
    return out;
}

Trajectory integrate_fixed(const PhaseState& s0, const ForceField& f, double h, long n,
                           const Stepper& step, long record_every) {
    Trajectory traj;
    traj.states.push_back(s0);
    PhaseState s = s0;
    for (long i = 0; i < n; ++i) {
        s = step(s, f, h);
        if ((i + 1) % record_every == 0 || i == n - 1) traj.states.push_back(s);
        ++traj.accepted;
    }
    return traj;
}

std::vector<double> coulomb_accelerations(const std::vector<double>& x,
                                          const std::vector<double>& charge,
                                          const std::vector<double>& mass) {
    size_t np = charge.size();
    if (x.size() != 3 * np || mass.size() != np)
        throw ConfigError("coulomb: inconsistent particle counts");
    const double k = 1.0 / (4.0 * M_PI * kEpsilon0);
    std::vector<double> a(3 * np, 0.0);
    for (size_t i = 0; i < np; ++i) {
        for (size_t j = i + 1; j < np; ++j) {
            double dx = x[3 * i] - x[3 * j];
            double dy = x[3 * i + 1] - x[3 * j + 1];
            double dz = x[3 * i + 2] - x[3 * j + 2];
            double r2 = dx * dx + dy * dy + dz * dz;
            if (r2 <= 0.0) throw NumericalError("coulomb: coincident particles");
            double r = std::sqrt(r2);
            double fmag = k * charge[i] * charge[j] / (r2 * r);  // force / distance
            double fx = fmag * dx, fy = fmag * dy, fz = fmag * dz;
            a[3 * i] += fx / mass[i];
            a[3 * i + 1] += fy / mass[i];
            a[3 * i + 2] += fz / mass[i];
            a[3 * j] -= fx / mass[j];
            a[3 * j + 1] -= fy / mass[j];
            a[3 * j + 2] -= fz / mass[j];
        }
    }
    return a;
}

double total_energy(const PhaseState& s, const std::vector<double>& mass_per_dof,
                    const PotentialEnergy& pot) {
    double kin = 0.0;
    for (size_t i = 0; i < s.v.size(); ++i) kin += 0.5 * mass_per_dof[i] * s.v[i] * s.v[i];
    return kin + pot(s.t, s.x);
}

}  // namespace iontrap
