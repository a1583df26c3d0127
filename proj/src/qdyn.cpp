#include "iontrap/qdyn.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numbers>
#include <string>

#include "iontrap/errors.hpp"

namespace iontrap {

namespace {

// FFTW's planner is not thread safe; execution of distinct plans is
std::mutex& fftw_mutex() {
    static std::mutex m;
    return m;
}

struct FftPlans {
    fftw_plan fwd = nullptr;
    fftw_plan inv = nullptr;
    std::vector<std::complex<double>> buf;

    explicit FftPlans(int n) : buf(static_cast<std::size_t>(n)) {
        std::lock_guard<std::mutex> lock(fftw_mutex());
        auto* p = reinterpret_cast<fftw_complex*>(buf.data());
        fwd = fftw_plan_dft_1d(n, p, p, FFTW_FORWARD, FFTW_ESTIMATE);
        inv = fftw_plan_dft_1d(n, p, p, FFTW_BACKWARD, FFTW_ESTIMATE);
    }
    ~FftPlans() {
        std::lock_guard<std::mutex> lock(fftw_mutex());
        fftw_destroy_plan(fwd);
        fftw_destroy_plan(inv);
    }
    FftPlans(const FftPlans&) = delete;
    FftPlans& operator=(const FftPlans&) = delete;
};

// k = 0, dk, ..., +K, -(K - dk), ..., -dk
double wavenumber(const SpatialGrid& g, int j) {
    const double dk = 2.0 * std::numbers::pi / g.length();
    return j <= g.n / 2 ? j * dk : (j - g.n) * dk;
}

double l2_norm(const std::vector<std::complex<double>>& a) {
    double s = 0.0;
    for (const auto& z : a) s += std::norm(z);
    return std::sqrt(s);
}

void check_sizes(const SpatialGrid& g, std::size_t psi, std::size_t v, const char* who) {
    if (psi != static_cast<std::size_t>(g.n) || v != static_cast<std::size_t>(g.n))
        throw ConfigError(std::string(who) + ": state or potential does not match the grid");
}

}  // namespace

double SpatialGrid::k_max() const { return std::numbers::pi / dx; }

SpatialGrid make_grid(double x_min, double length, int n) {
    if (n <= 0 || n % 2 != 0) throw ConfigError("make_grid: point count must be even and positive");
    if (!(length > 0.0)) throw ConfigError("make_grid: length must be positive");
    return {x_min, length / n, n};
}

int optimal_grid_points(double length, double mass, double v_max, double beta) {
    if (!(length > 0.0) || !(mass > 0.0) || !(v_max > 0.0))
        throw ConfigError("optimal_grid_points: length, mass and v_max must be positive");
    if (!(beta > 0.0) || beta > 1.0)
        throw ConfigError("optimal_grid_points: beta must lie in (0, 1]");
    const double raw = length * std::sqrt(2.0 * mass * v_max) / (beta * std::numbers::pi);
    int n = static_cast<int>(std::ceil(raw));
    if (n % 2 != 0) ++n;
    return std::max(n, 2);
}

std::complex<double> inner_product(const WaveFunction& a, const WaveFunction& b) {
    if (a.amp.size() != b.amp.size()) throw ConfigError("inner_product: size mismatch");
    std::complex<double> s = 0.0;
    for (std::size_t i = 0; i < a.amp.size(); ++i) s += std::conj(a.amp[i]) * b.amp[i];
    return s * a.grid.dx;
}

double norm(const WaveFunction& wf) { return l2_norm(wf.amp) * std::sqrt(wf.grid.dx); }

void normalize(WaveFunction& wf) {
    const double n = norm(wf);
    if (!(n > 0.0)) throw NumericalError("normalize: zero wavefunction");
    for (auto& z : wf.amp) z /= n;
}

WaveFunction coherent_state(const SpatialGrid& grid, double mass, double omega, double x0,
                            double p0) {
    if (!(mass > 0.0) || !(omega > 0.0))
        throw ConfigError("coherent_state: mass and omega must be positive");
    WaveFunction wf{grid, std::vector<std::complex<double>>(static_cast<std::size_t>(grid.n))};
    const double a = mass * omega;
    for (int i = 0; i < grid.n; ++i) {
        const double d = grid.x(i) - x0;
        wf.amp[static_cast<std::size_t>(i)] =
            std::exp(std::complex<double>(-0.5 * a * d * d, p0 * d));
    }
    normalize(wf);
    return wf;
}

std::vector<double> numerov_integrate(const SpatialGrid& grid, const std::vector<double>& g,
                                      double psi0, double psi1) {
    if (g.size() != static_cast<std::size_t>(grid.n))
        throw ConfigError("numerov_integrate: g does not match the grid");
    if (grid.n < 3) throw ConfigError("numerov_integrate: need at least three points");
    const double h2 = grid.dx * grid.dx;
    std::vector<double> psi(g.size());
    psi[0] = psi0;
    psi[1] = psi1;
    for (std::size_t k = 1; k + 1 < g.size(); ++k) {
        const double den = 1.0 - h2 / 12.0 * g[k + 1];
        if (!(den > 0.0))
            throw NumericalError("numerov_integrate: step denominator not positive, grid too "
                                 "coarse for this energy");
        psi[k + 1] =
            (psi[k] * (2.0 + h2 * 10.0 / 12.0 * g[k]) - psi[k - 1] * (1.0 - h2 / 12.0 * g[k - 1])) /
            den;
    }
    return psi;
}

namespace {

constexpr double kShootStart = 1e-10;
constexpr double kRescaleAt = 1e100;
constexpr double kPoleReject = 1e-3;

// log-derivative mismatch at the match index; integrations are rescaled on
// overflow, which the normalized mismatch does not see
double shoot_mismatch(const SpatialGrid& grid, const std::vector<double>& v, double mass,
                      double energy) {
    const int n = grid.n;
    const double h2 = grid.dx * grid.dx;
    std::vector<double> g(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) g[i] = 2.0 * mass * (v[i] - energy);

    int mi = -1;
    for (int i = 0; i < n; ++i)
        if (v[static_cast<std::size_t>(i)] <= energy) mi = i;
    mi = std::clamp(mi, 2, n - 3);

    const auto denom = [&](int i) {
        const double d = 1.0 - h2 / 12.0 * g[static_cast<std::size_t>(i)];
        if (!(d > 0.0))
            throw NumericalError("numerov_eigenvalues: grid too coarse at this energy");
        return d;
    };
    const auto weight = [&](int i) { return 1.0 - h2 / 12.0 * g[static_cast<std::size_t>(i)]; };
    const auto middle = [&](int i) { return 2.0 + h2 * 10.0 / 12.0 * g[static_cast<std::size_t>(i)]; };

    double rec_l[3] = {0.0, 0.0, 0.0};
    {
        double pm1 = 0.0;
        double p0 = kShootStart;
        const auto record = [&](int k, double val) {
            if (k >= mi - 1 && k <= mi + 1) rec_l[k - (mi - 1)] = val;
        };
        record(0, pm1);
        record(1, p0);
        for (int k = 1; k < mi + 1; ++k) {
            const double p1 = (p0 * middle(k) - pm1 * weight(k - 1)) / denom(k + 1);
            pm1 = p0;
            p0 = p1;
            record(k + 1, p0);
            if (std::abs(p0) > kRescaleAt) {
                const double s = 1.0 / std::abs(p0);
                pm1 *= s;
                p0 *= s;
                for (double& r : rec_l) r *= s;
            }
        }
    }

    double rec_r[3] = {0.0, 0.0, 0.0};
    {
        double pp1 = 0.0;
        double p0 = kShootStart;
        const auto record = [&](int k, double val) {
            if (k >= mi - 1 && k <= mi + 1) rec_r[k - (mi - 1)] = val;
        };
        record(n - 1, pp1);
        record(n - 2, p0);
        for (int k = n - 2; k > mi - 1; --k) {
            const double pm1v = (p0 * middle(k) - pp1 * weight(k + 1)) / denom(k - 1);
            pp1 = p0;
            p0 = pm1v;
            record(k - 1, p0);
            if (std::abs(p0) > kRescaleAt) {
                const double s = 1.0 / std::abs(p0);
                pp1 *= s;
                p0 *= s;
                for (double& r : rec_r) r *= s;
            }
        }
    }

    if (rec_l[1] == 0.0 || rec_r[1] == 0.0) return 1e12;
    const double dl = (rec_l[2] - rec_l[0]) / (2.0 * grid.dx * rec_l[1]);
    const double dr = (rec_r[2] - rec_r[0]) / (2.0 * grid.dx * rec_r[1]);
    return dl - dr;
}

}  // namespace

std::vector<double> numerov_eigenvalues(const SpatialGrid& grid, const std::vector<double>& v,
                                        double mass, int n_states, double e_lo, double e_hi,
                                        int scan_points) {
    if (v.size() != static_cast<std::size_t>(grid.n))
        throw ConfigError("numerov_eigenvalues: potential does not match the grid");
    if (grid.n < 8) throw ConfigError("numerov_eigenvalues: grid too small");
    if (n_states <= 0) throw ConfigError("numerov_eigenvalues: n_states must be positive");
    if (!(e_lo < e_hi)) throw ConfigError("numerov_eigenvalues: empty energy window");
    if (scan_points < 2) throw ConfigError("numerov_eigenvalues: need at least two scan points");

    const auto f = [&](double e) { return shoot_mismatch(grid, v, mass, e); };
    std::vector<double> roots;
    double e_prev = e_lo;
    double f_prev = f(e_prev);
    for (int k = 1; k <= scan_points; ++k) {
        const double e = e_lo + (e_hi - e_lo) * k / scan_points;
        const double fe = f(e);
        if (f_prev == 0.0) {
            roots.push_back(e_prev);
        } else if (f_prev * fe < 0.0) {
            double lo = e_prev;
            double hi = e;
            double flo = f_prev;
            while (hi - lo > 1e-12 * std::max({std::abs(lo), std::abs(hi), 1.0})) {
                const double mid = 0.5 * (lo + hi);
                const double fm = f(mid);
                if (flo * fm <= 0.0) {
                    hi = mid;
                } else {
                    lo = mid;
                    flo = fm;
                }
            }
            const double e_star = 0.5 * (lo + hi);
            if (std::abs(f(e_star)) < kPoleReject) roots.push_back(e_star);
        }
        e_prev = e;
        f_prev = fe;
    }

    if (static_cast<int>(roots.size()) < n_states)
        throw NumericalError("numerov_eigenvalues: found " + std::to_string(roots.size()) +
                             " states, " + std::to_string(n_states) + " requested");
    roots.resize(static_cast<std::size_t>(n_states));
    return roots;
}

std::vector<double> numerov_eigenvalues(const SpatialGrid& grid, const std::vector<double>& v,
                                        double mass, int n_states) {
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    const double span = *hi - *lo;
    if (!(span > 0.0)) throw ConfigError("numerov_eigenvalues: flat potential has no bound states");
    return numerov_eigenvalues(grid, v, mass, n_states, *lo + 1e-9 * span, *hi, 200);
}

Eigen::MatrixXd hamiltonian_matrix(const SpatialGrid& grid, const std::vector<double>& v,
                                   double mass) {
    if (v.size() != static_cast<std::size_t>(grid.n))
        throw ConfigError("hamiltonian_matrix: potential does not match the grid");
    const int n = grid.n;
    const double k = grid.k_max();
    const double pref = k * k / (2.0 * mass);
    Eigen::MatrixXd h(n, n);
    for (int l = 0; l < n; ++l) {
        h(l, l) = pref / 3.0 * (1.0 + 2.0 / (static_cast<double>(n) * n)) +
                  v[static_cast<std::size_t>(l)];
        for (int j = l + 1; j < n; ++j) {
            const int d = j - l;
            const double s = std::sin(std::numbers::pi * d / n);
            const double val = pref * 2.0 / (static_cast<double>(n) * n) * (d % 2 == 0 ? 1.0 : -1.0) /
                               (s * s);
            h(l, j) = val;
            h(j, l) = val;
        }
    }
    return h;
}

EigenSolution eigensolve(const SpatialGrid& grid, const std::vector<double>& v, double mass,
                         int n_states) {
    if (n_states <= 0 || n_states > grid.n)
        throw ConfigError("eigensolve: n_states out of range");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(hamiltonian_matrix(grid, v, mass));
    if (es.info() != Eigen::Success) throw NumericalError("eigensolve: diagonalization failed");

    EigenSolution out;
    const double inv_sqrt_dx = 1.0 / std::sqrt(grid.dx);
    for (int s = 0; s < n_states; ++s) {
        out.energies.push_back(es.eigenvalues()(s));
        WaveFunction wf{grid, std::vector<std::complex<double>>(static_cast<std::size_t>(grid.n))};
        Eigen::VectorXd col = es.eigenvectors().col(s);
        int imax = 0;
        for (int i = 1; i < grid.n; ++i)
            if (std::abs(col(i)) > std::abs(col(imax))) imax = i;
        if (col(imax) < 0.0) col = -col;
        for (int i = 0; i < grid.n; ++i) wf.amp[static_cast<std::size_t>(i)] = col(i) * inv_sqrt_dx;
        out.states.push_back(std::move(wf));
    }
    return out;
}

void apply_kinetic(WaveFunction& wf, double mass) {
    const int n = wf.grid.n;
    if (wf.amp.size() != static_cast<std::size_t>(n))
        throw ConfigError("apply_kinetic: state does not match the grid");
    FftPlans fft(n);
    std::copy(wf.amp.begin(), wf.amp.end(), fft.buf.begin());
    fftw_execute(fft.fwd);
    for (int j = 0; j < n; ++j) {
        const double k = wavenumber(wf.grid, j);
        fft.buf[static_cast<std::size_t>(j)] *= k * k / (2.0 * mass);
    }
    fftw_execute(fft.inv);
    const double inv_n = 1.0 / n;
    for (std::size_t i = 0; i < wf.amp.size(); ++i) wf.amp[i] = fft.buf[i] * inv_n;
}

struct KineticApplier::Impl {
    SpatialGrid grid;
    FftPlans fft;
    std::vector<double> kin;

    Impl(const SpatialGrid& g, double mass) : grid(g), fft(g.n) {
        kin.resize(static_cast<std::size_t>(g.n));
        for (int j = 0; j < g.n; ++j) {
            const double k = wavenumber(g, j);
            kin[static_cast<std::size_t>(j)] = k * k / (2.0 * mass);
        }
    }
};

KineticApplier::KineticApplier(const SpatialGrid& grid, double mass) : impl_(nullptr) {
    if (!(mass > 0.0)) throw ConfigError("kinetic operator: mass must be positive");
    impl_ = new Impl(grid, mass);
}

KineticApplier::~KineticApplier() { delete impl_; }

void KineticApplier::apply(const std::vector<std::complex<double>>& in,
                           std::vector<std::complex<double>>& out) {
    if (in.size() != static_cast<std::size_t>(impl_->grid.n))
        throw ConfigError("kinetic operator: state does not match the grid");
    auto& buf = impl_->fft.buf;
    std::copy(in.begin(), in.end(), buf.begin());
    fftw_execute(impl_->fft.fwd);
    for (std::size_t i = 0; i < buf.size(); ++i) buf[i] *= impl_->kin[i];
    fftw_execute(impl_->fft.inv);
    const double inv_n = 1.0 / impl_->grid.n;
    out.resize(in.size());
    for (std::size_t i = 0; i < in.size(); ++i) out[i] = buf[i] * inv_n;
}

SpectralBounds spectral_bounds(const SpatialGrid& grid, const std::vector<double>& v,
                               double mass) {
    if (v.empty()) throw ConfigError("spectral_bounds: empty potential");
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    const double k = grid.k_max();
    const double top = *hi + k * k / (2.0 * mass);
    const double span = top - *lo;
    return {*lo, top + 0.01 * span};
}

struct SplitOperatorPropagator::Impl {
    SpatialGrid grid;
    double mass;
    FftPlans fft;
    std::vector<std::complex<double>> kin_phase;

    Impl(const SpatialGrid& g, double m, double dt) : grid(g), mass(m), fft(g.n) {
        kin_phase.resize(static_cast<std::size_t>(g.n));
        for (int j = 0; j < g.n; ++j) {
            const double k = wavenumber(g, j);
            kin_phase[static_cast<std::size_t>(j)] =
                std::exp(std::complex<double>(0.0, -k * k / (2.0 * mass) * dt));
        }
    }
};

SplitOperatorPropagator::SplitOperatorPropagator(const SpatialGrid& grid, double mass, double dt)
    : impl_(nullptr), dt_(dt) {
    if (!(mass > 0.0)) throw ConfigError("split operator: mass must be positive");
    impl_ = new Impl(grid, mass, dt);
}

SplitOperatorPropagator::~SplitOperatorPropagator() { delete impl_; }

void SplitOperatorPropagator::step(WaveFunction& wf, const std::vector<double>& v) {
    check_sizes(impl_->grid, wf.amp.size(), v.size(), "split operator");
    const double before = l2_norm(wf.amp);
    auto& buf = impl_->fft.buf;
    const double inv_n = 1.0 / impl_->grid.n;
    for (std::size_t i = 0; i < wf.amp.size(); ++i)
        buf[i] = wf.amp[i] * std::exp(std::complex<double>(0.0, -0.5 * v[i] * dt_));
    fftw_execute(impl_->fft.fwd);
    for (std::size_t i = 0; i < buf.size(); ++i) buf[i] *= impl_->kin_phase[i];
    fftw_execute(impl_->fft.inv);
    for (std::size_t i = 0; i < wf.amp.size(); ++i)
        wf.amp[i] = buf[i] * inv_n * std::exp(std::complex<double>(0.0, -0.5 * v[i] * dt_));
    if (l2_norm(wf.amp) > before * (1.0 + 1e-8))
        throw NumericalError("split operator: norm grew, propagation unstable");
}

std::vector<double> bessel_j_downward(int n, double x) {
    if (n < 0) throw ConfigError("bessel_j_downward: negative order");
    std::vector<double> out(static_cast<std::size_t>(n) + 1, 0.0);
    const double ax = std::abs(x);
    if (ax < 1e-12) {
        out[0] = 1.0;
        if (n >= 1) out[1] = x / 2.0;
        return out;
    }

    const int start = std::max(n, static_cast<int>(std::ceil(ax))) + 30;
    std::vector<double> f(static_cast<std::size_t>(start) + 2, 0.0);
    f[static_cast<std::size_t>(start) + 1] = 0.0;
    f[static_cast<std::size_t>(start)] = 1e-30;
    for (int k = start; k >= 1; --k) {
        f[static_cast<std::size_t>(k) - 1] =
            2.0 * k / ax * f[static_cast<std::size_t>(k)] - f[static_cast<std::size_t>(k) + 1];
        if (std::abs(f[static_cast<std::size_t>(k) - 1]) > 1e250)
            for (std::size_t i = 0; i < f.size(); ++i) f[i] *= 1e-250;
    }
    double nrm = f[0];
    for (int k = 2; k <= start; k += 2) nrm += 2.0 * f[static_cast<std::size_t>(k)];
    for (int k = 0; k <= n; ++k) {
        double jk = f[static_cast<std::size_t>(k)] / nrm;
        if (x < 0.0 && k % 2 == 1) jk = -jk;
        out[static_cast<std::size_t>(k)] = jk;
    }
    return out;
}

namespace {

// J_n(z) only starts its superexponential decay past n ~ |z| + O(|z|^{1/3})
// (the Airy transition region), so the flat +20 headroom that works for small
// arguments leaves an O(1e-8) tail near |z| ~ 30. Widen with the cube-root
// term so trimming at 1e-15 is actually reachable.
int chebyshev_terms(double z) {
    const double az = std::abs(z);
    return static_cast<int>(std::ceil(az)) + 20 +
           static_cast<int>(std::ceil(15.0 * std::cbrt(std::max(az, 1.0) / 2.0)));
}

}  // namespace

std::vector<std::complex<double>> chebyshev_coefficients(double z) {
    const int nmax = chebyshev_terms(z);
    const std::vector<double> j = bessel_j_downward(nmax, z);
    static const std::complex<double> rot[4] = {{1.0, 0.0}, {0.0, -1.0}, {-1.0, 0.0}, {0.0, 1.0}};
    std::vector<std::complex<double>> a(j.size());
    a[0] = j[0];
    for (std::size_t k = 1; k < j.size(); ++k) a[k] = 2.0 * rot[k % 4] * j[k];
    while (a.size() > 1 && std::abs(a.back()) < 1e-15) a.pop_back();
    return a;
}

void chebyshev_exp_apply(const ApplyOp& h_prime, std::vector<std::complex<double>>& psi, double z,
                         std::complex<double> prefactor) {
    const int nmax = chebyshev_terms(z);
    std::vector<double> w = bessel_j_downward(nmax, z);
    std::size_t terms = w.size();
    while (terms > 1 && 2.0 * std::abs(w[terms - 1]) < 1e-15) --terms;

    const std::complex<double> mi(0.0, -1.0);
    std::vector<std::complex<double>> phi0 = psi;
    std::vector<std::complex<double>> phi1(psi.size());
    std::vector<std::complex<double>> tmp(psi.size());
    h_prime(phi0, phi1);
    for (auto& zv : phi1) zv *= mi;

    std::vector<std::complex<double>> acc(psi.size());
    for (std::size_t i = 0; i < psi.size(); ++i) acc[i] = w[0] * phi0[i] + 2.0 * w[1] * phi1[i];
    for (std::size_t k = 2; k < terms; ++k) {
        h_prime(phi1, tmp);
        for (std::size_t i = 0; i < psi.size(); ++i) tmp[i] = 2.0 * mi * tmp[i] + phi0[i];
        std::swap(phi0, phi1);
        std::swap(phi1, tmp);
        for (std::size_t i = 0; i < psi.size(); ++i) acc[i] += 2.0 * w[k] * phi1[i];
    }
    for (std::size_t i = 0; i < psi.size(); ++i) psi[i] = prefactor * acc[i];
}

struct ChebyshevPropagator::Impl {
    SpatialGrid grid;
    double mass;
    SpectralBounds bounds;
    FftPlans fft;
    std::vector<double> kin;
    double e_mid;
    double de_half;

    Impl(const SpatialGrid& g, double m, SpectralBounds b) : grid(g), mass(m), bounds(b), fft(g.n) {
        kin.resize(static_cast<std::size_t>(g.n));
        for (int j = 0; j < g.n; ++j) {
            const double k = wavenumber(g, j);
            kin[static_cast<std::size_t>(j)] = k * k / (2.0 * mass);
        }
        e_mid = 0.5 * (b.e_lo + b.e_hi);
        de_half = 0.5 * (b.e_hi - b.e_lo);
    }
};

ChebyshevPropagator::ChebyshevPropagator(const SpatialGrid& grid, double mass, double dt,
                                         SpectralBounds bounds)
    : impl_(nullptr), dt_(dt) {
    if (!(mass > 0.0)) throw ConfigError("chebyshev propagator: mass must be positive");
    if (!(bounds.e_hi > bounds.e_lo))
        throw ConfigError("chebyshev propagator: empty spectral range");
    impl_ = new Impl(grid, mass, bounds);
}

ChebyshevPropagator::~ChebyshevPropagator() { delete impl_; }

void ChebyshevPropagator::step(WaveFunction& wf, const std::vector<double>& v) {
    check_sizes(impl_->grid, wf.amp.size(), v.size(), "chebyshev propagator");
    const double before = l2_norm(wf.amp);
    Impl& im = *impl_;

    const auto h_prime = [&](const std::vector<std::complex<double>>& in,
                             std::vector<std::complex<double>>& out) {
        std::copy(in.begin(), in.end(), im.fft.buf.begin());
        fftw_execute(im.fft.fwd);
        for (std::size_t i = 0; i < im.fft.buf.size(); ++i) im.fft.buf[i] *= im.kin[i];
        fftw_execute(im.fft.inv);
        const double inv_n = 1.0 / im.grid.n;
        out.resize(in.size());
        for (std::size_t i = 0; i < in.size(); ++i)
            out[i] = (im.fft.buf[i] * inv_n + (v[i] - im.e_mid) * in[i]) / im.de_half;
    };

    const double z = im.de_half * dt_;
    const std::complex<double> pref = std::exp(std::complex<double>(0.0, -im.e_mid * dt_));
    chebyshev_exp_apply(h_prime, wf.amp, z, pref);

    if (l2_norm(wf.amp) > before * (1.0 + 1e-8))
        throw NumericalError("chebyshev propagator: norm grew, spectral bounds likely violated");
}

void propagate_split_operator(WaveFunction& wf, const std::vector<double>& v, double mass,
                              double dt, int n_steps) {
    SplitOperatorPropagator prop(wf.grid, mass, dt);
    for (int s = 0; s < n_steps; ++s) prop.step(wf, v);
}

void propagate_chebyshev(WaveFunction& wf, const std::vector<double>& v, double mass, double dt,
                         int n_steps) {
    ChebyshevPropagator prop(wf.grid, mass, dt, spectral_bounds(wf.grid, v, mass));
    for (int s = 0; s < n_steps; ++s) prop.step(wf, v);
}

}  // namespace iontrap
