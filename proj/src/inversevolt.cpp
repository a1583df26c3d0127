#include "iontrap/inversevolt.hpp"

#include <cmath>
#include <functional>
#include <string>

#include "iontrap/errors.hpp"

namespace iontrap {

SvdResult svd(const Eigen::MatrixXd& a) {
    Eigen::JacobiSVD<Eigen::MatrixXd> dec(a, Eigen::ComputeThinU | Eigen::ComputeFullV);
    return {dec.matrixU(), dec.singularValues(), dec.matrixV()};
}

namespace {

// s' = s / (s^2 + alpha^2) and d = alpha^2 / (s^2 + alpha^2); the degenerate
// s = alpha = 0 direction is treated as pure anchor (s' = 0, d = 1)
void filter_factors(double s, double alpha, double& sp, double& d) {
    const double den = s * s + alpha * alpha;
    if (den == 0.0) {
        sp = 0.0;
        d = 1.0;
        return;
    }
    sp = s / den;
    d = alpha * alpha / den;
}

Eigen::VectorXd solve_factored(const SvdResult& f, const Eigen::VectorXd& phi, double alpha,
                               const Eigen::VectorXd& u0) {
    const Eigen::Index n = f.v.rows();
    const Eigen::Index r = f.s.size();
    Eigen::VectorXd coef = f.u.transpose() * phi;
    Eigen::VectorXd u = Eigen::VectorXd::Zero(n);
    for (Eigen::Index j = 0; j < n; ++j) {
        const double s = j < r ? f.s(j) : 0.0;
        double sp = 0.0;
        double d = 0.0;
        filter_factors(s, alpha, sp, d);
        double c = d * f.v.col(j).dot(u0);
        if (j < r) c += sp * coef(j);
        u += c * f.v.col(j);
    }
    return u;
}

}  // namespace

Eigen::VectorXd tikhonov_solve(const Eigen::MatrixXd& a, const Eigen::VectorXd& phi,
                               double alpha) {
    return tikhonov_solve_anchored(a, phi, alpha, Eigen::VectorXd::Zero(a.cols()));
}

Eigen::VectorXd tikhonov_solve_anchored(const Eigen::MatrixXd& a, const Eigen::VectorXd& phi,
                                        double alpha, const Eigen::VectorXd& u0) {
    if (phi.size() != a.rows() || u0.size() != a.cols())
        throw ConfigError("tikhonov solve: dimension mismatch");
    if (!(alpha >= 0.0)) throw ConfigError("tikhonov solve: alpha must be non-negative");
    return solve_factored(svd(a), phi, alpha, u0);
}

Eigen::VectorXd tikhonov_solve_weighted(const Eigen::MatrixXd& a, const Eigen::VectorXd& phi,
                                        double alpha, const Eigen::VectorXd& u0,
                                        const Eigen::VectorXd& weights) {
    if (weights.size() != a.cols()) throw ConfigError("tikhonov solve: weight count mismatch");
    for (Eigen::Index j = 0; j < weights.size(); ++j)
        if (!(weights(j) > 0.0) || weights(j) > 1.0)
            throw ConfigError("tikhonov solve: weights must lie in (0, 1]");
    Eigen::MatrixXd scaled = a;
    for (Eigen::Index j = 0; j < a.cols(); ++j) scaled.col(j) *= weights(j);
    const Eigen::VectorXd u0s = u0.array() / weights.array();
    Eigen::VectorXd us = tikhonov_solve_anchored(scaled, phi, alpha, u0s);
    return us.array() * weights.array();
}

namespace {

bool within_bounds(const Eigen::VectorXd& u, double lo, double hi) {
    return (u.array() >= lo).all() && (u.array() <= hi).all();
}

// smallest alpha in [1e-8, 1e4] * s_max satisfying `ok`, found by bisection
// in log(alpha); `ok` must hold at the top of the bracket
double smallest_feasible_alpha(const SvdResult& f, const Eigen::VectorXd& phi,
                               const Eigen::VectorXd& u0,
                               const std::function<bool(const Eigen::VectorXd&)>& ok,
                               const char* what) {
    const double smax = f.s.size() > 0 ? f.s(0) : 1.0;
    const double scale = smax > 0.0 ? smax : 1.0;
    double lo = 1e-8 * scale;
    double hi = 1e4 * scale;
    if (ok(solve_factored(f, phi, lo, u0))) return lo;
    if (!ok(solve_factored(f, phi, hi, u0)))
        throw NumericalError(std::string(what) + ": infeasible even at maximum regularization");
    for (int it = 0; it < 80; ++it) {
        const double mid = std::sqrt(lo * hi);
        if (ok(solve_factored(f, phi, mid, u0)))
            hi = mid;
        else
            lo = mid;
    }
    return hi;
}

}  // namespace

AutoAlphaResult auto_alpha(const Eigen::MatrixXd& a, const Eigen::VectorXd& phi,
                           const Eigen::VectorXd& u0, double u_min, double u_max) {
    if (!(u_min < u_max)) throw ConfigError("auto_alpha: u_min must be below u_max");
    const SvdResult f = svd(a);
    const auto ok = [&](const Eigen::VectorXd& u) { return within_bounds(u, u_min, u_max); };
    const double alpha = smallest_feasible_alpha(f, phi, u0, ok, "auto_alpha");
    return {solve_factored(f, phi, alpha, u0), alpha};
}

Eigen::VectorXd harmonic_target(const std::vector<double>& axis_x, double x0, double delta) {
    Eigen::VectorXd phi(static_cast<Eigen::Index>(axis_x.size()));
    for (Eigen::Index i = 0; i < phi.size(); ++i) {
        const double dx = axis_x[static_cast<std::size_t>(i)] - x0;
        phi(i) = delta * dx * dx;
    }
    return phi;
}

Eigen::MatrixXd transport_waveforms(const Eigen::MatrixXd& a, const std::vector<double>& axis_x,
                                    const std::vector<double>& centers, double delta,
                                    const TransportConfig& cfg) {
    if (static_cast<Eigen::Index>(axis_x.size()) != a.rows())
        throw ConfigError("transport_waveforms: axis grid does not match basis matrix rows");
    if (centers.empty()) throw ConfigError("transport_waveforms: no waveform steps requested");
    if (!(cfg.roi_halfwidth > 0.0) || !(cfg.max_step_change > 0.0))
        throw ConfigError("transport_waveforms: roi_halfwidth and max_step_change must be positive");

    const Eigen::Index ne = a.cols();
    Eigen::MatrixXd wave(static_cast<Eigen::Index>(centers.size()), ne);
    Eigen::VectorXd prev = Eigen::VectorXd::Zero(ne);

    for (std::size_t k = 0; k < centers.size(); ++k) {
        std::vector<Eigen::Index> rows;
        for (std::size_t i = 0; i < axis_x.size(); ++i)
            if (std::abs(axis_x[i] - centers[k]) <= cfg.roi_halfwidth)
                rows.push_back(static_cast<Eigen::Index>(i));
        if (static_cast<Eigen::Index>(rows.size()) < ne)
            throw ConfigError("transport_waveforms: fit region at step " + std::to_string(k) +
                              " holds fewer axis samples than electrodes");

        Eigen::MatrixXd ak(static_cast<Eigen::Index>(rows.size()), ne);
        Eigen::VectorXd phik(static_cast<Eigen::Index>(rows.size()));
        for (std::size_t ri = 0; ri < rows.size(); ++ri) {
            ak.row(static_cast<Eigen::Index>(ri)) = a.row(rows[ri]);
            const double dx = axis_x[static_cast<std::size_t>(rows[ri])] - centers[k];
            phik(static_cast<Eigen::Index>(ri)) = delta * dx * dx;
        }

        const SvdResult f = svd(ak);
        const auto ok = [&](const Eigen::VectorXd& u) {
            if (!within_bounds(u, cfg.u_min, cfg.u_max)) return false;
            if (k == 0) return true;
            return (u - prev).cwiseAbs().maxCoeff() <= cfg.max_step_change;
        };
        double alpha;
        try {
            alpha = smallest_feasible_alpha(f, phik, prev, ok, "transport_waveforms");
        } catch (const NumericalError&) {
            throw NumericalError("transport_waveforms: no feasible voltages at step " +
                                 std::to_string(k));
        }
        prev = solve_factored(f, phik, alpha, prev);
        wave.row(static_cast<Eigen::Index>(k)) = prev.transpose();
    }
    return wave;
}

}  // namespace iontrap
