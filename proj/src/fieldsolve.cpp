#include "iontrap/fieldsolve.hpp"

#include <algorithm>
#include <cmath>

#include "iontrap/errors.hpp"

namespace iontrap {

std::vector<double> thomas_solve(const std::vector<double>& a, const std::vector<double>& b,
                                 const std::vector<double>& c, const std::vector<double>& d) {
    size_t n = b.size();
    if (a.size() != n || c.size() != n || d.size() != n)
        throw ConfigError("thomas_solve: band sizes disagree");
    std::vector<double> cp(n), dp(n), x(n);
    double denom = b[0];
    if (denom == 0.0) throw NumericalError("thomas_solve: zero pivot");
    cp[0] = c[0] / denom;
    dp[0] = d[0] / denom;
    for (size_t i = 1; i < n; ++i) {
        denom = b[i] - a[i] * cp[i - 1];
        if (denom == 0.0) throw NumericalError("thomas_solve: zero pivot");
        cp[i] = c[i] / denom;
        dp[i] = (d[i] - a[i] * dp[i - 1]) / denom;
    }
    x[n - 1] = dp[n - 1];
    for (size_t i = n - 1; i-- > 0;) x[i] = dp[i] - cp[i] * x[i + 1];
    return x;
}

Grid1D solve_laplace_1d_fdm(double u_left, double u_right, int n) {
    if (n < 3) throw ConfigError("solve_laplace_1d_fdm: need n >= 3");
    Grid1D g;
    g.x0 = 0.0;
    g.dx = 1.0 / (n - 1);
    g.values.assign(n, 0.0);
    g.values.front() = u_left;
    g.values.back() = u_right;
    size_t m = n - 2;  // interior unknowns
    std::vector<double> a(m, 1.0), b(m, -2.0), c(m, 1.0), d(m, 0.0);
    d.front() -= u_left;
    d.back() -= u_right;
    std::vector<double> u = thomas_solve(a, b, c, d);
    std::copy(u.begin(), u.end(), g.values.begin() + 1);
    return g;
}

Grid1D solve_poisson_1d_fem(const std::vector<double>& f, int n) {
    if (n < 3) throw ConfigError("solve_poisson_1d_fem: need n >= 3");
    if (f.size() != static_cast<size_t>(n)) throw ConfigError("solve_poisson_1d_fem: f must have n nodal samples");
    Grid1D g;
    g.x0 = 0.0;
    g.dx = 1.0 / (n - 1);
    g.values.assign(n, 0.0);
    double h = g.dx;
    size_t m = n - 2;
    // weak form of u'' = F with hats v_i: (1/h) tridiag(-1,2,-1) u = -M f,
    // consistent mass M = (h/6) tridiag(1,4,1)
    std::vector<double> a(m, -1.0 / h), b(m, 2.0 / h), c(m, -1.0 / h), d(m);
    for (size_t i = 0; i < m; ++i) {
        size_t k = i + 1;  // global node
        d[i] = -(h / 6.0) * (f[k - 1] + 4.0 * f[k] + f[k + 1]);
    }
    std::vector<double> u = thomas_solve(a, b, c, d);
    std::copy(u.begin(), u.end(), g.values.begin() + 1);
    return g;
}

double sor_residual(const Grid2D& g) {
    double r = 0.0;
    for (int j = 1; j < g.ny - 1; ++j)
        for (int i = 1; i < g.nx - 1; ++i) {
            if (g.is_fixed(i, j)) continue;
            double s = g.at(i - 1, j) + g.at(i + 1, j) + g.at(i, j - 1) + g.at(i, j + 1);
            r = std::max(r, std::abs(s - 4.0 * g.at(i, j)));
        }
    return r;
}

long solve_laplace_2d_sor(Grid2D& g, double omega, double tol, long max_iter) {
    if (!(omega > 0.0 && omega < 2.0)) throw ConfigError("SOR relaxation factor must be in (0,2)");
    if (g.values.size() != static_cast<size_t>(g.nx) * g.ny || g.fixed.size() != g.values.size())
        throw ConfigError("SOR grid sizes disagree");
    for (long it = 1; it <= max_iter; ++it) {
        for (int j = 1; j < g.ny - 1; ++j)
            for (int i = 1; i < g.nx - 1; ++i) {
                if (g.is_fixed(i, j)) continue;
                double s = g.at(i - 1, j) + g.at(i + 1, j) + g.at(i, j - 1) + g.at(i, j + 1);
                g.at(i, j) = (1.0 - omega) * g.at(i, j) + omega * 0.25 * s;
            }
        if (sor_residual(g) < tol) return it;
    }
    throw NumericalError("SOR did not converge; final residual " +
                         std::to_string(sor_residual(g)));
}

}  // namespace iontrap
