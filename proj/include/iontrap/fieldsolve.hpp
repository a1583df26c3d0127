#pragma once
#include <cstdint>
#include <vector>

// Grid-based electrostatics: 1D finite differences (Thomas algorithm),
// 1D linear finite elements, 2D successive over-relaxation.
namespace iontrap {

struct Grid1D {
    double x0 = 0.0;
    double dx = 1.0;
    std::vector<double> values;  // V per node

    size_t n() const { return values.size(); }
    double x(size_t i) const { return x0 + dx * static_cast<double>(i); }
};

// Solves the tridiagonal system a_i u_{i-1} + b_i u_i + c_i u_{i+1} = d_i.
std::vector<double> thomas_solve(const std::vector<double>& a, const std::vector<double>& b,
                                 const std::vector<double>& c, const std::vector<double>& d);

// Laplace on [0,1] with Dirichlet ends; interior nodes satisfy the
// three-point stencil exactly.
Grid1D solve_laplace_1d_fdm(double u_left, double u_right, int n);

// d^2 Phi / dx^2 = F on [0,1], Phi(0) = Phi(1) = 0, hat-function elements
// with consistent (tridiagonal) mass matrix; f holds nodal samples of F.
Grid1D solve_poisson_1d_fem(const std::vector<double>& f, int n);

struct Grid2D {
    int nx = 0, ny = 0;
    double x0 = 0.0, y0 = 0.0, dx = 1.0;
    std::vector<double> values;        // row-major, index j*nx + i
    std::vector<std::uint8_t> fixed;   // 1 = boundary node with prescribed value

    double& at(int i, int j) { return values[static_cast<size_t>(j) * nx + i]; }
    double at(int i, int j) const { return values[static_cast<size_t>(j) * nx + i]; }
    bool is_fixed(int i, int j) const { return fixed[static_cast<size_t>(j) * nx + i] != 0; }
};

// 5-point Laplace by SOR; returns iteration count. Throws NumericalError
// with the final residual when max_iter sweeps do not reach tol.
long solve_laplace_2d_sor(Grid2D& grid, double omega, double tol, long max_iter = 200000);

// max over free nodes of |u_E + u_W + u_N + u_S - 4 u|
double sor_residual(const Grid2D& grid);

}  // namespace iontrap
