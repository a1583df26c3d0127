#pragma once
#include <Eigen/Dense>
#include <vector>

#include "iontrap/geometry.hpp"
#include "iontrap/vec3.hpp"

// Collocation boundary element method with piecewise-constant elements and
// the free-space kernel G(x,y) = -1/(4 pi |x-y|). Normals point outward
// from the conductors. With q = dPhi/dn the collocation system reads
//   Phi_j = 2 sum_i alpha_ij q_i - 2 sum_i beta_ij Phi_i
// and the free-space representation
//   Phi(x) = sum_i alpha_i(x) q_i - sum_i beta_i(x) Phi_i,
// which picks up a factor 2 when x lies on the surface (half solid angle).
namespace iontrap {

struct BemOptions {
    int quad_points = 7;        // triangle rule: 1, 3, 7 or 25 points
    int near_quad_points = 25;  // rule for nearly-singular pairs
    double near_factor = 2.0;   // "near" means dist < near_factor * element diameter
    bool parallel = true;       // OpenMP over collocation points
};

struct BemSystem {
    ElectrodeGeometry geom;
    // alpha(i, j) = integral over element i of G(., x_j) ds   [m]
    // beta(i, j)  = integral over element i of n . grad_y G(., x_j) ds
    Eigen::MatrixXd alpha;
    Eigen::MatrixXd beta;
    BemOptions opts;
};

BemSystem assemble_bem(const ElectrodeGeometry& geom, const BemOptions& opts = {});
// single-threaded reference path, same arithmetic per matrix entry
BemSystem assemble_bem_serial(const ElectrodeGeometry& geom, BemOptions opts = {});

enum class BoundaryKind { PotentialGiven, ChargeGiven };
enum class SurfaceSolver { DenseLU, Gmres };

struct SurfaceSolution {
    std::vector<double> normal_derivative;  // V/m per element
    std::vector<double> potential;          // V per element
};

// all elements potential-given; voltage per electrode (by electrode index)
SurfaceSolution solve_surface(const BemSystem& sys, const std::vector<double>& electrode_voltage,
                              SurfaceSolver solver = SurfaceSolver::DenseLU);

// mixed boundary kinds; `given` holds the prescribed potential or normal
// derivative per element depending on its kind
SurfaceSolution solve_surface_mixed(const BemSystem& sys, const std::vector<BoundaryKind>& kind,
                                    const std::vector<double>& given,
                                    SurfaceSolver solver = SurfaceSolver::DenseLU);

std::vector<double> evaluate_potential(const BemSystem& sys, const SurfaceSolution& sol,
                                       const std::vector<Vec3>& points);

// grad Phi (not the field E = -grad Phi); valid away from the surfaces
std::vector<Vec3> evaluate_gradient(const BemSystem& sys, const SurfaceSolution& sol,
                                    const std::vector<Vec3>& points);

// A(k, e) = potential at axis point k with electrode e at 1 V, others 0 V
Eigen::MatrixXd axis_basis_matrix(const BemSystem& sys, const std::vector<double>& x_axis,
                                  double y = 0.0, double z = 0.0);

// single-element integrals, exposed for validation
double alpha_element(const ElectrodeGeometry& geom, size_t elem, const Vec3& x, int quad_points);
double beta_element(const ElectrodeGeometry& geom, size_t elem, const Vec3& x, int quad_points);
// singular self-integral by polar split around the centroid
double alpha_self(const ElectrodeGeometry& geom, size_t elem);

// symmetric triangle quadrature rule in barycentric coordinates
struct TriangleRule {
    std::vector<std::array<double, 3>> bary;
    std::vector<double> weight;  // sums to 1
};
const TriangleRule& triangle_rule(int points);

// dense restarted GMRES (diagonal right preconditioner); relative residual
// tol, throws NumericalError when max_iter sweeps stall
Eigen::VectorXd gmres_solve(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, double tol = 1e-12,
                            int restart = 60, long max_iter = 5000);

// trilinear-interpolated field samples on a regular box grid, for fast
// repeated force evaluation along trajectories
struct SampledField3D {
    Vec3 lo{0, 0, 0};
    Vec3 hi{0, 0, 0};
    int nx = 0, ny = 0, nz = 0;       // node counts per axis
    std::vector<double> phi;          // V, x fastest
    std::vector<Vec3> grad;           // V/m

    double potential_at(const Vec3& p) const;
    Vec3 gradient_at(const Vec3& p) const;
};

SampledField3D sample_field(const BemSystem& sys, const SurfaceSolution& sol, const Vec3& lo,
                            const Vec3& hi, int nx, int ny, int nz);

}  // namespace iontrap
