#pragma once
#include <Eigen/Dense>
#include <vector>

// Tikhonov-regularized inversion of the axis basis matrix: find electrode
// voltages realizing a target axial potential, with anchoring, per-electrode
// weighting, automatic regularization strength, and transport waveforms.
namespace iontrap {

struct SvdResult {
    Eigen::MatrixXd u;  // M x r, orthonormal columns
    Eigen::VectorXd s;  // r singular values, descending
    Eigen::MatrixXd v;  // N x N, orthogonal (full, null directions included)
};

SvdResult svd(const Eigen::MatrixXd& a);

// u = V S' U^T phi with the smooth truncation s' = s / (s^2 + alpha^2);
// alpha = 0 gives the pseudoinverse solution
Eigen::VectorXd tikhonov_solve(const Eigen::MatrixXd& a, const Eigen::VectorXd& phi,
                               double alpha);

// adds V D V^T u0 with d = alpha^2 / (s^2 + alpha^2); per direction
// s * s' + d = 1, so alpha -> infinity recovers u0
Eigen::VectorXd tikhonov_solve_anchored(const Eigen::MatrixXd& a, const Eigen::VectorXd& phi,
                                        double alpha, const Eigen::VectorXd& u0);

// column scaling a'_ij = a_ij w_j; the anchored solve runs in the scaled
// frame (anchor u0_j / w_j) and the output is mapped back as u_j = w_j u'_j,
// which keeps A u = phi exact at alpha = 0 and u -> u0 as alpha -> infinity
Eigen::VectorXd tikhonov_solve_weighted(const Eigen::MatrixXd& a, const Eigen::VectorXd& phi,
                                        double alpha, const Eigen::VectorXd& u0,
                                        const Eigen::VectorXd& weights);

struct AutoAlphaResult {
    Eigen::VectorXd u;
    double alpha;
};

// smallest alpha (bisection on log alpha over [1e-8, 1e4] * s_max) whose
// anchored solution stays inside [u_min, u_max]; throws NumericalError when
// even the largest alpha violates the bounds
AutoAlphaResult auto_alpha(const Eigen::MatrixXd& a, const Eigen::VectorXd& phi,
                           const Eigen::VectorXd& u0, double u_min, double u_max);

// target potential descriptor: phi(x) = delta * (x - x0)^2
Eigen::VectorXd harmonic_target(const std::vector<double>& axis_x, double x0, double delta);

struct TransportConfig {
    double u_min = -10.0;        // V
    double u_max = 10.0;         // V
    double max_step_change = 1.0;  // V, per electrode per step
    double roi_halfwidth = 3e-3;   // m, residual fit region around the center
};

// one anchored solve per step (anchor = previous step's voltages, step 0
// anchored at zero), alpha raised until bounds and the per-step change cap
// hold; rows = steps, cols = electrodes
Eigen::MatrixXd transport_waveforms(const Eigen::MatrixXd& a, const std::vector<double>& axis_x,
                                    const std::vector<double>& centers, double delta,
                                    const TransportConfig& cfg);

}  // namespace iontrap
