#include "iontrap/bem.hpp"

#include <cmath>

#include "iontrap/errors.hpp"

namespace iontrap {

namespace {

constexpr double kFourPi = 4.0 * M_PI;

void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
    x.assign(n, 0.0);
    w.assign(n, 0.0);
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double t = std::cos(M_PI * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = t;
            for (int k = 2; k <= n; ++k) {
                double p2 = ((2.0 * k - 1.0) * t * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (t * p1 - p0) / (t * t - 1.0);
            double dt = p1 / dp;
            t -= dt;
            if (std::abs(dt) < 1e-15) break;
        }
        x[i] = -t;
        x[n - 1 - i] = t;
        w[i] = w[n - 1 - i] = 2.0 / ((1.0 - t * t) * dp * dp);
    }
}

// quadrature points in Cartesian coordinates with weights scaled by area
struct ElementQuad {
    std::vector<Vec3> pt;
    std::vector<double> w;
};

ElementQuad element_quad(const ElectrodeGeometry& g, size_t e, const TriangleRule& rule) {
    const Vec3& v0 = g.vertices[g.triangles[e][0]];
    const Vec3& v1 = g.vertices[g.triangles[e][1]];
    const Vec3& v2 = g.vertices[g.triangles[e][2]];
    ElementQuad q;
    q.pt.reserve(rule.bary.size());
    q.w.reserve(rule.bary.size());
    for (size_t k = 0; k < rule.bary.size(); ++k) {
        const auto& b = rule.bary[k];
        q.pt.push_back(b[0] * v0 + b[1] * v1 + b[2] * v2);
        q.w.push_back(rule.weight[k] * g.area[e]);
    }
    return q;
}

double element_diameter(const ElectrodeGeometry& g, size_t e) {
    const Vec3& v0 = g.vertices[g.triangles[e][0]];
    const Vec3& v1 = g.vertices[g.triangles[e][1]];
    const Vec3& v2 = g.vertices[g.triangles[e][2]];
    return std::max({norm(v1 - v0), norm(v2 - v1), norm(v0 - v2)});
}

struct QuadCache {
    std::vector<ElementQuad> base, near;
    std::vector<double> diam;
};

QuadCache build_cache(const ElectrodeGeometry& g, const BemOptions& opts) {
    QuadCache c;
    size_t n = g.element_count();
    c.base.reserve(n);
    c.near.reserve(n);
    c.diam.reserve(n);
    const TriangleRule& rb = triangle_rule(opts.quad_points);
    const TriangleRule& rn = triangle_rule(opts.near_quad_points);
    for (size_t e = 0; e < n; ++e) {
        c.base.push_back(element_quad(g, e, rb));
        c.near.push_back(element_quad(g, e, rn));
        c.diam.push_back(element_diameter(g, e));
    }
    return c;
}

// alpha and beta contributions of element i observed at x
inline void pair_integrals(const ElectrodeGeometry& g, const QuadCache& cache,
                           const BemOptions& opts, size_t i, const Vec3& x, double& a,
                           double& b) {
    double dist = norm(g.centroid[i] - x);
    const ElementQuad& q =
        dist < opts.near_factor * cache.diam[i] ? cache.near[i] : cache.base[i];
    const Vec3& n = g.normal[i];
    a = 0.0;
    b = 0.0;
    for (size_t k = 0; k < q.pt.size(); ++k) {
        Vec3 d = x - q.pt[k];
        double r2 = dot(d, d);
        double r = std::sqrt(r2);
        a += q.w[k] * (-1.0 / (kFourPi * r));
        b += q.w[k] * (-dot(n, d) / (kFourPi * r2 * r));
    }
}

// per-point coefficient vectors; returns true when x sits on the surface
// (centroid hit), in which case the representation carries a factor 2
bool point_coefficients(const BemSystem& sys, const QuadCache& cache, const Vec3& x,
                        Eigen::VectorXd& av, Eigen::VectorXd& bv) {
    const ElectrodeGeometry& g = sys.geom;
    size_t n = g.element_count();
    av.resize(n);
    bv.resize(n);
    bool on_surface = false;
    for (size_t i = 0; i < n; ++i) {
        if (norm(g.centroid[i] - x) < 1e-12 + 1e-9 * cache.diam[i]) {
            av[i] = alpha_self(g, i);
            bv[i] = 0.0;
            on_surface = true;
            continue;
        }
        double a, b;
        pair_integrals(g, cache, sys.opts, i, x, a, b);
        av[i] = a;
        bv[i] = b;
    }
    return on_surface;
}

}  // namespace

const TriangleRule& triangle_rule(int points) {
    static const TriangleRule r1 = {{{1.0 / 3, 1.0 / 3, 1.0 / 3}}, {1.0}};
    static const TriangleRule r3 = {{{2.0 / 3, 1.0 / 6, 1.0 / 6},
                                     {1.0 / 6, 2.0 / 3, 1.0 / 6},
                                     {1.0 / 6, 1.0 / 6, 2.0 / 3}},
                                    {1.0 / 3, 1.0 / 3, 1.0 / 3}};

    auto sym3 = [](std::vector<std::array<double, 3>>& b, std::vector<double>& w, double a,
                   double wt) {
        double c = 1.0 - 2.0 * a;
        b.push_back({c, a, a});
        b.push_back({a, c, a});
        b.push_back({a, a, c});
        w.insert(w.end(), 3, wt);
    };
    auto sym6 = [](std::vector<std::array<double, 3>>& b, std::vector<double>& w, double a,
                   double bb, double wt) {
        double c = 1.0 - a - bb;
        b.push_back({a, bb, c});
        b.push_back({a, c, bb});
        b.push_back({bb, a, c});
        b.push_back({bb, c, a});
        b.push_back({c, a, bb});
        b.push_back({c, bb, a});
        w.insert(w.end(), 6, wt);
    };

    static const TriangleRule r7 = [&] {
        TriangleRule r;
        r.bary.push_back({1.0 / 3, 1.0 / 3, 1.0 / 3});
        r.weight.push_back(9.0 / 40.0);
        sym3(r.bary, r.weight, 0.47014206410511508, 0.13239415278850618);
        sym3(r.bary, r.weight, 0.10128650732345633, 0.12593918054482715);
        return r;
    }();
    static const TriangleRule r25 = [&] {
        TriangleRule r;
        r.bary.push_back({1.0 / 3, 1.0 / 3, 1.0 / 3});
        r.weight.push_back(0.090817990382754);
        sym3(r.bary, r.weight, 0.485577633383657, 0.036725957756467);
        sym3(r.bary, r.weight, 0.109481575485037, 0.045321059435528);
        sym6(r.bary, r.weight, 0.141707219414880, 0.307939838764121, 0.072757916845420);
        sym6(r.bary, r.weight, 0.025003534762686, 0.246672560639903, 0.028327242531057);
        sym6(r.bary, r.weight, 0.009540815400299, 0.066803251012200, 0.009421666963733);
        return r;
    }();

    switch (points) {
        case 1: return r1;
        case 3: return r3;
        case 7: return r7;
        case 25: return r25;
        default: throw ConfigError("triangle_rule: supported point counts are 1, 3, 7, 25");
    }
}

double alpha_element(const ElectrodeGeometry& g, size_t e, const Vec3& x, int quad_points) {
    ElementQuad q = element_quad(g, e, triangle_rule(quad_points));
    double a = 0.0;
    for (size_t k = 0; k < q.pt.size(); ++k) a += q.w[k] * (-1.0 / (kFourPi * norm(x - q.pt[k])));
    return a;
}

double beta_element(const ElectrodeGeometry& g, size_t e, const Vec3& x, int quad_points) {
    ElementQuad q = element_quad(g, e, triangle_rule(quad_points));
    const Vec3& n = g.normal[e];
    double b = 0.0;
    for (size_t k = 0; k < q.pt.size(); ++k) {
        Vec3 d = x - q.pt[k];
        double r = norm(d);
        b += q.w[k] * (-dot(n, d) / (kFourPi * r * r * r));
    }
    return b;
}

double alpha_self(const ElectrodeGeometry& g, size_t e) {
    // polar split: int 1/r dA = sum over the 3 centroid-vertex sub-triangles
    // of int_0^phi R(phi) dphi, the 1/r singularity cancelling in polar form
    static std::vector<double> gx, gw;
    if (gx.empty()) gauss_legendre(24, gx, gw);
    const Vec3 c = g.centroid[e];
    double total = 0.0;
    for (int s = 0; s < 3; ++s) {
        const Vec3& va = g.vertices[g.triangles[e][s]];
        const Vec3& vb = g.vertices[g.triangles[e][(s + 1) % 3]];
        Vec3 u1 = va - c, u2 = vb - c;
        double n1 = norm(u1);
        Vec3 e1 = (1.0 / n1) * u1;
        Vec3 u2p = u2 - dot(u2, e1) * e1;
        double n2 = norm(u2p);
        Vec3 e2 = (1.0 / n2) * u2p;
        double ax = n1, ay = 0.0;
        double bx = dot(u2, e1), by = dot(u2, e2);
        double phi_end = std::atan2(by, bx);
        // line through the local points (ax,0) and (bx,by)
        double nlx = ay - by, nly = bx - ax;
        double cc = nlx * ax + nly * ay;
        for (size_t k = 0; k < gx.size(); ++k) {
            double phi = 0.5 * phi_end * (gx[k] + 1.0);
            double denom = nlx * std::cos(phi) + nly * std::sin(phi);
            total += 0.5 * phi_end * gw[k] * (cc / denom);
        }
    }
    return -total / kFourPi;
}

BemSystem assemble_bem(const ElectrodeGeometry& geom, const BemOptions& opts) {
    BemSystem sys;
    sys.geom = geom;
    sys.opts = opts;
    const long n = static_cast<long>(geom.element_count());
    sys.alpha.resize(n, n);
    sys.beta.resize(n, n);
    QuadCache cache = build_cache(geom, opts);
    // self-terms once (polar split); off-diagonal entries per collocation column
    std::vector<double> self(n);
    for (long i = 0; i < n; ++i) self[i] = alpha_self(geom, i);

#pragma omp parallel for schedule(static) if (opts.parallel)
    for (long j = 0; j < n; ++j) {
        const Vec3 x = geom.centroid[j];
        for (long i = 0; i < n; ++i) {
            if (i == j) {
                sys.alpha(i, j) = self[i];
                sys.beta(i, j) = 0.0;  // flat element: in-plane vector is orthogonal to n
                continue;
            }
            double a, b;
            pair_integrals(geom, cache, opts, i, x, a, b);
            sys.alpha(i, j) = a;
            sys.beta(i, j) = b;
        }
    }
    return sys;
}

BemSystem assemble_bem_serial(const ElectrodeGeometry& geom, BemOptions opts) {
    opts.parallel = false;
    return assemble_bem(geom, opts);
}

SurfaceSolution solve_surface(const BemSystem& sys, const std::vector<double>& electrode_voltage,
                              SurfaceSolver solver) {
    if (electrode_voltage.size() != sys.geom.electrode_count())
        throw ConfigError("solve_surface: one voltage per electrode required");
    size_t n = sys.geom.element_count();
    std::vector<BoundaryKind> kind(n, BoundaryKind::PotentialGiven);
    std::vector<double> given(n);
    for (size_t i = 0; i < n; ++i) given[i] = electrode_voltage[sys.geom.electrode_of[i]];
    return solve_surface_mixed(sys, kind, given, solver);
}

SurfaceSolution solve_surface_mixed(const BemSystem& sys, const std::vector<BoundaryKind>& kind,
                                    const std::vector<double>& given, SurfaceSolver solver) {
    const long n = static_cast<long>(sys.geom.element_count());
    if (kind.size() != static_cast<size_t>(n) || given.size() != static_cast<size_t>(n))
        throw ConfigError("solve_surface_mixed: per-element sizes disagree");

    // collocation at x_j:  2 sum_i alpha_ij q_i - 2 sum_i beta_ij Phi_i - Phi_j = 0
    // unknown per element: q_i (potential given) or Phi_i (charge given)
    Eigen::MatrixXd M(n, n);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
    for (long j = 0; j < n; ++j) {
        for (long i = 0; i < n; ++i) {
            if (kind[i] == BoundaryKind::PotentialGiven) {
                M(j, i) = 2.0 * sys.alpha(i, j);
                rhs(j) += 2.0 * sys.beta(i, j) * given[i];
            } else {
                M(j, i) = -2.0 * sys.beta(i, j) - (i == j ? 1.0 : 0.0);
                rhs(j) -= 2.0 * sys.alpha(i, j) * given[i];
            }
        }
        if (kind[j] == BoundaryKind::PotentialGiven) rhs(j) += given[j];
    }

    Eigen::VectorXd z;
    if (solver == SurfaceSolver::DenseLU) {
        Eigen::PartialPivLU<Eigen::MatrixXd> lu(M);
        z = lu.solve(rhs);
        double rel = (M * z - rhs).cwiseAbs().maxCoeff() /
                     std::max(rhs.cwiseAbs().maxCoeff(), 1e-300);
        if (!z.allFinite() || rel > 1e-8)
            throw NumericalError("solve_surface: singular system, relative residual " +
                                 std::to_string(rel));
    } else {
        z = gmres_solve(M, rhs);
    }

    SurfaceSolution sol;
    sol.normal_derivative.resize(n);
    sol.potential.resize(n);
    for (long i = 0; i < n; ++i) {
        if (kind[i] == BoundaryKind::PotentialGiven) {
            sol.potential[i] = given[i];
            sol.normal_derivative[i] = z(i);
        } else {
            sol.potential[i] = z(i);
            sol.normal_derivative[i] = given[i];
        }
    }
    return sol;
}

std::vector<double> evaluate_potential(const BemSystem& sys, const SurfaceSolution& sol,
                                       const std::vector<Vec3>& points) {
    QuadCache cache = build_cache(sys.geom, sys.opts);
    const long n = static_cast<long>(sys.geom.element_count());
    Eigen::Map<const Eigen::VectorXd> q(sol.normal_derivative.data(), n);
    Eigen::Map<const Eigen::VectorXd> phi(sol.potential.data(), n);
    std::vector<double> out(points.size());
#pragma omp parallel for schedule(static) if (sys.opts.parallel)
    for (long p = 0; p < static_cast<long>(points.size()); ++p) {
        Eigen::VectorXd av, bv;
        bool on_surface = point_coefficients(sys, cache, points[p], av, bv);
        double val = av.dot(q) - bv.dot(phi);
        out[p] = on_surface ? 2.0 * val : val;
    }
    return out;
}

std::vector<Vec3> evaluate_gradient(const BemSystem& sys, const SurfaceSolution& sol,
                                    const std::vector<Vec3>& points) {
    QuadCache cache = build_cache(sys.geom, sys.opts);
    const ElectrodeGeometry& g = sys.geom;
    const long n = static_cast<long>(g.element_count());
    std::vector<Vec3> out(points.size());
#pragma omp parallel for schedule(static) if (sys.opts.parallel)
    for (long p = 0; p < static_cast<long>(points.size()); ++p) {
        const Vec3 x = points[p];
        Vec3 grad{0.0, 0.0, 0.0};
        for (long i = 0; i < n; ++i) {
            const ElementQuad& eq = norm(g.centroid[i] - x) < sys.opts.near_factor * cache.diam[i]
                                        ? cache.near[i]
                                        : cache.base[i];
            const Vec3& nrm = g.normal[i];
            Vec3 ga{0, 0, 0}, gb{0, 0, 0};
            for (size_t k = 0; k < eq.pt.size(); ++k) {
                Vec3 d = x - eq.pt[k];
                double r2 = dot(d, d);
                double r = std::sqrt(r2);
                double r3 = r2 * r;
                // grad_x G = +d/(4 pi r^3)
                ga = ga + (eq.w[k] / (kFourPi * r3)) * d;
                // grad_x (n . grad_y G) = -(1/4pi)(n/r^3 - 3 (n.d) d / r^5)
                double nd = dot(nrm, d);
                gb = gb + (-eq.w[k] / kFourPi) * ((1.0 / r3) * nrm - (3.0 * nd / (r3 * r2)) * d);
            }
            grad = grad + sol.normal_derivative[i] * ga - sol.potential[i] * gb;
        }
        out[p] = grad;
    }
    return out;
}

Eigen::MatrixXd axis_basis_matrix(const BemSystem& sys, const std::vector<double>& x_axis,
                                  double y, double z) {
    const long n = static_cast<long>(sys.geom.element_count());
    const long ne = static_cast<long>(sys.geom.electrode_count());

    // one factorization, one solve per electrode
    Eigen::MatrixXd M(n, n);
    for (long j = 0; j < n; ++j)
        for (long i = 0; i < n; ++i) M(j, i) = 2.0 * sys.alpha(i, j);
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(M);

    Eigen::MatrixXd qs(n, ne);   // normal derivatives per electrode solve
    Eigen::MatrixXd phis(n, ne); // surface potentials per electrode solve
    for (long e = 0; e < ne; ++e) {
        Eigen::VectorXd phi(n), rhs(n);
        for (long i = 0; i < n; ++i)
            phi(i) = sys.geom.electrode_of[i] == e ? 1.0 : 0.0;
        for (long j = 0; j < n; ++j) {
            double s = phi(j);
            for (long i = 0; i < n; ++i) s += 2.0 * sys.beta(i, j) * phi(i);
            rhs(j) = s;
        }
        qs.col(e) = lu.solve(rhs);
        phis.col(e) = phi;
    }

    QuadCache cache = build_cache(sys.geom, sys.opts);
    Eigen::MatrixXd A(static_cast<long>(x_axis.size()), ne);
#pragma omp parallel for schedule(static) if (sys.opts.parallel)
    for (long k = 0; k < static_cast<long>(x_axis.size()); ++k) {
        Eigen::VectorXd av, bv;
        bool on_surface = point_coefficients(sys, cache, Vec3{x_axis[k], y, z}, av, bv);
        for (long e = 0; e < ne; ++e) {
            double val = av.dot(qs.col(e)) - bv.dot(phis.col(e));
            A(k, e) = on_surface ? 2.0 * val : val;
        }
    }
    return A;
}

Eigen::VectorXd gmres_solve(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, double tol,
                            int restart, long max_iter) {
    const long n = A.rows();
    Eigen::VectorXd dinv = A.diagonal();
    for (long i = 0; i < n; ++i) dinv(i) = dinv(i) != 0.0 ? 1.0 / dinv(i) : 1.0;

    Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
    double bnorm = b.norm();
    if (bnorm == 0.0) return x;

    long iters = 0;
    double last_cycle_res = -1.0;
    while (iters < max_iter) {
        Eigen::VectorXd r = b - A * x;
        double beta = r.norm();
        if (beta / bnorm <= tol) return x;
        if (last_cycle_res >= 0.0 && beta >= 0.999999 * last_cycle_res)
            throw NumericalError("gmres: stalled at relative residual " +
                                 std::to_string(beta / bnorm));
        last_cycle_res = beta;

        int m = restart;
        Eigen::MatrixXd V(n, m + 1);
        Eigen::MatrixXd H = Eigen::MatrixXd::Zero(m + 1, m);
        Eigen::VectorXd cs(m), sn(m), g = Eigen::VectorXd::Zero(m + 1);
        V.col(0) = r / beta;
        g(0) = beta;
        int j = 0;
        for (; j < m && iters < max_iter; ++j, ++iters) {
            Eigen::VectorXd w = A * (dinv.asDiagonal() * V.col(j));
            for (int i = 0; i <= j; ++i) {
                H(i, j) = w.dot(V.col(i));
                w -= H(i, j) * V.col(i);
            }
            H(j + 1, j) = w.norm();
            bool breakdown = H(j + 1, j) < 1e-300;
            if (!breakdown) V.col(j + 1) = w / H(j + 1, j);
            for (int i = 0; i < j; ++i) {
                double t = cs(i) * H(i, j) + sn(i) * H(i + 1, j);
                H(i + 1, j) = -sn(i) * H(i, j) + cs(i) * H(i + 1, j);
                H(i, j) = t;
            }
            double denom = std::hypot(H(j, j), H(j + 1, j));
            cs(j) = H(j, j) / denom;
            sn(j) = H(j + 1, j) / denom;
            H(j, j) = denom;
            H(j + 1, j) = 0.0;
            g(j + 1) = -sn(j) * g(j);
            g(j) = cs(j) * g(j);
            if (std::abs(g(j + 1)) / bnorm <= tol || breakdown) {
                ++j;
                break;
            }
        }
        // solve the j x j upper-triangular least-squares system
        Eigen::VectorXd yv =
            H.topLeftCorner(j, j).triangularView<Eigen::Upper>().solve(g.head(j));
        x += dinv.asDiagonal() * (V.leftCols(j) * yv);
    }
    Eigen::VectorXd r = b - A * x;
    if (r.norm() / bnorm <= tol) return x;
    throw NumericalError("gmres: no convergence within iteration budget");
}

double SampledField3D::potential_at(const Vec3& p) const {
    double fx = (p[0] - lo[0]) / (hi[0] - lo[0]) * (nx - 1);
    double fy = (p[1] - lo[1]) / (hi[1] - lo[1]) * (ny - 1);
    double fz = (p[2] - lo[2]) / (hi[2] - lo[2]) * (nz - 1);
    if (fx < 0 || fy < 0 || fz < 0 || fx > nx - 1 || fy > ny - 1 || fz > nz - 1)
        throw NumericalError("sampled field: point outside the sampled box");
    int i = std::min(static_cast<int>(fx), nx - 2);
    int j = std::min(static_cast<int>(fy), ny - 2);
    int k = std::min(static_cast<int>(fz), nz - 2);
    double tx = fx - i, ty = fy - j, tz = fz - k;
    auto at = [&](int a, int b, int c) {
        return phi[(static_cast<size_t>(c) * ny + b) * nx + a];
    };
    double c00 = at(i, j, k) * (1 - tx) + at(i + 1, j, k) * tx;
    double c10 = at(i, j + 1, k) * (1 - tx) + at(i + 1, j + 1, k) * tx;
    double c01 = at(i, j, k + 1) * (1 - tx) + at(i + 1, j, k + 1) * tx;
    double c11 = at(i, j + 1, k + 1) * (1 - tx) + at(i + 1, j + 1, k + 1) * tx;
    return (c00 * (1 - ty) + c10 * ty) * (1 - tz) + (c01 * (1 - ty) + c11 * ty) * tz;
}

Vec3 SampledField3D::gradient_at(const Vec3& p) const {
    double fx = (p[0] - lo[0]) / (hi[0] - lo[0]) * (nx - 1);
    double fy = (p[1] - lo[1]) / (hi[1] - lo[1]) * (ny - 1);
    double fz = (p[2] - lo[2]) / (hi[2] - lo[2]) * (nz - 1);
    if (fx < 0 || fy < 0 || fz < 0 || fx > nx - 1 || fy > ny - 1 || fz > nz - 1)
        throw NumericalError("sampled field: point outside the sampled box");
    int i = std::min(static_cast<int>(fx), nx - 2);
    int j = std::min(static_cast<int>(fy), ny - 2);
    int k = std::min(static_cast<int>(fz), nz - 2);
    double tx = fx - i, ty = fy - j, tz = fz - k;
    auto at = [&](int a, int b, int c) -> const Vec3& {
        return grad[(static_cast<size_t>(c) * ny + b) * nx + a];
    };
    Vec3 c00 = (1 - tx) * at(i, j, k) + tx * at(i + 1, j, k);
    Vec3 c10 = (1 - tx) * at(i, j + 1, k) + tx * at(i + 1, j + 1, k);
    Vec3 c01 = (1 - tx) * at(i, j, k + 1) + tx * at(i + 1, j, k + 1);
    Vec3 c11 = (1 - tx) * at(i, j + 1, k + 1) + tx * at(i + 1, j + 1, k + 1);
    Vec3 a = (1 - ty) * c00 + ty * c10;
    Vec3 b = (1 - ty) * c01 + ty * c11;
    return (1 - tz) * a + tz * b;
}

SampledField3D sample_field(const BemSystem& sys, const SurfaceSolution& sol, const Vec3& lo,
                            const Vec3& hi, int nx, int ny, int nz) {
    if (nx < 2 || ny < 2 || nz < 2) throw ConfigError("sample_field: need at least 2 nodes per axis");
    SampledField3D f;
    f.lo = lo;
    f.hi = hi;
    f.nx = nx;
    f.ny = ny;
    f.nz = nz;
    std::vector<Vec3> pts;
    pts.reserve(static_cast<size_t>(nx) * ny * nz);
    for (int k = 0; k < nz; ++k)
        for (int j = 0; j < ny; ++j)
            for (int i = 0; i < nx; ++i)
                pts.push_back({lo[0] + (hi[0] - lo[0]) * i / (nx - 1),
                               lo[1] + (hi[1] - lo[1]) * j / (ny - 1),
                               lo[2] + (hi[2] - lo[2]) * k / (nz - 1)});
    f.phi = evaluate_potential(sys, sol, pts);
    f.grad = evaluate_gradient(sys, sol, pts);
    return f;
}

}  // namespace iontrap
