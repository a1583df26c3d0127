#include "iontrap/cli.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <numbers>
#include <set>
#include <string>
#include <vector>

#include "iontrap/bem.hpp"
#include "iontrap/classint.hpp"
#include "iontrap/csvio.hpp"
#include "iontrap/errors.hpp"
#include "iontrap/geometry.hpp"
#include "iontrap/inversevolt.hpp"
#include "iontrap/krotov.hpp"
#include "iontrap/lightion.hpp"
#include "iontrap/qdyn.hpp"
#include "iontrap/trapmodel.hpp"
#include "iontrap/units.hpp"

namespace iontrap::cli {

namespace {

using nlohmann::json;

// ---------------------------------------------------------------- config IO

// tracks which keys were consumed so leftovers can be rejected
class View {
  public:
    View(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError(path_ + ": expected an object");
    }

    bool has(const char* k) const { return j_.contains(k); }

    double num(const char* k) {
        const json& v = at(k);
        if (!v.is_number()) throw ConfigError(loc(k) + ": expected a number");
        return v.get<double>();
    }
    double num_or(const char* k, double dflt) { return has(k) ? num(k) : dflt; }

    long integer(const char* k) {
        const double v = num(k);
        if (v != std::floor(v)) throw ConfigError(loc(k) + ": expected an integer");
        return static_cast<long>(v);
    }
    long integer_or(const char* k, long dflt) { return has(k) ? integer(k) : dflt; }

    bool flag_or(const char* k, bool dflt) {
        if (!has(k)) return dflt;
        const json& v = at(k);
        if (!v.is_boolean()) throw ConfigError(loc(k) + ": expected a boolean");
        return v.get<bool>();
    }

    std::string str(const char* k) {
        const json& v = at(k);
        if (!v.is_string()) throw ConfigError(loc(k) + ": expected a string");
        return v.get<std::string>();
    }

    std::vector<double> numbers(const char* k) {
        const json& v = at(k);
        if (!v.is_array()) throw ConfigError(loc(k) + ": expected an array of numbers");
        std::vector<double> out;
        for (const auto& e : v) {
            if (!e.is_number()) throw ConfigError(loc(k) + ": expected an array of numbers");
            out.push_back(e.get<double>());
        }
        return out;
    }

    const json& array(const char* k) {
        const json& v = at(k);
        if (!v.is_array()) throw ConfigError(loc(k) + ": expected an array");
        return v;
    }

    View child(const char* k) { return View(at(k), loc(k)); }

    void done() const {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!used_.count(it.key()))
                throw ConfigError(path_ + ": unknown key '" + it.key() + "'");
    }

  private:
    std::string loc(const char* k) const { return path_ + "." + k; }
    const json& at(const char* k) {
        if (!j_.contains(k)) throw ConfigError(loc(k) + ": missing");
        used_.insert(k);
        return j_[k];
    }

    const json& j_;
    std::string path_;
    std::set<std::string> used_;
};

std::vector<double> linspace(double a, double b, long n) {
    if (n < 2) throw ConfigError("need at least two samples on an axis");
    std::vector<double> x(static_cast<std::size_t>(n));
    for (long i = 0; i < n; ++i)
        x[static_cast<std::size_t>(i)] = a + (b - a) * static_cast<double>(i) / (n - 1);
    return x;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot open output file " + path.string());
    f << text;
}

void write_summary(const std::filesystem::path& out_dir, const json& summary) {
    write_text(out_dir / "summary.json", summary.dump(2) + "\n");
}

// ----------------------------------------------------------- shared blocks

struct TrapCfg {
    long segments = 5;
    double segment_width_mm = 2.0;
    double rod_radius_mm = 0.5;
    double axis_clearance_mm = 1.5;
    long n_phi = 10;
    long nx_segment = 3;
    long nx_rf = 15;
    long refine = 0;
};

TrapCfg parse_trap(View& parent) {
    TrapCfg t;
    if (!parent.has("trap")) return t;
    View v = parent.child("trap");
    t.segments = v.integer_or("segments", t.segments);
    t.segment_width_mm = v.num_or("segment_width_mm", t.segment_width_mm);
    t.rod_radius_mm = v.num_or("rod_radius_mm", t.rod_radius_mm);
    t.axis_clearance_mm = v.num_or("axis_clearance_mm", t.axis_clearance_mm);
    t.n_phi = v.integer_or("n_phi", t.n_phi);
    t.nx_segment = v.integer_or("nx_segment", t.nx_segment);
    t.nx_rf = v.integer_or("nx_rf", t.nx_rf);
    t.refine = v.integer_or("refine", t.refine);
    v.done();
    return t;
}

json trap_json(const TrapCfg& t) {
    return {{"segments", t.segments},
            {"segment_width_mm", t.segment_width_mm},
            {"rod_radius_mm", t.rod_radius_mm},
            {"axis_clearance_mm", t.axis_clearance_mm},
            {"n_phi", t.n_phi},
            {"nx_segment", t.nx_segment},
            {"nx_rf", t.nx_rf},
            {"refine", t.refine}};
}

ElectrodeGeometry build_trap(const TrapCfg& t) {
    LinearTrapParams p;
    p.segments = static_cast<int>(t.segments);
    p.segment_width = t.segment_width_mm * 1e-3;
    p.rod_radius = t.rod_radius_mm * 1e-3;
    p.axis_clearance = t.axis_clearance_mm * 1e-3;
    p.n_phi = static_cast<int>(t.n_phi);
    p.nx_segment = static_cast<int>(t.nx_segment);
    p.nx_rf = static_cast<int>(t.nx_rf);
    for (long r = 0; r < t.refine; ++r) p = refine(p);
    return make_linear_trap(p);
}

struct IonCfg {
    double mass_amu = 40.0;
    double charge_e = 1.0;
};

IonCfg parse_ion(View& parent) {
    IonCfg i;
    if (!parent.has("ion")) return i;
    View v = parent.child("ion");
    i.mass_amu = v.num_or("mass_amu", i.mass_amu);
    i.charge_e = v.num_or("charge_e", i.charge_e);
    v.done();
    return i;
}

json ion_json(const IonCfg& i) { return {{"mass_amu", i.mass_amu}, {"charge_e", i.charge_e}}; }

struct GridCfg {
    double x_min = -8.0;
    double length = 16.0;
    long points = 0;  // 0: size from the Nyquist criterion with `beta`
    double beta = 0.9;
};

GridCfg parse_grid(View v) {
    GridCfg g;
    g.x_min = v.num("x_min_natural");
    g.length = v.num("length_natural");
    g.points = v.integer_or("points", 0);
    g.beta = v.num_or("beta", 0.9);
    v.done();
    return g;
}

json grid_json(const GridCfg& g) {
    return {{"x_min_natural", g.x_min},
            {"length_natural", g.length},
            {"points", g.points},
            {"beta", g.beta}};
}

struct PotentialCfg {
    std::string type = "harmonic";
    double omega = 1.0;                 // harmonic
    std::vector<double> coeffs{0.0};    // polynomial, ascending powers
};

PotentialCfg parse_potential(View v) {
    PotentialCfg p;
    p.type = v.str("type");
    if (p.type == "harmonic") {
        p.omega = v.num("omega_natural");
    } else if (p.type == "polynomial") {
        p.coeffs = v.numbers("coeffs_natural");
    } else {
        throw ConfigError("potential.type must be 'harmonic' or 'polynomial'");
    }
    v.done();
    return p;
}

json potential_json(const PotentialCfg& p) {
    if (p.type == "harmonic") return {{"type", p.type}, {"omega_natural", p.omega}};
    return {{"type", p.type}, {"coeffs_natural", p.coeffs}};
}

double potential_value(const PotentialCfg& p, double mass, double x) {
    if (p.type == "harmonic") return 0.5 * mass * p.omega * p.omega * x * x;
    double v = 0.0;
    for (std::size_t k = p.coeffs.size(); k-- > 0;) v = v * x + p.coeffs[k];
    return v;
}

std::vector<double> potential_on_grid(const PotentialCfg& p, double mass, const SpatialGrid& g) {
    std::vector<double> v(static_cast<std::size_t>(g.n));
    for (int i = 0; i < g.n; ++i) v[static_cast<std::size_t>(i)] = potential_value(p, mass, g.x(i));
    return v;
}

SpatialGrid realize_grid(const GridCfg& g, const PotentialCfg& pot, double mass) {
    long n = g.points;
    if (n == 0) {
        double vmax = 0.0;
        for (int i = 0; i <= 4096; ++i)
            vmax = std::max(vmax, potential_value(pot, mass, g.x_min + g.length * i / 4096.0));
        n = optimal_grid_points(g.length, mass, vmax, g.beta);
    }
    return make_grid(g.x_min, g.length, static_cast<int>(n));
}

// quadratic least-squares fit c0 + c1 x + c2 x^2
std::array<double, 3> fit_quadratic(const std::vector<double>& x, const std::vector<double>& y) {
    Eigen::MatrixXd a(static_cast<Eigen::Index>(x.size()), 3);
    Eigen::VectorXd b(static_cast<Eigen::Index>(x.size()));
    for (std::size_t i = 0; i < x.size(); ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        a(r, 0) = 1.0;
        a(r, 1) = x[i];
        a(r, 2) = x[i] * x[i];
        b(r) = y[i];
    }
    Eigen::Vector3d c = (a.transpose() * a).ldlt().solve(a.transpose() * b);
    return {c(0), c(1), c(2)};
}

// ------------------------------------------------------------------ fields

struct FieldsCfg {
    TrapCfg trap;
    IonCfg ion;
    std::vector<double> dc_voltages_v;
    double rf_voltage_vpp = 200.0;
    double omega_rf_mhz = 20.0;  // drive frequency omega_rf / 2 pi, in MHz
    double axis_x_min_mm = -5.0, axis_x_max_mm = 5.0;
    long axis_points = 201;
    double radial_halfwidth_mm = 0.8;
    long radial_points = 33;
};

FieldsCfg parse_fields(const json& j) {
    View v(j, "config");
    FieldsCfg c;
    (void)v.str("command");
    c.trap = parse_trap(v);
    c.ion = parse_ion(v);
    c.dc_voltages_v = v.numbers("dc_voltages_v");
    c.rf_voltage_vpp = v.num("rf_voltage_vpp");
    c.omega_rf_mhz = v.num("omega_rf_mhz");
    {
        View a = v.child("axis");
        c.axis_x_min_mm = a.num("x_min_mm");
        c.axis_x_max_mm = a.num("x_max_mm");
        c.axis_points = a.integer("points");
        a.done();
    }
    {
        View r = v.child("radial");
        c.radial_halfwidth_mm = r.num("halfwidth_mm");
        c.radial_points = r.integer("points");
        r.done();
    }
    v.done();
    if (static_cast<long>(c.dc_voltages_v.size()) != c.trap.segments)
        throw ConfigError("dc_voltages_v must list one voltage per dc segment");
    return c;
}

json fields_json(const FieldsCfg& c) {
    return {{"command", "fields"},
            {"trap", trap_json(c.trap)},
            {"ion", ion_json(c.ion)},
            {"dc_voltages_v", c.dc_voltages_v},
            {"rf_voltage_vpp", c.rf_voltage_vpp},
            {"omega_rf_mhz", c.omega_rf_mhz},
            {"axis",
             {{"x_min_mm", c.axis_x_min_mm}, {"x_max_mm", c.axis_x_max_mm}, {"points", c.axis_points}}},
            {"radial", {{"halfwidth_mm", c.radial_halfwidth_mm}, {"points", c.radial_points}}}};
}

std::vector<double> electrode_voltages(const ElectrodeGeometry& geom,
                                       const std::vector<double>& dc, double rf) {
    if (geom.electrode_count() != dc.size() + 1)
        throw ConfigError("voltage list does not match electrode count");
    std::vector<double> u(geom.electrode_count(), 0.0);
    u[0] = rf;  // electrode 0 is "rf" by construction
    for (std::size_t i = 0; i < dc.size(); ++i) u[i + 1] = dc[i];
    return u;
}

json run_fields(const FieldsCfg& c, const std::filesystem::path& out, bool verbose) {
    const ElectrodeGeometry geom = build_trap(c.trap);
    if (verbose) std::cerr << "fields: " << geom.element_count() << " elements\n";
    const BemSystem sys = assemble_bem(geom);

    const IonSpecies ion = ion_from_amu(c.ion.mass_amu, c.ion.charge_e);
    const double omega = 2.0 * std::numbers::pi * c.omega_rf_mhz * 1e6;
    const double rf_amp = 0.5 * c.rf_voltage_vpp;

    const std::vector<double> x_mm = linspace(c.axis_x_min_mm, c.axis_x_max_mm, c.axis_points);
    std::vector<double> x_m(x_mm.size());
    for (std::size_t i = 0; i < x_mm.size(); ++i) x_m[i] = x_mm[i] * 1e-3;
    const Eigen::MatrixXd basis = axis_basis_matrix(sys, x_m);

    CsvTable axis;
    axis.header.push_back("x_mm");
    for (const auto& name : geom.electrode_names) axis.header.push_back(name + "_v");
    axis.header.push_back("total_v");
    const std::vector<double> volts = electrode_voltages(geom, c.dc_voltages_v, rf_amp);
    double peak_total = 0.0;
    double peak_x_mm = 0.0;
    for (std::size_t i = 0; i < x_mm.size(); ++i) {
        std::vector<double> row{x_mm[i]};
        double total = 0.0;
        for (std::size_t e = 0; e < volts.size(); ++e) {
            const double p = basis(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(e)) *
                             volts[e];
            row.push_back(p);
            total += p;
        }
        row.push_back(total);
        axis.rows.push_back(std::move(row));
        if (std::abs(total) > std::abs(peak_total)) {
            peak_total = total;
            peak_x_mm = x_mm[i];
        }
    }
    write_csv(out / "axis_potentials.csv", axis);

    const SurfaceSolution sol_rf =
        solve_surface(sys, electrode_voltages(geom, std::vector<double>(c.dc_voltages_v.size(), 0.0),
                                              rf_amp));
    const SurfaceSolution sol_dc = solve_surface(sys, electrode_voltages(geom, c.dc_voltages_v, 0.0));

    const std::vector<double> yz = linspace(-c.radial_halfwidth_mm, c.radial_halfwidth_mm,
                                            c.radial_points);
    std::vector<Vec3> pts;
    pts.reserve(yz.size() * yz.size());
    for (double y : yz)
        for (double z : yz) pts.push_back({0.0, y * 1e-3, z * 1e-3});
    const std::vector<Vec3> grad_rf = evaluate_gradient(sys, sol_rf, pts);
    const std::vector<double> phi_dc = evaluate_potential(sys, sol_dc, pts);

    CsvTable radial;
    radial.header = {"y_mm", "z_mm", "pseudo_v", "dc_v", "total_v"};
    double pseudo_center = 0.0;
    double pseudo_max = 0.0;
    for (std::size_t iy = 0; iy < yz.size(); ++iy)
        for (std::size_t iz = 0; iz < yz.size(); ++iz) {
            const std::size_t k = iy * yz.size() + iz;
            const double pseudo = pseudopotential(grad_rf[k], ion, omega);
            radial.rows.push_back({yz[iy], yz[iz], pseudo, phi_dc[k], pseudo + phi_dc[k]});
            pseudo_max = std::max(pseudo_max, pseudo);
            if (yz[iy] == 0.0 && yz[iz] == 0.0) pseudo_center = pseudo;
        }
    write_csv(out / "pseudopotential.csv", radial);

    return {{"command", "fields"},
            {"elements", geom.element_count()},
            {"axis_points", c.axis_points},
            {"radial_points", c.radial_points},
            {"axis_peak_total_v", peak_total},
            {"axis_peak_x_mm", peak_x_mm},
            {"pseudo_center_v", pseudo_center},
            {"pseudo_max_v", pseudo_max}};
}

// -------------------------------------------------------------- trajectory

struct FieldCfg {
    std::string type = "bem";
    std::vector<long> grid_points{41, 17, 17};
    std::vector<double> halfwidth_mm{3.0, 0.8, 0.8};
    double alpha_dc_per_m2 = 0.0;  // quadrupole route
    double beta_rf_per_m2 = 0.0;
    double u_dc_v = 0.0;
};

struct TrajectoryCfg {
    TrapCfg trap;
    IonCfg ion;
    std::vector<double> dc_voltages_v;
    double rf_voltage_vpp = 400.0;
    double omega_rf_mhz = 12.0;
    double t_final_us = 80.0;
    long steps = 4000;
    std::string integrator = "verlet";
    long record_every = 1;
    double rk_tol_rel = 1e-10;
    std::vector<double> initial_position_mm{0.0, 0.0, 0.0};
    std::vector<double> initial_velocity_m_s{0.0, 0.0, 0.0};
    FieldCfg field;
};

TrajectoryCfg parse_trajectory(const json& j) {
    View v(j, "config");
    TrajectoryCfg c;
    (void)v.str("command");
    c.trap = parse_trap(v);
    c.ion = parse_ion(v);
    c.dc_voltages_v = v.numbers("dc_voltages_v");
    c.rf_voltage_vpp = v.num("rf_voltage_vpp");
    c.omega_rf_mhz = v.num("omega_rf_mhz");
    c.t_final_us = v.num("t_final_us");
    c.steps = v.integer("steps");
    c.integrator = v.str("integrator");
    c.record_every = v.integer_or("record_every", 1);
    c.rk_tol_rel = v.num_or("rk_tol_rel", 1e-10);
    c.initial_position_mm = v.numbers("initial_position_mm");
    c.initial_velocity_m_s = v.numbers("initial_velocity_m_s");
    {
        View f = v.child("field");
        c.field.type = f.str("type");
        if (c.field.type == "bem") {
            std::vector<double> gp = f.numbers("grid_points");
            c.field.grid_points.assign(gp.begin(), gp.end());
            c.field.halfwidth_mm = f.numbers("halfwidth_mm");
            if (c.field.grid_points.size() != 3 || c.field.halfwidth_mm.size() != 3)
                throw ConfigError("field.grid_points and field.halfwidth_mm need three entries");
        } else if (c.field.type == "quadrupole") {
            c.field.alpha_dc_per_m2 = f.num("alpha_dc_per_m2");
            c.field.beta_rf_per_m2 = f.num("beta_rf_per_m2");
            c.field.u_dc_v = f.num("u_dc_v");
        } else if (c.field.type != "none") {
            throw ConfigError("field.type must be 'bem', 'quadrupole' or 'none'");
        }
        f.done();
    }
    v.done();
    if (c.initial_position_mm.size() != 3 || c.initial_velocity_m_s.size() != 3)
        throw ConfigError("initial position and velocity need three components");
    if (static_cast<long>(c.dc_voltages_v.size()) != c.trap.segments)
        throw ConfigError("dc_voltages_v must list one voltage per dc segment");
    if (c.steps <= 0 || !(c.t_final_us > 0.0))
        throw ConfigError("steps and t_final_us must be positive");
    return c;
}

json trajectory_json(const TrajectoryCfg& c) {
    json field;
    if (c.field.type == "bem") {
        field = {{"type", "bem"},
                 {"grid_points", c.field.grid_points},
                 {"halfwidth_mm", c.field.halfwidth_mm}};
    } else if (c.field.type == "quadrupole") {
        field = {{"type", "quadrupole"},
                 {"alpha_dc_per_m2", c.field.alpha_dc_per_m2},
                 {"beta_rf_per_m2", c.field.beta_rf_per_m2},
                 {"u_dc_v", c.field.u_dc_v}};
    } else {
        field = {{"type", "none"}};
    }
    return {{"command", "trajectory"},
            {"trap", trap_json(c.trap)},
            {"ion", ion_json(c.ion)},
            {"dc_voltages_v", c.dc_voltages_v},
            {"rf_voltage_vpp", c.rf_voltage_vpp},
            {"omega_rf_mhz", c.omega_rf_mhz},
            {"t_final_us", c.t_final_us},
            {"steps", c.steps},
            {"integrator", c.integrator},
            {"record_every", c.record_every},
            {"rk_tol_rel", c.rk_tol_rel},
            {"initial_position_mm", c.initial_position_mm},
            {"initial_velocity_m_s", c.initial_velocity_m_s},
            {"field", field}};
}

json run_trajectory(const TrajectoryCfg& c, const std::filesystem::path& out, bool verbose) {
    const IonSpecies ion = ion_from_amu(c.ion.mass_amu, c.ion.charge_e);
    const double omega = 2.0 * std::numbers::pi * c.omega_rf_mhz * 1e6;
    const double rf_amp = 0.5 * c.rf_voltage_vpp;
    const double qm = ion.charge / ion.mass;

    ForceField force;
    PotentialEnergy pot;
    if (c.field.type == "bem") {
        const ElectrodeGeometry geom = build_trap(c.trap);
        if (verbose) std::cerr << "trajectory: " << geom.element_count() << " elements\n";
        const BemSystem sys = assemble_bem(geom);
        const SurfaceSolution sol_dc =
            solve_surface(sys, electrode_voltages(geom, c.dc_voltages_v, 0.0));
        const SurfaceSolution sol_rf = solve_surface(
            sys,
            electrode_voltages(geom, std::vector<double>(c.dc_voltages_v.size(), 0.0), rf_amp));
        Vec3 lo{-c.field.halfwidth_mm[0] * 1e-3, -c.field.halfwidth_mm[1] * 1e-3,
                -c.field.halfwidth_mm[2] * 1e-3};
        Vec3 hi{-lo[0], -lo[1], -lo[2]};
        auto f_dc = std::make_shared<SampledField3D>(
            sample_field(sys, sol_dc, lo, hi, static_cast<int>(c.field.grid_points[0]),
                         static_cast<int>(c.field.grid_points[1]),
                         static_cast<int>(c.field.grid_points[2])));
        auto f_rf = std::make_shared<SampledField3D>(
            sample_field(sys, sol_rf, lo, hi, static_cast<int>(c.field.grid_points[0]),
                         static_cast<int>(c.field.grid_points[1]),
                         static_cast<int>(c.field.grid_points[2])));
        force = [f_dc, f_rf, qm, omega](double t, const std::vector<double>& x) {
            const Vec3 p{x[0], x[1], x[2]};
            const Vec3 gd = f_dc->gradient_at(p);
            const Vec3 gr = f_rf->gradient_at(p);
            const double cw = std::cos(omega * t);
            return std::vector<double>{-qm * (gd[0] + cw * gr[0]), -qm * (gd[1] + cw * gr[1]),
                                       -qm * (gd[2] + cw * gr[2])};
        };
        const double q = ion.charge;
        pot = [f_dc, f_rf, q, omega](double t, const std::vector<double>& x) {
            const Vec3 p{x[0], x[1], x[2]};
            return q * (f_dc->potential_at(p) + std::cos(omega * t) * f_rf->potential_at(p));
        };
    } else if (c.field.type == "quadrupole") {
        QuadrupolePotential qp{linear_trap_quadrupole(c.field.alpha_dc_per_m2, c.field.beta_rf_per_m2),
                               c.field.u_dc_v, rf_amp, omega};
        force = [qp, qm](double t, const std::vector<double>& x) {
            const Vec3 g = qp.gradient({x[0], x[1], x[2]}, t);
            return std::vector<double>{-qm * g[0], -qm * g[1], -qm * g[2]};
        };
        const double q = ion.charge;
        pot = [qp, q](double t, const std::vector<double>& x) {
            return q * qp.value({x[0], x[1], x[2]}, t);
        };
    } else {
        force = [](double, const std::vector<double>& x) {
            return std::vector<double>(x.size(), 0.0);
        };
        pot = [](double, const std::vector<double>&) { return 0.0; };
    }

    PhaseState s0;
    s0.t = 0.0;
    s0.x = {c.initial_position_mm[0] * 1e-3, c.initial_position_mm[1] * 1e-3,
            c.initial_position_mm[2] * 1e-3};
    s0.v = c.initial_velocity_m_s;

    const double t_final = c.t_final_us * 1e-6;
    const double h = t_final / static_cast<double>(c.steps);
    Trajectory traj;
    if (c.integrator == "rk45") {
        traj = integrate_adaptive(s0, force, t_final, c.rk_tol_rel, h);
    } else {
        Stepper step;
        if (c.integrator == "verlet")
            step = step_stormer_verlet;
        else if (c.integrator == "euler")
            step = step_euler_explicit;
        else if (c.integrator == "midpoint")
            step = step_implicit_midpoint;
        else if (c.integrator == "prk")
            step = [](const PhaseState& s, const ForceField& f, double hh) {
                return step_partitioned_rk(s, f, hh, lobatto3_pair());
            };
        else
            throw ConfigError("integrator must be verlet, euler, midpoint, prk or rk45");
        traj = integrate_fixed(s0, force, h, c.steps, step, c.record_every);
    }

    CsvTable tab;
    tab.header = {"t_s", "x_m", "y_m", "z_m", "vx_m_s", "vy_m_s", "vz_m_s"};
    CsvTable en;
    en.header = {"t_s", "e_kin_j", "e_pot_j", "e_tot_j"};
    double max_radial = 0.0;
    double max_abs_x = 0.0;
    for (const auto& s : traj.states) {
        tab.rows.push_back({s.t, s.x[0], s.x[1], s.x[2], s.v[0], s.v[1], s.v[2]});
        double ek = 0.0;
        for (double vv : s.v) ek += 0.5 * ion.mass * vv * vv;
        const double ep = pot(s.t, s.x);
        en.rows.push_back({s.t, ek, ep, ek + ep});
        max_radial = std::max(max_radial, std::hypot(s.x[1], s.x[2]));
        max_abs_x = std::max(max_abs_x, std::abs(s.x[0]));
    }
    write_csv(out / "trajectory.csv", tab);
    write_csv(out / "energy.csv", en);

    return {{"command", "trajectory"},
            {"integrator", c.integrator},
            {"steps", c.steps},
            {"recorded", traj.states.size()},
            {"accepted", traj.accepted},
            {"rejected", traj.rejected},
            {"max_radial_excursion_m", max_radial},
            {"max_abs_x_m", max_abs_x}};
}

// ---------------------------------------------------------------- voltages

struct VoltagesCfg {
    TrapCfg trap;
    double axis_x_min_mm = -6.0, axis_x_max_mm = 6.0;
    long axis_points = 241;
    double curvature_v_mm2 = 0.03;
    std::vector<double> centers_mm;
    double voltage_min_v = -10.0, voltage_max_v = 10.0;
    double max_step_change_v = 2.0;
    double roi_halfwidth_mm = 3.0;
};

VoltagesCfg parse_voltages(const json& j) {
    View v(j, "config");
    VoltagesCfg c;
    (void)v.str("command");
    c.trap = parse_trap(v);
    {
        View a = v.child("axis");
        c.axis_x_min_mm = a.num("x_min_mm");
        c.axis_x_max_mm = a.num("x_max_mm");
        c.axis_points = a.integer("points");
        a.done();
    }
    c.curvature_v_mm2 = v.num("curvature_v_mm2");
    c.centers_mm = v.numbers("centers_mm");
    c.voltage_min_v = v.num("voltage_min_v");
    c.voltage_max_v = v.num("voltage_max_v");
    c.max_step_change_v = v.num_or("max_step_change_v", 2.0);
    c.roi_halfwidth_mm = v.num_or("roi_halfwidth_mm", 3.0);
    v.done();
    if (c.centers_mm.empty()) throw ConfigError("centers_mm must not be empty");
    return c;
}

json voltages_json(const VoltagesCfg& c) {
    return {{"command", "voltages"},
            {"trap", trap_json(c.trap)},
            {"axis",
             {{"x_min_mm", c.axis_x_min_mm}, {"x_max_mm", c.axis_x_max_mm}, {"points", c.axis_points}}},
            {"curvature_v_mm2", c.curvature_v_mm2},
            {"centers_mm", c.centers_mm},
            {"voltage_min_v", c.voltage_min_v},
            {"voltage_max_v", c.voltage_max_v},
            {"max_step_change_v", c.max_step_change_v},
            {"roi_halfwidth_mm", c.roi_halfwidth_mm}};
}

json run_voltages(const VoltagesCfg& c, const std::filesystem::path& out, bool verbose) {
    const ElectrodeGeometry geom = build_trap(c.trap);
    if (verbose) std::cerr << "voltages: " << geom.element_count() << " elements\n";
    const BemSystem sys = assemble_bem(geom);

    const std::vector<double> x_mm = linspace(c.axis_x_min_mm, c.axis_x_max_mm, c.axis_points);
    std::vector<double> x_m(x_mm.size());
    for (std::size_t i = 0; i < x_mm.size(); ++i) x_m[i] = x_mm[i] * 1e-3;
    const Eigen::MatrixXd basis = axis_basis_matrix(sys, x_m);
    // dc electrodes only; the rf electrode (column 0) stays on the drive
    const Eigen::MatrixXd a = basis.rightCols(basis.cols() - 1);

    std::vector<double> centers_m(c.centers_mm.size());
    for (std::size_t i = 0; i < centers_m.size(); ++i) centers_m[i] = c.centers_mm[i] * 1e-3;
    const double delta_si = c.curvature_v_mm2 * 1e6;  // V/m^2

    TransportConfig tc;
    tc.u_min = c.voltage_min_v;
    tc.u_max = c.voltage_max_v;
    tc.max_step_change = c.max_step_change_v;
    tc.roi_halfwidth = c.roi_halfwidth_mm * 1e-3;
    const Eigen::MatrixXd wave = transport_waveforms(a, x_m, centers_m, delta_si, tc);

    CsvTable tab;
    tab.header.push_back("step");
    for (std::size_t e = 1; e < geom.electrode_names.size(); ++e)
        tab.header.push_back(geom.electrode_names[e] + "_v");
    for (Eigen::Index k = 0; k < wave.rows(); ++k) {
        std::vector<double> row{static_cast<double>(k)};
        for (Eigen::Index e = 0; e < wave.cols(); ++e) row.push_back(wave(k, e));
        tab.rows.push_back(std::move(row));
    }
    write_csv(out / "waveform.csv", tab);

    // achieved well shape per step from the fit over the region of interest
    double worst_curv_rel = 0.0;
    double worst_center_mm = 0.0;
    for (std::size_t k = 0; k < centers_m.size(); ++k) {
        std::vector<double> xs, ys;
        for (std::size_t i = 0; i < x_m.size(); ++i) {
            if (std::abs(x_m[i] - centers_m[k]) > tc.roi_halfwidth) continue;
            xs.push_back(x_m[i]);
            double phi = 0.0;
            for (Eigen::Index e = 0; e < wave.cols(); ++e)
                phi += a(static_cast<Eigen::Index>(i), e) * wave(static_cast<Eigen::Index>(k), e);
            ys.push_back(phi);
        }
        const auto fit = fit_quadratic(xs, ys);
        const double curv_rel = std::abs(fit[2] - delta_si) / delta_si;
        const double center_err_mm = std::abs(-fit[1] / (2.0 * fit[2]) - centers_m[k]) * 1e3;
        worst_curv_rel = std::max(worst_curv_rel, curv_rel);
        worst_center_mm = std::max(worst_center_mm, center_err_mm);
    }

    return {{"command", "voltages"},
            {"elements", geom.element_count()},
            {"steps", centers_m.size()},
            {"max_abs_voltage_v", wave.cwiseAbs().maxCoeff()},
            {"worst_curvature_rel_err", worst_curv_rel},
            {"worst_center_err_mm", worst_center_mm}};
}

// ------------------------------------------------------------------- eigen

struct EigenCfg {
    double mass = 1.0;
    long n_states = 6;
    PotentialCfg potential;
    bool has_fgh = false, has_numerov = false;
    GridCfg fgh, numerov;
};

EigenCfg parse_eigen(const json& j) {
    View v(j, "config");
    EigenCfg c;
    (void)v.str("command");
    c.mass = v.num_or("mass_natural", 1.0);
    c.n_states = v.integer("n_states");
    c.potential = parse_potential(v.child("potential"));
    if (v.has("fgh")) {
        c.has_fgh = true;
        c.fgh = parse_grid(v.child("fgh"));
    }
    if (v.has("numerov")) {
        c.has_numerov = true;
        c.numerov = parse_grid(v.child("numerov"));
    }
    v.done();
    if (!c.has_fgh && !c.has_numerov)
        throw ConfigError("eigen: need at least one of 'fgh' or 'numerov'");
    return c;
}

json eigen_json(const EigenCfg& c) {
    json out = {{"command", "eigen"},
                {"mass_natural", c.mass},
                {"n_states", c.n_states},
                {"potential", potential_json(c.potential)}};
    if (c.has_fgh) out["fgh"] = grid_json(c.fgh);
    if (c.has_numerov) out["numerov"] = grid_json(c.numerov);
    return out;
}

json run_eigen(const EigenCfg& c, const std::filesystem::path& out, bool verbose) {
    std::vector<double> e_fgh, e_num;
    long n_fgh = 0, n_num = 0;
    if (c.has_fgh) {
        const SpatialGrid g = realize_grid(c.fgh, c.potential, c.mass);
        n_fgh = g.n;
        e_fgh = eigensolve(g, potential_on_grid(c.potential, c.mass, g), c.mass,
                           static_cast<int>(c.n_states))
                    .energies;
        if (verbose) std::cerr << "eigen: fgh grid " << g.n << " points\n";
    }
    if (c.has_numerov) {
        const SpatialGrid g = realize_grid(c.numerov, c.potential, c.mass);
        n_num = g.n;
        e_num = numerov_eigenvalues(g, potential_on_grid(c.potential, c.mass, g), c.mass,
                                    static_cast<int>(c.n_states));
        if (verbose) std::cerr << "eigen: numerov grid " << g.n << " points\n";
    }

    CsvTable tab;
    tab.header = {"n"};
    if (c.has_fgh) tab.header.push_back("e_fgh_natural");
    if (c.has_numerov) tab.header.push_back("e_numerov_natural");
    for (long n = 0; n < c.n_states; ++n) {
        std::vector<double> row{static_cast<double>(n)};
        if (c.has_fgh) row.push_back(e_fgh[static_cast<std::size_t>(n)]);
        if (c.has_numerov) row.push_back(e_num[static_cast<std::size_t>(n)]);
        tab.rows.push_back(std::move(row));
    }
    write_csv(out / "eigenvalues.csv", tab);

    json summary = {{"command", "eigen"}, {"n_states", c.n_states}};
    if (c.has_fgh) {
        summary["fgh_points"] = n_fgh;
        summary["e_fgh_natural"] = e_fgh;
    }
    if (c.has_numerov) {
        summary["numerov_points"] = n_num;
        summary["e_numerov_natural"] = e_num;
    }
    return summary;
}

// --------------------------------------------------------------- propagate

struct PropagateCfg {
    double mass = 1.0;
    GridCfg grid;
    PotentialCfg potential;
    std::string initial_type = "eigenstate";
    long initial_n = 0;
    double initial_omega = 1.0, initial_x0 = 0.0, initial_p0 = 0.0;
    std::string method = "chebyshev";
    double dt = 0.05;
    long steps = 1000;
    long record_every = 1;
};

PropagateCfg parse_propagate(const json& j) {
    View v(j, "config");
    PropagateCfg c;
    (void)v.str("command");
    c.mass = v.num_or("mass_natural", 1.0);
    c.grid = parse_grid(v.child("grid"));
    c.potential = parse_potential(v.child("potential"));
    {
        View i = v.child("initial");
        c.initial_type = i.str("type");
        if (c.initial_type == "eigenstate") {
            c.initial_n = i.integer("n");
        } else if (c.initial_type == "coherent") {
            c.initial_omega = i.num("omega_natural");
            c.initial_x0 = i.num("x0_natural");
            c.initial_p0 = i.num("p0_natural");
        } else {
            throw ConfigError("initial.type must be 'eigenstate' or 'coherent'");
        }
        i.done();
    }
    c.method = v.str("method");
    if (c.method != "chebyshev" && c.method != "splitop")
        throw ConfigError("method must be 'chebyshev' or 'splitop'");
    c.dt = v.num("dt_natural");
    c.steps = v.integer("steps");
    c.record_every = v.integer_or("record_every", 1);
    v.done();
    if (c.steps <= 0 || c.record_every <= 0)
        throw ConfigError("steps and record_every must be positive");
    return c;
}

json propagate_json(const PropagateCfg& c) {
    json initial;
    if (c.initial_type == "eigenstate") {
        initial = {{"type", "eigenstate"}, {"n", c.initial_n}};
    } else {
        initial = {{"type", "coherent"},
                   {"omega_natural", c.initial_omega},
                   {"x0_natural", c.initial_x0},
                   {"p0_natural", c.initial_p0}};
    }
    return {{"command", "propagate"},
            {"mass_natural", c.mass},
            {"grid", grid_json(c.grid)},
            {"potential", potential_json(c.potential)},
            {"initial", initial},
            {"method", c.method},
            {"dt_natural", c.dt},
            {"steps", c.steps},
            {"record_every", c.record_every}};
}

json run_propagate(const PropagateCfg& c, const std::filesystem::path& out, bool verbose) {
    const SpatialGrid g = realize_grid(c.grid, c.potential, c.mass);
    const std::vector<double> v = potential_on_grid(c.potential, c.mass, g);
    if (verbose) std::cerr << "propagate: grid " << g.n << " points\n";

    WaveFunction wf;
    if (c.initial_type == "eigenstate")
        wf = eigensolve(g, v, c.mass, static_cast<int>(c.initial_n) + 1)
                 .states[static_cast<std::size_t>(c.initial_n)];
    else
        wf = coherent_state(g, c.mass, c.initial_omega, c.initial_x0, c.initial_p0);
    const WaveFunction wf0 = wf;

    CsvTable trace;
    trace.header = {"step", "t_natural", "norm"};
    trace.rows.push_back({0.0, 0.0, norm(wf)});
    double max_norm_dev = std::abs(norm(wf) - 1.0);

    const auto record = [&](long step) {
        const double n = norm(wf);
        max_norm_dev = std::max(max_norm_dev, std::abs(n - 1.0));
        trace.rows.push_back({static_cast<double>(step), step * c.dt, n});
    };

    if (c.method == "chebyshev") {
        ChebyshevPropagator prop(g, c.mass, c.dt, spectral_bounds(g, v, c.mass));
        for (long s = 1; s <= c.steps; ++s) {
            prop.step(wf, v);
            if (s % c.record_every == 0 || s == c.steps) record(s);
        }
    } else {
        SplitOperatorPropagator prop(g, c.mass, c.dt);
        for (long s = 1; s <= c.steps; ++s) {
            prop.step(wf, v);
            if (s % c.record_every == 0 || s == c.steps) record(s);
        }
    }
    write_csv(out / "norm_trace.csv", trace);

    CsvTable psi;
    psi.header = {"x_natural", "re", "im", "abs2"};
    for (int i = 0; i < g.n; ++i) {
        const auto z = wf.amp[static_cast<std::size_t>(i)];
        psi.rows.push_back({g.x(i), z.real(), z.imag(), std::norm(z)});
    }
    write_csv(out / "wavefunction.csv", psi);

    const std::complex<double> ov = inner_product(wf0, wf);
    return {{"command", "propagate"},
            {"method", c.method},
            {"grid_points", g.n},
            {"steps", c.steps},
            {"max_norm_deviation", max_norm_dev},
            {"overlap_initial_re", ov.real()},
            {"overlap_initial_im", ov.imag()},
            {"overlap_initial_abs", std::abs(ov)}};
}

// ------------------------------------------------------- optimize-transport

struct TransportCfg {
    TrapCfg trap;
    IonCfg ion;
    // waveform (Tikhonov) stage
    double curvature_v_mm2 = 0.03;
    double axis_x_min_mm = -6.0, axis_x_max_mm = 6.0;
    long axis_points = 241;
    double voltage_min_v = -10.0, voltage_max_v = 10.0;
    double max_step_change_v = 2.0;
    double roi_halfwidth_mm = 3.0;
    // transport path
    double distance_natural = 12.0;
    double horizon_natural = 22.0;
    long steps = 1500;
    // quantum grid
    long grid_points = 128;
    double grid_padding_natural = 10.0;
    // optimizer
    double lambda = 1e7;
    long max_iter = 150;
    double fidelity_goal = 0.99;
    std::string variant = "krotov";
};

TransportCfg parse_transport(const json& j) {
    View v(j, "config");
    TransportCfg c;
    (void)v.str("command");
    c.trap = parse_trap(v);
    c.ion = parse_ion(v);
    {
        View w = v.child("waveform");
        c.curvature_v_mm2 = w.num("curvature_v_mm2");
        c.axis_x_min_mm = w.num("axis_x_min_mm");
        c.axis_x_max_mm = w.num("axis_x_max_mm");
        c.axis_points = w.integer("axis_points");
        c.voltage_min_v = w.num("voltage_min_v");
        c.voltage_max_v = w.num("voltage_max_v");
        c.max_step_change_v = w.num_or("max_step_change_v", 2.0);
        c.roi_halfwidth_mm = w.num_or("roi_halfwidth_mm", 3.0);
        w.done();
    }
    {
        View t = v.child("transport");
        c.distance_natural = t.num("distance_natural");
        c.horizon_natural = t.num("horizon_natural");
        c.steps = t.integer("steps");
        t.done();
    }
    {
        View q = v.child("quantum");
        c.grid_points = q.integer("grid_points");
        c.grid_padding_natural = q.num("grid_padding_natural");
        q.done();
    }
    {
        View k = v.child("krotov");
        c.lambda = k.num("lambda");
        c.max_iter = k.integer("max_iter");
        c.fidelity_goal = k.num_or("fidelity_goal", 0.99);
        c.variant = k.has("variant") ? k.str("variant") : std::string("krotov");
        k.done();
    }
    v.done();
    if (c.variant != "krotov" && c.variant != "gradient")
        throw ConfigError("krotov.variant must be 'krotov' or 'gradient'");
    if (c.steps <= 0 || c.grid_points <= 0 || c.max_iter < 0)
        throw ConfigError("transport steps, grid points and max_iter must be positive");
    return c;
}

json transport_json(const TransportCfg& c) {
    return {{"command", "optimize-transport"},
            {"trap", trap_json(c.trap)},
            {"ion", ion_json(c.ion)},
            {"waveform",
             {{"curvature_v_mm2", c.curvature_v_mm2},
              {"axis_x_min_mm", c.axis_x_min_mm},
              {"axis_x_max_mm", c.axis_x_max_mm},
              {"axis_points", c.axis_points},
              {"voltage_min_v", c.voltage_min_v},
              {"voltage_max_v", c.voltage_max_v},
              {"max_step_change_v", c.max_step_change_v},
              {"roi_halfwidth_mm", c.roi_halfwidth_mm}}},
            {"transport",
             {{"distance_natural", c.distance_natural},
              {"horizon_natural", c.horizon_natural},
              {"steps", c.steps}}},
            {"quantum",
             {{"grid_points", c.grid_points}, {"grid_padding_natural", c.grid_padding_natural}}},
            {"krotov",
             {{"lambda", c.lambda},
              {"max_iter", c.max_iter},
              {"fidelity_goal", c.fidelity_goal},
              {"variant", c.variant}}}};
}

void write_waveform_csv(const std::filesystem::path& path,
                        const std::vector<std::string>& electrode_names,
                        const std::vector<std::vector<double>>& values) {
    CsvTable tab;
    tab.header.push_back("step");
    for (std::size_t e = 1; e < electrode_names.size(); ++e)
        tab.header.push_back(electrode_names[e] + "_v");
    const std::size_t steps = values.empty() ? 0 : values[0].size();
    for (std::size_t k = 0; k < steps; ++k) {
        std::vector<double> row{static_cast<double>(k)};
        for (const auto& col : values) row.push_back(col[k]);
        tab.rows.push_back(std::move(row));
    }
    write_csv(path, tab);
}

void write_trace_csv(const std::filesystem::path& path, const std::vector<TraceRow>& trace) {
    CsvTable tab;
    tab.header = {"iter", "j", "fidelity"};
    for (const auto& r : trace)
        tab.rows.push_back({static_cast<double>(r.iter), r.j, r.fidelity});
    write_csv(path, tab);
}

void write_wavefunction_csv(const std::filesystem::path& path, const SpatialGrid& g,
                            const CVec& amp) {
    CsvTable tab;
    tab.header = {"x_natural", "re", "im", "abs2"};
    for (int i = 0; i < g.n; ++i) {
        const auto z = amp[static_cast<std::size_t>(i)];
        tab.rows.push_back({g.x(i), z.real(), z.imag(), std::norm(z)});
    }
    write_csv(path, tab);
}

bool trace_monotone(const std::vector<TraceRow>& trace) {
    for (std::size_t i = 1; i < trace.size(); ++i)
        if (trace[i].j > trace[i - 1].j + 1e-12) return false;
    return true;
}

json run_transport(const TransportCfg& c, const std::filesystem::path& out, bool verbose) {
    const ElectrodeGeometry geom = build_trap(c.trap);
    if (verbose) std::cerr << "transport: " << geom.element_count() << " elements\n";
    const BemSystem sys = assemble_bem(geom);

    const IonSpecies ion = ion_from_amu(c.ion.mass_amu, c.ion.charge_e);
    const double delta_si = c.curvature_v_mm2 * 1e6;
    if (!(ion.charge * delta_si > 0.0))
        throw ConfigError("transport: curvature sign does not confine this charge");
    // natural oscillator units of the requested initial well
    const double omega_si = std::sqrt(2.0 * ion.charge * delta_si / ion.mass);
    const double x0_m = std::sqrt(kHbar / (ion.mass * omega_si));
    const double e_scale = kHbar * omega_si;

    // Tikhonov waveform on the mm axis grid
    const std::vector<double> x_mm = linspace(c.axis_x_min_mm, c.axis_x_max_mm, c.axis_points);
    std::vector<double> x_m(x_mm.size());
    for (std::size_t i = 0; i < x_mm.size(); ++i) x_m[i] = x_mm[i] * 1e-3;
    const Eigen::MatrixXd a_mm = axis_basis_matrix(sys, x_m).rightCols(geom.electrode_count() - 1);

    const double t_horizon = c.horizon_natural;
    const double dt = t_horizon / static_cast<double>(c.steps);
    std::vector<double> centers_m(static_cast<std::size_t>(c.steps));
    for (long k = 0; k < c.steps; ++k) {
        const double t = (k + 0.5) * dt;
        const double ramp = 0.5 * (1.0 - std::cos(std::numbers::pi * t / t_horizon));
        centers_m[static_cast<std::size_t>(k)] = c.distance_natural * x0_m * ramp;
    }
    TransportConfig tc;
    tc.u_min = c.voltage_min_v;
    tc.u_max = c.voltage_max_v;
    tc.max_step_change = c.max_step_change_v;
    tc.roi_halfwidth = c.roi_halfwidth_mm * 1e-3;
    const Eigen::MatrixXd wave = transport_waveforms(a_mm, x_m, centers_m, delta_si, tc);

    // quantum grid around the path, control basis in natural energy units
    const SpatialGrid grid =
        make_grid(-c.grid_padding_natural, c.distance_natural + 2.0 * c.grid_padding_natural,
                  static_cast<int>(c.grid_points));
    std::vector<double> xq_m(static_cast<std::size_t>(grid.n));
    for (int i = 0; i < grid.n; ++i) xq_m[static_cast<std::size_t>(i)] = grid.x(i) * x0_m;
    const Eigen::MatrixXd a_q = axis_basis_matrix(sys, xq_m).rightCols(geom.electrode_count() - 1);

    const std::size_t ne = static_cast<std::size_t>(a_q.cols());
    std::vector<std::vector<double>> basis(ne, std::vector<double>(static_cast<std::size_t>(grid.n)));
    for (std::size_t e = 0; e < ne; ++e) {
        double mean = 0.0;
        for (int i = 0; i < grid.n; ++i) {
            basis[e][static_cast<std::size_t>(i)] =
                ion.charge * a_q(i, static_cast<Eigen::Index>(e)) / e_scale;
            mean += basis[e][static_cast<std::size_t>(i)];
        }
        mean /= grid.n;
        // constant offset is a pure global phase; removing it keeps the
        // spectral range of H small
        for (auto& b : basis[e]) b -= mean;
    }

    ControlSet guess = make_controls(static_cast<int>(ne), static_cast<int>(c.steps), dt);
    for (std::size_t e = 0; e < ne; ++e)
        for (long k = 0; k < c.steps; ++k)
            guess.values[e][static_cast<std::size_t>(k)] =
                wave(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(e));

    const auto v_at_step = [&](long k) {
        std::vector<double> v(static_cast<std::size_t>(grid.n), 0.0);
        for (std::size_t e = 0; e < ne; ++e) {
            const double u = guess.values[e][static_cast<std::size_t>(k)];
            for (int i = 0; i < grid.n; ++i)
                v[static_cast<std::size_t>(i)] += u * basis[e][static_cast<std::size_t>(i)];
        }
        return v;
    };

    double vlo = 0.0, vhi = 0.0;
    for (long k = 0; k < c.steps; ++k) {
        const auto v = v_at_step(k);
        const auto [mn, mx] = std::minmax_element(v.begin(), v.end());
        if (k == 0 || *mn < vlo) vlo = *mn;
        if (k == 0 || *mx > vhi) vhi = *mx;
    }
    const double kmax = grid.k_max();
    double top = vhi + 0.5 * kmax * kmax;
    const double span = top - vlo;
    const SpectralBounds bounds{vlo - 0.02 * span, top + 0.02 * span};

    ControlProblem prob = grid_control_problem(
        grid, 1.0, std::vector<double>(static_cast<std::size_t>(grid.n), 0.0), basis, bounds);
    prob.initial = {eigensolve(grid, v_at_step(0), 1.0, 1).states[0].amp};
    prob.target = {eigensolve(grid, v_at_step(c.steps - 1), 1.0, 1).states[0].amp};
    prob.lambda.assign(ne, c.lambda);

    OptimizeOptions opt;
    opt.max_iter = static_cast<int>(c.max_iter);
    opt.fidelity_goal = c.fidelity_goal;
    opt.verbose = verbose;
    const OptimizeResult res = c.variant == "gradient" ? gradient_optimize(prob, guess, opt)
                                                       : krotov_optimize(prob, guess, opt);

    write_waveform_csv(out / "waveform_guess.csv", geom.electrode_names, guess.values);
    write_waveform_csv(out / "waveform_optimized.csv", geom.electrode_names, res.controls.values);
    write_trace_csv(out / "trace.csv", res.trace);
    write_wavefunction_csv(out / "wavefunction_final.csv", grid, res.final_states[0]);

    return {{"command", "optimize-transport"},
            {"elements", geom.element_count()},
            {"omega_si_rad_s", omega_si},
            {"length_scale_m", x0_m},
            {"grid_points", grid.n},
            {"steps", c.steps},
            {"initial_fidelity", res.trace.front().fidelity},
            {"final_fidelity", res.fidelity},
            {"iterations", res.trace.back().iter},
            {"reached_goal", res.reached_goal},
            {"monotone_j", trace_monotone(res.trace)}};
}

// ------------------------------------------------------------ optimize-gate

struct GateCfg {
    GridCfg grid{-7.0, 14.0, 40, 0.9};
    LightIonParams laser;
    std::string mode = "krotov";
    // krotov mode
    double area_pi_units = 4.0;
    long steps = 1700;
    double lambda = 0.5;
    long max_iter = 50;
    double fidelity_goal = 0.999;
    // composite mode
    double dt_max_natural = 0.5;
    bool use_derived = true;
    std::vector<Pulse> pulses;
};

GateCfg parse_gate(const json& j) {
    View v(j, "config");
    GateCfg c;
    (void)v.str("command");
    c.grid = parse_grid(v.child("grid"));
    if (c.grid.points <= 0) throw ConfigError("gate grid needs an explicit even point count");
    {
        View l = v.child("laser");
        c.laser.rabi = l.num("rabi_natural");
        c.laser.eta = l.num("eta");
        c.laser.delta = l.num_or("delta_natural", 1.0);
        l.done();
    }
    c.mode = v.str("mode");
    if (c.mode == "krotov") {
        View p = v.child("pulse");
        c.area_pi_units = p.num("area_pi_units");
        c.steps = p.integer("steps");
        p.done();
        View k = v.child("krotov");
        c.lambda = k.num("lambda");
        c.max_iter = k.integer("max_iter");
        c.fidelity_goal = k.num_or("fidelity_goal", 0.999);
        k.done();
    } else if (c.mode == "composite") {
        View comp = v.child("composite");
        c.dt_max_natural = comp.num_or("dt_max_natural", 0.5);
        c.use_derived = comp.flag_or("use_derived", true);
        if (!c.use_derived) {
            const json& arr = comp.array("pulses");
            for (const auto& e : arr) {
                View pv(e, "config.composite.pulses[]");
                Pulse pl;
                pl.duration = pv.num("duration_natural");
                pl.phase = pv.num("phase_rad");
                pv.done();
                c.pulses.push_back(pl);
            }
        }
        comp.done();
    } else {
        throw ConfigError("mode must be 'krotov' or 'composite'");
    }
    v.done();
    return c;
}

json gate_json(const GateCfg& c) {
    json out = {{"command", "optimize-gate"},
                {"grid", grid_json(c.grid)},
                {"laser",
                 {{"rabi_natural", c.laser.rabi},
                  {"eta", c.laser.eta},
                  {"delta_natural", c.laser.delta}}},
                {"mode", c.mode}};
    if (c.mode == "krotov") {
        out["pulse"] = {{"area_pi_units", c.area_pi_units}, {"steps", c.steps}};
        out["krotov"] = {{"lambda", c.lambda},
                         {"max_iter", c.max_iter},
                         {"fidelity_goal", c.fidelity_goal}};
    } else {
        json comp = {{"dt_max_natural", c.dt_max_natural}, {"use_derived", c.use_derived}};
        if (!c.use_derived) {
            json arr = json::array();
            for (const auto& p : c.pulses)
                arr.push_back({{"duration_natural", p.duration}, {"phase_rad", p.phase}});
            comp["pulses"] = arr;
        }
        out["composite"] = comp;
    }
    return out;
}

json run_gate(const GateCfg& c, const std::filesystem::path& out, bool verbose) {
    const SpatialGrid grid = make_grid(c.grid.x_min, c.grid.length, static_cast<int>(c.grid.points));

    if (c.mode == "composite") {
        const std::vector<Pulse> pulses =
            c.use_derived ? derived_composite_sequence(c.laser) : c.pulses;
        const GateResult res = composite_pulse_gate(grid, c.laser, pulses, c.dt_max_natural);

        CsvTable tab;
        tab.header = {"pulse", "duration_natural", "phase_rad"};
        double total = 0.0;
        for (std::size_t i = 0; i < pulses.size(); ++i) {
            tab.rows.push_back({static_cast<double>(i), pulses[i].duration, pulses[i].phase});
            total += pulses[i].duration;
        }
        write_csv(out / "sequence.csv", tab);
        if (verbose) std::cerr << "composite gate fidelity " << res.fidelity << "\n";
        return {{"command", "optimize-gate"},
                {"mode", "composite"},
                {"pulses", pulses.size()},
                {"total_duration_natural", total},
                {"fidelity", res.fidelity}};
    }

    const double t_gate = c.area_pi_units * std::numbers::pi / (c.laser.rabi * c.laser.eta);
    const double dt = t_gate / static_cast<double>(c.steps);
    ControlProblem prob = gate_control_problem(grid, c.laser, c.lambda);
    const ControlSet guess = make_controls(1, static_cast<int>(c.steps), dt, 0.0);

    OptimizeOptions opt;
    opt.max_iter = static_cast<int>(c.max_iter);
    opt.fidelity_goal = c.fidelity_goal;
    opt.verbose = verbose;
    const OptimizeResult res = krotov_optimize(prob, guess, opt);

    CsvTable controls;
    controls.header = {"step", "t_natural", "phi_rad"};
    for (int k = 0; k < res.controls.steps(); ++k)
        controls.rows.push_back({static_cast<double>(k), res.controls.t_node(k),
                                 res.controls.values[0][static_cast<std::size_t>(k)]});
    write_csv(out / "controls.csv", controls);
    write_trace_csv(out / "trace.csv", res.trace);

    return {{"command", "optimize-gate"},
            {"mode", "krotov"},
            {"gate_time_natural", t_gate},
            {"steps", c.steps},
            {"initial_fidelity", res.trace.front().fidelity},
            {"final_fidelity", res.fidelity},
            {"improvement", res.fidelity - res.trace.front().fidelity},
            {"iterations", res.trace.back().iter},
            {"monotone_j", trace_monotone(res.trace)}};
}

// -------------------------------------------------------------- dispatcher

json load_config(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot read config file " + path);
    try {
        return json::parse(f);
    } catch (const json::parse_error& e) {
        throw ConfigError("config parse error in " + path + ": " + e.what());
    }
}

std::string command_of(const json& j) {
    if (!j.is_object() || !j.contains("command") || !j["command"].is_string())
        throw ConfigError("config needs a string 'command' field");
    return j["command"].get<std::string>();
}

}  // namespace

json canonical_config(const json& raw) {
    const std::string cmd = command_of(raw);
    if (cmd == "fields") return fields_json(parse_fields(raw));
    if (cmd == "trajectory") return trajectory_json(parse_trajectory(raw));
    if (cmd == "voltages") return voltages_json(parse_voltages(raw));
    if (cmd == "eigen") return eigen_json(parse_eigen(raw));
    if (cmd == "propagate") return propagate_json(parse_propagate(raw));
    if (cmd == "optimize-transport") return transport_json(parse_transport(raw));
    if (cmd == "optimize-gate") return gate_json(parse_gate(raw));
    throw ConfigError("unknown command '" + cmd + "'");
}

json run(const RunOptions& opt) {
    const json raw = load_config(opt.config_path);
    const std::string cmd = command_of(raw);
    if (!opt.expected_command.empty() && cmd != opt.expected_command)
        throw ConfigError("config is for command '" + cmd + "', not '" + opt.expected_command +
                          "'");
    const std::filesystem::path out(opt.out_dir.empty() ? "." : opt.out_dir);
    std::filesystem::create_directories(out);

    json summary;
    if (cmd == "fields")
        summary = run_fields(parse_fields(raw), out, opt.verbose);
    else if (cmd == "trajectory")
        summary = run_trajectory(parse_trajectory(raw), out, opt.verbose);
    else if (cmd == "voltages")
        summary = run_voltages(parse_voltages(raw), out, opt.verbose);
    else if (cmd == "eigen")
        summary = run_eigen(parse_eigen(raw), out, opt.verbose);
    else if (cmd == "propagate")
        summary = run_propagate(parse_propagate(raw), out, opt.verbose);
    else if (cmd == "optimize-transport")
        summary = run_transport(parse_transport(raw), out, opt.verbose);
    else if (cmd == "optimize-gate")
        summary = run_gate(parse_gate(raw), out, opt.verbose);
    else
        throw ConfigError("unknown command '" + cmd + "'");

    summary["config"] = canonical_config(raw);
    write_summary(out, summary);
    return summary;
}

}  // namespace iontrap::cli
