#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "iontrap/cli.hpp"
#include "iontrap/csvio.hpp"
#include "iontrap/errors.hpp"
#include "json.hpp"

using nlohmann::json;
namespace fs = std::filesystem;
using iontrap::ConfigError;

namespace {

fs::path work_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / "iontool_tests" / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

fs::path write_config(const fs::path& dir, const json& cfg) {
    const fs::path p = dir / "config.json";
    std::ofstream f(p, std::ios::binary);
    f << cfg.dump(2) << "\n";
    return p;
}

json run_here(const json& cfg, const fs::path& dir, const std::string& expect = "") {
    iontrap::cli::RunOptions opt;
    opt.config_path = write_config(dir, cfg).string();
    opt.out_dir = dir.string();
    opt.expected_command = expect;
    return iontrap::cli::run(opt);
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    REQUIRE(f.good());
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

std::size_t column(const iontrap::CsvTable& t, const std::string& name) {
    for (std::size_t i = 0; i < t.header.size(); ++i)
        if (t.header[i] == name) return i;
    REQUIRE(false);
    return 0;
}

// coarse surface mesh: plumbing tests need topology, not field accuracy
json small_trap() {
    return {{"n_phi", 6}, {"nx_segment", 2}, {"nx_rf", 6}};
}

json fields_config(const std::vector<double>& dc, double rf_vpp) {
    return {{"command", "fields"},
            {"trap", small_trap()},
            {"dc_voltages_v", dc},
            {"rf_voltage_vpp", rf_vpp},
            {"omega_rf_mhz", 20.0},
            {"axis", {{"x_min_mm", -5.0}, {"x_max_mm", 5.0}, {"points", 41}}},
            {"radial", {{"halfwidth_mm", 0.5}, {"points", 5}}}};
}

json eigen_config() {
    return {{"command", "eigen"},
            {"n_states", 6},
            {"potential", {{"type", "harmonic"}, {"omega_natural", 1.0}}},
            {"fgh", {{"x_min_natural", -8.0}, {"length_natural", 16.0}}},
            {"numerov", {{"x_min_natural", -7.0}, {"length_natural", 14.0}, {"points", 446}}}};
}

json propagate_config(const std::string& method, long steps) {
    return {{"command", "propagate"},
            {"grid", {{"x_min_natural", -8.0}, {"length_natural", 16.0}, {"points", 64}}},
            {"potential", {{"type", "harmonic"}, {"omega_natural", 1.0}}},
            {"initial", {{"type", "eigenstate"}, {"n", 0}}},
            {"method", method},
            {"dt_natural", 0.05},
            {"steps", steps},
            {"record_every", 10}};
}

json trajectory_config(const json& field, const std::string& integrator, double t_us,
                       long steps) {
    return {{"command", "trajectory"},
            {"trap", small_trap()},
            {"dc_voltages_v", {0.0, 1.0, 0.0, 1.0, 0.0}},
            {"rf_voltage_vpp", 400.0},
            {"omega_rf_mhz", 12.0},
            {"t_final_us", t_us},
            {"steps", steps},
            {"integrator", integrator},
            {"record_every", steps / 10},
            {"initial_position_mm", {0.1, 0.02, 0.0}},
            {"initial_velocity_m_s", {0.0, 0.0, 0.0}},
            {"field", field}};
}

// beta keeps the Mathieu q near 0.34 for a 40 amu ion at 12 MHz and 400 Vpp
json quadrupole_field() {
    return {{"type", "quadrupole"},
            {"alpha_dc_per_m2", 2.0e6},
            {"beta_rf_per_m2", 2.0e6},
            {"u_dc_v", 1.0}};
}

json voltages_config() {
    return {{"command", "voltages"},
            {"trap", small_trap()},
            {"axis", {{"x_min_mm", -6.0}, {"x_max_mm", 6.0}, {"points", 61}}},
            {"curvature_v_mm2", 0.03},
            {"centers_mm", {-1.0, 0.0, 1.0}},
            {"voltage_min_v", -10.0},
            {"voltage_max_v", 10.0}};
}

json gate_composite_config() {
    return {{"command", "optimize-gate"},
            {"grid", {{"x_min_natural", -6.0}, {"length_natural", 12.0}, {"points", 32}}},
            {"laser", {{"rabi_natural", 0.05}, {"eta", 0.3}}},
            {"mode", "composite"},
            {"composite",
             {{"dt_max_natural", 0.5},
              {"use_derived", false},
              {"pulses",
               json::array({{{"duration_natural", 3.0}, {"phase_rad", 0.0}},
                            {{"duration_natural", 3.0}, {"phase_rad", 1.5}}})}}}};
}

json gate_krotov_config() {
    return {{"command", "optimize-gate"},
            {"grid", {{"x_min_natural", -6.0}, {"length_natural", 12.0}, {"points", 32}}},
            {"laser", {{"rabi_natural", 0.05}, {"eta", 0.3}}},
            {"mode", "krotov"},
            {"pulse", {{"area_pi_units", 0.5}, {"steps", 40}}},
            {"krotov", {{"lambda", 0.05}, {"max_iter", 2}, {"fidelity_goal", 0.999}}}};
}

json transport_config() {
    return {{"command", "optimize-transport"},
            {"trap", small_trap()},
            {"waveform",
             {{"curvature_v_mm2", 0.03},
              {"axis_x_min_mm", -6.0},
              {"axis_x_max_mm", 6.0},
              {"axis_points", 61},
              {"voltage_min_v", -10.0},
              {"voltage_max_v", 10.0}}},
            {"transport", {{"distance_natural", 2.0}, {"horizon_natural", 8.0}, {"steps", 80}}},
            {"quantum", {{"grid_points", 32}, {"grid_padding_natural", 8.0}}},
            {"krotov", {{"lambda", 1.0e7}, {"max_iter", 1}, {"fidelity_goal", 0.5}}}};
}

}  // namespace

TEST_CASE("canonical config is a fixed point of parsing") {
    const json configs[] = {fields_config({0.0, 0.0, -1.0, 0.0, 0.0}, 200.0),
                            trajectory_config({{"type", "none"}}, "verlet", 1.0, 10),
                            trajectory_config(quadrupole_field(), "rk45", 1.0, 10),
                            voltages_config(),
                            eigen_config(),
                            propagate_config("chebyshev", 5),
                            transport_config(),
                            gate_krotov_config(),
                            gate_composite_config()};
    for (const json& cfg : configs) {
        CAPTURE(cfg["command"].get<std::string>());
        const json c1 = iontrap::cli::canonical_config(cfg);
        const json c2 = iontrap::cli::canonical_config(c1);
        CHECK(c1 == c2);
        CHECK(c1.dump(2) == c2.dump(2));
        // defaults are materialized in the canonical form
        CHECK(c1.contains("command"));
    }
}

TEST_CASE("unknown or malformed keys are rejected") {
    json cfg = eigen_config();
    cfg["stray"] = 1.0;
    CHECK_THROWS_AS((void)iontrap::cli::canonical_config(cfg), ConfigError);

    cfg = eigen_config();
    cfg["potential"]["typo_natural"] = 2.0;
    CHECK_THROWS_AS((void)iontrap::cli::canonical_config(cfg), ConfigError);

    cfg = fields_config({0.0, 0.0, 0.0, 0.0, 0.0}, 200.0);
    cfg["trap"]["n_segments"] = 7;
    CHECK_THROWS_AS((void)iontrap::cli::canonical_config(cfg), ConfigError);

    cfg = propagate_config("chebyshev", 5);
    cfg["initial"]["x0_natural"] = 0.5;  // eigenstate block does not take it
    CHECK_THROWS_AS((void)iontrap::cli::canonical_config(cfg), ConfigError);

    // wrong types and missing keys
    cfg = eigen_config();
    cfg["n_states"] = "six";
    CHECK_THROWS_AS((void)iontrap::cli::canonical_config(cfg), ConfigError);
    cfg = eigen_config();
    cfg["n_states"] = 5.5;
    CHECK_THROWS_AS((void)iontrap::cli::canonical_config(cfg), ConfigError);
    cfg = propagate_config("splitop", 5);
    cfg.erase("dt_natural");
    CHECK_THROWS_AS((void)iontrap::cli::canonical_config(cfg), ConfigError);
    CHECK_THROWS_AS((void)iontrap::cli::canonical_config(json{{"command", "warp"}}),
                    ConfigError);
    CHECK_THROWS_AS((void)iontrap::cli::canonical_config(json::array()), ConfigError);
}

TEST_CASE("run rejects a config for a different command") {
    const fs::path dir = work_dir("expect");
    CHECK_THROWS_AS((void)run_here(eigen_config(), dir, "propagate"), ConfigError);
    CHECK_NOTHROW((void)run_here(eigen_config(), dir, "eigen"));
}

TEST_CASE("eigen command reproduces the harmonic ladder") {
    const fs::path dir = work_dir("eigen");
    const json summary = run_here(eigen_config(), dir);

    REQUIRE(summary["n_states"].get<long>() == 6);
    const auto e_fgh = summary["e_fgh_natural"].get<std::vector<double>>();
    const auto e_num = summary["e_numerov_natural"].get<std::vector<double>>();
    REQUIRE(e_fgh.size() == 6);
    REQUIRE(e_num.size() == 6);
    for (int n = 0; n < 6; ++n) {
        const double exact = n + 0.5;
        CHECK(std::abs(e_fgh[static_cast<std::size_t>(n)] - exact) / exact < 1e-6);
        CHECK(std::abs(e_num[static_cast<std::size_t>(n)] - exact) / exact < 1e-6);
    }

    const iontrap::CsvTable tab = iontrap::read_csv(dir / "eigenvalues.csv");
    REQUIRE(tab.header == std::vector<std::string>{"n", "e_fgh_natural", "e_numerov_natural"});
    REQUIRE(tab.rows.size() == 6);
    CHECK(tab.rows[3][1] == doctest::Approx(3.5).epsilon(1e-6));

    // summary.json carries the canonical config of the run
    const json on_disk = json::parse(slurp(dir / "summary.json"));
    CHECK(on_disk["config"] == iontrap::cli::canonical_config(eigen_config()));
}

TEST_CASE("propagate command conserves the norm") {
    const fs::path dir = work_dir("prop_cheb");
    const json summary = run_here(propagate_config("chebyshev", 50), dir);
    CHECK(summary["max_norm_deviation"].get<double>() < 1e-10);
    CHECK(summary["overlap_initial_abs"].get<double>() == doctest::Approx(1.0).epsilon(1e-8));

    const iontrap::CsvTable trace = iontrap::read_csv(dir / "norm_trace.csv");
    REQUIRE(trace.header == std::vector<std::string>{"step", "t_natural", "norm"});
    CHECK(trace.rows.size() == 6);  // step 0 plus every 10th of 50
    CHECK(trace.rows.back()[0] == 50.0);
    const iontrap::CsvTable psi = iontrap::read_csv(dir / "wavefunction.csv");
    CHECK(psi.rows.size() == 64);

    const fs::path dir2 = work_dir("prop_split");
    const json s2 = run_here(propagate_config("splitop", 20), dir2);
    CHECK(s2["max_norm_deviation"].get<double>() < 1e-12);
}

TEST_CASE("fields command") {
    SUBCASE("all electrodes grounded give zero output") {
        const fs::path dir = work_dir("fields_zero");
        const json summary = run_here(fields_config({0.0, 0.0, 0.0, 0.0, 0.0}, 0.0), dir);
        CHECK(summary["axis_peak_total_v"].get<double>() == 0.0);
        CHECK(summary["pseudo_center_v"].get<double>() == 0.0);
        CHECK(summary["pseudo_max_v"].get<double>() == 0.0);
    }

    SUBCASE("central electrode at -1 V wells up at the origin") {
        const fs::path dir = work_dir("fields_center");
        const json summary = run_here(fields_config({0.0, 0.0, -1.0, 0.0, 0.0}, 0.0), dir);
        CHECK(summary["axis_peak_x_mm"].get<double>() == 0.0);
        CHECK(summary["axis_peak_total_v"].get<double>() < 0.0);

        const iontrap::CsvTable axis = iontrap::read_csv(dir / "axis_potentials.csv");
        const std::size_t cx = column(axis, "x_mm");
        const std::size_t ct = column(axis, "total_v");
        // single minimum at x = 0, strictly shallower outward
        const std::size_t mid = axis.rows.size() / 2;
        CHECK(axis.rows[mid][cx] == 0.0);
        for (std::size_t i = 0; i + 1 < axis.rows.size(); ++i) {
            const bool left = axis.rows[i][cx] < 0.0;
            const double d = axis.rows[i + 1][ct] - axis.rows[i][ct];
            CHECK((left ? d < 0.0 : d > 0.0));
        }
    }

    SUBCASE("mirrored voltages give an axis profile symmetric in x") {
        const fs::path dir = work_dir("fields_sym");
        (void)run_here(fields_config({2.0, 0.0, 0.0, 0.0, 2.0}, 100.0), dir);
        const iontrap::CsvTable axis = iontrap::read_csv(dir / "axis_potentials.csv");
        const std::size_t ct = column(axis, "total_v");
        const std::size_t n = axis.rows.size();
        for (std::size_t i = 0; i < n; ++i)
            CHECK(axis.rows[i][ct] ==
                  doctest::Approx(axis.rows[n - 1 - i][ct]).epsilon(1e-9));
    }
}

TEST_CASE("identical configs give byte-identical outputs") {
    const json cfg = fields_config({0.0, 0.5, -1.0, 0.5, 0.0}, 150.0);
    const fs::path a = work_dir("det_a");
    const fs::path b = work_dir("det_b");
    (void)run_here(cfg, a);
    (void)run_here(cfg, b);
    for (const char* name : {"axis_potentials.csv", "pseudopotential.csv", "summary.json"})
        CHECK(slurp(a / name) == slurp(b / name));

    const json tcfg = trajectory_config(quadrupole_field(), "verlet", 4.0, 2000);
    const fs::path c = work_dir("det_c");
    const fs::path d = work_dir("det_d");
    (void)run_here(tcfg, c);
    (void)run_here(tcfg, d);
    CHECK(slurp(c / "trajectory.csv") == slurp(d / "trajectory.csv"));
    CHECK(slurp(c / "energy.csv") == slurp(d / "energy.csv"));
}

TEST_CASE("trajectory command") {
    SUBCASE("free flight is linear motion") {
        json cfg = trajectory_config({{"type", "none"}}, "verlet", 10.0, 100);
        cfg["initial_position_mm"] = {0.0, 0.0, 0.0};
        cfg["initial_velocity_m_s"] = {100.0, 0.0, 0.0};
        const fs::path dir = work_dir("traj_free");
        const json summary = run_here(cfg, dir);
        // 100 m/s for 10 us is exactly 1 mm
        CHECK(summary["max_abs_x_m"].get<double>() == doctest::Approx(1e-3).epsilon(1e-12));
        CHECK(summary["max_radial_excursion_m"].get<double>() == 0.0);

        const iontrap::CsvTable tab = iontrap::read_csv(dir / "trajectory.csv");
        const std::size_t ct = column(tab, "t_s");
        const std::size_t cx = column(tab, "x_m");
        for (const auto& row : tab.rows)
            CHECK(row[cx] == doctest::Approx(100.0 * row[ct]).epsilon(1e-12));
    }

    SUBCASE("euler heats while verlet stays bounded") {
        // dc-only axial oscillation: with the drive off, total energy is
        // conserved and the integrator drift is the whole signal
        const long steps = 20000;
        json base = trajectory_config(quadrupole_field(), "verlet", 40.0, steps);
        base["rf_voltage_vpp"] = 0.0;
        base["initial_position_mm"] = {0.1, 0.0, 0.0};
        const fs::path dv = work_dir("traj_verlet");
        (void)run_here(base, dv);
        base["integrator"] = "euler";
        const fs::path de = work_dir("traj_euler");
        (void)run_here(base, de);

        const auto drift = [](const fs::path& dir) {
            const iontrap::CsvTable en = iontrap::read_csv(dir / "energy.csv");
            const std::size_t c = 3;  // e_tot_j
            double lo = en.rows.front()[c], hi = lo;
            for (const auto& row : en.rows) {
                lo = std::min(lo, row[c]);
                hi = std::max(hi, row[c]);
            }
            return hi - lo;
        };
        const double dv_span = drift(dv);
        const double de_span = drift(de);
        CHECK(de_span > 10.0 * dv_span);
    }

    SUBCASE("rk45 records acceptance counters") {
        json cfg = trajectory_config(quadrupole_field(), "rk45", 2.0, 100);
        const fs::path dir = work_dir("traj_rk");
        const json summary = run_here(cfg, dir);
        CHECK(summary["accepted"].get<long>() > 0);
        CHECK(summary["recorded"].get<long>() ==
              summary["accepted"].get<long>() + 1);
    }
}

TEST_CASE("voltages command writes a waveform per center") {
    const fs::path dir = work_dir("voltages");
    const json summary = run_here(voltages_config(), dir);
    CHECK(summary["steps"].get<long>() == 3);
    CHECK(summary["max_abs_voltage_v"].get<double>() <= 10.0 + 1e-9);

    const iontrap::CsvTable tab = iontrap::read_csv(dir / "waveform.csv");
    REQUIRE(tab.rows.size() == 3);
    REQUIRE(tab.header.size() == 6);  // step plus one column per dc segment
    CHECK(tab.header[0] == "step");
}

TEST_CASE("optimize commands emit trace and controls") {
    SUBCASE("gate, composite mode") {
        const fs::path dir = work_dir("gate_comp");
        const json summary = run_here(gate_composite_config(), dir);
        CHECK(summary["pulses"].get<long>() == 2);
        CHECK(summary["total_duration_natural"].get<double>() == doctest::Approx(6.0));
        CHECK(summary["fidelity"].get<double>() >= 0.0);
        const iontrap::CsvTable seq = iontrap::read_csv(dir / "sequence.csv");
        CHECK(seq.rows.size() == 2);
    }

    SUBCASE("gate, krotov mode") {
        const fs::path dir = work_dir("gate_krotov");
        const json summary = run_here(gate_krotov_config(), dir);
        CHECK(summary["monotone_j"].get<bool>());
        CHECK(summary["final_fidelity"].get<double>() >=
              summary["initial_fidelity"].get<double>());
        const iontrap::CsvTable controls = iontrap::read_csv(dir / "controls.csv");
        CHECK(controls.rows.size() == 40);
        const iontrap::CsvTable trace = iontrap::read_csv(dir / "trace.csv");
        CHECK(trace.rows.size() >= 2);
        CHECK(trace.rows.front()[0] == 0.0);
    }

    SUBCASE("transport pipeline plumbs through") {
        const fs::path dir = work_dir("transport");
        const json summary = run_here(transport_config(), dir);
        CHECK(summary["monotone_j"].get<bool>());
        CHECK(summary["grid_points"].get<long>() == 32);
        for (const char* name : {"waveform_guess.csv", "waveform_optimized.csv", "trace.csv",
                                 "wavefunction_final.csv"})
            CHECK(fs::exists(dir / name));
    }
}

// ------------------------------------------------------- binary exit codes

namespace {

int run_tool(const std::string& args, const fs::path& log) {
    const char* bin = std::getenv("IONTOOL_BIN");
    REQUIRE(bin != nullptr);
    const std::string cmd =
        std::string(bin) + " " + args + " > " + (log / "out.txt").string() + " 2> " +
        (log / "err.txt").string();
    const int rc = std::system(cmd.c_str());
    REQUIRE(rc != -1);
    return WEXITSTATUS(rc);
}

}  // namespace

TEST_CASE("binary exit codes" * doctest::skip(std::getenv("IONTOOL_BIN") == nullptr)) {
    const fs::path dir = work_dir("exitcodes");

    SUBCASE("success returns 0 and prints the summary") {
        const fs::path cfg = write_config(dir, eigen_config());
        const fs::path out = dir / "run";
        CHECK(run_tool("eigen --config " + cfg.string() + " --out " + out.string(), dir) == 0);
        CHECK(fs::exists(out / "summary.json"));
        const json stdout_doc = json::parse(slurp(dir / "out.txt"));
        CHECK(stdout_doc["command"] == "eigen");
    }

    SUBCASE("malformed json returns 2") {
        const fs::path cfg = dir / "bad.json";
        std::ofstream(cfg) << "{ not json";
        CHECK(run_tool("eigen --config " + cfg.string() + " --out " + dir.string(), dir) == 2);
    }

    SUBCASE("unknown key returns 2") {
        json cfg = eigen_config();
        cfg["stray"] = true;
        const fs::path p = write_config(dir, cfg);
        CHECK(run_tool("eigen --config " + p.string() + " --out " + dir.string(), dir) == 2);
    }

    SUBCASE("config for another command returns 2") {
        const fs::path cfg = write_config(dir, eigen_config());
        CHECK(run_tool("propagate --config " + cfg.string() + " --out " + dir.string(), dir) ==
              2);
    }

    SUBCASE("missing required option returns 2") {
        CHECK(run_tool("eigen", dir) == 2);
        CHECK(run_tool("", dir) == 2);
    }

    SUBCASE("numerical failure returns 3") {
        // shooting window on this grid holds far fewer than 40 bound states
        json cfg = eigen_config();
        cfg.erase("fgh");
        cfg["n_states"] = 40;
        const fs::path p = write_config(dir, cfg);
        CHECK(run_tool("eigen --config " + p.string() + " --out " + dir.string(), dir) == 3);
    }
}
