#include "iontrap/geometry.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <map>

#include "json.hpp"

#include "iontrap/errors.hpp"

namespace iontrap {

void ElectrodeGeometry::finalize() {
    size_t nt = triangles.size();
    if (electrode_of.size() != nt) throw ConfigError("geometry: electrode label per triangle missing");
    std::vector<int> owned(electrode_names.size(), 0);
    centroid.resize(nt);
    normal.resize(nt);
    area.resize(nt);
    for (size_t t = 0; t < nt; ++t) {
        const auto& tri = triangles[t];
        for (int k : tri)
            if (k < 0 || static_cast<size_t>(k) >= vertices.size())
                throw ConfigError("geometry: vertex index out of range");
        int e = electrode_of[t];
        if (e < 0 || static_cast<size_t>(e) >= electrode_names.size())
            throw ConfigError("geometry: electrode index out of range");
        ++owned[e];
        const Vec3& v0 = vertices[tri[0]];
        const Vec3& v1 = vertices[tri[1]];
        const Vec3& v2 = vertices[tri[2]];
        Vec3 n = cross(v1 - v0, v2 - v0);
        double nn = norm(n);
        if (!(nn > 0.0)) throw ConfigError("geometry: degenerate triangle");
        area[t] = 0.5 * nn;
        normal[t] = (1.0 / nn) * n;
        centroid[t] = (1.0 / 3.0) * (v0 + v1 + v2);
    }
    for (size_t e = 0; e < owned.size(); ++e)
        if (owned[e] == 0)
            throw ConfigError("geometry: electrode '" + electrode_names[e] + "' owns no triangles");
}

ElectrodeGeometry load_geometry(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open geometry file: " + path.string());
    nlohmann::json j;
    try {
        is >> j;
    } catch (const std::exception& e) {
        throw ConfigError("geometry JSON parse error: " + std::string(e.what()));
    }
    ElectrodeGeometry g;
    for (const auto& v : j.at("vertices"))
        g.vertices.push_back({v.at(0).get<double>(), v.at(1).get<double>(), v.at(2).get<double>()});
    for (const auto& t : j.at("triangles"))
        g.triangles.push_back({t.at(0).get<int>(), t.at(1).get<int>(), t.at(2).get<int>()});
    g.electrode_of.assign(g.triangles.size(), -1);
    for (const auto& [name, indices] : j.at("electrodes").items()) {
        int e = static_cast<int>(g.electrode_names.size());
        g.electrode_names.push_back(name);
        for (const auto& idx : indices) {
            size_t t = idx.get<size_t>();
            if (t >= g.triangles.size()) throw ConfigError("geometry: electrode triangle index out of range");
            if (g.electrode_of[t] != -1) throw ConfigError("geometry: triangle owned by two electrodes");
            g.electrode_of[t] = e;
        }
    }
    for (size_t t = 0; t < g.triangles.size(); ++t)
        if (g.electrode_of[t] == -1) throw ConfigError("geometry: triangle not owned by any electrode");
    g.finalize();
    return g;
}

void save_geometry(const ElectrodeGeometry& g, const std::filesystem::path& path) {
    nlohmann::json j;
    j["vertices"] = nlohmann::json::array();
    for (const auto& v : g.vertices) j["vertices"].push_back({v[0], v[1], v[2]});
    j["triangles"] = nlohmann::json::array();
    for (const auto& t : g.triangles) j["triangles"].push_back({t[0], t[1], t[2]});
    std::map<std::string, std::vector<size_t>> electrodes;
    for (size_t t = 0; t < g.triangles.size(); ++t)
        electrodes[g.electrode_names[g.electrode_of[t]]].push_back(t);
    j["electrodes"] = electrodes;
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream os(path);
    if (!os) throw ConfigError("cannot write geometry file: " + path.string());
    os << j.dump(1) << '\n';
}

ElectrodeGeometry make_icosphere(double radius, const Vec3& center, int subdivisions,
                                 const std::string& electrode) {
    const double t = (1.0 + std::sqrt(5.0)) / 2.0;
    std::vector<Vec3> verts = {{-1, t, 0}, {1, t, 0},  {-1, -t, 0}, {1, -t, 0},
                               {0, -1, t}, {0, 1, t},  {0, -1, -t}, {0, 1, -t},
                               {t, 0, -1}, {t, 0, 1},  {-t, 0, -1}, {-t, 0, 1}};
    std::vector<std::array<int, 3>> faces = {
        {0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
        {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
        {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
        {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
    for (auto& v : verts) v = (1.0 / norm(v)) * v;

    std::map<std::pair<int, int>, int> midpoint;
    auto mid = [&](int a, int b) {
        auto key = std::minmax(a, b);
        auto it = midpoint.find(key);
        if (it != midpoint.end()) return it->second;
        Vec3 m = 0.5 * (verts[a] + verts[b]);
        m = (1.0 / norm(m)) * m;
        verts.push_back(m);
        int idx = static_cast<int>(verts.size()) - 1;
        midpoint[key] = idx;
        return idx;
    };

    for (int s = 0; s < subdivisions; ++s) {
        std::vector<std::array<int, 3>> next;
        next.reserve(faces.size() * 4);
        for (const auto& f : faces) {
            int ab = mid(f[0], f[1]), bc = mid(f[1], f[2]), ca = mid(f[2], f[0]);
            next.push_back({f[0], ab, ca});
            next.push_back({f[1], bc, ab});
            next.push_back({f[2], ca, bc});
            next.push_back({ab, bc, ca});
        }
        faces = std::move(next);
    }

    ElectrodeGeometry g;
    g.vertices.reserve(verts.size());
    for (const auto& v : verts) g.vertices.push_back(center + radius * v);
    g.triangles = faces;
    // enforce outward winding regardless of the face table's convention
    for (auto& tri : g.triangles) {
        Vec3 c = (1.0 / 3.0) * (g.vertices[tri[0]] + g.vertices[tri[1]] + g.vertices[tri[2]]);
        Vec3 n = cross(g.vertices[tri[1]] - g.vertices[tri[0]], g.vertices[tri[2]] - g.vertices[tri[0]]);
        if (dot(n, c - center) < 0.0) std::swap(tri[1], tri[2]);
    }
    g.electrode_names = {electrode};
    g.electrode_of.assign(g.triangles.size(), 0);
    g.finalize();
    return g;
}

namespace {

// Closed cylinder along x, center line (y_c, z_c), x in [xa, xb]. The
// electrode label may vary per axial band, so one rod can carry several
// segment electrodes without interior cap faces (coincident faces between
// touching segments would make the collocation integrals singular).
void add_rod(ElectrodeGeometry& g, const std::function<int(int)>& electrode_at, double y_c,
             double z_c, double r, double xa, double xb, int n_phi, int nx) {
    int base = static_cast<int>(g.vertices.size());
    // rings of vertices
    for (int i = 0; i <= nx; ++i) {
        double x = xa + (xb - xa) * i / nx;
        for (int j = 0; j < n_phi; ++j) {
            double phi = 2.0 * M_PI * j / n_phi;
            g.vertices.push_back({x, y_c + r * std::cos(phi), z_c + r * std::sin(phi)});
        }
    }
    int cap_a = static_cast<int>(g.vertices.size());
    g.vertices.push_back({xa, y_c, z_c});
    int cap_b = static_cast<int>(g.vertices.size());
    g.vertices.push_back({xb, y_c, z_c});

    auto ring = [&](int i, int j) { return base + i * n_phi + (j % n_phi); };
    auto add_tri = [&](int a, int b, int c, const Vec3& outward, int electrode) {
        Vec3 n = cross(g.vertices[b] - g.vertices[a], g.vertices[c] - g.vertices[a]);
        if (dot(n, outward) < 0.0)
            g.triangles.push_back({a, c, b});
        else
            g.triangles.push_back({a, b, c});
        g.electrode_of.push_back(electrode);
    };

    for (int i = 0; i < nx; ++i)
        for (int j = 0; j < n_phi; ++j) {
            int a = ring(i, j), b = ring(i + 1, j), c = ring(i + 1, j + 1), d = ring(i, j + 1);
            double phi_m = 2.0 * M_PI * (j + 0.5) / n_phi;
            Vec3 outward{0.0, std::cos(phi_m), std::sin(phi_m)};
            add_tri(a, b, c, outward, electrode_at(i));
            add_tri(a, c, d, outward, electrode_at(i));
        }
    for (int j = 0; j < n_phi; ++j) {
        add_tri(cap_a, ring(0, j), ring(0, j + 1), Vec3{-1.0, 0.0, 0.0}, electrode_at(0));
        add_tri(cap_b, ring(nx, j), ring(nx, j + 1), Vec3{1.0, 0.0, 0.0}, electrode_at(nx - 1));
    }
}

void add_rod(ElectrodeGeometry& g, int electrode, double y_c, double z_c, double r, double xa,
             double xb, int n_phi, int nx) {
    add_rod(g, [electrode](int) { return electrode; }, y_c, z_c, r, xa, xb, n_phi, nx);
}

}  // namespace

ElectrodeGeometry make_linear_trap(const LinearTrapParams& p) {
    if (p.segments < 1 || p.n_phi < 3 || p.nx_segment < 1 || p.nx_rf < 1)
        throw ConfigError("make_linear_trap: bad mesh parameters");
    ElectrodeGeometry g;
    double d = p.axis_clearance + p.rod_radius;  // rod center distance from axis
    double length = p.segments * p.segment_width;
    double x_left = -0.5 * length;

    g.electrode_names.push_back("rf");
    for (int k = 0; k < p.segments; ++k) g.electrode_names.push_back("dc" + std::to_string(k + 1));

    // rf rods at y = +-d
    add_rod(g, 0, d, 0.0, p.rod_radius, x_left, x_left + length, p.n_phi, p.nx_rf);
    add_rod(g, 0, -d, 0.0, p.rod_radius, x_left, x_left + length, p.n_phi, p.nx_rf);
    // segmented dc rods at z = +-d: one closed cylinder each, with the
    // segment label assigned per axial band
    auto seg_of = [&](int band) { return 1 + band / p.nx_segment; };
    int nx_dc = p.segments * p.nx_segment;
    add_rod(g, seg_of, 0.0, d, p.rod_radius, x_left, x_left + length, p.n_phi, nx_dc);
    add_rod(g, seg_of, 0.0, -d, p.rod_radius, x_left, x_left + length, p.n_phi, nx_dc);
    g.finalize();
    return g;
}

LinearTrapParams refine(const LinearTrapParams& p) {
    LinearTrapParams r = p;
    r.nx_segment *= 2;
    r.nx_rf *= 2;
    return r;
}

}  // namespace iontrap
