#pragma once
#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "iontrap/vec3.hpp"

// Triangulated electrode surfaces for the boundary element solver, plus
// generators for the benchmark geometries (sphere, segmented linear trap).
namespace iontrap {

struct ElectrodeGeometry {
    std::vector<Vec3> vertices;                    // m
    std::vector<std::array<int, 3>> triangles;     // CCW seen from outside
    std::vector<int> electrode_of;                 // per triangle
    std::vector<std::string> electrode_names;

    // derived per triangle, filled by finalize()
    std::vector<Vec3> centroid;
    std::vector<Vec3> normal;  // unit, outward from the conductor
    std::vector<double> area;

    size_t element_count() const { return triangles.size(); }
    size_t electrode_count() const { return electrode_names.size(); }

    // computes centroids, outward normals (right-hand rule on the winding)
    // and areas; throws ConfigError on degenerate triangles or dangling
    // electrode labels
    void finalize();
};

// JSON document: {"vertices": [[x,y,z],...], "triangles": [[i,j,k],...],
// "electrodes": {"name": [triangle indices]}}, lengths in meters.
ElectrodeGeometry load_geometry(const std::filesystem::path& path);
void save_geometry(const ElectrodeGeometry& geom, const std::filesystem::path& path);

// icosahedron subdivided `subdivisions` times and projected onto the sphere;
// 20 * 4^subdivisions triangles, one electrode
ElectrodeGeometry make_icosphere(double radius, const Vec3& center, int subdivisions,
                                 const std::string& electrode = "sphere");

// Four-rod linear trap along x. Two rf rods (one electrode "rf") and two dc
// rods split into `segments` pieces; segment pair k on the two dc rods forms
// electrode "dc<k+1>". Rods are closed faceted cylinders with disk caps.
struct LinearTrapParams {
    int segments = 5;
    double segment_width = 2e-3;   // m
    double rod_radius = 0.5e-3;    // m
    double axis_clearance = 1.5e-3;  // m, electrode surface to trap axis
    int n_phi = 10;       // facets around each rod
    int nx_segment = 3;   // axial facets per dc segment
    int nx_rf = 15;       // axial facets along each rf rod
};

ElectrodeGeometry make_linear_trap(const LinearTrapParams& p);

// doubles the axial facet counts (element count roughly doubles)
LinearTrapParams refine(const LinearTrapParams& p);

}  // namespace iontrap
