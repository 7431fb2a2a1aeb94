/**
 * @file geometry.hpp
 * @brief Equivariant meshes of the unit sphere and flat tori, with the
 *        isometry group stored as exact vertex permutations.
 */
#pragma once

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace tmsym {

enum class SurfaceKind { UnitSphere, FlatTorus, Imported };

std::string to_string(SurfaceKind kind);

struct TorusShape {
    int nx = 0;
    int ny = 0;
    double a = 1.0;  // period in x
    double b = 1.0;  // period in y
};

struct SurfaceMesh {
    std::vector<Eigen::Vector3d> vertices;
    std::vector<std::array<int, 3>> triangles;
    Eigen::VectorXd vertex_areas;
    double total_area = 0.0;
    SurfaceKind kind = SurfaceKind::Imported;
    TorusShape torus;  // meaningful only for FlatTorus; vertex index = j*nx + i

    int num_vertices() const { return static_cast<int>(vertices.size()); }
    int num_triangles() const { return static_cast<int>(triangles.size()); }

    // Vector from vertex i to vertex j; on the torus the shortest lattice image,
    // computed from grid indices so that translations act exactly.
    Eigen::Vector3d edge_vector(int i, int j) const;

    // Closed-form geodesic distance between vertices. Throws UnsupportedError
    // on imported meshes.
    double distance(int i, int j) const;

    // Geodesic distance from vertex i to an arbitrary point of the surface
    // (unit vector on the sphere, (x, y, 0) on the torus).
    double distance_to_point(int i, const Eigen::Vector3d& p) const;

    double mean_edge_length() const;

    // Injectivity radius: pi on the sphere, half the shortest period on the
    // torus. Radii handed to constructions are validated against it.
    double radius_cap() const;
};

struct GroupAction {
    // permutations[0] is the identity; the set is closed under composition.
    std::vector<std::vector<int>> permutations;
    int group_order = 1;
    std::vector<int> orbit_size;
    int min_orbit = 1;
    std::vector<std::string> generators;
};

struct OrbitStats {
    std::vector<int> orbit_size;
    int ell = 1;
    std::vector<std::vector<int>> minimal_orbits;  // sorted members, sorted by first member
};

struct GeodesicField {
    int source = 0;
    Eigen::VectorXd distances;
};

struct GroupSpec {
    enum class Kind { Trivial, Antipodal, Cyclic, Dihedral };
    Kind kind = Kind::Trivial;
    int m = 1;

    static GroupSpec parse(const std::string& text);  // "antipodal", "cyclic:4", ...
    std::string name() const;
};

using Shift = std::array<int, 2>;

// Icosahedral base for trivial/antipodal groups, octahedral base for
// cyclic/dihedral groups about the z axis (m must divide 4).
std::pair<SurfaceMesh, GroupAction> build_sphere_mesh(int subdivision_level, const GroupSpec& group);

std::pair<SurfaceMesh, GroupAction> build_flat_torus_mesh(int nx, int ny, const std::vector<Shift>& translations,
                                                          double a = 1.0, double b = 1.0);

// Closes the generators under composition and checks that every element maps
// triangles to triangles and preserves edge lengths exactly.
GroupAction make_group(const SurfaceMesh& mesh, const std::vector<std::vector<int>>& generators,
                       const std::vector<std::string>& names);

// Recovers generator permutations of an already built mesh by coordinate
// matching (used for imported OFF meshes).
GroupAction group_from_coordinates(const SurfaceMesh& mesh, const GroupSpec& group);

OrbitStats orbit_stats(const GroupAction& action);

// All orbits, each sorted, listed by smallest member.
std::vector<std::vector<int>> orbits(const GroupAction& action);

// The orbit {sigma(v)} of one vertex, sorted.
std::vector<int> orbit_of(const GroupAction& action, int v);

GeodesicField geodesic_distance(const SurfaceMesh& mesh, int source);

// Recomputes lumped areas and validates closedness.
void finalize_mesh(SurfaceMesh& mesh);

void write_off(const SurfaceMesh& mesh, std::ostream& out);
SurfaceMesh read_off(std::istream& in);

std::string group_to_json(const GroupAction& action);
GroupAction group_from_json(const SurfaceMesh& mesh, const std::string& text);

// FNV-1a over coordinates and connectivity.
std::uint64_t mesh_hash(const SurfaceMesh& mesh);

}  // namespace tmsym
