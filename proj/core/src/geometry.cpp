#include "tmsym/geometry.hpp"

#include "tmsym/error.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <set>
#include <unordered_map>

namespace tmsym {

namespace {

// sqrt(x^2 + y^2 + z^2) with a fixed summation order; the rotations used by
// the groups only permute and negate components, so this stays exact.
double norm3(const Eigen::Vector3d& v) {
    return std::sqrt(v.x() * v.x() + v.y() * v.y() + v.z() * v.z());
}

Eigen::Vector3d cross3(const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
    return {a.y() * b.z() - a.z() * b.y(), a.z() * b.x() - a.x() * b.z(), a.x() * b.y() - a.y() * b.x()};
}

double dot3(const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
    return a.x() * b.x() + a.y() * b.y() + a.z() * b.z();
}

Eigen::Vector3d normalized(const Eigen::Vector3d& v) {
    return v / norm3(v);
}

std::uint64_t edge_key(int i, int j) {
    if (i > j) std::swap(i, j);
    return (static_cast<std::uint64_t>(i) << 32) | static_cast<std::uint32_t>(j);
}

int wrap_index(int d, int n) {
    d %= n;
    if (d < 0) d += n;
    if (2 * d > n) d -= n;
    return d;
}

struct BaseSolid {
    std::vector<Eigen::Vector3d> vertices;
    std::vector<std::array<int, 3>> faces;
};

BaseSolid icosahedron() {
    const double p = (1.0 + std::sqrt(5.0)) / 2.0;
    BaseSolid s;
    s.vertices = {{-1, p, 0}, {1, p, 0}, {-1, -p, 0}, {1, -p, 0}, {0, -1, p}, {0, 1, p},
                  {0, -1, -p}, {0, 1, -p}, {p, 0, -1}, {p, 0, 1}, {-p, 0, -1}, {-p, 0, 1}};
    for (auto& v : s.vertices) v = normalized(v);
    s.faces = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
               {11, 10, 2}, {10, 7, 6}, {7, 1, 8},  {3, 9, 4},  {3, 4, 2},   {3, 2, 6}, {3, 6, 8},
               {3, 8, 9},  {4, 9, 5},  {2, 4, 11}, {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};
    return s;
}

BaseSolid octahedron() {
    BaseSolid s;
    s.vertices = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
    s.faces = {{0, 2, 4}, {2, 1, 4}, {1, 3, 4}, {3, 0, 4}, {2, 0, 5}, {1, 2, 5}, {3, 1, 5}, {0, 3, 5}};
    return s;
}

using PointMap = Eigen::Vector3d (*)(const Eigen::Vector3d&);

Eigen::Vector3d antipode(const Eigen::Vector3d& x) { return -x; }
Eigen::Vector3d rot_z_quarter(const Eigen::Vector3d& x) { return {-x.y(), x.x(), x.z()}; }
Eigen::Vector3d rot_z_half(const Eigen::Vector3d& x) { return {-x.x(), -x.y(), x.z()}; }
Eigen::Vector3d flip_x(const Eigen::Vector3d& x) { return {x.x(), -x.y(), -x.z()}; }

struct NamedMap {
    std::string name;
    PointMap map;
};

// Permutation induced by a point map, found by exact coordinate lookup.
std::vector<int> permutation_by_lookup(const std::vector<Eigen::Vector3d>& pts, PointMap f,
                                       const std::string& name, double tol) {
    std::map<std::array<long long, 3>, int> index;
    const double q = 1e9;
    auto key = [&](const Eigen::Vector3d& v) {
        return std::array<long long, 3>{std::llround(v.x() * q), std::llround(v.y() * q), std::llround(v.z() * q)};
    };
    for (int i = 0; i < static_cast<int>(pts.size()); ++i) index[key(pts[i])] = i;
    std::vector<int> perm(pts.size());
    for (int i = 0; i < static_cast<int>(pts.size()); ++i) {
        const Eigen::Vector3d img = f(pts[i]);
        auto it = index.find(key(img));
        if (it == index.end() || (pts[it->second] - img).norm() > tol)
            throw ConstructionError("generator '" + name + "' does not map the mesh onto itself (vertex " +
                                    std::to_string(i) + " has no image)");
        perm[i] = it->second;
    }
    return perm;
}

std::vector<NamedMap> generator_maps(const GroupSpec& g) {
    std::vector<NamedMap> out;
    auto rotation = [&](int m) {
        if (m == 1) return;
        if (m == 2) {
            out.push_back({"rotation_z(2)", rot_z_half});
        } else if (m == 4) {
            out.push_back({"rotation_z(4)", rot_z_quarter});
        } else {
            throw ConstructionError("generator 'rotation_z(" + std::to_string(m) +
                                    ")' is not a symmetry of the octahedral base mesh (m must divide 4)");
        }
    };
    switch (g.kind) {
        case GroupSpec::Kind::Trivial: break;
        case GroupSpec::Kind::Antipodal: out.push_back({"antipodal", antipode}); break;
        case GroupSpec::Kind::Cyclic: rotation(g.m); break;
        case GroupSpec::Kind::Dihedral:
            rotation(g.m);
            out.push_back({"flip_x", flip_x});
            break;
    }
    return out;
}

std::vector<int> compose(const std::vector<int>& p, const std::vector<int>& q) {
    std::vector<int> r(q.size());
    for (std::size_t i = 0; i < q.size(); ++i) r[i] = p[q[i]];
    return r;
}

}  // namespace

std::string to_string(SurfaceKind kind) {
    switch (kind) {
        case SurfaceKind::UnitSphere: return "unit-sphere";
        case SurfaceKind::FlatTorus: return "flat-torus";
        case SurfaceKind::Imported: return "imported";
    }
    return "imported";
}

GroupSpec GroupSpec::parse(const std::string& text) {
    GroupSpec g;
    std::string head = text;
    int m = 1;
    if (auto pos = text.find(':'); pos != std::string::npos) {
        head = text.substr(0, pos);
        try {
            m = std::stoi(text.substr(pos + 1));
        } catch (const std::exception&) {
            throw ConfigError("bad group order in '" + text + "'");
        }
        if (m < 1) throw ConfigError("group order must be positive in '" + text + "'");
    }
    if (head == "trivial") {
        g.kind = Kind::Trivial;
    } else if (head == "antipodal") {
        g.kind = Kind::Antipodal;
    } else if (head == "cyclic") {
        g.kind = Kind::Cyclic;
    } else if (head == "dihedral") {
        g.kind = Kind::Dihedral;
    } else {
        throw ConfigError("unknown group '" + text + "'");
    }
    g.m = m;
    return g;
}

std::string GroupSpec::name() const {
    switch (kind) {
        case Kind::Trivial: return "trivial";
        case Kind::Antipodal: return "antipodal";
        case Kind::Cyclic: return "cyclic:" + std::to_string(m);
        case Kind::Dihedral: return "dihedral:" + std::to_string(m);
    }
    return "trivial";
}

Eigen::Vector3d SurfaceMesh::edge_vector(int i, int j) const {
    if (kind == SurfaceKind::FlatTorus) {
        const int nx = torus.nx, ny = torus.ny;
        const int di = wrap_index(j % nx - i % nx, nx);
        const int dj = wrap_index(j / nx - i / nx, ny);
        return {di * (torus.a / nx), dj * (torus.b / ny), 0.0};
    }
    return vertices[j] - vertices[i];
}

double SurfaceMesh::distance(int i, int j) const {
    switch (kind) {
        case SurfaceKind::UnitSphere: {
            const Eigen::Vector3d& x = vertices[i];
            const Eigen::Vector3d& y = vertices[j];
            return std::atan2(norm3(cross3(x, y)), dot3(x, y));
        }
        case SurfaceKind::FlatTorus: return norm3(edge_vector(i, j));
        case SurfaceKind::Imported: break;
    }
    throw UnsupportedError("geodesic distance is not available on imported meshes");
}

double SurfaceMesh::distance_to_point(int i, const Eigen::Vector3d& p) const {
    switch (kind) {
        case SurfaceKind::UnitSphere: {
            const Eigen::Vector3d& x = vertices[i];
            return std::atan2(norm3(cross3(x, p)), dot3(x, p));
        }
        case SurfaceKind::FlatTorus: {
            const Eigen::Vector3d d = p - vertices[i];
            double best = std::numeric_limits<double>::infinity();
            for (int sx = -1; sx <= 1; ++sx)
                for (int sy = -1; sy <= 1; ++sy)
                    best = std::min(best, std::hypot(d.x() + sx * torus.a, d.y() + sy * torus.b));
            return best;
        }
        case SurfaceKind::Imported: break;
    }
    throw UnsupportedError("geodesic distance is not available on imported meshes");
}

double SurfaceMesh::mean_edge_length() const {
    double sum = 0.0;
    std::size_t count = 0;
    for (const auto& t : triangles) {
        for (int e = 0; e < 3; ++e) {
            sum += edge_vector(t[e], t[(e + 1) % 3]).norm();
            ++count;
        }
    }
    return count ? sum / static_cast<double>(count) : 0.0;
}

double SurfaceMesh::radius_cap() const {
    switch (kind) {
        case SurfaceKind::UnitSphere: return std::numbers::pi;
        case SurfaceKind::FlatTorus: return 0.5 * std::min(torus.a, torus.b);
        case SurfaceKind::Imported: break;
    }
    throw UnsupportedError("injectivity radius is not available on imported meshes");
}

void finalize_mesh(SurfaceMesh& mesh) {
    const int n = mesh.num_vertices();
    std::unordered_map<std::uint64_t, int> edge_count;
    edge_count.reserve(mesh.triangles.size() * 2);
    for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
        const auto& tri = mesh.triangles[t];
        for (int e = 0; e < 3; ++e) {
            const int i = tri[e], j = tri[(e + 1) % 3];
            if (i < 0 || i >= n || j < 0 || j >= n || i == j)
                throw ConstructionError("triangle " + std::to_string(t) + " has invalid vertex indices");
            ++edge_count[edge_key(i, j)];
        }
    }
    for (const auto& [key, count] : edge_count) {
        if (count != 2)
            throw ConstructionError("mesh is not closed: edge (" + std::to_string(key >> 32) + "," +
                                    std::to_string(key & 0xffffffffu) + ") is shared by " + std::to_string(count) +
                                    " triangles");
    }

    std::vector<std::vector<double>> thirds(n);
    for (const auto& tri : mesh.triangles) {
        const double a = mesh.edge_vector(tri[0], tri[1]).norm();
        const double b = mesh.edge_vector(tri[1], tri[2]).norm();
        const double c = mesh.edge_vector(tri[2], tri[0]).norm();
        std::array<double, 3> s{a, b, c};
        std::sort(s.begin(), s.end(), std::greater<>());
        // Kahan's stable Heron formula, sides sorted a >= b >= c.
        const double prod = (s[0] + (s[1] + s[2])) * (s[2] - (s[0] - s[1])) * (s[2] + (s[0] - s[1])) *
                            (s[0] + (s[1] - s[2]));
        const double area = 0.25 * std::sqrt(std::max(prod, 0.0));
        for (int v : tri) thirds[v].push_back(area / 3.0);
    }
    mesh.vertex_areas.resize(n);
    for (int v = 0; v < n; ++v) {
        std::sort(thirds[v].begin(), thirds[v].end());
        double s = 0.0;
        for (double x : thirds[v]) s += x;
        mesh.vertex_areas[v] = s;
    }
    mesh.total_area = mesh.vertex_areas.sum();
}

GroupAction make_group(const SurfaceMesh& mesh, const std::vector<std::vector<int>>& generators,
                       const std::vector<std::string>& names) {
    const int n = mesh.num_vertices();
    std::set<std::array<int, 3>> tri_set;
    for (auto t : mesh.triangles) {
        std::sort(t.begin(), t.end());
        tri_set.insert(t);
    }
    for (std::size_t g = 0; g < generators.size(); ++g) {
        const auto& p = generators[g];
        const std::string name = g < names.size() ? names[g] : "generator " + std::to_string(g);
        if (static_cast<int>(p.size()) != n) throw ConstructionError("generator '" + name + "' has wrong length");
        std::vector<char> seen(n, 0);
        for (int v : p) {
            if (v < 0 || v >= n || seen[v]) throw ConstructionError("generator '" + name + "' is not a bijection");
            seen[v] = 1;
        }
        for (const auto& t : mesh.triangles) {
            std::array<int, 3> img{p[t[0]], p[t[1]], p[t[2]]};
            std::sort(img.begin(), img.end());
            if (!tri_set.count(img))
                throw ConstructionError("generator '" + name + "' does not preserve the triangle set");
            if (mesh.kind != SurfaceKind::Imported) {
                for (int e = 0; e < 3; ++e) {
                    const int i = t[e], j = t[(e + 1) % 3];
                    if (mesh.edge_vector(i, j).squaredNorm() != mesh.edge_vector(p[i], p[j]).squaredNorm())
                        throw ConstructionError("generator '" + name + "' does not preserve edge lengths exactly");
                }
            }
        }
    }

    std::vector<int> id(n);
    for (int i = 0; i < n; ++i) id[i] = i;
    std::set<std::vector<int>> elems{id};
    std::vector<std::vector<int>> order{id};
    for (std::size_t head = 0; head < order.size(); ++head) {
        for (const auto& g : generators) {
            auto c = compose(g, order[head]);
            if (elems.insert(c).second) order.push_back(std::move(c));
        }
        if (order.size() > 4096) throw ConstructionError("group generated by the given permutations is too large");
    }

    GroupAction act;
    act.permutations = std::move(order);
    act.group_order = static_cast<int>(act.permutations.size());
    act.generators = names;
    act.orbit_size.assign(n, 0);
    std::vector<int> images;
    for (int v = 0; v < n; ++v) {
        images.clear();
        for (const auto& p : act.permutations) images.push_back(p[v]);
        std::sort(images.begin(), images.end());
        act.orbit_size[v] = static_cast<int>(std::unique(images.begin(), images.end()) - images.begin());
    }
    act.min_orbit = n ? *std::min_element(act.orbit_size.begin(), act.orbit_size.end()) : 1;
    return act;
}

std::pair<SurfaceMesh, GroupAction> build_sphere_mesh(int level, const GroupSpec& group) {
    if (level < 0) throw ConfigError("subdivision level must be non-negative");
    const bool axial = group.kind == GroupSpec::Kind::Cyclic || group.kind == GroupSpec::Kind::Dihedral;
    BaseSolid base = axial ? octahedron() : icosahedron();
    const auto maps = generator_maps(group);

    std::vector<Eigen::Vector3d> pts = base.vertices;
    std::vector<std::array<int, 3>> tris = base.faces;
    std::vector<std::vector<int>> perms;
    std::vector<std::string> names;
    for (const auto& m : maps) {
        perms.push_back(permutation_by_lookup(pts, m.map, m.name, 1e-12));
        names.push_back(m.name);
    }

    for (int l = 0; l < level; ++l) {
        std::unordered_map<std::uint64_t, int> mid;
        mid.reserve(tris.size() * 2);
        std::vector<std::array<int, 2>> new_edges;
        auto midpoint = [&](int i, int j) {
            auto [it, inserted] = mid.try_emplace(edge_key(i, j), static_cast<int>(pts.size()));
            if (inserted) {
                pts.push_back(normalized(pts[i] + pts[j]));
                new_edges.push_back({i, j});
            }
            return it->second;
        };
        std::vector<std::array<int, 3>> next;
        next.reserve(tris.size() * 4);
        for (const auto& t : tris) {
            const int a = t[0], b = t[1], c = t[2];
            const int ab = midpoint(a, b), bc = midpoint(b, c), ca = midpoint(c, a);
            next.push_back({a, ab, ca});
            next.push_back({ab, b, bc});
            next.push_back({ca, bc, c});
            next.push_back({ab, bc, ca});
        }
        const int old_n = static_cast<int>(pts.size() - new_edges.size());
        for (auto& p : perms) {
            p.resize(pts.size());
            for (std::size_t e = 0; e < new_edges.size(); ++e)
                p[old_n + e] = mid.at(edge_key(p[new_edges[e][0]], p[new_edges[e][1]]));
        }
        tris = std::move(next);
    }

    SurfaceMesh mesh;
    mesh.kind = SurfaceKind::UnitSphere;
    mesh.vertices = std::move(pts);
    mesh.triangles = std::move(tris);
    finalize_mesh(mesh);
    GroupAction act = make_group(mesh, perms, names);
    return {std::move(mesh), std::move(act)};
}

std::pair<SurfaceMesh, GroupAction> build_flat_torus_mesh(int nx, int ny, const std::vector<Shift>& translations,
                                                          double a, double b) {
    if (nx < 4 || ny < 4) throw ConfigError("torus grid must be at least 4x4");
    if (!(a > 0.0) || !(b > 0.0)) throw ConfigError("torus periods must be positive");
    SurfaceMesh mesh;
    mesh.kind = SurfaceKind::FlatTorus;
    mesh.torus = {nx, ny, a, b};
    mesh.vertices.reserve(static_cast<std::size_t>(nx) * ny);
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) mesh.vertices.emplace_back(i * (a / nx), j * (b / ny), 0.0);
    auto id = [&](int i, int j) { return ((j % ny + ny) % ny) * nx + ((i % nx + nx) % nx); };
    for (int j = 0; j < ny; ++j) {
        for (int i = 0; i < nx; ++i) {
            mesh.triangles.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
            mesh.triangles.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
        }
    }
    finalize_mesh(mesh);

    std::vector<std::vector<int>> perms;
    std::vector<std::string> names;
    for (const auto& s : translations) {
        const std::string name = "shift(" + std::to_string(s[0]) + "," + std::to_string(s[1]) + ")";
        const int sx = ((s[0] % nx) + nx) % nx, sy = ((s[1] % ny) + ny) % ny;
        if ((sx != 0 && nx % sx != 0) || (sy != 0 && ny % sy != 0))
            throw ConstructionError("translation '" + name + "' does not divide the " + std::to_string(nx) + "x" +
                                    std::to_string(ny) + " grid");
        std::vector<int> p(static_cast<std::size_t>(nx) * ny);
        for (int j = 0; j < ny; ++j)
            for (int i = 0; i < nx; ++i) p[id(i, j)] = id(i + sx, j + sy);
        perms.push_back(std::move(p));
        names.push_back(name);
    }
    GroupAction act = make_group(mesh, perms, names);
    return {std::move(mesh), std::move(act)};
}

GroupAction group_from_coordinates(const SurfaceMesh& mesh, const GroupSpec& group) {
    std::vector<std::vector<int>> perms;
    std::vector<std::string> names;
    for (const auto& m : generator_maps(group)) {
        perms.push_back(permutation_by_lookup(mesh.vertices, m.map, m.name, 1e-9));
        names.push_back(m.name);
    }
    return make_group(mesh, perms, names);
}

std::vector<int> orbit_of(const GroupAction& action, int v) {
    std::vector<int> o;
    o.reserve(action.permutations.size());
    for (const auto& p : action.permutations) o.push_back(p[v]);
    std::sort(o.begin(), o.end());
    o.erase(std::unique(o.begin(), o.end()), o.end());
    return o;
}

std::vector<std::vector<int>> orbits(const GroupAction& action) {
    const int n = static_cast<int>(action.orbit_size.size());
    std::vector<char> done(n, 0);
    std::vector<std::vector<int>> out;
    for (int v = 0; v < n; ++v) {
        if (done[v]) continue;
        auto o = orbit_of(action, v);
        for (int w : o) done[w] = 1;
        out.push_back(std::move(o));
    }
    return out;
}

OrbitStats orbit_stats(const GroupAction& action) {
    OrbitStats s;
    s.orbit_size = action.orbit_size;
    s.ell = action.min_orbit;
    for (auto& o : orbits(action))
        if (static_cast<int>(o.size()) == s.ell) s.minimal_orbits.push_back(std::move(o));
    return s;
}

GeodesicField geodesic_distance(const SurfaceMesh& mesh, int source) {
    if (source < 0 || source >= mesh.num_vertices())
        throw ConfigError("source vertex " + std::to_string(source) + " out of range");
    if (mesh.kind == SurfaceKind::Imported)
        throw UnsupportedError("geodesic distance is not available on imported meshes");
    GeodesicField f;
    f.source = source;
    f.distances.resize(mesh.num_vertices());
    for (int v = 0; v < mesh.num_vertices(); ++v) f.distances[v] = mesh.distance(source, v);
    return f;
}

std::uint64_t mesh_hash(const SurfaceMesh& mesh) {
    std::uint64_t h = 1469598103934665603ull;
    auto feed = [&](const void* data, std::size_t len) {
        const auto* p = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < len; ++i) {
            h ^= p[i];
            h *= 1099511628211ull;
        }
    };
    const int kind = static_cast<int>(mesh.kind);
    feed(&kind, sizeof kind);
    for (const auto& v : mesh.vertices) feed(v.data(), 3 * sizeof(double));
    for (const auto& t : mesh.triangles) feed(t.data(), 3 * sizeof(int));
    return h;
}

}  // namespace tmsym
