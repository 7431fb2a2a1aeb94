#include "tmsym/error.hpp"
#include "tmsym/geometry.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>

namespace tmsym {

// OFF with an optional "# tmsym surface ..." comment carrying the metric tag.
void write_off(const SurfaceMesh& mesh, std::ostream& out) {
    out << "OFF\n";
    if (mesh.kind == SurfaceKind::UnitSphere) {
        out << "# tmsym surface unit-sphere\n";
    } else if (mesh.kind == SurfaceKind::FlatTorus) {
        out << "# tmsym surface flat-torus " << mesh.torus.nx << ' ' << mesh.torus.ny << ' '
            << std::setprecision(17) << mesh.torus.a << ' ' << mesh.torus.b << '\n';
    }
    out << mesh.num_vertices() << ' ' << mesh.num_triangles() << " 0\n";
    out << std::setprecision(17);
    for (const auto& v : mesh.vertices) out << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
    for (const auto& t : mesh.triangles) out << "3 " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
}

SurfaceMesh read_off(std::istream& in) {
    SurfaceMesh mesh;
    std::string line;
    auto next_line = [&](bool keep_comments) {
        while (std::getline(in, line)) {
            auto first = line.find_first_not_of(" \t\r");
            if (first == std::string::npos) continue;
            if (line[first] == '#') {
                if (keep_comments) return true;
                continue;
            }
            return true;
        }
        return false;
    };
    if (!next_line(false) || line.rfind("OFF", 0) != 0) throw ConfigError("OFF header missing");

    int nv = -1, nf = -1;
    while (next_line(true)) {
        std::istringstream ls(line);
        std::string hash;
        if (line.find('#') != std::string::npos) {
            std::string tag, what, kind;
            ls >> hash >> tag >> what >> kind;
            if (tag == "tmsym" && what == "surface") {
                if (kind == "unit-sphere") {
                    mesh.kind = SurfaceKind::UnitSphere;
                } else if (kind == "flat-torus") {
                    mesh.kind = SurfaceKind::FlatTorus;
                    ls >> mesh.torus.nx >> mesh.torus.ny >> mesh.torus.a >> mesh.torus.b;
                    if (!ls) throw ConfigError("malformed flat-torus tag in OFF file");
                }
            }
            continue;
        }
        int ne = 0;
        ls >> nv >> nf >> ne;
        if (!ls || nv < 0 || nf < 0) throw ConfigError("malformed OFF counts line");
        break;
    }
    if (nv < 0) throw ConfigError("OFF counts line missing");
    mesh.vertices.resize(nv);
    for (int i = 0; i < nv; ++i) {
        if (!next_line(false)) throw ConfigError("OFF file truncated in vertex block");
        std::istringstream ls(line);
        double x, y, z;
        if (!(ls >> x >> y >> z)) throw ConfigError("malformed OFF vertex line " + std::to_string(i));
        mesh.vertices[i] = {x, y, z};
    }
    mesh.triangles.resize(nf);
    for (int f = 0; f < nf; ++f) {
        if (!next_line(false)) throw ConfigError("OFF file truncated in face block");
        std::istringstream ls(line);
        int k, a, b, c;
        if (!(ls >> k >> a >> b >> c) || k != 3) throw ConfigError("face " + std::to_string(f) + " is not a triangle");
        mesh.triangles[f] = {a, b, c};
    }
    if (mesh.kind == SurfaceKind::FlatTorus) {
        const auto& t = mesh.torus;
        if (t.nx * t.ny != nv) throw ConfigError("flat-torus tag does not match the vertex count");
        for (int v = 0; v < nv; ++v) {
            const double ex = (v % t.nx) * (t.a / t.nx), ey = (v / t.nx) * (t.b / t.ny);
            if (std::abs(mesh.vertices[v].x() - ex) > 1e-9 || std::abs(mesh.vertices[v].y() - ey) > 1e-9)
                throw ConfigError("flat-torus vertex " + std::to_string(v) + " is off the grid");
            mesh.vertices[v] = {ex, ey, 0.0};
        }
    }
    finalize_mesh(mesh);
    return mesh;
}

std::string group_to_json(const GroupAction& action) {
    nlohmann::ordered_json j;
    j["group_order"] = action.group_order;
    j["min_orbit"] = action.min_orbit;
    j["generators"] = action.generators;
    j["permutations"] = action.permutations;
    return j.dump();
}

GroupAction group_from_json(const SurfaceMesh& mesh, const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("group JSON: ") + e.what());
    }
    if (!j.contains("permutations") || !j["permutations"].is_array())
        throw ConfigError("group JSON has no 'permutations' array");
    std::vector<std::vector<int>> perms = j["permutations"].get<std::vector<std::vector<int>>>();
    std::vector<std::string> names;
    for (std::size_t i = 0; i < perms.size(); ++i) names.push_back("element " + std::to_string(i));
    return make_group(mesh, perms, names);
}

}  // namespace tmsym
