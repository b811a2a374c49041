#include "forge/mesh_io.hpp"

#include <sstream>
#include <vector>

#include "forge/body_io.hpp"
#include "text_util.hpp"

namespace forge {

std::string write_obj(const ObjMesh& mesh, const std::string& material_lib, const std::string& material) {
    std::string out;
    if (!material_lib.empty()) out += "mtllib " + material_lib + "\n";
    for (Eigen::Index i = 0; i < mesh.vertices.rows(); ++i)
        out += "v " + text::format_double(mesh.vertices(i, 0)) + " " + text::format_double(mesh.vertices(i, 1)) + " " +
               text::format_double(mesh.vertices(i, 2)) + "\n";
    for (Eigen::Index i = 0; i < mesh.uvs.rows(); ++i)
        out += "vt " + text::format_double(mesh.uvs(i, 0)) + " " + text::format_double(mesh.uvs(i, 1)) + "\n";
    if (!material.empty()) out += "usemtl " + material + "\n";
    const bool uv = mesh.uvs.rows() == mesh.vertices.rows() && mesh.uvs.rows() > 0;
    for (Eigen::Index f = 0; f < mesh.faces.rows(); ++f) {
        out += "f";
        for (int k = 0; k < 3; ++k) {
            const std::string idx = std::to_string(mesh.faces(f, k) + 1);
            out += " " + idx + (uv ? "/" + idx : "");
        }
        out += "\n";
    }
    return out;
}

ObjMesh parse_obj(const std::string& content, const std::string& source) {
    text::LineReader reader(content, source);
    std::vector<Vector3d> verts;
    std::vector<Vector2d> tex;
    std::vector<std::array<int, 3>> faces;
    std::vector<std::array<int, 3>> face_uv;
    std::vector<std::string> face_where;
    std::string_view line;
    auto fail = [&](const std::string& msg) -> ParseError { return ParseError(reader.where() + ": " + msg); };
    while (reader.next(line)) {
        const auto tok = text::split_ws(line);
        if (tok[0] == "v" || tok[0] == "vt") {
            const std::size_t n = tok[0] == "v" ? 3 : 2;
            if (tok.size() < n + 1) throw fail(std::string(tok[0]) + ": expected " + std::to_string(n) + " values");
            double x[3] = {0, 0, 0};
            for (std::size_t i = 0; i < n; ++i)
                if (!text::parse_double(tok[i + 1], x[i]))
                    throw fail(std::string(tok[0]) + ": field " + std::to_string(i + 1) + " '" + std::string(tok[i + 1]) +
                               "' is not a number");
            if (n == 3)
                verts.emplace_back(x[0], x[1], x[2]);
            else
                tex.emplace_back(x[0], x[1]);
        } else if (tok[0] == "f") {
            if (tok.size() != 4) throw fail("f: only triangles are supported");
            std::array<int, 3> fv{}, ft{-1, -1, -1};
            for (int k = 0; k < 3; ++k) {
                const std::string_view t = tok[static_cast<std::size_t>(k) + 1];
                const auto slash = t.find('/');
                if (!text::parse_int(t.substr(0, slash), fv[k])) throw fail("f: bad vertex index '" + std::string(t) + "'");
                fv[k] -= 1;
                if (slash != std::string_view::npos) {
                    std::string_view rest = t.substr(slash + 1);
                    rest = rest.substr(0, rest.find('/'));
                    if (!rest.empty()) {
                        if (!text::parse_int(rest, ft[k])) throw fail("f: bad uv index '" + std::string(t) + "'");
                        ft[k] -= 1;
                    }
                }
            }
            faces.push_back(fv);
            face_uv.push_back(ft);
            face_where.push_back(reader.where());
        }
    }
    ObjMesh mesh;
    const auto n = static_cast<Eigen::Index>(verts.size());
    mesh.vertices.resize(n, 3);
    for (Eigen::Index i = 0; i < n; ++i) mesh.vertices.row(i) = verts[static_cast<std::size_t>(i)].transpose();
    mesh.faces.resize(static_cast<Eigen::Index>(faces.size()), 3);
    std::vector<int> uv_of(verts.size(), -1);
    for (std::size_t f = 0; f < faces.size(); ++f) {
        for (int k = 0; k < 3; ++k) {
            const int v = faces[f][k];
            if (v < 0 || v >= n) throw ParseError(face_where[f] + ": f: vertex index " + std::to_string(v + 1) + " out of range");
            mesh.faces(static_cast<Eigen::Index>(f), k) = v;
            const int t = face_uv[f][k];
            if (t < 0) continue;
            if (t >= static_cast<int>(tex.size()))
                throw ParseError(face_where[f] + ": f: uv index " + std::to_string(t + 1) + " out of range");
            if (uv_of[v] >= 0 && tex[static_cast<std::size_t>(uv_of[v])] != tex[static_cast<std::size_t>(t)])
                throw ParseError(face_where[f] + ": vertex " + std::to_string(v + 1) + " has more than one uv");
            uv_of[v] = t;
        }
    }
    if (!tex.empty()) {
        mesh.uvs = UVs::Zero(n, 2);
        for (Eigen::Index i = 0; i < n; ++i)
            if (uv_of[i] >= 0) mesh.uvs.row(i) = tex[static_cast<std::size_t>(uv_of[i])].transpose();
    }
    return mesh;
}

ObjMesh load_obj(const std::filesystem::path& path) {
    return parse_obj(read_text_file(path), path.string());
}

}  // namespace forge
