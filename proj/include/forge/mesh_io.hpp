#pragma once

#include <filesystem>
#include <string>

#include "forge/types.hpp"

namespace forge {

/// Triangle mesh with one uv per vertex.
struct ObjMesh {
    Points vertices;
    UVs uvs;
    Faces faces;
};

/// Wavefront OBJ text: `v`, `vt` (one per vertex, same index) and `f v/vt`.
/// `material_lib` and `material` emit mtllib / usemtl lines when non-empty.
std::string write_obj(const ObjMesh& mesh, const std::string& material_lib = {}, const std::string& material = {});
/// Reads v, vt and triangular f records; other records are ignored. Faces
/// whose vt index differs from the v index must agree on a single uv per
/// vertex. Throws ParseError.
ObjMesh parse_obj(const std::string& content, const std::string& source = "<memory>");
ObjMesh load_obj(const std::filesystem::path& path);

}  // namespace forge
