#include "focalfuse/mesh_io.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "focalfuse/image.hpp"

namespace focalfuse {

ImportedMesh import_mesh(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("import_mesh: cannot open " + path);
    ImportedMesh out;
    std::string line;
    int line_no = 0;
    std::vector<int> poly;
    while (std::getline(f, line)) {
        ++line_no;
        std::istringstream ss(line);
        std::string tag;
        ss >> tag;
        if (tag == "v") {
            Vec3 p;
            if (!(ss >> p.x >> p.y >> p.z))
                throw std::runtime_error("import_mesh: bad vertex at " + path + ":" +
                                         std::to_string(line_no));
            out.mesh.positions.push_back(p);
        } else if (tag == "f") {
            poly.clear();
            std::string corner;
            while (ss >> corner) {
                // "v", "v/vt", "v//vn", "v/vt/vn" — only the position index matters.
                int v = std::atoi(corner.c_str());
                if (v == 0)
                    throw std::runtime_error("import_mesh: bad face at " + path + ":" +
                                             std::to_string(line_no));
                if (v < 0) v = int(out.mesh.positions.size()) + v + 1;
                poly.push_back(v - 1);
            }
            if (poly.size() < 3)
                throw std::runtime_error("import_mesh: face with <3 corners at " + path + ":" +
                                         std::to_string(line_no));
            for (int i : poly)
                if (i < 0 || i >= int(out.mesh.positions.size()))
                    throw std::runtime_error("import_mesh: face index out of range at " + path +
                                             ":" + std::to_string(line_no));
            if (poly.size() > 3) ++out.triangulated_faces;
            for (size_t i = 1; i + 1 < poly.size(); ++i)
                out.mesh.faces.push_back({poly[0], int(poly[i]), int(poly[i + 1])});
        }
        // Other tags (vn, vt, mtllib, o, g, s, #) are skipped.
    }
    if (out.mesh.positions.empty() || out.mesh.faces.empty())
        throw std::runtime_error("import_mesh: no triangles in " + path);
    out.mesh.face_part.assign(out.mesh.faces.size(), Part::Base);
    return out;
}

NormalizationTransform normalize_into(TriMesh& mesh, double grid_half_extent, double fit) {
    Aabb box = mesh.bounds();
    NormalizationTransform t;
    t.center = box.center();
    Vec3 half = box.extent() * 0.5;
    double max_half = std::max({half.x, half.y, half.z});
    if (max_half <= 0.0) throw std::runtime_error("normalize_into: degenerate mesh extent");
    t.scale = grid_half_extent * fit / max_half;
    for (auto& p : mesh.positions) p = t.to_grid(p);
    return t;
}

namespace {

void write_mtl(const std::string& path, const std::string& stem, bool has_base, bool has_edit) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("export_mesh: cannot open " + path);
    auto block = [&](const std::string& name, const std::string& suffix) {
        f << "newmtl " << name << "\n";
        f << "Kd 1 1 1\n";
        f << "map_Kd " << stem << "_" << suffix << "_kd.png\n";
        f << "map_Pr " << stem << "_" << suffix << "_rm.png\n";
        f << "map_Pm " << stem << "_" << suffix << "_rm.png\n";
        f << "norm " << stem << "_" << suffix << "_n.png\n";
    };
    if (has_base) block("part_base", "base");
    if (has_edit) block("part_edit", "edit");
    if (!has_base && !has_edit) f << "newmtl default\nKd 0.8 0.8 0.8\n";
}

void write_maps(const BakedMaps& maps, const std::string& dir, const std::string& stem,
                const std::string& suffix) {
    write_png(dir + "/" + stem + "_" + suffix + "_kd.png", maps.diffuse, /*srgb=*/true);
    write_png(dir + "/" + stem + "_" + suffix + "_rm.png", maps.roughness_metalness,
              /*srgb=*/false);
    write_png(dir + "/" + stem + "_" + suffix + "_n.png", maps.normal, /*srgb=*/false);
}

}  // namespace

void export_mesh(const TriMesh& mesh, const ExportMaterials& materials,
                 const NormalizationTransform& transform, const std::string& directory,
                 const std::string& stem) {
    if (mesh.positions.empty() || mesh.faces.empty())
        throw std::invalid_argument("export_mesh: empty mesh");
    std::filesystem::create_directories(directory);

    const bool textured = materials.base != nullptr;
    bool any_edit = false;
    if (mesh.has_provenance())
        for (Part p : mesh.face_part) any_edit |= (p == Part::Editable);
    if (any_edit && textured && materials.editable == nullptr)
        throw std::invalid_argument("export_mesh: editable faces present but no editable maps");

    const std::string obj_path = directory + "/" + stem + ".obj";
    std::ofstream f(obj_path);
    if (!f) throw std::runtime_error("export_mesh: cannot open " + obj_path);
    char buf[256];
    f << "mtllib " << stem << ".mtl\n";
    for (const auto& p : mesh.positions) {
        Vec3 w = transform.to_world(p);
        std::snprintf(buf, sizeof buf, "v %.9g %.9g %.9g\n", w.x, w.y, w.z);
        f << buf;
    }

    auto face_uv = [&](const BakedMaps* maps, int face, int corner, double& u, double& v) {
        const auto& uv = maps->face_uvs[face];
        u = uv[corner * 2];
        v = 1.0 - uv[corner * 2 + 1];  // image rows grow downward; vt grows upward
    };

    if (textured) {
        // One vt triple per face corner, base part first then editable.
        for (int pass = 0; pass < 2; ++pass) {
            const BakedMaps* maps = pass == 0 ? materials.base : materials.editable;
            if (!maps) continue;
            for (int face = 0; face < int(mesh.faces.size()); ++face) {
                bool editable = mesh.has_provenance() && mesh.face_part[face] == Part::Editable;
                if (editable != (pass == 1)) continue;
                for (int corner = 0; corner < 3; ++corner) {
                    double u, v;
                    face_uv(maps, face, corner, u, v);
                    std::snprintf(buf, sizeof buf, "vt %.9g %.9g\n", u, v);
                    f << buf;
                }
            }
        }
    }

    int vt_index = 1;
    for (int pass = 0; pass < 2; ++pass) {
        bool wrote_usemtl = false;
        for (int face = 0; face < int(mesh.faces.size()); ++face) {
            bool editable = mesh.has_provenance() && mesh.face_part[face] == Part::Editable;
            if (editable != (pass == 1)) continue;
            if (!wrote_usemtl) {
                f << "usemtl " << (pass == 1 ? "part_edit" : "part_base") << "\n";
                wrote_usemtl = true;
            }
            const auto& t = mesh.faces[face];
            if (textured) {
                f << "f " << t[0] + 1 << "/" << vt_index << " " << t[1] + 1 << "/" << vt_index + 1
                  << " " << t[2] + 1 << "/" << vt_index + 2 << "\n";
                vt_index += 3;
            } else {
                f << "f " << t[0] + 1 << " " << t[1] + 1 << " " << t[2] + 1 << "\n";
            }
        }
    }
    if (!f) throw std::runtime_error("export_mesh: write failed for " + obj_path);
    f.close();

    write_mtl(directory + "/" + stem + ".mtl", stem, materials.base != nullptr,
              materials.editable != nullptr && any_edit);
    if (materials.base) write_maps(*materials.base, directory, stem, "base");
    if (materials.editable && any_edit) write_maps(*materials.editable, directory, stem, "edit");
}

}  // namespace focalfuse
