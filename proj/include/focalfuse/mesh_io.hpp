#pragma once

#include <string>

#include "focalfuse/math.hpp"
#include "focalfuse/tetgrid.hpp"
#include "focalfuse/texture.hpp"

namespace focalfuse {

struct ImportedMesh {
    TriMesh mesh;
    int triangulated_faces = 0;  // non-triangle polygons fanned, with a warning
};

/// Wavefront OBJ triangle import. Polygons are fan-triangulated; normals and
/// UVs in the file are ignored (the pipeline regenerates both).
ImportedMesh import_mesh(const std::string& path);

/// Uniform scale + translation mapping a mesh into a centered cube.
struct NormalizationTransform {
    double scale = 1.0;
    Vec3 center{};  // original-space centroid of the bounding box

    Vec3 to_grid(const Vec3& p) const { return (p - center) * scale; }
    Vec3 to_world(const Vec3& p) const { return p / scale + center; }
};

/// Computes the transform that fits the mesh bounding box into
/// [-fit, fit]^3 of the grid cube and applies it in place.
NormalizationTransform normalize_into(TriMesh& mesh, double grid_half_extent, double fit);

struct ExportMaterials {
    const BakedMaps* base = nullptr;      // may be null: export without textures
    const BakedMaps* editable = nullptr;  // required when the mesh has editable faces
};

/// Writes mesh + UVs as OBJ with an MTL next to it; baked maps go to PNG
/// files in the same directory. Positions pass through the inverse
/// normalization. Throws on an empty mesh.
void export_mesh(const TriMesh& mesh, const ExportMaterials& materials,
                 const NormalizationTransform& transform, const std::string& directory,
                 const std::string& stem);

}  // namespace focalfuse
