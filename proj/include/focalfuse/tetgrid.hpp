#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "focalfuse/math.hpp"

namespace focalfuse {

enum class Part : uint8_t { Base = 0, Editable = 1 };

/// Provenance of an extracted vertex: the lattice edge it lives on and the
/// two scalar values that placed it there. Gradients of the crossing position
/// with respect to those values route through mt_vertex_gradient.
struct CrossingInfo {
    int parent_a = -1;
    int parent_b = -1;
    double value_a = 0.0;
    double value_b = 0.0;
};

struct TriMesh {
    std::vector<Vec3> positions;
    std::vector<std::array<int, 3>> faces;  // CCW seen from outside
    std::vector<Part> face_part;
    std::vector<CrossingInfo> crossings;  // per vertex; empty for imported meshes
    std::vector<int> face_texture;        // texture slot per face; empty = single slot

    bool empty() const { return faces.empty(); }
    bool has_provenance() const { return face_part.size() == faces.size(); }
    Vec3 face_normal(int f) const;
    Vec3 face_centroid(int f) const;
    double face_area(int f) const;
    double total_area() const;
    Aabb bounds() const;
};

/// Regular lattice of cube cells split into 6 tetrahedra each. Positions are
/// fixed at construction; deformation happens through `offsets`. `base_sdf`
/// is frozen after the session seeds it; `edit_sdf` and `offsets` are the
/// learnable blocks. Inner-positive sign convention throughout.
class TetGrid {
public:
    TetGrid() = default;

    std::array<int, 3> resolution{0, 0, 0};  // cells per axis
    Aabb domain;
    std::vector<Vec3> vertices;
    std::vector<std::array<int, 4>> tets;  // positive signed volume ordering
    std::vector<double> base_sdf;
    std::vector<double> edit_sdf;
    std::vector<Vec3> offsets;
    std::vector<double> focal_dist;       // >= 0; 0 for vertices inside a region
    std::vector<uint8_t> inside_region;   // excluded from the focal loss sample set

    size_t vertex_count() const { return vertices.size(); }
    size_t tet_count() const { return tets.size(); }

    int vertex_index(int i, int j, int k) const {
        return (k * (resolution[1] + 1) + j) * (resolution[0] + 1) + i;
    }

    Vec3 cell_spacing() const;
    double min_edge_length() const;  // min axis spacing; every lattice vertex touches one
    double cell_diagonal() const;

    Vec3 deformed_position(int v) const { return vertices[v] + offsets[v]; }

    double tet_signed_volume(int t) const;

    /// Trilinear interpolation of a per-vertex field at an arbitrary point
    /// (undeformed lattice coordinates; p is clamped to the domain).
    double interpolate(std::span<const double> field, const Vec3& p) const;

    /// Corner indices and weights used by interpolate(), for gradient
    /// accumulation into the field.
    void interpolation_stencil(const Vec3& p, std::array<int, 8>& idx,
                               std::array<double, 8>& w) const;
};

/// resolution: cells per axis, each >= 1 and the lattice must have >= 2
/// vertices per axis overall; bounds must be non-degenerate.
TetGrid build_grid(const std::array<int, 3>& resolution, const Aabb& bounds);

/// Extracts the zero level set of `field` over the deformed grid. Faces are
/// wound so normals point toward negative field values (outside). Exact zeros
/// in the field are nudged by +1e-12 before classification.
TriMesh marching_tetrahedra(const TetGrid& grid, std::span<const double> field, Part label);

struct MtVertexGradient {
    double d_value_a = 0.0;
    double d_value_b = 0.0;
};

/// Chain rule through the crossing position x = a + s_a/(s_a - s_b) * (b - a)
/// for a sign-changing edge (s_a * s_b < 0).
MtVertexGradient mt_vertex_gradient(const Vec3& a, const Vec3& b, double s_a, double s_b,
                                    const Vec3& upstream);

/// Interpolation weights of the crossing position in the edge endpoints:
/// x = (1 - t) * a + t * b. Used to push position gradients into offsets.
double mt_crossing_parameter(double s_a, double s_b);

/// Zeroes offsets at vertices far outside the editable part
/// (edit_sdf < -margin). Returns the keep-mask.
std::vector<uint8_t> apply_offset_mask(TetGrid& grid, double margin);

/// Clamps offset magnitudes to half the minimum incident edge length, then
/// shrinks offsets of any tetrahedron that still inverts until all signed
/// volumes are positive.
void clamp_offsets(TetGrid& grid);

void save_grid_snapshot(const TetGrid& grid, const std::string& path);
TetGrid load_grid_snapshot(const std::string& path);

}  // namespace focalfuse
