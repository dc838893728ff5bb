#pragma once

#include <memory>
#include <span>
#include <vector>

#include "focalfuse/math.hpp"
#include "focalfuse/rng.hpp"
#include "focalfuse/sdf.hpp"
#include "focalfuse/tetgrid.hpp"

namespace focalfuse {

/// Unit sphere triangulated by icosahedron subdivision.
TriMesh make_icosphere(int subdivisions, double radius = 1.0);

/// A user-declared edit region: a unit sphere deformed by rotate, then
/// stretch, then translate (9 degrees of freedom). Distances are measured
/// against the deformed boundary mesh; the inside test uses the exact sphere
/// preimage of the affine map.
class FocalRegion {
public:
    FocalRegion(const Vec3& stretch, const Vec3& rotation_rad, const Vec3& translation);

    const Vec3& stretch() const { return stretch_; }
    const Vec3& rotation() const { return rotation_; }
    const Vec3& translation() const { return translation_; }
    const Affine& transform() const { return transform_; }
    const TriMesh& boundary() const { return boundary_; }
    const MeshSdf& surface_sdf() const { return *surface_sdf_; }

    bool contains(const Vec3& p) const { return norm_sq(inverse_(p)) <= 1.0; }

    /// Inner-positive signed distance to the deformed boundary.
    double signed_distance(const Vec3& p) const {
        double d = surface_sdf_->unsigned_distance(p);
        return contains(p) ? d : -d;
    }

private:
    Vec3 stretch_, rotation_, translation_;
    Affine transform_, inverse_;
    TriMesh boundary_;
    std::shared_ptr<MeshSdf> surface_sdf_;
};

FocalRegion make_focal_region(const Vec3& stretch, const Vec3& rotation_rad,
                              const Vec3& translation);

/// Pointwise max over regions (inner-positive union); the fit target for the
/// editable field.
double region_union_sdf(std::span<const FocalRegion> regions, const Vec3& p);

struct InitParams {
    int iterations = 15000;
    int batch = 10240;
    double learning_rate = 0.05;
};

/// Fits edit_sdf to the region union by sampled least squares (adaptive
/// moment steps on the per-vertex values). Throws if any region lies wholly
/// outside the grid domain.
void init_editable_sdf(TetGrid& grid, std::span<const FocalRegion> regions,
                       const InitParams& params, Rng& rng);

/// Fills focal_dist with the distance to the nearest region boundary for
/// vertices outside every region; inside vertices get distance 0 and the
/// inside_region flag.
void precompute_outside_distances(TetGrid& grid, std::span<const FocalRegion> regions);

}  // namespace focalfuse
