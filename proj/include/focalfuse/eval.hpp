#pragma once

#include <functional>
#include <span>

#include "focalfuse/focal.hpp"
#include "focalfuse/rng.hpp"
#include "focalfuse/sdf.hpp"
#include "focalfuse/tetgrid.hpp"

namespace focalfuse {

struct PreservationReport {
    /// Vertex-sampled symmetric Hausdorff distance between the reference base
    /// surface and the base-labeled part of the edited mesh. Zero when the
    /// base surface passed through the edit untouched.
    double hausdorff_base = 0.0;
    /// Area fraction of editable faces lying more than two cell diagonals
    /// outside every region.
    double editable_outside_fraction = 0.0;
    /// Monte-Carlo volume where both fields are positive, relative to the
    /// editable part's volume.
    double overlap_volume_fraction = 0.0;
    uint64_t mc_samples = 0;
};

/// Requires provenance labels on the edited mesh.
PreservationReport eval_preservation(const TriMesh& base_surface, const TriMesh& edited,
                                     const TetGrid& grid, std::span<const FocalRegion> regions,
                                     Rng& rng, int mc_samples = 100000);

/// Volume of {a > 0 and b > 0} relative to {b > 0}, estimated with uniform
/// samples over the box.
double mc_overlap_fraction(const std::function<double(const Vec3&)>& field_a,
                           const std::function<double(const Vec3&)>& field_b, const Aabb& bounds,
                           int samples, Rng& rng);

/// Max over the vertices of `from` of the distance to `to`.
double directed_vertex_distance(const TriMesh& from, const MeshSdf& to);

}  // namespace focalfuse
