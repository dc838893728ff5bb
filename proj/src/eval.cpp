#include "focalfuse/eval.hpp"

#include <algorithm>
#include <stdexcept>

namespace focalfuse {

double directed_vertex_distance(const TriMesh& from, const MeshSdf& to) {
    double worst = 0.0;
    for (const auto& p : from.positions) worst = std::max(worst, to.unsigned_distance(p));
    return worst;
}

double mc_overlap_fraction(const std::function<double(const Vec3&)>& field_a,
                           const std::function<double(const Vec3&)>& field_b, const Aabb& bounds,
                           int samples, Rng& rng) {
    long n_overlap = 0, n_b = 0;
    for (int i = 0; i < samples; ++i) {
        Vec3 p = rng.uniform_in_box(bounds);
        const bool in_b = field_b(p) > 0.0;
        if (!in_b) continue;
        ++n_b;
        if (field_a(p) > 0.0) ++n_overlap;
    }
    return n_b == 0 ? 0.0 : double(n_overlap) / double(n_b);
}

PreservationReport eval_preservation(const TriMesh& base_surface, const TriMesh& edited,
                                     const TetGrid& grid, std::span<const FocalRegion> regions,
                                     Rng& rng, int mc_samples) {
    if (!edited.has_provenance())
        throw std::invalid_argument("eval_preservation: edited mesh lacks provenance labels");

    PreservationReport report;
    report.mc_samples = uint64_t(mc_samples);

    // Split the edited mesh by label.
    TriMesh base_part;
    base_part.positions = edited.positions;
    double editable_area = 0.0, outside_area = 0.0;
    const double threshold = 2.0 * grid.cell_diagonal();
    for (size_t f = 0; f < edited.faces.size(); ++f) {
        if (edited.face_part[f] == Part::Base) {
            base_part.faces.push_back(edited.faces[f]);
        } else {
            const double area = edited.face_area(int(f));
            editable_area += area;
            const Vec3 c = edited.face_centroid(int(f));
            double sd = region_union_sdf(regions, c);
            if (sd < -threshold) outside_area += area;
        }
    }
    report.editable_outside_fraction = editable_area > 0.0 ? outside_area / editable_area : 0.0;

    if (base_part.faces.empty()) {
        // Everything was consumed by the edit; the base surface is gone.
        report.hausdorff_base = std::numeric_limits<double>::infinity();
    } else {
        MeshSdf base_part_sdf(base_part);
        MeshSdf reference_sdf(base_surface);
        double a = directed_vertex_distance(base_surface, base_part_sdf);
        // Only base-labeled vertices participate in the reverse direction.
        std::vector<uint8_t> on_base(edited.positions.size(), 0);
        for (size_t f = 0; f < edited.faces.size(); ++f)
            if (edited.face_part[f] == Part::Base)
                for (int v : edited.faces[f]) on_base[v] = 1;
        double b = 0.0;
        for (size_t v = 0; v < edited.positions.size(); ++v)
            if (on_base[v]) b = std::max(b, reference_sdf.unsigned_distance(edited.positions[v]));
        report.hausdorff_base = std::max(a, b);
    }

    report.overlap_volume_fraction = mc_overlap_fraction(
        [&](const Vec3& p) { return grid.interpolate(grid.base_sdf, p); },
        [&](const Vec3& p) { return grid.interpolate(grid.edit_sdf, p); }, grid.domain, mc_samples,
        rng);
    return report;
}

}  // namespace focalfuse
