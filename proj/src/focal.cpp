#include "focalfuse/focal.hpp"

#include <cmath>
#include <map>
#include <stdexcept>

namespace focalfuse {

TriMesh make_icosphere(int subdivisions, double radius) {
    const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
    TriMesh mesh;
    mesh.positions = {{-1, phi, 0}, {1, phi, 0},   {-1, -phi, 0}, {1, -phi, 0},
                      {0, -1, phi}, {0, 1, phi},   {0, -1, -phi}, {0, 1, -phi},
                      {phi, 0, -1}, {phi, 0, 1},   {-phi, 0, -1}, {-phi, 0, 1}};
    mesh.faces = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
                  {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
                  {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
                  {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
    for (auto& p : mesh.positions) p = normalized(p);

    for (int s = 0; s < subdivisions; ++s) {
        std::map<std::pair<int, int>, int> midpoint;
        auto mid = [&](int a, int b) {
            std::pair<int, int> key{std::min(a, b), std::max(a, b)};
            auto it = midpoint.find(key);
            if (it != midpoint.end()) return it->second;
            int idx = int(mesh.positions.size());
            mesh.positions.push_back(normalized((mesh.positions[a] + mesh.positions[b]) * 0.5));
            midpoint.emplace(key, idx);
            return idx;
        };
        std::vector<std::array<int, 3>> faces;
        faces.reserve(mesh.faces.size() * 4);
        for (const auto& f : mesh.faces) {
            int ab = mid(f[0], f[1]), bc = mid(f[1], f[2]), ca = mid(f[2], f[0]);
            faces.push_back({f[0], ab, ca});
            faces.push_back({f[1], bc, ab});
            faces.push_back({f[2], ca, bc});
            faces.push_back({ab, bc, ca});
        }
        mesh.faces = std::move(faces);
    }
    if (radius != 1.0)
        for (auto& p : mesh.positions) p *= radius;
    mesh.face_part.assign(mesh.faces.size(), Part::Base);
    return mesh;
}

FocalRegion::FocalRegion(const Vec3& stretch, const Vec3& rotation_rad, const Vec3& translation)
    : stretch_(stretch), rotation_(rotation_rad), translation_(translation) {
    if (stretch.x <= 0.0 || stretch.y <= 0.0 || stretch.z <= 0.0)
        throw std::invalid_argument("focal region: stretch components must be positive");
    // Point map: rotate, then stretch, then translate.
    transform_.linear = Mat3::diagonal(stretch) * rotation_xyz(rotation_rad);
    transform_.offset = translation;
    inverse_ = transform_.inverse();

    boundary_ = make_icosphere(4);
    for (auto& p : boundary_.positions) p = transform_(p);
    surface_sdf_ = std::make_shared<MeshSdf>(boundary_);
}

FocalRegion make_focal_region(const Vec3& stretch, const Vec3& rotation_rad,
                              const Vec3& translation) {
    return FocalRegion(stretch, rotation_rad, translation);
}

double region_union_sdf(std::span<const FocalRegion> regions, const Vec3& p) {
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& r : regions) best = std::max(best, r.signed_distance(p));
    return best;
}

void init_editable_sdf(TetGrid& grid, std::span<const FocalRegion> regions,
                       const InitParams& params, Rng& rng) {
    if (regions.empty()) throw std::invalid_argument("init_editable_sdf: no regions");
    for (const auto& r : regions) {
        Aabb rb = r.boundary().bounds();
        if (!rb.overlaps(grid.domain))
            throw std::invalid_argument(
                "init_editable_sdf: focal region lies outside the grid domain");
    }
    if (params.iterations <= 0) return;

    const size_t n = grid.vertex_count();
    std::vector<double> m(n, 0.0), v(n, 0.0), grad(n, 0.0);
    const double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

    std::array<int, 8> idx;
    std::array<double, 8> w;
    for (int it = 1; it <= params.iterations; ++it) {
        std::fill(grad.begin(), grad.end(), 0.0);
        for (int b = 0; b < params.batch; ++b) {
            Vec3 p = rng.uniform_in_box(grid.domain);
            grid.interpolation_stencil(p, idx, w);
            double pred = 0.0;
            for (int c = 0; c < 8; ++c) pred += w[c] * grid.edit_sdf[idx[c]];
            double target = region_union_sdf(regions, p);
            double g = 2.0 * (pred - target) / params.batch;
            for (int c = 0; c < 8; ++c) grad[idx[c]] += g * w[c];
        }
        // Mild decay keeps late iterations from wobbling around the optimum.
        // The decay scale is absolute, so a longer run replays a shorter one
        // exactly before continuing.
        double lr = params.learning_rate / (1.0 + double(it) / 5000.0);
        double bc1 = 1.0 - std::pow(beta1, it);
        double bc2 = 1.0 - std::pow(beta2, it);
        for (size_t i = 0; i < n; ++i) {
            if (grad[i] == 0.0 && m[i] == 0.0 && v[i] == 0.0) continue;
            m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
            v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
            grid.edit_sdf[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps);
        }
    }
}

void precompute_outside_distances(TetGrid& grid, std::span<const FocalRegion> regions) {
    for (size_t i = 0; i < grid.vertex_count(); ++i) {
        const Vec3& p = grid.vertices[i];
        bool inside = false;
        double best = std::numeric_limits<double>::infinity();
        for (const auto& r : regions) {
            if (r.contains(p)) {
                inside = true;
                break;
            }
            best = std::min(best, r.surface_sdf().unsigned_distance(p));
        }
        grid.inside_region[i] = inside ? 1 : 0;
        grid.focal_dist[i] = inside ? 0.0 : best;
    }
}

}  // namespace focalfuse
