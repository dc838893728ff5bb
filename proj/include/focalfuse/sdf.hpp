#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <vector>

#include "focalfuse/math.hpp"
#include "focalfuse/tetgrid.hpp"

namespace focalfuse {

Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c);

/// Signed distance queries against a triangle mesh. Unsigned distances come
/// from an AABB tree and are exact; the sign is an inside test by ray parity
/// with three per-point pseudo-random directions, majority vote.
/// Inner-positive by default.
class MeshSdf {
public:
    MeshSdf() = default;
    explicit MeshSdf(const TriMesh& mesh, bool inner_positive = true);

    bool empty() const { return tris_.empty(); }
    bool inner_positive() const { return inner_positive_; }
    void set_inner_positive(bool v) { inner_positive_ = v; }

    double unsigned_distance(const Vec3& p) const;
    Vec3 closest_point(const Vec3& p) const;
    /// Index (into the source mesh's face list) of the nearest triangle.
    int nearest_face(const Vec3& p) const;
    bool inside(const Vec3& p) const;
    double signed_distance(const Vec3& p) const;

    /// Number of queries whose three parity rays disagreed; nonzero values
    /// indicate a mesh that is not cleanly watertight.
    uint64_t parity_conflicts() const { return parity_conflicts_.load(); }

private:
    struct Node {
        Aabb box;
        int left = -1;   // internal: child index; leaf: first triangle
        int right = -1;  // internal: child index; leaf: -1
        int count = 0;   // leaf triangle count; 0 for internal nodes
    };
    struct Tri {
        Vec3 a, b, c;
    };

    int build(std::vector<int>& ids, int begin, int end);
    void nearest(int node, const Vec3& p, double& best_sq, Vec3& best_point, int& best_tri) const;
    int count_ray_hits(const Vec3& origin, const Vec3& dir) const;

    std::vector<Tri> tris_;
    std::vector<int> face_ids_;  // BVH order -> source face index
    std::vector<Node> nodes_;
    bool inner_positive_ = true;
    mutable std::atomic<uint64_t> parity_conflicts_{0};
};

/// Smooth max-based union of two inner-positive SDF values with blend width
/// k > 0: max(a, b) + 0.1 * h^2 / k where h = max(k - |a - b|, 0).
double soft_union(double a, double b, double k);

struct SoftUnionGrad {
    double value;
    double d_a;
    double d_b;
};
SoftUnionGrad soft_union_grad(double a, double b, double k);

/// Inner-positive analytic sphere distance: radius - |p - center|.
double sphere_sdf(const Vec3& center, double radius, const Vec3& p);

/// Inner-positive exact box distance.
double box_sdf(const Vec3& center, const Vec3& half_extents, const Vec3& p);

}  // namespace focalfuse
