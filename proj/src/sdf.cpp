#include "focalfuse/sdf.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "focalfuse/rng.hpp"

namespace focalfuse {

// Ericson, Real-Time Collision Detection, 5.1.5.
Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
    Vec3 ab = b - a, ac = c - a, ap = p - a;
    double d1 = dot(ab, ap), d2 = dot(ac, ap);
    if (d1 <= 0.0 && d2 <= 0.0) return a;

    Vec3 bp = p - b;
    double d3 = dot(ab, bp), d4 = dot(ac, bp);
    if (d3 >= 0.0 && d4 <= d3) return b;

    double vc = d1 * d4 - d3 * d2;
    if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) return a + ab * (d1 / (d1 - d3));

    Vec3 cp = p - c;
    double d5 = dot(ab, cp), d6 = dot(ac, cp);
    if (d6 >= 0.0 && d5 <= d6) return c;

    double vb = d5 * d2 - d1 * d6;
    if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) return a + ac * (d2 / (d2 - d6));

    double va = d3 * d6 - d5 * d4;
    if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0)
        return b + (c - b) * ((d4 - d3) / ((d4 - d3) + (d5 - d6)));

    double denom = 1.0 / (va + vb + vc);
    return a + ab * (vb * denom) + ac * (vc * denom);
}

MeshSdf::MeshSdf(const TriMesh& mesh, bool inner_positive) : inner_positive_(inner_positive) {
    tris_.reserve(mesh.faces.size());
    for (const auto& f : mesh.faces)
        tris_.push_back({mesh.positions[f[0]], mesh.positions[f[1]], mesh.positions[f[2]]});
    if (tris_.empty()) return;
    std::vector<int> ids(tris_.size());
    std::iota(ids.begin(), ids.end(), 0);
    nodes_.reserve(tris_.size() * 2);
    build(ids, 0, int(ids.size()));
    // build() permutes ids; reorder triangles to match leaf ranges.
    std::vector<Tri> reordered(tris_.size());
    for (size_t i = 0; i < ids.size(); ++i) reordered[i] = tris_[ids[i]];
    tris_ = std::move(reordered);
    face_ids_ = std::move(ids);
}

int MeshSdf::build(std::vector<int>& ids, int begin, int end) {
    int node_idx = int(nodes_.size());
    nodes_.push_back({});
    Aabb box;
    for (int i = begin; i < end; ++i) {
        box.expand(tris_[ids[i]].a);
        box.expand(tris_[ids[i]].b);
        box.expand(tris_[ids[i]].c);
    }
    nodes_[node_idx].box = box;

    const int count = end - begin;
    if (count <= 4) {
        nodes_[node_idx].left = begin;
        nodes_[node_idx].count = count;
        return node_idx;
    }

    Vec3 ext = box.extent();
    int axis = 0;
    if (ext.y > ext.x) axis = 1;
    if (ext.z > ext[axis]) axis = 2;
    int mid = (begin + end) / 2;
    std::nth_element(ids.begin() + begin, ids.begin() + mid, ids.begin() + end,
                     [&](int lhs, int rhs) {
                         auto centroid = [&](int t) {
                             return (tris_[t].a[axis] + tris_[t].b[axis] + tris_[t].c[axis]);
                         };
                         return centroid(lhs) < centroid(rhs);
                     });

    int left = build(ids, begin, mid);
    int right = build(ids, mid, end);
    nodes_[node_idx].left = left;
    nodes_[node_idx].right = right;
    nodes_[node_idx].count = 0;
    return node_idx;
}

void MeshSdf::nearest(int node, const Vec3& p, double& best_sq, Vec3& best_point,
                      int& best_tri) const {
    const Node& n = nodes_[node];
    if (n.count > 0) {
        for (int i = n.left; i < n.left + n.count; ++i) {
            Vec3 q = closest_point_on_triangle(p, tris_[i].a, tris_[i].b, tris_[i].c);
            double d = norm_sq(q - p);
            if (d < best_sq) {
                best_sq = d;
                best_point = q;
                best_tri = i;
            }
        }
        return;
    }
    double dl = nodes_[n.left].box.distance_sq(p);
    double dr = nodes_[n.right].box.distance_sq(p);
    int first = n.left, second = n.right;
    if (dr < dl) {
        std::swap(first, second);
        std::swap(dl, dr);
    }
    if (dl < best_sq) nearest(first, p, best_sq, best_point, best_tri);
    if (dr < best_sq) nearest(second, p, best_sq, best_point, best_tri);
}

double MeshSdf::unsigned_distance(const Vec3& p) const {
    return norm(closest_point(p) - p);
}

Vec3 MeshSdf::closest_point(const Vec3& p) const {
    if (tris_.empty()) throw std::logic_error("MeshSdf: empty mesh");
    double best_sq = std::numeric_limits<double>::infinity();
    Vec3 best{};
    int best_tri = -1;
    nearest(0, p, best_sq, best, best_tri);
    return best;
}

int MeshSdf::nearest_face(const Vec3& p) const {
    if (tris_.empty()) throw std::logic_error("MeshSdf: empty mesh");
    double best_sq = std::numeric_limits<double>::infinity();
    Vec3 best{};
    int best_tri = -1;
    nearest(0, p, best_sq, best, best_tri);
    return face_ids_[best_tri];
}

namespace {

// Moller-Trumbore; grazing hits (tiny determinant) are treated as misses and
// left to the majority vote.
bool ray_hits_triangle(const Vec3& o, const Vec3& d, const Vec3& a, const Vec3& b, const Vec3& c) {
    const Vec3 e1 = b - a, e2 = c - a;
    const Vec3 pv = cross(d, e2);
    const double det = dot(e1, pv);
    if (std::abs(det) < 1e-14) return false;
    const double inv = 1.0 / det;
    const Vec3 tv = o - a;
    const double u = dot(tv, pv) * inv;
    if (u < 0.0 || u > 1.0) return false;
    const Vec3 qv = cross(tv, e1);
    const double v = dot(d, qv) * inv;
    if (v < 0.0 || u + v > 1.0) return false;
    const double t = dot(e2, qv) * inv;
    return t > 1e-12;
}

bool ray_intersects_box(const Vec3& o, const Vec3& inv_dir, const Aabb& box) {
    double tmin = 0.0, tmax = std::numeric_limits<double>::infinity();
    for (int i = 0; i < 3; ++i) {
        double t1 = (box.lo[i] - o[i]) * inv_dir[i];
        double t2 = (box.hi[i] - o[i]) * inv_dir[i];
        if (t1 > t2) std::swap(t1, t2);
        tmin = std::max(tmin, t1);
        tmax = std::min(tmax, t2);
        if (tmin > tmax) return false;
    }
    return true;
}

}  // namespace

int MeshSdf::count_ray_hits(const Vec3& origin, const Vec3& dir) const {
    Vec3 inv_dir{1.0 / dir.x, 1.0 / dir.y, 1.0 / dir.z};
    int hits = 0;
    // Iterative traversal; meshes stay small enough for a fixed stack.
    int stack[64];
    int top = 0;
    stack[top++] = 0;
    while (top > 0) {
        const Node& n = nodes_[stack[--top]];
        if (!ray_intersects_box(origin, inv_dir, n.box)) continue;
        if (n.count > 0) {
            for (int i = n.left; i < n.left + n.count; ++i)
                if (ray_hits_triangle(origin, dir, tris_[i].a, tris_[i].b, tris_[i].c)) ++hits;
        } else {
            stack[top++] = n.left;
            stack[top++] = n.right;
        }
    }
    return hits;
}

bool MeshSdf::inside(const Vec3& p) const {
    if (tris_.empty()) return false;
    Rng rng(hash_point(p));
    int votes = 0;
    int parity[3];
    for (int r = 0; r < 3; ++r) {
        Vec3 dir = rng.unit_vector();
        parity[r] = count_ray_hits(p, dir) & 1;
        votes += parity[r];
    }
    if (parity[0] != parity[1] || parity[1] != parity[2])
        parity_conflicts_.fetch_add(1, std::memory_order_relaxed);
    return votes >= 2;
}

double MeshSdf::signed_distance(const Vec3& p) const {
    double d = unsigned_distance(p);
    double s = inside(p) ? d : -d;
    return inner_positive_ ? s : -s;
}

double soft_union(double a, double b, double k) {
    if (k <= 0.0) throw std::invalid_argument("soft_union: blend width must be positive");
    double h = std::max(k - std::abs(a - b), 0.0);
    return std::max(a, b) + 0.1 * h * h / k;
}

SoftUnionGrad soft_union_grad(double a, double b, double k) {
    if (k <= 0.0) throw std::invalid_argument("soft_union: blend width must be positive");
    double h = std::max(k - std::abs(a - b), 0.0);
    SoftUnionGrad g;
    g.value = std::max(a, b) + 0.1 * h * h / k;
    double da_max = a >= b ? 1.0 : 0.0;
    double sign_ab = a >= b ? 1.0 : -1.0;  // d|a-b|/da
    double dh_da = h > 0.0 ? -sign_ab : 0.0;
    g.d_a = da_max + 0.2 * h / k * dh_da;
    g.d_b = (1.0 - da_max) + 0.2 * h / k * (-dh_da);
    return g;
}

double sphere_sdf(const Vec3& center, double radius, const Vec3& p) {
    if (radius <= 0.0) throw std::invalid_argument("sphere_sdf: radius must be positive");
    return radius - norm(p - center);
}

double box_sdf(const Vec3& center, const Vec3& half_extents, const Vec3& p) {
    Vec3 q = Vec3{std::abs(p.x - center.x), std::abs(p.y - center.y), std::abs(p.z - center.z)} -
             half_extents;
    Vec3 outside = cwise_max(q, Vec3{});
    double out = norm(outside);
    double inside = std::min(std::max({q.x, q.y, q.z}), 0.0);
    return -(out + inside);
}

}  // namespace focalfuse
