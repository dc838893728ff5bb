// Test-only oracles, kept independent of the library's extraction path.
#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <vector>

#include "focalfuse/math.hpp"
#include "focalfuse/tetgrid.hpp"

namespace oracle {

using focalfuse::TetGrid;
using focalfuse::Vec3;

// Brute-force marching-tetrahedra reference: walks every tet, classifies the
// 16 sign cases against a hand-written table, and emits crossing vertices
// directly (no sharing, no acceleration). Faces arrive as position triples.
struct OracleMesh {
    std::vector<std::array<Vec3, 3>> faces;
};

inline Vec3 edge_crossing(const Vec3& a, const Vec3& b, double sa, double sb) {
    double t = sa / (sa - sb);
    return a + (b - a) * t;
}

// Per-case crossing-edge table. Edge ids: 0:(0,1) 1:(0,2) 2:(0,3) 3:(1,2)
// 4:(1,3) 5:(2,3). Entries hold the edges of one or two triangles; quads are
// listed in ring order and split (0,1,2) + (0,2,3).
struct CaseEntry {
    int n_edges;
    std::array<int, 4> edges;
};

inline const CaseEntry& case_table(int mask) {
    // mask bit i set = vertex i positive (inside).
    static const std::array<CaseEntry, 16> table = {{
        {0, {0, 0, 0, 0}},   // 0000
        {3, {0, 1, 2, 0}},   // 0001: +v0
        {3, {0, 3, 4, 0}},   // 0010: +v1
        {4, {1, 2, 4, 3}},   // 0011: +v0 +v1, ring (02,03,13,12)
        {3, {1, 3, 5, 0}},   // 0100: +v2
        {4, {0, 2, 5, 3}},   // 0101: +v0 +v2, ring (01,03,23,12)
        {4, {0, 4, 5, 1}},   // 0110: +v1 +v2, ring (01,13,23,02)
        {3, {2, 4, 5, 0}},   // 0111: -v3
        {3, {2, 4, 5, 0}},   // 1000: +v3
        {4, {0, 1, 5, 4}},   // 1001: +v0 +v3, ring (01,02,23,13)
        {4, {0, 3, 5, 2}},   // 1010: +v1 +v3, ring (01,12,23,03)
        {3, {1, 3, 5, 0}},   // 1011: -v2
        {4, {1, 3, 4, 2}},   // 1100: +v2 +v3, ring (02,12,13,03)
        {3, {0, 3, 4, 0}},   // 1101: -v1
        {3, {0, 1, 2, 0}},   // 1110: -v0
        {0, {0, 0, 0, 0}},   // 1111
    }};
    return table[mask];
}

constexpr int kEdgeVertex[6][2] = {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}};

// Positive-side orientation: normals must point toward the negative side.
// For a linear field the gradient is constant per tet, so orientation checks
// against it exactly.
inline Vec3 linear_field_gradient(const Vec3 p[4], const double s[4]) {
    focalfuse::Mat3 m;
    for (int r = 0; r < 3; ++r) {
        Vec3 e = p[r + 1] - p[0];
        m(r, 0) = e.x;
        m(r, 1) = e.y;
        m(r, 2) = e.z;
    }
    return m.inverse() * Vec3{s[1] - s[0], s[2] - s[0], s[3] - s[0]};
}

inline OracleMesh marching_tets_reference(const TetGrid& grid, const std::vector<double>& field) {
    OracleMesh out;
    for (size_t t = 0; t < grid.tet_count(); ++t) {
        const auto& tet = grid.tets[t];
        double s[4];
        Vec3 p[4];
        int mask = 0;
        for (int i = 0; i < 4; ++i) {
            s[i] = field[tet[i]] == 0.0 ? 1e-12 : field[tet[i]];
            p[i] = grid.deformed_position(tet[i]);
            if (s[i] > 0.0) mask |= 1 << i;
        }
        const CaseEntry& entry = case_table(mask);
        if (entry.n_edges == 0) continue;

        Vec3 xs[4];
        for (int e = 0; e < entry.n_edges; ++e) {
            int va = kEdgeVertex[entry.edges[e]][0], vb = kEdgeVertex[entry.edges[e]][1];
            // Match the shared-vertex convention: lower global index first.
            if (tet[va] > tet[vb]) std::swap(va, vb);
            xs[e] = edge_crossing(p[va], p[vb], s[va], s[vb]);
        }

        Vec3 grad = linear_field_gradient(p, s);
        auto emit = [&](Vec3 a, Vec3 b, Vec3 c) {
            if (focalfuse::dot(focalfuse::cross(b - a, c - a), grad) > 0.0) std::swap(b, c);
            out.faces.push_back({a, b, c});
        };
        emit(xs[0], xs[1], xs[2]);
        if (entry.n_edges == 4) emit(xs[0], xs[2], xs[3]);
    }
    return out;
}

// ---- generic finite differences -------------------------------------------

inline double central_difference(const std::function<double(double)>& f, double x,
                                 double h = 1e-5) {
    return (f(x + h) - f(x - h)) / (2.0 * h);
}

inline double relative_error(double a, double b) {
    double denom = std::max({std::abs(a), std::abs(b), 1e-12});
    return std::abs(a - b) / denom;
}

// ---- analytic geometry -----------------------------------------------------

// Volume of the intersection of two spheres with equal radius r at center
// distance d (0 < d < 2r).
inline double sphere_lens_volume(double r, double d) {
    const double pi = 3.14159265358979323846;
    return pi * (4.0 * r + d) * (2.0 * r - d) * (2.0 * r - d) / 12.0;
}

}  // namespace oracle
