#include <doctest.h>

#include <algorithm>
#include <map>
#include <set>

#include "focalfuse/rng.hpp"
#include "focalfuse/sdf.hpp"
#include "focalfuse/tetgrid.hpp"
#include "oracles.hpp"

using namespace focalfuse;

namespace {

// Canonical position key for matching vertices between two extractions.
uint64_t position_key(const Vec3& p, double tol = 1e-9) {
    auto q = [&](double v) { return int64_t(std::llround(v / tol)); };
    uint64_t h = 0xcbf29ce484222325ULL;
    for (int64_t v : {q(p.x), q(p.y), q(p.z)}) {
        h ^= uint64_t(v);
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::multiset<std::array<uint64_t, 3>> canonical_faces(
    const std::vector<std::array<Vec3, 3>>& faces) {
    std::multiset<std::array<uint64_t, 3>> out;
    for (const auto& f : faces) {
        std::array<uint64_t, 3> k{position_key(f[0]), position_key(f[1]), position_key(f[2])};
        // Normalize cyclic rotation but keep winding.
        int lo = 0;
        for (int i = 1; i < 3; ++i)
            if (k[i] < k[lo]) lo = i;
        std::array<uint64_t, 3> r{k[lo], k[(lo + 1) % 3], k[(lo + 2) % 3]};
        out.insert(r);
    }
    return out;
}

std::vector<std::array<Vec3, 3>> mesh_face_positions(const TriMesh& m) {
    std::vector<std::array<Vec3, 3>> out;
    out.reserve(m.faces.size());
    for (const auto& f : m.faces)
        out.push_back({m.positions[f[0]], m.positions[f[1]], m.positions[f[2]]});
    return out;
}

std::map<std::pair<int, int>, int> edge_face_counts(const TriMesh& m) {
    std::map<std::pair<int, int>, int> counts;
    for (const auto& f : m.faces)
        for (int e = 0; e < 3; ++e) {
            int a = f[e], b = f[(e + 1) % 3];
            if (a > b) std::swap(a, b);
            ++counts[{a, b}];
        }
    return counts;
}

}  // namespace

TEST_SUITE_BEGIN("tetgrid");

TEST_CASE("single cube decomposes into 8 vertices and 6 tets") {
    TetGrid g = build_grid({1, 1, 1}, Aabb::cube(0.5));
    CHECK(g.vertex_count() == 8);
    CHECK(g.tet_count() == 6);
}

TEST_CASE("2x2x2 grid has 27 vertices and 48 tets") {
    // Counts by construction: (n+1)^3 vertices, 6 per cube.
    TetGrid g = build_grid({2, 2, 2}, Aabb::cube(1.0));
    CHECK(g.vertex_count() == 27);
    CHECK(g.tet_count() == 48);
}

TEST_CASE("zero resolution is rejected") {
    CHECK_THROWS_AS(build_grid({0, 1, 1}, Aabb::cube(1.0)), std::invalid_argument);
}

TEST_CASE("degenerate bounds are rejected") {
    CHECK_THROWS_AS(build_grid({2, 2, 2}, Aabb{{0, 0, 0}, {0, 1, 1}}), std::invalid_argument);
}

TEST_CASE("all tets have positive volume and in-range indices") {
    TetGrid g = build_grid({3, 2, 4}, Aabb{{-1, -2, 0}, {2, 1, 3}});
    for (size_t t = 0; t < g.tet_count(); ++t) {
        for (int i : g.tets[t]) {
            CHECK(i >= 0);
            CHECK(i < int(g.vertex_count()));
        }
        CHECK(g.tet_signed_volume(int(t)) > 0.0);
    }
}

TEST_CASE("single tet with one positive corner yields midpoint triangle") {
    TetGrid g = build_grid({1, 1, 1}, Aabb::cube(0.5));
    // Field +1 at exactly one vertex, -1 elsewhere: each tet containing that
    // vertex contributes one triangle through its edge midpoints.
    std::vector<double> field(g.vertex_count(), -1.0);
    field[0] = 1.0;
    TriMesh mesh = marching_tetrahedra(g, field, Part::Base);
    REQUIRE(!mesh.empty());
    for (const auto& ci : mesh.crossings) {
        // Crossing parameter 1/(1-(-1)) = 0.5 on every sign-changing edge.
        double t = mt_crossing_parameter(ci.value_a, ci.value_b);
        CHECK(t == doctest::Approx(0.5).epsilon(1e-12));
    }
}

TEST_CASE("all-positive field extracts nothing") {
    TetGrid g = build_grid({2, 2, 2}, Aabb::cube(1.0));
    std::vector<double> field(g.vertex_count(), 1.0);
    CHECK(marching_tetrahedra(g, field, Part::Base).empty());
}

TEST_CASE("negating the field keeps vertices and reverses winding") {
    TetGrid g = build_grid({4, 4, 4}, Aabb::cube(1.0));
    std::vector<double> field(g.vertex_count());
    for (size_t v = 0; v < g.vertex_count(); ++v)
        field[v] = sphere_sdf({0.05, -0.02, 0.01}, 0.6, g.vertices[v]);
    std::vector<double> neg(field.size());
    for (size_t i = 0; i < field.size(); ++i) neg[i] = -field[i];

    TriMesh a = marching_tetrahedra(g, field, Part::Base);
    TriMesh b = marching_tetrahedra(g, neg, Part::Base);
    REQUIRE(a.faces.size() == b.faces.size());
    REQUIRE(a.positions.size() == b.positions.size());
    for (size_t v = 0; v < a.positions.size(); ++v)
        CHECK(norm(a.positions[v] - b.positions[v]) < 1e-9);

    auto fa = canonical_faces(mesh_face_positions(a));
    // Reverse the winding of b, then the face sets must agree.
    auto faces_b = mesh_face_positions(b);
    for (auto& f : faces_b) std::swap(f[1], f[2]);
    CHECK(fa == canonical_faces(faces_b));
}

TEST_CASE("extraction matches the 16-case reference on random fields") {
    Rng rng(7001);
    for (int trial = 0; trial < 25; ++trial) {
        int res = 2 + int(rng.uniform_index(5));
        TetGrid g = build_grid({res, res, res}, Aabb::cube(1.0));
        std::vector<double> field(g.vertex_count());
        for (auto& v : field) v = rng.uniform(-1.0, 1.0);

        TriMesh mine = marching_tetrahedra(g, field, Part::Base);
        oracle::OracleMesh ref = oracle::marching_tets_reference(g, field);

        REQUIRE(mine.faces.size() == ref.faces.size());
        CHECK(canonical_faces(mesh_face_positions(mine)) == canonical_faces(ref.faces));
    }
}

TEST_CASE("interpolated field is zero at every extracted vertex") {
    Rng rng(7002);
    TetGrid g = build_grid({6, 6, 6}, Aabb::cube(1.0));
    std::vector<double> field(g.vertex_count());
    for (auto& v : field) v = rng.uniform(-1.0, 1.0);
    TriMesh mesh = marching_tetrahedra(g, field, Part::Editable);
    REQUIRE(!mesh.empty());
    for (const auto& ci : mesh.crossings) {
        double t = mt_crossing_parameter(ci.value_a, ci.value_b);
        double interpolated = ci.value_a + t * (ci.value_b - ci.value_a);
        CHECK(std::abs(interpolated) < 1e-9);
    }
    // Extracted vertices lie on their parent edges.
    for (size_t v = 0; v < mesh.positions.size(); ++v) {
        const auto& ci = mesh.crossings[v];
        Vec3 a = g.deformed_position(ci.parent_a), b = g.deformed_position(ci.parent_b);
        Vec3 ab = b - a, ap = mesh.positions[v] - a;
        CHECK(norm(cross(ab, ap)) < 1e-9 * norm(ab));
    }
}

TEST_CASE("sphere field extraction is watertight") {
    TetGrid g = build_grid({12, 12, 12}, Aabb::cube(1.0));
    std::vector<double> field(g.vertex_count());
    for (size_t v = 0; v < g.vertex_count(); ++v)
        field[v] = sphere_sdf({0.0, 0.0, 0.0}, 0.55, g.vertices[v]);
    TriMesh mesh = marching_tetrahedra(g, field, Part::Base);
    REQUIRE(!mesh.empty());
    for (const auto& [edge, count] : edge_face_counts(mesh)) CHECK(count == 2);
}

TEST_CASE("faces point away from the positive side") {
    Rng rng(7003);
    TetGrid g = build_grid({5, 5, 5}, Aabb::cube(1.0));
    std::vector<double> field(g.vertex_count());
    for (auto& v : field) v = rng.uniform(-1.0, 1.0);
    TriMesh mesh = marching_tetrahedra(g, field, Part::Base);
    // For the sphere case the statement is global: normals at the surface
    // point radially outward (toward negative values).
    TetGrid gs = build_grid({10, 10, 10}, Aabb::cube(1.0));
    std::vector<double> sphere(gs.vertex_count());
    for (size_t v = 0; v < gs.vertex_count(); ++v)
        sphere[v] = sphere_sdf({0, 0, 0}, 0.5, gs.vertices[v]);
    TriMesh ms = marching_tetrahedra(gs, sphere, Part::Base);
    for (size_t f = 0; f < ms.faces.size(); ++f)
        CHECK(dot(ms.face_normal(int(f)), ms.face_centroid(int(f))) > 0.0);
}

TEST_CASE("exact zero field values extract without error") {
    TetGrid g = build_grid({2, 2, 2}, Aabb::cube(1.0));
    std::vector<double> field(g.vertex_count(), -1.0);
    field[g.vertex_index(1, 1, 1)] = 0.0;  // nudged internally
    TriMesh mesh = marching_tetrahedra(g, field, Part::Base);
    CHECK(!mesh.empty());
}

TEST_CASE("crossing gradient matches the worked example") {
    // s=(1,-1), edge along x, upstream (1,0,0): both sensitivities are 1/4.
    MtVertexGradient grad =
        mt_vertex_gradient({0, 0, 0}, {1, 0, 0}, 1.0, -1.0, {1.0, 0.0, 0.0});
    CHECK(grad.d_value_a == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(grad.d_value_b == doctest::Approx(0.25).epsilon(1e-12));

    MtVertexGradient zero = mt_vertex_gradient({0, 0, 0}, {1, 0, 0}, 1.0, -1.0, {0, 0, 0});
    CHECK(zero.d_value_a == 0.0);
    CHECK(zero.d_value_b == 0.0);
}

TEST_CASE("crossing gradient matches central finite differences") {
    Rng rng(7004);
    int checked = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        Vec3 a = rng.uniform_in_cube(1.0), b = rng.uniform_in_cube(1.0);
        double sa = rng.uniform(0.05, 2.0);
        double sb = -rng.uniform(0.05, 2.0);
        Vec3 up{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
        MtVertexGradient g = mt_vertex_gradient(a, b, sa, sb, up);

        auto crossing_dot = [&](double xa, double xb) {
            Vec3 x = a + (b - a) * (xa / (xa - xb));
            return dot(up, x);
        };
        const double h = 1e-5;
        double fd_a = (crossing_dot(sa + h, sb) - crossing_dot(sa - h, sb)) / (2 * h);
        double fd_b = (crossing_dot(sa, sb + h) - crossing_dot(sa, sb - h)) / (2 * h);
        if (std::abs(fd_a) > 1e-7) {
            CHECK(oracle::relative_error(g.d_value_a, fd_a) < 1e-4);
            ++checked;
        }
        if (std::abs(fd_b) > 1e-7) CHECK(oracle::relative_error(g.d_value_b, fd_b) < 1e-4);
    }
    CHECK(checked > 500);
}

TEST_CASE("offset mask zeroes deep-outside vertices only") {
    TetGrid g = build_grid({2, 2, 2}, Aabb::cube(1.0));
    for (size_t v = 0; v < g.vertex_count(); ++v) g.offsets[v] = {0.01, 0.0, 0.0};
    g.edit_sdf.assign(g.vertex_count(), -0.5);
    g.edit_sdf[0] = 0.1;
    auto mask = apply_offset_mask(g, 0.05);
    CHECK(mask[0] == 1);
    CHECK(g.offsets[0].x == 0.01);
    for (size_t v = 1; v < g.vertex_count(); ++v) {
        CHECK(mask[v] == 0);
        CHECK(g.offsets[v] == Vec3{});
    }

    // Infinite margin keeps everything.
    for (size_t v = 0; v < g.vertex_count(); ++v) g.offsets[v] = {0.01, 0.0, 0.0};
    auto all = apply_offset_mask(g, std::numeric_limits<double>::infinity());
    for (size_t v = 0; v < g.vertex_count(); ++v) {
        CHECK(all[v] == 1);
        CHECK(g.offsets[v].x == 0.01);
    }
}

TEST_CASE("offset clamp keeps every tet volume positive") {
    Rng rng(7005);
    for (int trial = 0; trial < 10; ++trial) {
        TetGrid g = build_grid({4, 4, 4}, Aabb::cube(1.0));
        g.edit_sdf.assign(g.vertex_count(), 1.0);  // nothing masked
        double h = g.min_edge_length();
        for (size_t v = 0; v < g.vertex_count(); ++v)
            g.offsets[v] = rng.unit_vector() * rng.uniform(0.0, 1.2 * h);
        apply_offset_mask(g, 0.0);
        clamp_offsets(g);
        double bound = 0.5 * h * (1.0 + 1e-12);
        for (size_t v = 0; v < g.vertex_count(); ++v) CHECK(norm(g.offsets[v]) <= bound);
        for (size_t t = 0; t < g.tet_count(); ++t) CHECK(g.tet_signed_volume(int(t)) > 0.0);
    }
}

TEST_CASE("grid snapshot round-trips") {
    Rng rng(7006);
    TetGrid g = build_grid({3, 3, 3}, Aabb::cube(0.8));
    for (auto& v : g.base_sdf) v = rng.uniform(-1, 1);
    for (auto& v : g.edit_sdf) v = rng.uniform(-1, 1);
    g.offsets[5] = {0.01, -0.02, 0.005};
    std::string path = "test_grid_snapshot.bin";
    save_grid_snapshot(g, path);
    TetGrid back = load_grid_snapshot(path);
    CHECK(back.resolution == g.resolution);
    CHECK(back.base_sdf == g.base_sdf);
    CHECK(back.edit_sdf == g.edit_sdf);
    CHECK(back.offsets[5] == g.offsets[5]);
    std::remove(path.c_str());
}

TEST_SUITE_END();
