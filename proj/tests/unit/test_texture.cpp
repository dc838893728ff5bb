#include <doctest.h>

#include <cmath>

#include "focalfuse/focal.hpp"
#include "focalfuse/rng.hpp"
#include "focalfuse/texture.hpp"
#include "oracles.hpp"

using namespace focalfuse;

TEST_SUITE_BEGIN("texture");

TEST_CASE("constant field evaluates identically everywhere") {
    TextureField tex(8, Aabb::cube(1.0));
    tex.fill_constant({0.3, 0.6, 0.9}, 0.4, 0.2);
    Rng rng(11001);
    Material ref = tex.eval({0, 0, 0});
    CHECK(ref.diffuse.x == doctest::Approx(0.3).epsilon(1e-9));
    CHECK(ref.roughness == doctest::Approx(0.4).epsilon(1e-9));
    CHECK(ref.metalness == doctest::Approx(0.2).epsilon(1e-9));
    CHECK(norm(ref.normal_ts - Vec3{0, 0, 1}) < 1e-12);
    for (int i = 0; i < 100; ++i) {
        Material m = tex.eval(rng.uniform_in_cube(1.0));
        CHECK(m.diffuse.x == doctest::Approx(ref.diffuse.x).epsilon(1e-12));
        CHECK(m.roughness == doctest::Approx(ref.roughness).epsilon(1e-12));
    }
}

TEST_CASE("corner evaluation returns the stored squashed values") {
    TextureField tex(2, Aabb::cube(1.0));
    Rng rng(11002);
    for (auto& p : tex.params()) p = rng.uniform(-2, 2);
    // Lattice point (i,j,k) = (1,0,0) sits at x=0, y=-1, z=-1.
    const int row = 1;
    Material m = tex.eval({0.0, -1.0, -1.0});
    CHECK(m.diffuse.x ==
          doctest::Approx(sigmoid(tex.params()[row * TextureField::kChannels + 0])).epsilon(1e-12));
    CHECK(m.roughness ==
          doctest::Approx(sigmoid(tex.params()[row * TextureField::kChannels + 3])).epsilon(1e-12));
}

TEST_CASE("midpoint along one axis averages the squashed corner values") {
    TextureField tex(1, Aabb{{0, 0, 0}, {1, 1, 1}});
    Rng rng(11003);
    for (auto& p : tex.params()) p = rng.uniform(-2, 2);
    // Midpoint of the x-edge at y=0, z=0: corners 0 and 1.
    Material m = tex.eval({0.5, 0.0, 0.0});
    for (int c = 0; c < 3; ++c) {
        double expected = 0.5 * (sigmoid(tex.params()[0 * 8 + c]) + sigmoid(tex.params()[1 * 8 + c]));
        CHECK(m.diffuse[c] == doctest::Approx(expected).epsilon(1e-9));
    }
}

TEST_CASE("bounded outputs and unit normals everywhere") {
    TextureField tex(4, Aabb::cube(1.0));
    Rng rng(11004);
    for (auto& p : tex.params()) p = rng.uniform(-10, 10);
    for (int i = 0; i < 500; ++i) {
        Material m = tex.eval(rng.uniform_in_cube(1.3));  // includes out-of-domain clamping
        for (int c = 0; c < 3; ++c) {
            CHECK(m.diffuse[c] >= 0.0);
            CHECK(m.diffuse[c] <= 1.0);
        }
        CHECK(m.roughness >= 0.0);
        CHECK(m.roughness <= 1.0);
        CHECK(m.metalness >= 0.0);
        CHECK(m.metalness <= 1.0);
        CHECK(std::abs(norm(m.normal_ts) - 1.0) < 1e-6);
    }
}

TEST_CASE("raw interpolation is exact for affine fields") {
    TextureField tex(5, Aabb::cube(1.0));
    const Vec3 coeff{0.3, -0.7, 0.2};
    const double offset = 0.1;
    const int n = tex.resolution() + 1;
    for (int k = 0; k < n; ++k)
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i) {
                Vec3 p{-1.0 + 2.0 * i / tex.resolution(), -1.0 + 2.0 * j / tex.resolution(),
                       -1.0 + 2.0 * k / tex.resolution()};
                size_t row = size_t(i + j * n + k * n * n) * TextureField::kChannels;
                tex.params()[row] = dot(coeff, p) + offset;
            }
    Rng rng(11005);
    for (int t = 0; t < 200; ++t) {
        Vec3 p = rng.uniform_in_cube(1.0);
        CHECK(tex.eval_raw(p)[0] == doctest::Approx(dot(coeff, p) + offset).epsilon(1e-12));
    }
}

TEST_CASE("specular color limits") {
    CHECK(norm(specular_color({0.8, 0.2, 0.1}, 0.0) - Vec3{0.04, 0.04, 0.04}) < 1e-15);
    CHECK(norm(specular_color({0.8, 0.2, 0.1}, 1.0) - Vec3{0.8, 0.2, 0.1}) < 1e-15);
    CHECK(norm(specular_color({0.5, 0.5, 0.5}, 0.5) - Vec3{0.27, 0.27, 0.27}) < 1e-15);
    CHECK_THROWS_AS(specular_color({0.5, 0.5, 0.5}, 1.5), std::invalid_argument);
    CHECK_THROWS_AS(specular_color({0.5, 0.5, 0.5}, -0.1), std::invalid_argument);
}

TEST_CASE("specular color stays within its energy bounds") {
    Rng rng(11006);
    for (int i = 0; i < 2000; ++i) {
        Vec3 kd{rng.uniform(), rng.uniform(), rng.uniform()};
        double m = rng.uniform();
        Vec3 ks = specular_color(kd, m);
        for (int c = 0; c < 3; ++c) {
            CHECK(ks[c] >= 0.04 * (1.0 - m) - 1e-15);
            CHECK(ks[c] <= std::max(0.04, kd[c]) + 1e-15);
        }
    }
}

TEST_CASE("normal decode jacobian matches finite differences") {
    Rng rng(11007);
    for (int trial = 0; trial < 200; ++trial) {
        Vec3 raw = rng.uniform_in_cube(0.8);
        Mat3 jac = decode_normal_jacobian(raw);
        const double h = 1e-6;
        for (int c = 0; c < 3; ++c) {
            Vec3 plus = raw, minus = raw;
            plus[c] += h;
            minus[c] -= h;
            Vec3 fd = (decode_normal(plus) - decode_normal(minus)) / (2 * h);
            for (int r = 0; r < 3; ++r) CHECK(std::abs(jac(r, c) - fd[r]) < 1e-5);
        }
    }
}

TEST_CASE("baking a constant field gives constant charts") {
    TextureField tex(4, Aabb::cube(1.0));
    tex.fill_constant({0.25, 0.5, 0.75}, 0.3, 0.1);
    TriMesh mesh = make_icosphere(1);
    BakedMaps maps = bake_texture_maps(tex, mesh, 64);
    CHECK(maps.skipped_degenerate == 0);
    // Sample inside a few charts.
    for (int f = 0; f < 3; ++f) {
        const auto& uv = maps.face_uvs[f];
        int px = int(uv[0] * 64), py = int(uv[1] * 64);
        CHECK(maps.diffuse.at(px, py, 0) == doctest::Approx(0.25).epsilon(1e-6));
        CHECK(maps.diffuse.at(px, py, 2) == doctest::Approx(0.75).epsilon(1e-6));
        CHECK(maps.roughness_metalness.at(px, py, 0) == doctest::Approx(0.3).epsilon(1e-6));
    }
}

TEST_CASE("bake round-trip reproduces the field within quantization") {
    TextureField tex(4, Aabb::cube(1.0));
    Rng rng(11008);
    for (auto& p : tex.params()) p = rng.uniform(-0.5, 0.5);
    TriMesh mesh = make_icosphere(0);
    const int res = 256;
    BakedMaps maps = bake_texture_maps(tex, mesh, res);

    auto bilinear = [&](const Image& img, double u, double v, int c) {
        double x = u * res - 0.5, y = v * res - 0.5;
        int x0 = std::clamp(int(std::floor(x)), 0, res - 1);
        int y0 = std::clamp(int(std::floor(y)), 0, res - 1);
        int x1 = std::min(x0 + 1, res - 1), y1 = std::min(y0 + 1, res - 1);
        double tx = std::clamp(x - x0, 0.0, 1.0), ty = std::clamp(y - y0, 0.0, 1.0);
        return (1 - tx) * (1 - ty) * img.at(x0, y0, c) + tx * (1 - ty) * img.at(x1, y0, c) +
               (1 - tx) * ty * img.at(x0, y1, c) + tx * ty * img.at(x1, y1, c);
    };

    for (int f = 0; f < int(mesh.faces.size()); ++f) {
        const auto& uvs = maps.face_uvs[f];
        const auto& tri = mesh.faces[f];
        // Sample at the chart's interior barycenter.
        double b1 = 0.3, b2 = 0.3;
        double u = uvs[0] + b1 * (uvs[2] - uvs[0]) + b2 * (uvs[4] - uvs[0]);
        double v = uvs[1] + b1 * (uvs[3] - uvs[1]) + b2 * (uvs[5] - uvs[1]);
        Vec3 p = mesh.positions[tri[0]] * (1 - b1 - b2) + mesh.positions[tri[1]] * b1 +
                 mesh.positions[tri[2]] * b2;
        Material m = tex.eval(p);
        // Baked texels quantize on write; allow interpolation slack on top.
        for (int c = 0; c < 3; ++c)
            CHECK(std::abs(bilinear(maps.diffuse, u, v, c) - m.diffuse[c]) < 1.0 / 255.0 + 0.02);
    }
}

TEST_CASE("single-texel bake stores the sample point's material") {
    TextureField tex(2, Aabb::cube(1.0));
    tex.fill_constant({0.4, 0.4, 0.4}, 0.5, 0.0);
    TriMesh mesh;
    mesh.positions = {{0, 0, 0}, {0.5, 0, 0}, {0, 0.5, 0}};
    mesh.faces = {{0, 1, 2}};
    mesh.face_part = {Part::Base};
    BakedMaps maps = bake_texture_maps(tex, mesh, 1);
    CHECK(maps.diffuse.at(0, 0, 0) == doctest::Approx(0.4).epsilon(1e-9));
}

TEST_CASE("degenerate faces are skipped with a count") {
    TextureField tex(2, Aabb::cube(1.0));
    TriMesh mesh;
    mesh.positions = {{0, 0, 0}, {1, 0, 0}, {2, 0, 0}, {0, 1, 0}};
    mesh.faces = {{0, 1, 2}, {0, 1, 3}};  // first face is collinear
    mesh.face_part = {Part::Base, Part::Base};
    BakedMaps maps = bake_texture_maps(tex, mesh, 32);
    CHECK(maps.skipped_degenerate == 1);
}

TEST_CASE("content hash changes with any parameter") {
    TextureField a(2, Aabb::cube(1.0)), b(2, Aabb::cube(1.0));
    a.fill_constant({0.5, 0.5, 0.5}, 0.5, 0.0);
    b.fill_constant({0.5, 0.5, 0.5}, 0.5, 0.0);
    CHECK(a.content_hash() == b.content_hash());
    b.params()[17] += 1e-12;
    CHECK(a.content_hash() != b.content_hash());
}

TEST_SUITE_END();
