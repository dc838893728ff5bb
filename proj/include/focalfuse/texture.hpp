#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "focalfuse/image.hpp"
#include "focalfuse/math.hpp"
#include "focalfuse/tetgrid.hpp"

namespace focalfuse {

struct Material {
    Vec3 diffuse;          // k_d, in [0,1]
    double roughness = 0;  // in [0,1]
    double metalness = 0;  // in [0,1]
    Vec3 normal_ts{0, 0, 1};  // unit tangent-space normal
};

/// Dense trilinear field of raw material parameters over a box domain, eight
/// channels per lattice point: diffuse rgb, roughness, metalness, normal
/// offset xyz. Diffuse and roughness/metalness are squashed through a
/// logistic per lattice point and interpolated afterwards (so interpolated
/// values are convex combinations of in-range corner values); the normal
/// offset is interpolated raw and then decoded against the +Z axis.
class TextureField {
public:
    static constexpr int kChannels = 8;

    TextureField() = default;
    TextureField(int resolution, const Aabb& domain);

    int resolution() const { return resolution_; }
    const Aabb& domain() const { return domain_; }

    std::vector<double>& params() { return params_; }
    const std::vector<double>& params() const { return params_; }

    bool trainable = true;

    /// Fills every lattice point from one material: logits of the clamped
    /// diffuse/roughness/metalness, zero normal offset.
    void fill_constant(const Vec3& diffuse, double roughness, double metalness);

    Material eval(const Vec3& p) const;

    /// Corner rows and trilinear weights participating in eval at p.
    struct Stencil {
        std::array<int, 8> corner;  // row index (times kChannels for the first channel)
        std::array<double, 8> weight;
    };
    Stencil stencil(const Vec3& p) const;

    /// Raw (pre-squash) interpolated channels; affine fields reproduce
    /// exactly through this path.
    std::array<double, kChannels> eval_raw(const Vec3& p) const;

    /// d(material channel)/d(raw param) factors for gradient accumulation:
    /// diffuse/roughness/metalness channel c at corner i scales by
    /// weight[i] * logistic'(raw). The normal offset channels scale by
    /// weight[i] through the decode Jacobian (handled by callers via
    /// decode_normal_jacobian).
    double squash_deriv(int corner_row, int channel) const;

    uint64_t content_hash() const;

private:
    int resolution_ = 0;
    Aabb domain_;
    std::vector<double> params_;
};

/// Decoded tangent-space normal from an interpolated raw offset t:
/// normalize((t.x, t.y, 1 + t.z)).
Vec3 decode_normal(const Vec3& raw_offset);

/// Jacobian of decode_normal as a row-major 3x3 matrix.
Mat3 decode_normal_jacobian(const Vec3& raw_offset);

/// Specular highlight color: (1 - m) * 0.04 + m * k_d. m must be in [0,1].
Vec3 specular_color(const Vec3& diffuse, double metalness);

struct BakedMaps {
    Image diffuse;      // written as sRGB
    Image roughness_metalness;  // r = roughness, g = metalness, linear
    Image normal;       // xyz in [0,1], linear
    std::vector<std::array<double, 6>> face_uvs;  // (u,v) per corner per face
    int skipped_degenerate = 0;
};

/// Rasterizes the field into per-face UV charts. Every face gets its own
/// right-triangle block in a square atlas.
BakedMaps bake_texture_maps(const TextureField& field, const TriMesh& mesh, int resolution);

}  // namespace focalfuse
