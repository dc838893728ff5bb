#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "focalfuse/image.hpp"
#include "focalfuse/math.hpp"
#include "focalfuse/rng.hpp"
#include "focalfuse/texture.hpp"

namespace focalfuse {

struct Camera {
    double radius = 3.0;
    double elevation = 0.0;  // radians, 0 = equator
    double azimuth = 0.0;    // radians in [0, 2pi)
    Vec3 target{0.0, 0.0, 0.0};
    double fov_y = 0.7853981633974483;  // vertical field of view, radians
    int width = 256;
    int height = 256;

    Vec3 eye() const;
    // Orthonormal view basis.
    Vec3 forward() const;
    Vec3 right() const;
    Vec3 up() const;
};

struct CameraRanges {
    double r_min = 3.0, r_max = 3.0;
    double theta_min = -0.17453292519943295;  // -pi/18
    double theta_max = 0.7853981633974483;    // pi/4
};

/// Batch of s*l viewpoints. The azimuth circle splits into l segments; the
/// k-th camera draws its azimuth uniformly from segment k mod l, radius and
/// elevation uniformly from their ranges.
std::vector<Camera> sample_cameras(int s, int l, const CameraRanges& ranges, double fov_y,
                                   int width, int height, Rng& rng);

/// Fixed evaluation pose: elevation pi/4, radius from the ranges' upper end.
Camera eval_camera(double azimuth, const CameraRanges& ranges, double fov_y, int width,
                   int height);

enum class PdmLabel : uint8_t { Background = 0, Base = 1, Editable = 2 };

struct RenderBuffers {
    int width = 0, height = 0;
    std::vector<double> depth;          // view-axis distance, +inf for background
    std::vector<int32_t> face_id;       // -1 for background
    std::vector<double> bary;           // 2 per pixel, perspective-correct (b1, b2)
    std::vector<double> normal;         // 3 per pixel, zero for background
    std::vector<uint8_t> object_mask;   // 1 where covered
    std::vector<PdmLabel> pdm;

    size_t pixel_count() const { return size_t(width) * height; }
    Image normal_image() const;
    Image mask_image() const;
    std::vector<uint8_t> editable_mask() const;
};

struct RenderConfig {
    bool smooth_normals = false;        // flat face normals by default
    bool camera_space_normals = false;  // world space by default
    bool enable_specular = true;
    Vec3 background{0.0, 0.0, 0.0};
};

/// Z-buffered perspective rasterization. Faces are filled two-sided; the
/// pixel-wise discriminative mask records the winning face's provenance.
RenderBuffers rasterize(const TriMesh& mesh, const Camera& cam, const RenderConfig& config = {});

/// Directional discretization of an environment light; fixed, never trained.
struct EnvLight {
    std::vector<Vec3> directions;   // unit
    std::vector<Vec3> radiance;     // >= 0
    std::vector<double> solid_angle;

    static EnvLight constant(const Vec3& radiance, int n_directions);
    static EnvLight from_latlong(const Image& img);
};

/// Per-pixel physically based shading against the environment samples:
/// diffuse lobe k_d/pi * (1 - metalness) plus a normalized Phong specular
/// lobe with color (1-m)*0.04 + m*k_d. Texture slot selection per face via
/// mesh.face_texture (empty = slot 0 for all faces).
Image shade(const RenderBuffers& buffers, const TriMesh& mesh,
            std::span<const TextureField* const> textures, const EnvLight& light,
            const Camera& cam, const RenderConfig& config);

/// Same forward path, accumulating d(loss)/d(texture raw params) for the
/// texture at `trainable_slot` from per-pixel loss gradients. Pixels where
/// `pixel_mask` is zero are skipped.
void shade_backward(const RenderBuffers& buffers, const TriMesh& mesh,
                    std::span<const TextureField* const> textures, int trainable_slot,
                    const EnvLight& light, const Camera& cam, const RenderConfig& config,
                    const Image& pixel_grad, std::span<const uint8_t> pixel_mask,
                    std::vector<double>& param_grad);

/// Dual-path composition: base pixels from base_img, editable pixels from
/// edit_img, everything else the background color. Gradients are only ever
/// propagated into edit_img by callers; the base path stays frozen.
Image compose(const Image& base_img, const Image& edit_img, const RenderBuffers& buffers,
              const Vec3& background);

/// Concatenates a normal map (3ch) with an object mask (1ch) and box-filters
/// the stack down to 64x64x4. Inputs must be at least 64 pixels on each side.
Image coarse_shape_encoding(const Image& normal_map, const Image& object_mask);

struct NormalMapObjective {
    double value = 0.0;
    std::vector<Vec3> d_positions;  // w.r.t. mesh vertex positions
};

/// Mean squared difference between the flat-shaded normal map of `mesh` under
/// fixed visibility (`buffers`) and a target normal map, averaged over all
/// pixels and channels. When `coarse` is set both sides pass through
/// coarse_shape_encoding with their object masks first. Differentiable in the
/// mesh vertex positions at fixed coverage.
NormalMapObjective normal_map_objective(const RenderBuffers& buffers, const TriMesh& mesh,
                                        const Image& target_normals, const Image& target_mask,
                                        bool coarse);

}  // namespace focalfuse
