#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "focalfuse/math.hpp"

namespace focalfuse {

struct RegionSpec {
    Vec3 stretch{1.0, 1.0, 1.0};
    Vec3 rotation_deg{};
    Vec3 translation{};  // world units of the base mesh
};

/// Analytic target for the geometry-stage stand-in objective.
struct TargetPrimitive {
    enum class Kind { Sphere, Box, RegionUnion } kind = Kind::RegionUnion;
    Vec3 center{};
    double radius = 0.5;
    Vec3 half_extents{0.25, 0.25, 0.25};
};

/// Target for the appearance-stage stand-in objective.
struct AppearanceTarget {
    enum class Kind { ConstantColor, ImageFile, BaseRender } kind = Kind::ConstantColor;
    Vec3 color{0.8, 0.3, 0.2};
    std::string image_path;
};

struct EnvSpec {
    enum class Kind { Constant, LatLong } kind = Kind::Constant;
    double radiance = 1.0;
    int samples = 128;
    std::string image_path;
};

struct SceneConfig {
    std::string base_mesh;
    std::vector<RegionSpec> regions;

    int grid_resolution = 32;
    double half_extent = 1.0;
    double mesh_fit = 0.8;

    int init_iterations = 1500;
    int init_batch = 10240;

    int geometry_steps = 600;
    double geometry_lr = 1e-3;
    std::string geometry_objective = "field";  // or "image"
    TargetPrimitive geometry_target;
    double offset_margin = 0.0;

    int appearance_steps = 400;
    double appearance_lr = 1e-2;
    AppearanceTarget appearance_target;
    bool style_consistency_enabled = true;
    int style_interior_samples = 256;
    double boundary_band_cells = 1.5;
    double delta_scale = 0.01;

    double lambda_gf = 1000.0;
    double lambda_ca = 100.0;
    double lambda_sc = 10.0;
    double lambda_b = 100.0;
    double sigma1 = 0.05;
    double sigma2 = 0.01;
    double xi = 0.005;
    double blend_k = 0.15;

    int cam_s = 1;
    int cam_l = 4;
    double r_min = 3.0, r_max = 3.0;
    double theta_min_deg = -10.0, theta_max_deg = 45.0;
    double fov_deg = 45.0;
    int image_resolution = 128;

    int texture_resolution = 32;
    Vec3 base_color{0.7, 0.7, 0.7};
    double base_roughness = 0.6;
    double base_metalness = 0.0;

    EnvSpec env;
    bool enable_specular = true;
    bool smooth_normals = false;
    std::string normal_space = "world";  // or "camera"
    std::string image_format = "png";    // or "ppm"
    Vec3 background{};
    int render_dump_every = 0;
    bool dump_normal_maps = false;
    int checkpoint_percent = 10;

    double schedule_t0 = 0.02;
    double schedule_t_final_geometry = 0.35;
    double schedule_t_final_appearance = 0.98;

    uint64_t seed = 1;
    std::string out_dir = "out";
    std::string progressive_from;  // previous run directory; empty for a fresh edit
};

/// "desk" (small, fast defaults) or "paper" (full-scale constants).
void apply_preset(SceneConfig& config, const std::string& preset);

/// Strict JSON loader: unknown keys are rejected, paths are checked, and all
/// weights must be nonnegative. Paths in the file resolve relative to its
/// directory.
SceneConfig load_scene(const std::string& path, const std::string& preset = "desk");

/// Fully-resolved snapshot of a config (defaults materialized); parsing it
/// back yields the identical configuration.
std::string config_to_json(const SceneConfig& config);

void validate_config(const SceneConfig& config);

}  // namespace focalfuse
