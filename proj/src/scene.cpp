#include "focalfuse/scene.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace focalfuse {

using nlohmann::json;

void apply_preset(SceneConfig& c, const std::string& preset) {
    if (preset == "desk") {
        c.grid_resolution = 32;
        c.geometry_steps = 600;
        c.appearance_steps = 400;
        c.init_iterations = 1500;
    } else if (preset == "paper") {
        c.grid_resolution = 64;
        c.geometry_steps = 3000;
        c.appearance_steps = 2000;
        c.init_iterations = 15000;
        c.init_batch = 10240;
    } else {
        throw std::invalid_argument("unknown preset: " + preset);
    }
}

namespace {

int line_of_offset(const std::string& text, size_t byte) {
    int line = 1;
    for (size_t i = 0; i < byte && i < text.size(); ++i)
        if (text[i] == '\n') ++line;
    return line;
}

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error("scene config: " + msg); }

void check_keys(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (!allowed.count(it.key())) fail("unknown key '" + it.key() + "' in " + where);
}

Vec3 get_vec3(const json& j, const std::string& where) {
    if (!j.is_array() || j.size() != 3) fail(where + " must be an array of 3 numbers");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

template <typename T>
void read_if(const json& obj, const char* key, T& out) {
    if (obj.contains(key)) out = obj.at(key).get<T>();
}

void read_vec3_if(const json& obj, const char* key, Vec3& out) {
    if (obj.contains(key)) out = get_vec3(obj.at(key), key);
}

std::string resolve_path(const std::filesystem::path& base_dir, const std::string& p) {
    std::filesystem::path fp(p);
    if (fp.is_absolute()) return fp.lexically_normal().string();
    // Snapshots get re-read from other directories, so resolved paths must
    // not depend on the working directory.
    return std::filesystem::absolute(base_dir / fp).lexically_normal().string();
}

}  // namespace

void validate_config(const SceneConfig& c) {
    if (c.base_mesh.empty()) fail("base_mesh is required");
    if (!std::filesystem::exists(c.base_mesh)) fail("base_mesh does not exist: " + c.base_mesh);
    if (c.regions.empty()) fail("at least one focal region is required");
    for (const auto& r : c.regions)
        if (r.stretch.x <= 0 || r.stretch.y <= 0 || r.stretch.z <= 0)
            fail("region stretch components must be positive");
    if (c.grid_resolution < 1) fail("grid.resolution must be >= 1");
    if (c.half_extent <= 0) fail("grid.half_extent must be positive");
    if (c.mesh_fit <= 0 || c.mesh_fit > 1.0) fail("grid.mesh_fit must be in (0, 1]");
    for (double w : {c.lambda_gf, c.lambda_ca, c.lambda_sc, c.lambda_b})
        if (w < 0) fail("loss weights must be nonnegative");
    for (double w : {c.sigma1, c.sigma2, c.xi, c.blend_k})
        if (w <= 0) fail("sigma1, sigma2, xi and blend_k must be positive");
    if (c.cam_s < 1 || c.cam_l < 1) fail("cameras.s and cameras.l must be >= 1");
    if (c.r_min > c.r_max) fail("cameras.r_min must not exceed r_max");
    if (c.theta_min_deg > c.theta_max_deg) fail("cameras.theta range is empty");
    if (c.image_resolution < 1) fail("cameras.resolution must be >= 1");
    if (c.texture_resolution < 1) fail("texture.resolution must be >= 1");
    if (c.geometry_objective != "field" && c.geometry_objective != "image")
        fail("geometry.objective must be 'field' or 'image'");
    if (c.normal_space != "world" && c.normal_space != "camera")
        fail("render.normal_space must be 'world' or 'camera'");
    if (c.image_format != "png" && c.image_format != "ppm")
        fail("render.image_format must be 'png' or 'ppm'");
    if (c.env.kind == EnvSpec::Kind::LatLong && !std::filesystem::exists(c.env.image_path))
        fail("render.env image does not exist: " + c.env.image_path);
    if (c.appearance_target.kind == AppearanceTarget::Kind::ImageFile &&
        !std::filesystem::exists(c.appearance_target.image_path))
        fail("appearance.target image does not exist: " + c.appearance_target.image_path);
    if (c.schedule_t0 > c.schedule_t_final_geometry ||
        c.schedule_t0 > c.schedule_t_final_appearance)
        fail("schedule.t0 must not exceed the final time-steps");
    if (c.geometry_steps < 0 || c.appearance_steps < 0 || c.init_iterations < 0)
        fail("step counts must be nonnegative");
    if (c.init_batch < 1) fail("init.batch must be >= 1");
    if (c.checkpoint_percent < 1 || c.checkpoint_percent > 100)
        fail("checkpoint_percent must be in [1, 100]");
}

SceneConfig load_scene(const std::string& path, const std::string& preset) {
    std::ifstream f(path);
    if (!f) fail("cannot open " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    const std::string text = ss.str();

    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        fail("parse error in " + path + " at line " + std::to_string(line_of_offset(text, e.byte)) +
             ": " + e.what());
    }
    if (!root.is_object()) fail("top level must be an object");

    SceneConfig c;
    apply_preset(c, preset);
    const auto base_dir = std::filesystem::path(path).parent_path();

    check_keys(root,
               {"base_mesh", "regions", "grid", "init", "geometry", "appearance", "losses",
                "cameras", "texture", "render", "schedule", "seed", "out", "progressive_from"},
               "top level");

    if (root.contains("base_mesh"))
        c.base_mesh = resolve_path(base_dir, root.at("base_mesh").get<std::string>());
    read_if(root, "seed", c.seed);
    read_if(root, "out", c.out_dir);
    if (root.contains("progressive_from"))
        c.progressive_from = resolve_path(base_dir, root.at("progressive_from").get<std::string>());

    if (root.contains("regions")) {
        const json& regions = root.at("regions");
        if (!regions.is_array()) fail("regions must be an array");
        for (const auto& rj : regions) {
            check_keys(rj, {"stretch", "rotation_deg", "translation"}, "regions[]");
            RegionSpec r;
            read_vec3_if(rj, "stretch", r.stretch);
            read_vec3_if(rj, "rotation_deg", r.rotation_deg);
            read_vec3_if(rj, "translation", r.translation);
            c.regions.push_back(r);
        }
    }

    if (root.contains("grid")) {
        const json& g = root.at("grid");
        check_keys(g, {"resolution", "half_extent", "mesh_fit"}, "grid");
        read_if(g, "resolution", c.grid_resolution);
        read_if(g, "half_extent", c.half_extent);
        read_if(g, "mesh_fit", c.mesh_fit);
    }

    if (root.contains("init")) {
        const json& g = root.at("init");
        check_keys(g, {"iterations", "batch"}, "init");
        read_if(g, "iterations", c.init_iterations);
        read_if(g, "batch", c.init_batch);
    }

    if (root.contains("geometry")) {
        const json& g = root.at("geometry");
        check_keys(g, {"steps", "learning_rate", "objective", "target", "offset_margin"},
                   "geometry");
        read_if(g, "steps", c.geometry_steps);
        read_if(g, "learning_rate", c.geometry_lr);
        read_if(g, "objective", c.geometry_objective);
        read_if(g, "offset_margin", c.offset_margin);
        if (g.contains("target")) {
            const json& t = g.at("target");
            check_keys(t, {"kind", "center", "radius", "half_extents"}, "geometry.target");
            std::string kind = t.value("kind", "region_union");
            if (kind == "sphere") c.geometry_target.kind = TargetPrimitive::Kind::Sphere;
            else if (kind == "box") c.geometry_target.kind = TargetPrimitive::Kind::Box;
            else if (kind == "region_union") c.geometry_target.kind = TargetPrimitive::Kind::RegionUnion;
            else fail("geometry.target.kind must be sphere, box or region_union");
            read_vec3_if(t, "center", c.geometry_target.center);
            read_if(t, "radius", c.geometry_target.radius);
            read_vec3_if(t, "half_extents", c.geometry_target.half_extents);
        }
    }

    if (root.contains("appearance")) {
        const json& g = root.at("appearance");
        check_keys(g,
                   {"steps", "learning_rate", "target", "style_consistency", "interior_samples",
                    "boundary_band_cells", "delta_scale"},
                   "appearance");
        read_if(g, "steps", c.appearance_steps);
        read_if(g, "learning_rate", c.appearance_lr);
        read_if(g, "style_consistency", c.style_consistency_enabled);
        read_if(g, "interior_samples", c.style_interior_samples);
        read_if(g, "boundary_band_cells", c.boundary_band_cells);
        read_if(g, "delta_scale", c.delta_scale);
        if (g.contains("target")) {
            const json& t = g.at("target");
            check_keys(t, {"kind", "color", "path"}, "appearance.target");
            std::string kind = t.value("kind", "constant");
            if (kind == "constant") c.appearance_target.kind = AppearanceTarget::Kind::ConstantColor;
            else if (kind == "image") c.appearance_target.kind = AppearanceTarget::Kind::ImageFile;
            else if (kind == "base_render") c.appearance_target.kind = AppearanceTarget::Kind::BaseRender;
            else fail("appearance.target.kind must be constant, image or base_render");
            read_vec3_if(t, "color", c.appearance_target.color);
            if (t.contains("path"))
                c.appearance_target.image_path =
                    resolve_path(base_dir, t.at("path").get<std::string>());
        }
    }

    if (root.contains("losses")) {
        const json& g = root.at("losses");
        check_keys(g,
                   {"lambda_gf", "lambda_ca", "lambda_sc", "lambda_b", "sigma1", "sigma2", "xi",
                    "blend_k"},
                   "losses");
        read_if(g, "lambda_gf", c.lambda_gf);
        read_if(g, "lambda_ca", c.lambda_ca);
        read_if(g, "lambda_sc", c.lambda_sc);
        read_if(g, "lambda_b", c.lambda_b);
        read_if(g, "sigma1", c.sigma1);
        read_if(g, "sigma2", c.sigma2);
        read_if(g, "xi", c.xi);
        read_if(g, "blend_k", c.blend_k);
    }

    if (root.contains("cameras")) {
        const json& g = root.at("cameras");
        check_keys(g,
                   {"s", "l", "r_min", "r_max", "theta_min_deg", "theta_max_deg", "fov_deg",
                    "resolution"},
                   "cameras");
        read_if(g, "s", c.cam_s);
        read_if(g, "l", c.cam_l);
        read_if(g, "r_min", c.r_min);
        read_if(g, "r_max", c.r_max);
        read_if(g, "theta_min_deg", c.theta_min_deg);
        read_if(g, "theta_max_deg", c.theta_max_deg);
        read_if(g, "fov_deg", c.fov_deg);
        read_if(g, "resolution", c.image_resolution);
    }

    if (root.contains("texture")) {
        const json& g = root.at("texture");
        check_keys(g, {"resolution", "base_color", "base_roughness", "base_metalness"}, "texture");
        read_if(g, "resolution", c.texture_resolution);
        read_vec3_if(g, "base_color", c.base_color);
        read_if(g, "base_roughness", c.base_roughness);
        read_if(g, "base_metalness", c.base_metalness);
    }

    if (root.contains("render")) {
        const json& g = root.at("render");
        check_keys(g,
                   {"env", "specular", "smooth_normals", "normal_space", "image_format",
                    "background", "dump_every", "dump_normal_maps"},
                   "render");
        if (g.contains("env")) {
            const json& e = g.at("env");
            check_keys(e, {"kind", "radiance", "samples", "path"}, "render.env");
            std::string kind = e.value("kind", "constant");
            if (kind == "constant") c.env.kind = EnvSpec::Kind::Constant;
            else if (kind == "latlong") c.env.kind = EnvSpec::Kind::LatLong;
            else fail("render.env.kind must be constant or latlong");
            read_if(e, "radiance", c.env.radiance);
            read_if(e, "samples", c.env.samples);
            if (e.contains("path"))
                c.env.image_path = resolve_path(base_dir, e.at("path").get<std::string>());
        }
        read_if(g, "specular", c.enable_specular);
        read_if(g, "smooth_normals", c.smooth_normals);
        read_if(g, "normal_space", c.normal_space);
        read_if(g, "image_format", c.image_format);
        read_vec3_if(g, "background", c.background);
        read_if(g, "dump_every", c.render_dump_every);
        read_if(g, "dump_normal_maps", c.dump_normal_maps);
    }

    if (root.contains("schedule")) {
        const json& g = root.at("schedule");
        check_keys(g, {"t0", "t_final_geometry", "t_final_appearance"}, "schedule");
        read_if(g, "t0", c.schedule_t0);
        read_if(g, "t_final_geometry", c.schedule_t_final_geometry);
        read_if(g, "t_final_appearance", c.schedule_t_final_appearance);
    }

    validate_config(c);
    return c;
}

std::string config_to_json(const SceneConfig& c) {
    auto vec = [](const Vec3& v) { return json::array({v.x, v.y, v.z}); };
    json root;
    root["base_mesh"] = c.base_mesh;
    root["seed"] = c.seed;
    root["out"] = c.out_dir;
    if (!c.progressive_from.empty()) root["progressive_from"] = c.progressive_from;
    json regions = json::array();
    for (const auto& r : c.regions)
        regions.push_back({{"stretch", vec(r.stretch)},
                           {"rotation_deg", vec(r.rotation_deg)},
                           {"translation", vec(r.translation)}});
    root["regions"] = regions;
    root["grid"] = {{"resolution", c.grid_resolution},
                    {"half_extent", c.half_extent},
                    {"mesh_fit", c.mesh_fit}};
    root["init"] = {{"iterations", c.init_iterations}, {"batch", c.init_batch}};
    json target;
    switch (c.geometry_target.kind) {
        case TargetPrimitive::Kind::Sphere:
            target = {{"kind", "sphere"}, {"center", vec(c.geometry_target.center)},
                      {"radius", c.geometry_target.radius}};
            break;
        case TargetPrimitive::Kind::Box:
            target = {{"kind", "box"}, {"center", vec(c.geometry_target.center)},
                      {"half_extents", vec(c.geometry_target.half_extents)}};
            break;
        case TargetPrimitive::Kind::RegionUnion:
            target = {{"kind", "region_union"}};
            break;
    }
    root["geometry"] = {{"steps", c.geometry_steps},
                        {"learning_rate", c.geometry_lr},
                        {"objective", c.geometry_objective},
                        {"target", target},
                        {"offset_margin", c.offset_margin}};
    json atarget;
    switch (c.appearance_target.kind) {
        case AppearanceTarget::Kind::ConstantColor:
            atarget = {{"kind", "constant"}, {"color", vec(c.appearance_target.color)}};
            break;
        case AppearanceTarget::Kind::ImageFile:
            atarget = {{"kind", "image"}, {"path", c.appearance_target.image_path}};
            break;
        case AppearanceTarget::Kind::BaseRender:
            atarget = {{"kind", "base_render"}};
            break;
    }
    root["appearance"] = {{"steps", c.appearance_steps},
                          {"learning_rate", c.appearance_lr},
                          {"target", atarget},
                          {"style_consistency", c.style_consistency_enabled},
                          {"interior_samples", c.style_interior_samples},
                          {"boundary_band_cells", c.boundary_band_cells},
                          {"delta_scale", c.delta_scale}};
    root["losses"] = {{"lambda_gf", c.lambda_gf}, {"lambda_ca", c.lambda_ca},
                      {"lambda_sc", c.lambda_sc}, {"lambda_b", c.lambda_b},
                      {"sigma1", c.sigma1},       {"sigma2", c.sigma2},
                      {"xi", c.xi},               {"blend_k", c.blend_k}};
    root["cameras"] = {{"s", c.cam_s},
                       {"l", c.cam_l},
                       {"r_min", c.r_min},
                       {"r_max", c.r_max},
                       {"theta_min_deg", c.theta_min_deg},
                       {"theta_max_deg", c.theta_max_deg},
                       {"fov_deg", c.fov_deg},
                       {"resolution", c.image_resolution}};
    root["texture"] = {{"resolution", c.texture_resolution},
                       {"base_color", vec(c.base_color)},
                       {"base_roughness", c.base_roughness},
                       {"base_metalness", c.base_metalness}};
    json env;
    if (c.env.kind == EnvSpec::Kind::Constant)
        env = {{"kind", "constant"}, {"radiance", c.env.radiance}, {"samples", c.env.samples}};
    else
        env = {{"kind", "latlong"}, {"path", c.env.image_path}};
    root["render"] = {{"env", env},
                      {"specular", c.enable_specular},
                      {"smooth_normals", c.smooth_normals},
                      {"normal_space", c.normal_space},
                      {"image_format", c.image_format},
                      {"background", vec(c.background)},
                      {"dump_every", c.render_dump_every},
                      {"dump_normal_maps", c.dump_normal_maps}};
    root["schedule"] = {{"t0", c.schedule_t0},
                        {"t_final_geometry", c.schedule_t_final_geometry},
                        {"t_final_appearance", c.schedule_t_final_appearance}};
    return root.dump(2) + "\n";
}

}  // namespace focalfuse
