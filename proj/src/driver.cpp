#include "focalfuse/driver.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>

namespace focalfuse {

namespace {
constexpr double kPi = 3.14159265358979323846;
constexpr double kDegToRad = kPi / 180.0;
}  // namespace

void AdamState::step(std::span<double> params, std::span<const double> grad, double lr) {
    if (params.size() != m_.size() || grad.size() != m_.size())
        throw std::invalid_argument("adam: size mismatch");
    constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1, t_);
    const double bc2 = 1.0 - std::pow(beta2, t_);
    for (size_t i = 0; i < params.size(); ++i) {
        m_[i] = beta1 * m_[i] + (1.0 - beta1) * grad[i];
        v_[i] = beta2 * v_[i] + (1.0 - beta2) * grad[i] * grad[i];
        params[i] -= lr * (m_[i] / bc1) / (std::sqrt(v_[i] / bc2) + eps);
    }
}

int coarse_phase_steps(int total_steps) { return (2 * total_steps + 2) / 3; }

std::vector<double> EditSession::merged_field() const {
    std::vector<double> u(grid.vertex_count());
    for (size_t v = 0; v < grid.vertex_count(); ++v)
        u[v] = soft_union(grid.base_sdf[v], grid.edit_sdf[v], config.blend_k);
    return u;
}

TriMesh EditSession::extract_merged() {
    std::vector<double> u = merged_field();
    TriMesh mesh = marching_tetrahedra(grid, u, Part::Editable);
    mesh.face_texture.assign(mesh.faces.size(), 0);

    // A crossing belongs to the untouched frozen surface iff its stored scalar
    // pair equals the frozen field at the parents and the parents are
    // undeformed; such values survive the union bit-for-bit wherever the
    // editable field is inactive.
    auto crossing_is_base = [&](int vtx) {
        const CrossingInfo& ci = mesh.crossings[vtx];
        auto base_value = [&](int parent) {
            double s = grid.base_sdf[parent];
            return s == 0.0 ? 1e-12 : s;
        };
        return ci.value_a == base_value(ci.parent_a) && ci.value_b == base_value(ci.parent_b) &&
               grid.offsets[ci.parent_a] == Vec3{} && grid.offsets[ci.parent_b] == Vec3{};
    };

    for (size_t f = 0; f < mesh.faces.size(); ++f) {
        const auto& tri = mesh.faces[f];
        bool base = crossing_is_base(tri[0]) && crossing_is_base(tri[1]) && crossing_is_base(tri[2]);
        mesh.face_part[f] = base ? Part::Base : Part::Editable;
        if (base && frozen_label_sdf && !frozen_label_mesh.face_texture.empty()) {
            int nearest = frozen_label_sdf->nearest_face(mesh.face_centroid(int(f)));
            mesh.face_texture[f] = frozen_label_mesh.face_texture[nearest];
        }
    }
    return mesh;
}

std::vector<double> EditSession::geometry_target_values() const {
    std::vector<double> t(grid.vertex_count());
    for (size_t v = 0; v < grid.vertex_count(); ++v) {
        const Vec3& p = grid.vertices[v];
        switch (config.geometry_target.kind) {
            case TargetPrimitive::Kind::Sphere:
                t[v] = sphere_sdf(config.geometry_target.center, config.geometry_target.radius, p);
                break;
            case TargetPrimitive::Kind::Box:
                t[v] = box_sdf(config.geometry_target.center, config.geometry_target.half_extents, p);
                break;
            case TargetPrimitive::Kind::RegionUnion:
                t[v] = region_union_sdf(regions, p);
                break;
        }
    }
    return t;
}

namespace {

uint64_t fnv1a(const void* data, size_t bytes, uint64_t h = 1469598103934665603ULL) {
    const auto* b = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < bytes; ++i) {
        h ^= b[i];
        h *= 1099511628211ULL;
    }
    return h;
}

}  // namespace

uint64_t EditSession::compute_base_field_hash() const {
    return fnv1a(grid.base_sdf.data(), grid.base_sdf.size() * sizeof(double));
}

uint64_t EditSession::compute_frozen_tex_hash() const {
    uint64_t h = 1469598103934665603ULL;
    for (const auto& tex : frozen_textures)
        h = fnv1a(tex.params().data(), tex.params().size() * sizeof(double), h);
    return h;
}

void EditSession::verify_frozen_blocks() const {
    if (compute_base_field_hash() != base_field_hash)
        throw std::logic_error("frozen base field was mutated");
    if (compute_frozen_tex_hash() != frozen_tex_hash)
        throw std::logic_error("frozen textures were mutated");
}

EnvLight make_env_light(const SceneConfig& config) {
    if (config.env.kind == EnvSpec::Kind::LatLong) {
        Image img = config.env.image_path.ends_with(".pfm") ? read_pfm(config.env.image_path)
                                                            : read_ppm(config.env.image_path);
        return EnvLight::from_latlong(img);
    }
    return EnvLight::constant(Vec3{config.env.radiance, config.env.radiance, config.env.radiance},
                              config.env.samples);
}

RenderConfig make_render_config(const SceneConfig& config) {
    RenderConfig rc;
    rc.smooth_normals = config.smooth_normals;
    rc.camera_space_normals = config.normal_space == "camera";
    rc.enable_specular = config.enable_specular;
    rc.background = config.background;
    return rc;
}

namespace {

void transform_config_into_grid_units(SceneConfig& c, const NormalizationTransform& t) {
    for (auto& r : c.regions) {
        r.translation = t.to_grid(r.translation);
        r.stretch *= t.scale;
    }
    c.geometry_target.center = t.to_grid(c.geometry_target.center);
    c.geometry_target.radius *= t.scale;
    c.geometry_target.half_extents *= t.scale;
}

std::vector<FocalRegion> build_regions(const SceneConfig& c) {
    std::vector<FocalRegion> regions;
    regions.reserve(c.regions.size());
    for (const auto& spec : c.regions)
        regions.push_back(make_focal_region(spec.stretch, spec.rotation_deg * kDegToRad,
                                            spec.translation));
    return regions;
}

void seed_base_field_from_mesh(TetGrid& grid, const MeshSdf& sdf) {
    for (size_t v = 0; v < grid.vertex_count(); ++v)
        grid.base_sdf[v] = sdf.signed_distance(grid.vertices[v]);
}

}  // namespace

std::unique_ptr<EditSession> create_session(const SceneConfig& config) {
    auto session = std::make_unique<EditSession>();
    session->config = config;
    session->rng = Rng(config.seed);

    const Aabb bounds = Aabb::cube(config.half_extent);
    const std::array<int, 3> res{config.grid_resolution, config.grid_resolution,
                                 config.grid_resolution};
    session->grid = build_grid(res, bounds);

    if (config.progressive_from.empty()) {
        ImportedMesh imported = import_mesh(config.base_mesh);
        if (imported.triangulated_faces > 0)
            std::fprintf(stderr, "[focalfuse] warning: fan-triangulated %d polygons from %s\n",
                         imported.triangulated_faces, config.base_mesh.c_str());
        session->normalization =
            normalize_into(imported.mesh, config.half_extent, config.mesh_fit);
        transform_config_into_grid_units(session->config, session->normalization);

        MeshSdf import_sdf(imported.mesh);
        seed_base_field_from_mesh(session->grid, import_sdf);
        if (import_sdf.parity_conflicts() > 0)
            std::fprintf(stderr,
                         "[focalfuse] warning: %llu ambiguous inside/outside votes while "
                         "sampling %s (mesh may not be watertight)\n",
                         static_cast<unsigned long long>(import_sdf.parity_conflicts()),
                         config.base_mesh.c_str());

        session->base_surface = marching_tetrahedra(session->grid, session->grid.base_sdf, Part::Base);
        session->base_surface.face_texture.assign(session->base_surface.faces.size(), 0);
        session->frozen_label_mesh = session->base_surface;

        TextureField base_tex(config.texture_resolution, bounds);
        base_tex.fill_constant(config.base_color, config.base_roughness, config.base_metalness);
        base_tex.trainable = false;
        session->frozen_textures.push_back(std::move(base_tex));
    } else {
        // Promote the previous run's merged result to the frozen base.
        const std::string prev_ckpt = config.progressive_from + "/checkpoint.bin";
        const std::string prev_cfg_path = config.progressive_from + "/config.resolved.json";
        SceneConfig prev_cfg = load_scene(prev_cfg_path, "desk");
        auto prev = load_session(prev_ckpt, prev_cfg);
        if (prev->stage == Stage::Fresh)
            throw std::runtime_error("progressive edit: previous session has no geometry yet");

        TriMesh prev_merged = prev->extract_merged();
        // The previous editable part freezes alongside everything already
        // frozen; give it the next texture slot.
        session->frozen_textures = std::move(prev->frozen_textures);
        TextureField prev_edit = std::move(prev->tex_edit);
        prev_edit.trainable = false;
        session->frozen_textures.push_back(std::move(prev_edit));
        const int edit_slot = int(session->frozen_textures.size()) - 1;
        for (size_t f = 0; f < prev_merged.faces.size(); ++f)
            if (prev_merged.face_part[f] == Part::Editable)
                prev_merged.face_texture[f] = edit_slot;

        session->normalization = prev->normalization;
        transform_config_into_grid_units(session->config, session->normalization);

        MeshSdf merged_sdf(prev_merged);
        seed_base_field_from_mesh(session->grid, merged_sdf);
        session->base_surface = marching_tetrahedra(session->grid, session->grid.base_sdf, Part::Base);
        // Carry slot labels onto the re-extracted base surface.
        session->base_surface.face_texture.assign(session->base_surface.faces.size(), 0);
        for (size_t f = 0; f < session->base_surface.faces.size(); ++f) {
            int nearest = merged_sdf.nearest_face(session->base_surface.face_centroid(int(f)));
            session->base_surface.face_texture[f] = prev_merged.face_texture[nearest];
        }
        session->frozen_label_mesh = session->base_surface;
    }

    session->base_surface_sdf = std::make_shared<MeshSdf>(session->base_surface);
    session->frozen_label_sdf = std::make_shared<MeshSdf>(session->frozen_label_mesh);

    session->regions = build_regions(session->config);
    InitParams init;
    init.iterations = config.init_iterations;
    init.batch = config.init_batch;
    Rng init_rng = session->rng.fork(0xF0CA1);
    init_editable_sdf(session->grid, session->regions, init, init_rng);
    precompute_outside_distances(session->grid, session->regions);

    TextureField edit_tex(config.texture_resolution, bounds);
    edit_tex.fill_constant(config.base_color, config.base_roughness, config.base_metalness);
    session->tex_edit = std::move(edit_tex);

    session->base_field_hash = session->compute_base_field_hash();
    session->frozen_tex_hash = session->compute_frozen_tex_hash();
    return session;
}

namespace {

class LossCsv {
public:
    explicit LossCsv(const std::string& path) {
        if (path.empty()) return;
        file_.open(path);
        if (!file_) throw std::runtime_error("cannot open loss log " + path);
        file_ << "step,standin,gf,ca,sc_g,sc_b,total\n";
    }
    void row(int step, const LossReport& r) {
        if (!file_.is_open()) return;
        char buf[256];
        std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", step, r.standin,
                      r.gf, r.ca, r.sc_g, r.sc_b, r.total);
        file_ << buf;
    }

private:
    std::ofstream file_;
};

struct GeometrySnapshot {
    std::vector<double> edit_sdf;
    std::vector<Vec3> offsets;
};

GeometrySnapshot take_geometry_snapshot(const TetGrid& g) { return {g.edit_sdf, g.offsets}; }

void restore_geometry_snapshot(TetGrid& g, const GeometrySnapshot& s) {
    g.edit_sdf = s.edit_sdf;
    g.offsets = s.offsets;
}

}  // namespace

StageResult run_geometry_stage(EditSession& session, int steps_override,
                               const std::string& loss_csv_path, const StageCallbacks& callbacks) {
    const SceneConfig& cfg = session.config;
    const int steps = steps_override >= 0 ? steps_override : cfg.geometry_steps;
    StageResult result;
    result.min_total = std::numeric_limits<double>::infinity();
    LossCsv csv(loss_csv_path);

    TetGrid& grid = session.grid;
    const size_t n = grid.vertex_count();
    const std::vector<double> target = session.geometry_target_values();

    // Sample set for the focal loss: vertices outside every region.
    std::vector<int> outside;
    outside.reserve(n);
    for (size_t v = 0; v < n; ++v)
        if (!grid.inside_region[v]) outside.push_back(int(v));

    AdamState adam_field, adam_offsets;
    adam_field.reset(n);
    adam_offsets.reset(n * 3);

    const bool image_mode = cfg.geometry_objective == "image";
    const int coarse_until = coarse_phase_steps(steps);
    const RenderConfig rcfg = make_render_config(cfg);
    // A stage-local stream keeps runs bit-identical whether stages execute in
    // one process or across separate invocations.
    Rng stage_rng = session.rng.fork(1);

    // Image mode compares normal maps against renders of the target field's
    // own extraction.
    TriMesh target_mesh;
    if (image_mode) target_mesh = marching_tetrahedra(grid, target, Part::Base);

    GeometrySnapshot last_good = take_geometry_snapshot(grid);
    const int ckpt_every = std::max(1, steps * cfg.checkpoint_percent / 100);

    std::vector<double> gf_vals(outside.size()), gf_dist(outside.size());
    std::vector<double> grad_field(n), grad_offsets(n * 3);
    FocalLossParams focal_params{cfg.sigma1, cfg.sigma2, cfg.xi};

    for (int step = 0; step < steps; ++step) {
        std::vector<uint8_t> offset_mask = apply_offset_mask(grid, cfg.offset_margin);
        clamp_offsets(grid);

        std::fill(grad_field.begin(), grad_field.end(), 0.0);
        std::fill(grad_offsets.begin(), grad_offsets.end(), 0.0);

        // Focal loss over outside vertices.
        for (size_t i = 0; i < outside.size(); ++i) {
            gf_vals[i] = grid.edit_sdf[outside[i]];
            gf_dist[i] = grid.focal_dist[outside[i]];
        }
        ScalarLoss gf = geometric_focal_loss(gf_vals, gf_dist, focal_params);
        for (size_t i = 0; i < outside.size(); ++i)
            grad_field[outside[i]] += cfg.lambda_gf * gf.grad[i];

        // Collision loss over every vertex.
        ScalarLoss ca = collision_loss(grid.base_sdf, grid.edit_sdf);
        for (size_t v = 0; v < n; ++v) grad_field[v] += cfg.lambda_ca * ca.grad[v];

        double standin = 0.0;
        if (!image_mode) {
            // Field objective over vertices inside a region or near the
            // editable surface.
            std::vector<double> vals, tgts;
            std::vector<int> ids;
            for (size_t v = 0; v < n; ++v) {
                if (grid.inside_region[v] || grid.edit_sdf[v] > -cfg.blend_k) {
                    ids.push_back(int(v));
                    vals.push_back(grid.edit_sdf[v]);
                    tgts.push_back(target[v]);
                }
            }
            ScalarLoss mse = field_mse_objective(vals, tgts);
            standin = mse.value;
            for (size_t i = 0; i < ids.size(); ++i) grad_field[ids[i]] += mse.grad[i];
        } else {
            // Image objective: match the merged extraction's normal map to
            // the target extraction's, through fixed visibility.
            std::vector<double> u(n);
            std::vector<SoftUnionGrad> ug(n);
            for (size_t v = 0; v < n; ++v) {
                ug[v] = soft_union_grad(grid.base_sdf[v], grid.edit_sdf[v], cfg.blend_k);
                u[v] = ug[v].value;
            }
            TriMesh merged = marching_tetrahedra(grid, u, Part::Editable);

            Camera cam = sample_cameras(1, cfg.cam_l,
                                        CameraRanges{cfg.r_min, cfg.r_max,
                                                     cfg.theta_min_deg * kDegToRad,
                                                     cfg.theta_max_deg * kDegToRad},
                                        cfg.fov_deg * kDegToRad, cfg.image_resolution,
                                        cfg.image_resolution, stage_rng)[size_t(step) % cfg.cam_l];
            RenderBuffers buffers = rasterize(merged, cam, rcfg);
            RenderBuffers target_buffers = rasterize(target_mesh, cam, rcfg);

            const bool coarse = step < coarse_until;
            NormalMapObjective obj =
                normal_map_objective(buffers, merged, target_buffers.normal_image(),
                                     target_buffers.mask_image(), coarse);
            standin = obj.value;

            // Chain vertex-position gradients into field values and offsets.
            for (size_t vtx = 0; vtx < merged.positions.size(); ++vtx) {
                const Vec3& up = obj.d_positions[vtx];
                if (up == Vec3{}) continue;
                const CrossingInfo& ci = merged.crossings[vtx];
                const Vec3 pa = grid.deformed_position(ci.parent_a);
                const Vec3 pb = grid.deformed_position(ci.parent_b);
                MtVertexGradient mg = mt_vertex_gradient(pa, pb, ci.value_a, ci.value_b, up);
                grad_field[ci.parent_a] += mg.d_value_a * ug[ci.parent_a].d_b;
                grad_field[ci.parent_b] += mg.d_value_b * ug[ci.parent_b].d_b;
                const double t = mt_crossing_parameter(ci.value_a, ci.value_b);
                if (offset_mask[ci.parent_a]) {
                    grad_offsets[ci.parent_a * 3 + 0] += up.x * (1.0 - t);
                    grad_offsets[ci.parent_a * 3 + 1] += up.y * (1.0 - t);
                    grad_offsets[ci.parent_a * 3 + 2] += up.z * (1.0 - t);
                }
                if (offset_mask[ci.parent_b]) {
                    grad_offsets[ci.parent_b * 3 + 0] += up.x * t;
                    grad_offsets[ci.parent_b * 3 + 1] += up.y * t;
                    grad_offsets[ci.parent_b * 3 + 2] += up.z * t;
                }
            }
        }

        LossReport report = LossReport::geometry(standin, gf.value, ca.value, cfg.lambda_gf,
                                                 cfg.lambda_ca);
        if (!std::isfinite(report.total)) {
            restore_geometry_snapshot(grid, last_good);
            result.aborted_on_nan = true;
            result.steps_run = step;
            session.verify_frozen_blocks();
            return result;
        }

        csv.row(step, report);
        if (callbacks.on_step) callbacks.on_step(step, report);
        result.final_loss = report;
        result.min_total = std::min(result.min_total, report.total);

        adam_field.step(grid.edit_sdf, grad_field, cfg.geometry_lr);
        if (image_mode) {
            std::span<double> off(&grid.offsets[0].x, n * 3);
            adam_offsets.step(off, grad_offsets, cfg.geometry_lr);
        }

        if ((step + 1) % ckpt_every == 0) last_good = take_geometry_snapshot(grid);
    }

    apply_offset_mask(grid, cfg.offset_margin);
    clamp_offsets(grid);
    session.verify_frozen_blocks();
    if (steps > 0) session.stage = Stage::GeometryDone;
    result.completed = true;
    result.steps_run = steps;
    if (!std::isfinite(result.min_total)) result.min_total = 0.0;
    return result;
}

namespace {

// Area-weighted random points on the editable faces, for the interior style
// term.
std::vector<Vec3> sample_editable_surface(const TriMesh& mesh, int count, Rng& rng) {
    std::vector<int> editable;
    std::vector<double> cum;
    double total = 0.0;
    for (int f = 0; f < int(mesh.faces.size()); ++f) {
        if (mesh.face_part[f] != Part::Editable) continue;
        editable.push_back(f);
        total += mesh.face_area(f);
        cum.push_back(total);
    }
    std::vector<Vec3> pts;
    if (editable.empty() || total <= 0.0) return pts;
    pts.reserve(count);
    for (int i = 0; i < count; ++i) {
        double u = rng.uniform(0.0, total);
        size_t lo = std::lower_bound(cum.begin(), cum.end(), u) - cum.begin();
        lo = std::min(lo, editable.size() - 1);
        const auto& tri = mesh.faces[editable[lo]];
        double b1 = rng.uniform(), b2 = rng.uniform();
        if (b1 + b2 > 1.0) {
            b1 = 1.0 - b1;
            b2 = 1.0 - b2;
        }
        pts.push_back(mesh.positions[tri[0]] * (1.0 - b1 - b2) + mesh.positions[tri[1]] * b1 +
                      mesh.positions[tri[2]] * b2);
    }
    return pts;
}

// Junction samples: editable crossing vertices within a band of the frozen
// surface.
std::vector<Vec3> boundary_band_points(const TriMesh& mesh, const MeshSdf& base_sdf,
                                       double band_width) {
    std::vector<uint8_t> vertex_editable(mesh.positions.size(), 0);
    for (size_t f = 0; f < mesh.faces.size(); ++f)
        if (mesh.face_part[f] == Part::Editable)
            for (int corner : mesh.faces[f]) vertex_editable[corner] = 1;
    std::vector<Vec3> pts;
    for (size_t v = 0; v < mesh.positions.size(); ++v)
        if (vertex_editable[v] && base_sdf.unsigned_distance(mesh.positions[v]) < band_width)
            pts.push_back(mesh.positions[v]);
    return pts;
}

Image constant_image(int w, int h, const Vec3& color) {
    Image img(w, h, 3);
    for (size_t i = 0; i < img.pixel_count(); ++i) {
        img.data[i * 3] = color.x;
        img.data[i * 3 + 1] = color.y;
        img.data[i * 3 + 2] = color.z;
    }
    return img;
}

}  // namespace

DualPathRender render_dual_path(EditSession& session, const TriMesh& merged_mesh,
                                const Camera& cam, const EnvLight& light) {
    const RenderConfig rcfg = make_render_config(session.config);
    DualPathRender out;
    out.buffers = rasterize(merged_mesh, cam, rcfg);

    std::vector<const TextureField*> frozen;
    for (const auto& t : session.frozen_textures) frozen.push_back(&t);
    const TextureField* edit[] = {&session.tex_edit};

    out.base_image = shade(out.buffers, merged_mesh, frozen, light, cam, rcfg);
    out.edit_image = shade(out.buffers, merged_mesh, edit, light, cam, rcfg);
    out.merged = compose(out.base_image, out.edit_image, out.buffers, rcfg.background);
    return out;
}

StageResult run_appearance_stage(EditSession& session, int steps_override,
                                 const std::string& loss_csv_path,
                                 const StageCallbacks& callbacks) {
    const SceneConfig& cfg = session.config;
    const int steps = steps_override >= 0 ? steps_override : cfg.appearance_steps;
    StageResult result;
    result.min_total = std::numeric_limits<double>::infinity();
    LossCsv csv(loss_csv_path);

    if (session.stage == Stage::Fresh && steps > 0)
        throw std::logic_error("appearance stage requires a completed geometry stage");

    TriMesh merged = session.extract_merged();
    const EnvLight light = make_env_light(cfg);
    const RenderConfig rcfg = make_render_config(cfg);
    const double band = cfg.boundary_band_cells * session.grid.cell_diagonal();
    const std::vector<Vec3> boundary =
        boundary_band_points(merged, *session.base_surface_sdf, band);

    static bool warned_empty_boundary = false;
    if (boundary.empty() && cfg.style_consistency_enabled && cfg.lambda_b > 0.0 &&
        !warned_empty_boundary && steps > 0) {
        std::fprintf(stderr,
                     "[focalfuse] warning: no junction samples found; the boundary style term "
                     "is inactive\n");
        warned_empty_boundary = true;
    }

    std::vector<const TextureField*> frozen;
    for (const auto& t : session.frozen_textures) frozen.push_back(&t);
    const TextureField* edit_span[] = {&session.tex_edit};

    AdamState adam;
    adam.reset(session.tex_edit.params().size());
    std::vector<double> grad(session.tex_edit.params().size());
    std::vector<double> last_good = session.tex_edit.params();
    const int ckpt_every = std::max(1, steps * cfg.checkpoint_percent / 100);

    Image target_file_image;
    if (cfg.appearance_target.kind == AppearanceTarget::Kind::ImageFile)
        target_file_image = cfg.appearance_target.image_path.ends_with(".pfm")
                                ? read_pfm(cfg.appearance_target.image_path)
                                : read_ppm(cfg.appearance_target.image_path);

    const CameraRanges ranges{cfg.r_min, cfg.r_max, cfg.theta_min_deg * kDegToRad,
                              cfg.theta_max_deg * kDegToRad};
    Rng stage_rng = session.rng.fork(2);

    for (int step = 0; step < steps; ++step) {
        std::fill(grad.begin(), grad.end(), 0.0);
        std::vector<Camera> cams =
            sample_cameras(cfg.cam_s, cfg.cam_l, ranges, cfg.fov_deg * kDegToRad,
                           cfg.image_resolution, cfg.image_resolution, stage_rng);
        // One viewpoint per step keeps desk runs fast; the azimuth segment
        // advances with the step index so coverage still cycles the ring.
        Camera cam = cams[size_t(step) % cams.size()];

        RenderBuffers buffers = rasterize(merged, cam, rcfg);
        Image base_img = shade(buffers, merged, frozen, light, cam, rcfg);
        Image edit_img = shade(buffers, merged, edit_span, light, cam, rcfg);
        Image merged_img = compose(base_img, edit_img, buffers, rcfg.background);

        Image target;
        switch (cfg.appearance_target.kind) {
            case AppearanceTarget::Kind::ConstantColor:
                target = constant_image(merged_img.width, merged_img.height,
                                        cfg.appearance_target.color);
                break;
            case AppearanceTarget::Kind::ImageFile: {
                if (target_file_image.width != merged_img.width ||
                    target_file_image.height != merged_img.height)
                    throw std::invalid_argument(
                        "appearance target image resolution must match cameras.resolution");
                target = target_file_image;
                break;
            }
            case AppearanceTarget::Kind::BaseRender:
                target = compose(base_img, base_img, buffers, rcfg.background);
                break;
        }

        std::vector<uint8_t> mask = buffers.editable_mask();
        ImageLoss img_loss = masked_image_mse(merged_img, target, mask);

        // Gradients reach the editable texture only: through the editable
        // pixels of the composition, and through the style terms.
        shade_backward(buffers, merged, edit_span, 0, light, cam, rcfg, img_loss.grad, mask, grad);

        StyleConsistency sc;
        if (cfg.style_consistency_enabled && cfg.lambda_sc > 0.0) {
            std::vector<Vec3> interior =
                sample_editable_surface(merged, cfg.style_interior_samples, stage_rng);
            sc = style_consistency(session.tex_edit, session.frozen_textures[0], interior, boundary,
                                   cfg.delta_scale, cfg.lambda_b, stage_rng);
            for (size_t i = 0; i < grad.size(); ++i) grad[i] += cfg.lambda_sc * sc.grad_params[i];
        }

        LossReport report = LossReport::appearance(img_loss.value, sc.smoothness, sc.boundary,
                                                   cfg.style_consistency_enabled ? cfg.lambda_sc : 0.0,
                                                   cfg.lambda_b);
        if (!std::isfinite(report.total)) {
            session.tex_edit.params() = last_good;
            result.aborted_on_nan = true;
            result.steps_run = step;
            session.verify_frozen_blocks();
            return result;
        }

        csv.row(step, report);
        if (callbacks.on_step) callbacks.on_step(step, report);
        result.final_loss = report;
        result.min_total = std::min(result.min_total, report.total);

        adam.step(session.tex_edit.params(), grad, cfg.appearance_lr);
        if ((step + 1) % ckpt_every == 0) last_good = session.tex_edit.params();
    }

    session.verify_frozen_blocks();
    if (steps > 0 && session.stage == Stage::GeometryDone) session.stage = Stage::AppearanceDone;
    result.completed = true;
    result.steps_run = steps;
    if (!std::isfinite(result.min_total)) result.min_total = 0.0;
    return result;
}

namespace {

constexpr char kSessionMagic[8] = {'f', 'f', 's', 'e', 's', 's', '0', '1'};

template <typename T>
void write_pod(std::ostream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
void read_pod(std::istream& in, T& v) {
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
}

template <typename T>
void write_vec(std::ostream& out, const std::vector<T>& v) {
    uint64_t m = v.size();
    write_pod(out, m);
    out.write(reinterpret_cast<const char*>(v.data()), std::streamsize(m * sizeof(T)));
}

template <typename T>
void read_vec(std::istream& in, std::vector<T>& v) {
    uint64_t m = 0;
    read_pod(in, m);
    v.resize(m);
    in.read(reinterpret_cast<char*>(v.data()), std::streamsize(m * sizeof(T)));
}

void write_mesh(std::ostream& out, const TriMesh& m) {
    write_vec(out, m.positions);
    write_vec(out, m.faces);
    write_vec(out, m.face_part);
    write_vec(out, m.crossings);
    write_vec(out, m.face_texture);
}

void read_mesh(std::istream& in, TriMesh& m) {
    read_vec(in, m.positions);
    read_vec(in, m.faces);
    read_vec(in, m.face_part);
    read_vec(in, m.crossings);
    read_vec(in, m.face_texture);
}

void write_texture(std::ostream& out, const TextureField& t) {
    int res = t.resolution();
    write_pod(out, res);
    write_pod(out, t.domain().lo);
    write_pod(out, t.domain().hi);
    write_vec(out, t.params());
    uint8_t trainable = t.trainable ? 1 : 0;
    write_pod(out, trainable);
}

TextureField read_texture(std::istream& in) {
    int res = 0;
    Vec3 lo, hi;
    read_pod(in, res);
    read_pod(in, lo);
    read_pod(in, hi);
    TextureField t(res, Aabb{lo, hi});
    read_vec(in, t.params());
    uint8_t trainable = 1;
    read_pod(in, trainable);
    t.trainable = trainable != 0;
    return t;
}

}  // namespace

void save_session(const EditSession& session, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("save_session: cannot open " + path);
    f.write(kSessionMagic, 8);
    write_pod(f, session.normalization.scale);
    write_pod(f, session.normalization.center);
    uint8_t stage = uint8_t(session.stage);
    write_pod(f, stage);
    write_pod(f, session.base_field_hash);
    write_pod(f, session.frozen_tex_hash);

    // Grid
    write_pod(f, session.grid.resolution);
    write_pod(f, session.grid.domain.lo);
    write_pod(f, session.grid.domain.hi);
    write_vec(f, session.grid.base_sdf);
    write_vec(f, session.grid.edit_sdf);
    write_vec(f, session.grid.offsets);
    write_vec(f, session.grid.focal_dist);
    write_vec(f, session.grid.inside_region);

    write_mesh(f, session.base_surface);
    write_mesh(f, session.frozen_label_mesh);

    uint64_t n_tex = session.frozen_textures.size();
    write_pod(f, n_tex);
    for (const auto& t : session.frozen_textures) write_texture(f, t);
    write_texture(f, session.tex_edit);
    if (!f) throw std::runtime_error("save_session: write failed for " + path);
}

std::unique_ptr<EditSession> load_session(const std::string& path, const SceneConfig& config) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("load_session: cannot open " + path);
    char magic[8];
    f.read(magic, 8);
    if (std::memcmp(magic, kSessionMagic, 8) != 0)
        throw std::runtime_error("load_session: bad magic in " + path);

    auto session = std::make_unique<EditSession>();
    session->config = config;
    session->rng = Rng(config.seed);

    read_pod(f, session->normalization.scale);
    read_pod(f, session->normalization.center);
    uint8_t stage = 0;
    read_pod(f, stage);
    session->stage = Stage(stage);
    read_pod(f, session->base_field_hash);
    read_pod(f, session->frozen_tex_hash);

    std::array<int, 3> res{};
    Vec3 lo, hi;
    read_pod(f, res);
    read_pod(f, lo);
    read_pod(f, hi);
    session->grid = build_grid(res, Aabb{lo, hi});
    read_vec(f, session->grid.base_sdf);
    read_vec(f, session->grid.edit_sdf);
    read_vec(f, session->grid.offsets);
    read_vec(f, session->grid.focal_dist);
    read_vec(f, session->grid.inside_region);

    read_mesh(f, session->base_surface);
    read_mesh(f, session->frozen_label_mesh);

    uint64_t n_tex = 0;
    read_pod(f, n_tex);
    for (uint64_t i = 0; i < n_tex; ++i) session->frozen_textures.push_back(read_texture(f));
    session->tex_edit = read_texture(f);
    if (!f) throw std::runtime_error("load_session: truncated file " + path);

    transform_config_into_grid_units(session->config, session->normalization);
    session->regions = build_regions(session->config);
    session->base_surface_sdf = std::make_shared<MeshSdf>(session->base_surface);
    session->frozen_label_sdf = std::make_shared<MeshSdf>(session->frozen_label_mesh);
    session->verify_frozen_blocks();
    return session;
}

}  // namespace focalfuse
