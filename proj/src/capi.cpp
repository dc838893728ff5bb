#include "focalfuse.h"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>

#include "focalfuse/driver.hpp"
#include "focalfuse/eval.hpp"
#include "focalfuse/image.hpp"
#include "focalfuse/mesh_io.hpp"
#include "focalfuse/scene.hpp"
#include "focalfuse/texture.hpp"

using namespace focalfuse;

struct ff_session {
    std::unique_ptr<EditSession> impl;
    std::string out_dir;
};

namespace {

thread_local std::string g_last_error;

constexpr double kPi = 3.14159265358979323846;

ff_status fail(ff_status status, const std::string& message) {
    g_last_error = message;
    return status;
}

template <typename Fn>
ff_status guarded(Fn&& fn) {
    try {
        return fn();
    } catch (const std::invalid_argument& e) {
        return fail(FF_ERR_INVALID_ARGUMENT, e.what());
    } catch (const std::logic_error& e) {
        return fail(FF_ERR_STATE, e.what());
    } catch (const std::exception& e) {
        return fail(FF_ERR_IO, e.what());
    } catch (...) {
        return fail(FF_ERR_INTERNAL, "unknown error");
    }
}

std::string checkpoint_path(const std::string& out_dir) { return out_dir + "/checkpoint.bin"; }
std::string snapshot_path(const std::string& out_dir) { return out_dir + "/config.resolved.json"; }

void save_all(ff_session* s) {
    save_session(*s->impl, checkpoint_path(s->out_dir));
}

void write_image_files(const SceneConfig& cfg, const Image& img, const std::string& stem) {
    if (cfg.image_format == "ppm") write_ppm(stem + ".ppm", img);
    else write_png(stem + ".png", img, /*srgb=*/true);
}

}  // namespace

extern "C" {

const char* ff_version(void) { return "0.1.0"; }

const char* ff_status_name(ff_status status) {
    switch (status) {
        case FF_OK: return "ok";
        case FF_ERR_INVALID_ARGUMENT: return "invalid argument";
        case FF_ERR_IO: return "io error";
        case FF_ERR_PARSE: return "parse error";
        case FF_ERR_STATE: return "invalid state";
        case FF_ERR_NUMERIC: return "numeric failure";
        case FF_ERR_INTERNAL: return "internal error";
    }
    return "unknown";
}

const char* ff_last_error(void) { return g_last_error.c_str(); }

ff_status ff_session_init(const char* scene_path, const char* out_dir, const char* preset,
                          uint64_t seed_override, int has_seed_override, ff_session** out) {
    if (!scene_path || !out) return fail(FF_ERR_INVALID_ARGUMENT, "null argument");
    *out = nullptr;
    return guarded([&]() {
        SceneConfig cfg;
        try {
            cfg = load_scene(scene_path, preset ? preset : "desk");
        } catch (const std::exception& e) {
            return fail(FF_ERR_PARSE, e.what());
        }
        if (has_seed_override) cfg.seed = seed_override;
        if (out_dir && *out_dir) cfg.out_dir = out_dir;
        std::filesystem::create_directories(cfg.out_dir);

        // Snapshot the resolved, world-unit config before the session
        // converts entities into grid units.
        {
            std::ofstream f(snapshot_path(cfg.out_dir));
            if (!f) throw std::runtime_error("cannot write config snapshot");
            f << config_to_json(cfg);
        }

        auto session = std::make_unique<ff_session>();
        session->out_dir = cfg.out_dir;
        session->impl = create_session(cfg);
        save_all(session.get());

        // Reference surface for inspection and external comparison.
        export_mesh(session->impl->base_surface, {}, session->impl->normalization,
                    session->out_dir, "base_ref");
        *out = session.release();
        return FF_OK;
    });
}

ff_status ff_session_open(const char* out_dir, ff_session** out) {
    if (!out_dir || !out) return fail(FF_ERR_INVALID_ARGUMENT, "null argument");
    *out = nullptr;
    return guarded([&]() {
        SceneConfig cfg;
        try {
            cfg = load_scene(snapshot_path(out_dir), "desk");
        } catch (const std::exception& e) {
            return fail(FF_ERR_PARSE, e.what());
        }
        cfg.out_dir = out_dir;
        auto session = std::make_unique<ff_session>();
        session->out_dir = out_dir;
        session->impl = load_session(checkpoint_path(out_dir), cfg);
        *out = session.release();
        return FF_OK;
    });
}

void ff_session_free(ff_session* session) { delete session; }

ff_status ff_run_geometry(ff_session* session, int steps) {
    if (!session) return fail(FF_ERR_INVALID_ARGUMENT, "null session");
    return guarded([&]() {
        StageResult r = run_geometry_stage(*session->impl, steps,
                                           session->out_dir + "/geometry_loss.csv");
        if (r.aborted_on_nan)
            return fail(FF_ERR_NUMERIC,
                        "geometry loss became non-finite at step " + std::to_string(r.steps_run) +
                            "; session restored to the last checkpoint");
        save_all(session);
        return FF_OK;
    });
}

ff_status ff_run_appearance(ff_session* session, int steps) {
    if (!session) return fail(FF_ERR_INVALID_ARGUMENT, "null session");
    return guarded([&]() {
        StageResult r = run_appearance_stage(*session->impl, steps,
                                             session->out_dir + "/appearance_loss.csv");
        if (r.aborted_on_nan)
            return fail(FF_ERR_NUMERIC,
                        "appearance loss became non-finite at step " + std::to_string(r.steps_run) +
                            "; session restored to the last checkpoint");
        save_all(session);
        return FF_OK;
    });
}

ff_status ff_render_views(ff_session* session, int n_views) {
    if (!session) return fail(FF_ERR_INVALID_ARGUMENT, "null session");
    if (n_views < 1) return fail(FF_ERR_INVALID_ARGUMENT, "n_views must be >= 1");
    return guarded([&]() {
        EditSession& es = *session->impl;
        const SceneConfig& cfg = es.config;
        TriMesh merged = es.extract_merged();
        EnvLight light = make_env_light(cfg);
        const CameraRanges ranges{cfg.r_min, cfg.r_max, cfg.theta_min_deg * kPi / 180.0,
                                  cfg.theta_max_deg * kPi / 180.0};
        for (int i = 0; i < n_views; ++i) {
            const double azimuth = 2.0 * kPi * i / n_views;
            Camera cam = eval_camera(azimuth, ranges, cfg.fov_deg * kPi / 180.0,
                                     cfg.image_resolution, cfg.image_resolution);
            DualPathRender r = render_dual_path(es, merged, cam, light);
            char stem[64];
            std::snprintf(stem, sizeof stem, "/view_%03d", i);
            write_image_files(cfg, r.merged, session->out_dir + stem);
            if (cfg.dump_normal_maps) {
                Image n = r.buffers.normal_image();
                // Map [-1,1] into [0,1] for storage.
                for (auto& v : n.data) v = 0.5 * (v + 1.0);
                write_png16(session->out_dir + stem + std::string("_normal.png"), n);
            }
        }
        return FF_OK;
    });
}

ff_status ff_eval(ff_session* session, ff_eval_report* out) {
    if (!session || !out) return fail(FF_ERR_INVALID_ARGUMENT, "null argument");
    return guarded([&]() {
        EditSession& es = *session->impl;
        TriMesh merged = es.extract_merged();
        Rng rng = es.rng.fork(3);
        PreservationReport r =
            eval_preservation(es.base_surface, merged, es.grid, es.regions, rng);
        out->hausdorff_base = r.hausdorff_base;
        out->editable_outside_fraction = r.editable_outside_fraction;
        out->overlap_volume_fraction = r.overlap_volume_fraction;

        std::ofstream f(session->out_dir + "/eval_report.json");
        f << "{\n  \"hausdorff_base\": " << r.hausdorff_base
          << ",\n  \"editable_outside_fraction\": " << r.editable_outside_fraction
          << ",\n  \"overlap_volume_fraction\": " << r.overlap_volume_fraction << "\n}\n";
        return FF_OK;
    });
}

ff_status ff_export(ff_session* session) {
    if (!session) return fail(FF_ERR_INVALID_ARGUMENT, "null session");
    return guarded([&]() {
        EditSession& es = *session->impl;
        TriMesh merged = es.extract_merged();
        if (merged.faces.empty()) return fail(FF_ERR_STATE, "nothing to export: empty extraction");

        const int bake_res = 512;
        BakedMaps base_maps = bake_texture_maps(es.frozen_textures[0], merged, bake_res);
        BakedMaps edit_maps = bake_texture_maps(es.tex_edit, merged, bake_res);
        ExportMaterials mats;
        mats.base = &base_maps;
        mats.editable = &edit_maps;
        export_mesh(merged, mats, es.normalization, session->out_dir, "merged");

        // The editable part alone, for reuse elsewhere.
        TriMesh part;
        part.positions = merged.positions;
        for (size_t f = 0; f < merged.faces.size(); ++f) {
            if (merged.face_part[f] == Part::Editable) {
                part.faces.push_back(merged.faces[f]);
                part.face_part.push_back(Part::Base);  // standalone file, single material
            }
        }
        if (!part.faces.empty()) {
            BakedMaps part_maps = bake_texture_maps(es.tex_edit, part, bake_res);
            ExportMaterials part_mats;
            part_mats.base = &part_maps;
            export_mesh(part, part_mats, es.normalization, session->out_dir, "editable_part");
        }
        return FF_OK;
    });
}

ff_status ff_session_stage(const ff_session* session, int* out_stage) {
    if (!session || !out_stage) return fail(FF_ERR_INVALID_ARGUMENT, "null argument");
    *out_stage = int(session->impl->stage);
    return FF_OK;
}

ff_status ff_session_out_dir(const ff_session* session, const char** out_dir) {
    if (!session || !out_dir) return fail(FF_ERR_INVALID_ARGUMENT, "null argument");
    *out_dir = session->out_dir.c_str();
    return FF_OK;
}

}  // extern "C"
