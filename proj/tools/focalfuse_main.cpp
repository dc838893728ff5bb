// Command-line front end. Talks to the kernel exclusively through the C API
// in focalfuse.h; all state between subcommands lives in the run directory.

#include <CLI11.hpp>

#include <cstdio>
#include <string>

#include "focalfuse.h"

namespace {

int report_failure(const char* what, ff_status status) {
    std::fprintf(stderr, "focalfuse: %s failed (%s): %s\n", what, ff_status_name(status),
                 ff_last_error());
    return 1;
}

struct SessionGuard {
    ff_session* ptr = nullptr;
    ~SessionGuard() { ff_session_free(ptr); }
};

int open_session(const std::string& out_dir, SessionGuard& guard) {
    ff_status st = ff_session_open(out_dir.c_str(), &guard.ptr);
    if (st != FF_OK) return report_failure("opening session", st);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"focalfuse: merge a frozen base shape with an editable part inside focal regions"};
    app.require_subcommand(1);

    std::string scene, out_dir, preset = "desk";
    long long seed = -1;
    int steps = -1;
    int views = 8;

    auto add_common = [&](CLI::App* cmd, bool needs_scene) {
        if (needs_scene)
            cmd->add_option("--scene", scene, "scene description (JSON)")->required();
        cmd->add_option("--out", out_dir, "run directory");
        return cmd;
    };

    auto* init = add_common(app.add_subcommand("init", "build the session and initialize the editable part"), true);
    init->add_option("--seed", seed, "override the scene seed");
    init->add_option("--preset", preset, "desk or paper")->check(CLI::IsMember({"desk", "paper"}));

    auto* geo = add_common(app.add_subcommand("edit-geometry", "run the geometry stage"), false);
    geo->add_option("--steps", steps, "override the configured step count");

    auto* app_stage = add_common(app.add_subcommand("edit-appearance", "run the appearance stage"), false);
    app_stage->add_option("--steps", steps, "override the configured step count");

    auto* render = add_common(app.add_subcommand("render", "render the merged result"), false);
    render->add_option("--views", views, "number of poses around the evaluation ring");

    auto* eval = add_common(app.add_subcommand("eval", "report preservation metrics"), false);
    auto* exp = add_common(app.add_subcommand("export", "write mesh, materials and baked maps"), false);

    CLI11_PARSE(app, argc, argv);

    if (init->parsed()) {
        SessionGuard s;
        ff_status st = ff_session_init(scene.c_str(), out_dir.empty() ? nullptr : out_dir.c_str(),
                                       preset.c_str(), seed >= 0 ? uint64_t(seed) : 0,
                                       seed >= 0 ? 1 : 0, &s.ptr);
        if (st != FF_OK) return report_failure("init", st);
        const char* dir = nullptr;
        ff_session_out_dir(s.ptr, &dir);
        std::fprintf(stderr, "focalfuse: session initialized in %s\n", dir);
        return 0;
    }

    if (out_dir.empty()) {
        std::fprintf(stderr, "focalfuse: --out is required for this subcommand\n");
        return 1;
    }

    SessionGuard s;
    if (int rc = open_session(out_dir, s)) return rc;

    if (geo->parsed()) {
        ff_status st = ff_run_geometry(s.ptr, steps);
        if (st != FF_OK) return report_failure("edit-geometry", st);
        std::fprintf(stderr, "focalfuse: geometry stage complete\n");
    } else if (app_stage->parsed()) {
        ff_status st = ff_run_appearance(s.ptr, steps);
        if (st != FF_OK) return report_failure("edit-appearance", st);
        std::fprintf(stderr, "focalfuse: appearance stage complete\n");
    } else if (render->parsed()) {
        ff_status st = ff_render_views(s.ptr, views);
        if (st != FF_OK) return report_failure("render", st);
        std::fprintf(stderr, "focalfuse: wrote %d views to %s\n", views, out_dir.c_str());
    } else if (eval->parsed()) {
        ff_eval_report report{};
        ff_status st = ff_eval(s.ptr, &report);
        if (st != FF_OK) return report_failure("eval", st);
        std::printf("hausdorff_base %.9g\n", report.hausdorff_base);
        std::printf("editable_outside_fraction %.9g\n", report.editable_outside_fraction);
        std::printf("overlap_volume_fraction %.9g\n", report.overlap_volume_fraction);
    } else if (exp->parsed()) {
        ff_status st = ff_export(s.ptr);
        if (st != FF_OK) return report_failure("export", st);
        std::fprintf(stderr, "focalfuse: exported to %s\n", out_dir.c_str());
    }
    return 0;
}
