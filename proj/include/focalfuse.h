/*
 * focalfuse — part-fusion 3D editing kernel.
 *
 * C interface to the shared library. All functions return ff_status; queries
 * write through out-parameters. A failing call records a message retrievable
 * with ff_last_error() until the next call on the same thread. Handles are
 * opaque and must be released with ff_session_free().
 */
#ifndef FOCALFUSE_H
#define FOCALFUSE_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef struct ff_session ff_session;

typedef enum ff_status {
    FF_OK = 0,
    FF_ERR_INVALID_ARGUMENT = 1,
    FF_ERR_IO = 2,
    FF_ERR_PARSE = 3,
    FF_ERR_STATE = 4,
    FF_ERR_NUMERIC = 5,
    FF_ERR_INTERNAL = 6
} ff_status;

const char* ff_version(void);
const char* ff_status_name(ff_status status);

/* Message for the most recent failure on this thread; empty string if none. */
const char* ff_last_error(void);

/*
 * Creates a session from a scene description: imports the base mesh, seeds
 * the frozen field, initializes the editable part inside the focal regions
 * and writes checkpoint + resolved config snapshot into out_dir.
 * preset may be "desk" or "paper"; NULL means "desk".
 */
ff_status ff_session_init(const char* scene_path, const char* out_dir, const char* preset,
                          uint64_t seed_override, int has_seed_override, ff_session** out);

/* Opens the checkpoint previously written into out_dir. */
ff_status ff_session_open(const char* out_dir, ff_session** out);

void ff_session_free(ff_session* session);

/* steps < 0 uses the configured count. Both runs save the checkpoint and a
 * per-step loss CSV into the session's out_dir on success. */
ff_status ff_run_geometry(ff_session* session, int steps);
ff_status ff_run_appearance(ff_session* session, int steps);

/* Renders n_views poses spaced evenly around the evaluation ring and writes
 * them (PNG or PPM per config) into out_dir. */
ff_status ff_render_views(ff_session* session, int n_views);

typedef struct ff_eval_report {
    double hausdorff_base;
    double editable_outside_fraction;
    double overlap_volume_fraction;
} ff_eval_report;

ff_status ff_eval(ff_session* session, ff_eval_report* out);

/* Exports the merged mesh (OBJ + MTL + baked PNG maps) and the editable part
 * alone into out_dir. */
ff_status ff_export(ff_session* session);

/* Introspection used by the command line. */
ff_status ff_session_stage(const ff_session* session, int* out_stage); /* 0 fresh, 1 geom, 2 appear */
ff_status ff_session_out_dir(const ff_session* session, const char** out_dir);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* FOCALFUSE_H */
