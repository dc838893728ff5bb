#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "focalfuse/focal.hpp"
#include "focalfuse/losses.hpp"
#include "focalfuse/mesh_io.hpp"
#include "focalfuse/render.hpp"
#include "focalfuse/scene.hpp"
#include "focalfuse/sdf.hpp"
#include "focalfuse/tetgrid.hpp"
#include "focalfuse/texture.hpp"

namespace focalfuse {

/// Adaptive moment estimation over one flat parameter block.
class AdamState {
public:
    void reset(size_t n) {
        m_.assign(n, 0.0);
        v_.assign(n, 0.0);
        t_ = 0;
    }
    void step(std::span<double> params, std::span<const double> grad, double lr);
    int iterations() const { return t_; }

private:
    std::vector<double> m_, v_;
    int t_ = 0;
};

enum class Stage : uint8_t { Fresh = 0, GeometryDone = 1, AppearanceDone = 2 };

struct StageResult {
    bool completed = false;
    bool aborted_on_nan = false;
    int steps_run = 0;
    LossReport final_loss;
    double min_total = 0.0;
};

/// One edit: a frozen base (field + surface + textures) plus the learnable
/// part (edit field, offsets, edit texture). The RNG seed and the config
/// fully determine every step.
class EditSession {
public:
    SceneConfig config;
    NormalizationTransform normalization;
    TetGrid grid;
    TriMesh base_surface;  // reference extraction of the frozen base field
    std::shared_ptr<MeshSdf> base_surface_sdf;
    std::vector<FocalRegion> regions;
    std::vector<TextureField> frozen_textures;  // slot 0 = original base
    TriMesh frozen_label_mesh;  // carries per-face texture slots for the frozen geometry
    std::shared_ptr<MeshSdf> frozen_label_sdf;
    TextureField tex_edit;
    Stage stage = Stage::Fresh;
    Rng rng{1};

    uint64_t base_field_hash = 0;
    uint64_t frozen_tex_hash = 0;

    /// Union of the frozen and editable fields at every grid vertex.
    std::vector<double> merged_field() const;

    /// Labeled extraction of the merged field. Faces whose crossings carry
    /// exactly the frozen base values (and undeformed parents) are labeled
    /// Base; everything the edit influenced is Editable. Base faces inherit
    /// their frozen texture slot; editable faces use the live edit texture.
    TriMesh extract_merged();

    /// Target values of the geometry stand-in at every grid vertex.
    std::vector<double> geometry_target_values() const;

    uint64_t compute_base_field_hash() const;
    uint64_t compute_frozen_tex_hash() const;
    void verify_frozen_blocks() const;
};

/// Builds a fresh session: imports and normalizes the base mesh, seeds the
/// frozen field from its SDF, constructs regions (already normalized),
/// initializes the editable field inside them and precomputes focal
/// distances. When config.progressive_from is set, the previous run's merged
/// result is promoted to the frozen base instead.
std::unique_ptr<EditSession> create_session(const SceneConfig& config);

struct StageCallbacks {
    std::function<void(int step, const LossReport&)> on_step;  // optional
};

StageResult run_geometry_stage(EditSession& session, int steps_override = -1,
                               const std::string& loss_csv_path = "",
                               const StageCallbacks& callbacks = {});

StageResult run_appearance_stage(EditSession& session, int steps_override = -1,
                                 const std::string& loss_csv_path = "",
                                 const StageCallbacks& callbacks = {});

/// Coarse-phase length: the first ceil(2/3 * steps) of a geometry run.
int coarse_phase_steps(int total_steps);

void save_session(const EditSession& session, const std::string& path);
std::unique_ptr<EditSession> load_session(const std::string& path, const SceneConfig& config);

/// Dual-path render of the current merged mesh from one camera: rasterize
/// once, shade the frozen path and the editable path, compose by the
/// pixel-wise mask.
struct DualPathRender {
    RenderBuffers buffers;
    Image base_image;
    Image edit_image;
    Image merged;
};
DualPathRender render_dual_path(EditSession& session, const TriMesh& merged_mesh,
                                const Camera& cam, const EnvLight& light);

EnvLight make_env_light(const SceneConfig& config);
RenderConfig make_render_config(const SceneConfig& config);

}  // namespace focalfuse
