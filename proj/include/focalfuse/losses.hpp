#pragma once

#include <span>
#include <vector>

#include "focalfuse/image.hpp"
#include "focalfuse/math.hpp"
#include "focalfuse/rng.hpp"
#include "focalfuse/texture.hpp"

namespace focalfuse {

/// Per-step objective breakdown. Components are stored unweighted; the total
/// is recomposed from them with the stage weights, so the identity
/// total = standin + w_focal*gf + w_collision*ca (geometry) or
/// total = standin + w_style*(sc_g + w_boundary*sc_b) (appearance)
/// holds exactly.
struct LossReport {
    double standin = 0.0;
    double gf = 0.0;
    double ca = 0.0;
    double sc_g = 0.0;
    double sc_b = 0.0;
    double total = 0.0;

    static LossReport geometry(double standin, double gf, double ca, double w_focal,
                               double w_collision) {
        LossReport r;
        r.standin = standin;
        r.gf = gf;
        r.ca = ca;
        r.total = standin + w_focal * gf + w_collision * ca;
        return r;
    }

    static LossReport appearance(double standin, double sc_g, double sc_b, double w_style,
                                 double w_boundary) {
        LossReport r;
        r.standin = standin;
        r.sc_g = sc_g;
        r.sc_b = sc_b;
        r.total = standin + w_style * (sc_g + w_boundary * sc_b);
        return r;
    }
};

struct FocalLossParams {
    double sigma1 = 0.05;  // distance falloff width
    double sigma2 = 0.01;  // field sensitivity
    double xi = 0.005;     // hinge threshold against tiny positive values
};

struct ScalarLoss {
    double value = 0.0;
    std::vector<double> grad;  // aligned with the editable-field samples
};

/// Distance-aware penalty on editable matter outside the declared regions:
/// mean over samples of (1 - exp(-d^2/sigma1)) * tanh(max(s + xi, 0)/sigma2).
/// Samples are grid vertices outside every region with their precomputed
/// boundary distances.
ScalarLoss geometric_focal_loss(std::span<const double> edit_values,
                                std::span<const double> distances,
                                const FocalLossParams& params);

/// mean over samples of max(base, 0) * max(edit, 0); gradient w.r.t. the
/// editable values only.
ScalarLoss collision_loss(std::span<const double> base_values,
                          std::span<const double> edit_values);

struct StyleConsistency {
    double smoothness = 0.0;  // interior term
    double boundary = 0.0;    // junction term
    double total = 0.0;       // smoothness + w_boundary * boundary
    std::vector<double> grad_params;  // w.r.t. the editable texture raw params
    bool empty_boundary_warning = false;
};

/// Diffuse-color consistency: the interior term penalizes color change under
/// a small random probe offset (drawn here, uniform per axis in
/// [-delta_scale, delta_scale]); the boundary term ties the editable color to
/// the frozen base color at junction samples.
StyleConsistency style_consistency(const TextureField& tex_edit, const TextureField& tex_base,
                                   std::span<const Vec3> interior_points,
                                   std::span<const Vec3> boundary_points, double delta_scale,
                                   double w_boundary, Rng& rng);

/// Mean squared difference between the editable field values and target
/// values over a caller-chosen sample set.
ScalarLoss field_mse_objective(std::span<const double> edit_values,
                               std::span<const double> target_values);

struct ImageLoss {
    double value = 0.0;
    Image grad;  // zero off-mask
};

/// Masked mean squared pixel error, normalized by masked pixel count.
ImageLoss masked_image_mse(const Image& rendered, const Image& target,
                           std::span<const uint8_t> mask);

/// Annealing hook: a draw from U[t0, t_final] on the session generator.
double schedule_weight(int step, int total_steps, double t0, double t_final, Rng& rng);

}  // namespace focalfuse
