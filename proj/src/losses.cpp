#include "focalfuse/losses.hpp"

#include <cmath>
#include <stdexcept>

namespace focalfuse {

ScalarLoss geometric_focal_loss(std::span<const double> edit_values,
                                std::span<const double> distances,
                                const FocalLossParams& params) {
    if (edit_values.size() != distances.size())
        throw std::invalid_argument("geometric_focal_loss: sample length mismatch");
    ScalarLoss out;
    out.grad.assign(edit_values.size(), 0.0);
    if (edit_values.empty()) return out;

    const double inv_n = 1.0 / double(edit_values.size());
    double sum = 0.0;
    for (size_t i = 0; i < edit_values.size(); ++i) {
        const double d = distances[i];
        const double weight = 1.0 - std::exp(-(d * d) / params.sigma1);
        const double hinge = std::max(edit_values[i] + params.xi, 0.0);
        const double th = std::tanh(hinge / params.sigma2);
        sum += weight * th;
        if (hinge > 0.0) out.grad[i] = inv_n * weight * (1.0 - th * th) / params.sigma2;
    }
    out.value = sum * inv_n;
    return out;
}

ScalarLoss collision_loss(std::span<const double> base_values,
                          std::span<const double> edit_values) {
    if (base_values.size() != edit_values.size())
        throw std::invalid_argument("collision_loss: sample length mismatch");
    ScalarLoss out;
    out.grad.assign(edit_values.size(), 0.0);
    if (edit_values.empty()) return out;

    const double inv_n = 1.0 / double(edit_values.size());
    double sum = 0.0;
    for (size_t i = 0; i < edit_values.size(); ++i) {
        const double b = std::max(base_values[i], 0.0);
        const double e = std::max(edit_values[i], 0.0);
        sum += b * e;
        if (edit_values[i] > 0.0) out.grad[i] = inv_n * b;
    }
    out.value = sum * inv_n;
    return out;
}

namespace {

// Accumulates d(sum of squared diffuse differences)/d(raw params) for one
// evaluation point with the given per-channel residual factors.
void accumulate_diffuse_grad(const TextureField& tex, const Vec3& p, const Vec3& residual2,
                             double scale, std::vector<double>& grad) {
    TextureField::Stencil s = tex.stencil(p);
    for (int c = 0; c < 8; ++c) {
        const size_t row = size_t(s.corner[c]) * TextureField::kChannels;
        for (int ch = 0; ch < 3; ++ch)
            grad[row + ch] += scale * residual2[ch] * s.weight[c] * tex.squash_deriv(s.corner[c], ch);
    }
}

Vec3 eval_diffuse(const TextureField& tex, const Vec3& p) { return tex.eval(p).diffuse; }

}  // namespace

StyleConsistency style_consistency(const TextureField& tex_edit, const TextureField& tex_base,
                                   std::span<const Vec3> interior_points,
                                   std::span<const Vec3> boundary_points, double delta_scale,
                                   double w_boundary, Rng& rng) {
    StyleConsistency out;
    out.grad_params.assign(tex_edit.params().size(), 0.0);

    if (!interior_points.empty()) {
        const double inv_n = 1.0 / double(interior_points.size());
        double sum = 0.0;
        for (const Vec3& p : interior_points) {
            Vec3 delta = rng.uniform_in_cube(delta_scale);
            Vec3 q = p + delta;
            Vec3 diff = eval_diffuse(tex_edit, p) - eval_diffuse(tex_edit, q);
            sum += norm_sq(diff);
            Vec3 r2 = diff * 2.0;
            accumulate_diffuse_grad(tex_edit, p, r2, inv_n, out.grad_params);
            accumulate_diffuse_grad(tex_edit, q, -r2, inv_n, out.grad_params);
        }
        out.smoothness = sum * inv_n;
    }

    if (boundary_points.empty()) {
        out.empty_boundary_warning = w_boundary > 0.0;
    } else {
        const double inv_n = 1.0 / double(boundary_points.size());
        double sum = 0.0;
        for (const Vec3& p : boundary_points) {
            Vec3 diff = eval_diffuse(tex_edit, p) - eval_diffuse(tex_base, p);
            sum += norm_sq(diff);
            accumulate_diffuse_grad(tex_edit, p, diff * 2.0, inv_n * w_boundary, out.grad_params);
        }
        out.boundary = sum * inv_n;
    }

    out.total = out.smoothness + w_boundary * out.boundary;
    return out;
}

ScalarLoss field_mse_objective(std::span<const double> edit_values,
                               std::span<const double> target_values) {
    if (edit_values.size() != target_values.size())
        throw std::invalid_argument("field_mse_objective: sample length mismatch");
    ScalarLoss out;
    out.grad.assign(edit_values.size(), 0.0);
    if (edit_values.empty()) return out;
    const double inv_n = 1.0 / double(edit_values.size());
    double sum = 0.0;
    for (size_t i = 0; i < edit_values.size(); ++i) {
        const double r = edit_values[i] - target_values[i];
        sum += r * r;
        out.grad[i] = 2.0 * r * inv_n;
    }
    out.value = sum * inv_n;
    return out;
}

ImageLoss masked_image_mse(const Image& rendered, const Image& target,
                           std::span<const uint8_t> mask) {
    if (!rendered.same_shape(target))
        throw std::invalid_argument("masked_image_mse: image shapes differ");
    if (mask.size() != rendered.pixel_count())
        throw std::invalid_argument("masked_image_mse: mask size mismatch");

    ImageLoss out;
    out.grad = Image(rendered.width, rendered.height, rendered.channels);
    size_t area = 0;
    for (uint8_t m : mask) area += m ? 1 : 0;
    if (area == 0) return out;

    const double inv_area = 1.0 / double(area);
    double sum = 0.0;
    for (size_t px = 0; px < rendered.pixel_count(); ++px) {
        if (!mask[px]) continue;
        for (int c = 0; c < rendered.channels; ++c) {
            const size_t i = px * rendered.channels + c;
            const double r = rendered.data[i] - target.data[i];
            sum += r * r;
            out.grad.data[i] = 2.0 * r * inv_area;
        }
    }
    out.value = sum * inv_area;
    return out;
}

double schedule_weight(int step, int total_steps, double t0, double t_final, Rng& rng) {
    if (step < 0 || step > total_steps)
        throw std::invalid_argument("schedule_weight: step out of range");
    if (t0 > t_final) throw std::invalid_argument("schedule_weight: t0 > t_final");
    return rng.uniform(t0, t_final);
}

}  // namespace focalfuse
