#include "focalfuse/render.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace focalfuse {

namespace {
constexpr double kPi = 3.14159265358979323846;
constexpr double kTwoPi = 6.28318530717958647692;
}  // namespace

Vec3 Camera::eye() const {
    return target + Vec3{radius * std::cos(elevation) * std::sin(azimuth),
                         radius * std::sin(elevation),
                         radius * std::cos(elevation) * std::cos(azimuth)};
}

Vec3 Camera::forward() const { return normalized(target - eye()); }

Vec3 Camera::right() const {
    Vec3 f = forward();
    Vec3 r = cross(f, Vec3{0.0, 1.0, 0.0});
    if (norm_sq(r) < 1e-12) r = cross(f, Vec3{1.0, 0.0, 0.0});
    return normalized(r);
}

Vec3 Camera::up() const { return cross(right(), forward()); }

std::vector<Camera> sample_cameras(int s, int l, const CameraRanges& ranges, double fov_y,
                                   int width, int height, Rng& rng) {
    if (s < 1 || l < 1) throw std::invalid_argument("sample_cameras: s and l must be >= 1");
    if (ranges.r_min > ranges.r_max || ranges.theta_min > ranges.theta_max)
        throw std::invalid_argument("sample_cameras: empty range");
    std::vector<Camera> cams;
    cams.reserve(size_t(s) * l);
    for (int k = 0; k < s * l; ++k) {
        int d = k % l;
        Camera c;
        c.radius = rng.uniform(ranges.r_min, ranges.r_max);
        c.elevation = rng.uniform(ranges.theta_min, ranges.theta_max);
        double seg_lo = kTwoPi * d / l;
        double seg_hi = kTwoPi * (d + 1) / l;
        c.azimuth = rng.uniform(seg_lo, seg_hi);
        c.fov_y = fov_y;
        c.width = width;
        c.height = height;
        cams.push_back(c);
    }
    return cams;
}

Camera eval_camera(double azimuth, const CameraRanges& ranges, double fov_y, int width,
                   int height) {
    Camera c;
    c.radius = ranges.r_max;
    c.elevation = ranges.theta_max;
    c.azimuth = azimuth;
    c.fov_y = fov_y;
    c.width = width;
    c.height = height;
    return c;
}

Image RenderBuffers::normal_image() const {
    Image img(width, height, 3);
    img.data = normal;
    return img;
}

Image RenderBuffers::mask_image() const {
    Image img(width, height, 1);
    for (size_t i = 0; i < pixel_count(); ++i) img.data[i] = object_mask[i] ? 1.0 : 0.0;
    return img;
}

std::vector<uint8_t> RenderBuffers::editable_mask() const {
    std::vector<uint8_t> m(pixel_count(), 0);
    for (size_t i = 0; i < pixel_count(); ++i) m[i] = pdm[i] == PdmLabel::Editable ? 1 : 0;
    return m;
}

namespace {

std::vector<Vec3> vertex_normals(const TriMesh& mesh) {
    std::vector<Vec3> normals(mesh.positions.size(), Vec3{});
    for (int f = 0; f < int(mesh.faces.size()); ++f) {
        const auto& t = mesh.faces[f];
        Vec3 n = cross(mesh.positions[t[1]] - mesh.positions[t[0]],
                       mesh.positions[t[2]] - mesh.positions[t[0]]);
        for (int i : t) normals[i] += n;  // area weighting via unnormalized cross
    }
    for (auto& n : normals) n = normalized(n);
    return normals;
}

}  // namespace

RenderBuffers rasterize(const TriMesh& mesh, const Camera& cam, const RenderConfig& config) {
    RenderBuffers buf;
    buf.width = cam.width;
    buf.height = cam.height;
    const size_t px_count = buf.pixel_count();
    buf.depth.assign(px_count, std::numeric_limits<double>::infinity());
    buf.face_id.assign(px_count, -1);
    buf.bary.assign(px_count * 2, 0.0);
    buf.normal.assign(px_count * 3, 0.0);
    buf.object_mask.assign(px_count, 0);
    buf.pdm.assign(px_count, PdmLabel::Background);
    if (mesh.empty()) return buf;

    const Vec3 eye = cam.eye();
    const Vec3 fwd = cam.forward(), right = cam.right(), up = cam.up();
    const double tan_half = std::tan(cam.fov_y * 0.5);
    const double aspect = double(cam.width) / cam.height;
    const double near_clip = 1e-4;

    std::vector<Vec3> smooth_n;
    if (config.smooth_normals) smooth_n = vertex_normals(mesh);

    // Screen-space projections per vertex.
    struct Projected {
        double sx, sy, z;
        bool ok;
    };
    std::vector<Projected> proj(mesh.positions.size());
    for (size_t i = 0; i < mesh.positions.size(); ++i) {
        Vec3 v = mesh.positions[i] - eye;
        double z = dot(v, fwd);
        if (z <= near_clip) {
            proj[i] = {0, 0, 0, false};
            continue;
        }
        double ndc_x = dot(v, right) / (z * tan_half * aspect);
        double ndc_y = dot(v, up) / (z * tan_half);
        proj[i] = {(ndc_x + 1.0) * 0.5 * cam.width, (1.0 - ndc_y) * 0.5 * cam.height, z, true};
    }

    for (int f = 0; f < int(mesh.faces.size()); ++f) {
        const auto& tri = mesh.faces[f];
        const Projected& p0 = proj[tri[0]];
        const Projected& p1 = proj[tri[1]];
        const Projected& p2 = proj[tri[2]];
        if (!p0.ok || !p1.ok || !p2.ok) continue;  // crosses the near plane

        const double area = (p1.sx - p0.sx) * (p2.sy - p0.sy) - (p1.sy - p0.sy) * (p2.sx - p0.sx);
        if (std::abs(area) < 1e-14) continue;
        const double inv_area = 1.0 / area;

        int min_x = std::max(0, int(std::floor(std::min({p0.sx, p1.sx, p2.sx}))));
        int max_x = std::min(cam.width - 1, int(std::ceil(std::max({p0.sx, p1.sx, p2.sx}))));
        int min_y = std::max(0, int(std::floor(std::min({p0.sy, p1.sy, p2.sy}))));
        int max_y = std::min(cam.height - 1, int(std::ceil(std::max({p0.sy, p1.sy, p2.sy}))));
        if (min_x > max_x || min_y > max_y) continue;

        Vec3 flat_n;
        if (!config.smooth_normals)
            flat_n = normalized(cross(mesh.positions[tri[1]] - mesh.positions[tri[0]],
                                      mesh.positions[tri[2]] - mesh.positions[tri[0]]));

        for (int y = min_y; y <= max_y; ++y) {
            for (int x = min_x; x <= max_x; ++x) {
                const double px = x + 0.5, py = y + 0.5;
                double w0 = ((p1.sx - px) * (p2.sy - py) - (p1.sy - py) * (p2.sx - px)) * inv_area;
                double w1 = ((p2.sx - px) * (p0.sy - py) - (p2.sy - py) * (p0.sx - px)) * inv_area;
                double w2 = 1.0 - w0 - w1;
                if (w0 < 0.0 || w1 < 0.0 || w2 < 0.0) continue;

                const double inv_z = w0 / p0.z + w1 / p1.z + w2 / p2.z;
                const double depth = 1.0 / inv_z;
                const size_t idx = size_t(y) * cam.width + x;
                if (depth >= buf.depth[idx]) continue;

                // Perspective-correct barycentrics.
                const double b1 = (w1 / p1.z) * depth;
                const double b2 = (w2 / p2.z) * depth;

                buf.depth[idx] = depth;
                buf.face_id[idx] = f;
                buf.bary[idx * 2] = b1;
                buf.bary[idx * 2 + 1] = b2;
                buf.object_mask[idx] = 1;
                buf.pdm[idx] = (mesh.has_provenance() && mesh.face_part[f] == Part::Editable)
                                   ? PdmLabel::Editable
                                   : PdmLabel::Base;

                Vec3 n = flat_n;
                if (config.smooth_normals)
                    n = normalized(smooth_n[tri[0]] * (1.0 - b1 - b2) + smooth_n[tri[1]] * b1 +
                                   smooth_n[tri[2]] * b2);
                if (config.camera_space_normals)
                    n = Vec3{dot(n, right), dot(n, up), -dot(n, fwd)};
                buf.normal[idx * 3] = n.x;
                buf.normal[idx * 3 + 1] = n.y;
                buf.normal[idx * 3 + 2] = n.z;
            }
        }
    }
    return buf;
}

EnvLight EnvLight::constant(const Vec3& radiance, int n_directions) {
    EnvLight light;
    light.directions.reserve(n_directions);
    // Fibonacci sphere: near-uniform stratification of directions.
    const double golden = kPi * (3.0 - std::sqrt(5.0));
    for (int i = 0; i < n_directions; ++i) {
        double y = 1.0 - 2.0 * (i + 0.5) / n_directions;
        double r = std::sqrt(std::max(0.0, 1.0 - y * y));
        double phi = golden * i;
        light.directions.push_back({r * std::cos(phi), y, r * std::sin(phi)});
    }
    light.radiance.assign(n_directions, radiance);
    light.solid_angle.assign(n_directions, 4.0 * kPi / n_directions);
    return light;
}

EnvLight EnvLight::from_latlong(const Image& img) {
    if (img.width <= 0 || img.height <= 0 || img.channels < 3)
        throw std::invalid_argument("env light: need a non-empty rgb image");
    EnvLight light;
    const int rows = img.height, cols = img.width;
    light.directions.reserve(size_t(rows) * cols);
    double total = 0.0;
    for (int r = 0; r < rows; ++r) {
        double theta = kPi * (r + 0.5) / rows;  // polar angle from +y
        double dw = std::sin(theta) * (kPi / rows) * (kTwoPi / cols);
        for (int c = 0; c < cols; ++c) {
            double phi = kTwoPi * (c + 0.5) / cols;
            light.directions.push_back(
                {std::sin(theta) * std::sin(phi), std::cos(theta), std::sin(theta) * std::cos(phi)});
            light.radiance.push_back({std::max(img.at(c, r, 0), 0.0),
                                      std::max(img.at(c, r, 1), 0.0),
                                      std::max(img.at(c, r, 2), 0.0)});
            light.solid_angle.push_back(dw);
            total += dw;
        }
    }
    // The midpoint quadrature slightly overcounts sin(theta); renormalize so
    // the weights cover the sphere exactly.
    const double correction = 4.0 * kPi / total;
    for (auto& dw : light.solid_angle) dw *= correction;
    return light;
}

namespace {

struct ShadePoint {
    Vec3 position;
    Vec3 geo_normal;   // world space, from the shading mesh
    Vec3 view_dir;     // toward the eye
    Vec3 tangent, bitangent;
};

// Tangent frame deterministic in the geometric normal.
void tangent_frame(const Vec3& n, Vec3& t, Vec3& b) {
    Vec3 a = std::abs(n.x) < 0.9 ? Vec3{1.0, 0.0, 0.0} : Vec3{0.0, 1.0, 0.0};
    t = normalized(cross(a, n));
    b = cross(n, t);
}

ShadePoint shade_point(const RenderBuffers& buf, const TriMesh& mesh,
                       const std::vector<Vec3>& smooth_n, const Camera& cam,
                       const RenderConfig& config, size_t idx) {
    ShadePoint sp;
    const int f = buf.face_id[idx];
    const auto& tri = mesh.faces[f];
    const double b1 = buf.bary[idx * 2], b2 = buf.bary[idx * 2 + 1];
    const double b0 = 1.0 - b1 - b2;
    sp.position =
        mesh.positions[tri[0]] * b0 + mesh.positions[tri[1]] * b1 + mesh.positions[tri[2]] * b2;
    if (config.smooth_normals)
        sp.geo_normal =
            normalized(smooth_n[tri[0]] * b0 + smooth_n[tri[1]] * b1 + smooth_n[tri[2]] * b2);
    else
        sp.geo_normal = mesh.face_normal(f);
    sp.view_dir = normalized(cam.eye() - sp.position);
    tangent_frame(sp.geo_normal, sp.tangent, sp.bitangent);
    return sp;
}

double specular_exponent(double roughness) { return 2.0 / std::max(roughness * roughness, 1e-4) - 2.0; }

// Slot indices above the provided span collapse onto the last entry, so a
// single-texture span shades every face with that texture.
const TextureField& texture_for_face(const TriMesh& mesh,
                                     std::span<const TextureField* const> textures, int face) {
    int slot = mesh.face_texture.empty() ? 0 : mesh.face_texture[face];
    slot = std::min(slot, int(textures.size()) - 1);
    return *textures[slot];
}

}  // namespace

Image shade(const RenderBuffers& buffers, const TriMesh& mesh,
            std::span<const TextureField* const> textures, const EnvLight& light,
            const Camera& cam, const RenderConfig& config) {
    Image img(buffers.width, buffers.height, 3);
    std::vector<Vec3> smooth_n;
    if (config.smooth_normals) smooth_n = vertex_normals(mesh);

    for (size_t idx = 0; idx < buffers.pixel_count(); ++idx) {
        if (!buffers.object_mask[idx]) continue;
        ShadePoint sp = shade_point(buffers, mesh, smooth_n, cam, config, idx);
        const TextureField& tex = texture_for_face(mesh, textures, buffers.face_id[idx]);
        Material mat = tex.eval(sp.position);

        const Vec3 n = sp.tangent * mat.normal_ts.x + sp.bitangent * mat.normal_ts.y +
                       sp.geo_normal * mat.normal_ts.z;
        const Vec3 kd_over_pi = mat.diffuse * ((1.0 - mat.metalness) / kPi);
        const Vec3 ks = specular_color(mat.diffuse, mat.metalness);
        const double nsp = specular_exponent(mat.roughness);
        const double lobe_norm = (nsp + 2.0) / kTwoPi;

        Vec3 radiance{};
        for (size_t i = 0; i < light.directions.size(); ++i) {
            const Vec3& wi = light.directions[i];
            const double ndl = dot(n, wi);
            if (ndl <= 0.0) continue;
            Vec3 f = kd_over_pi;
            if (config.enable_specular) {
                const Vec3 refl = n * (2.0 * ndl) - wi;
                const double c = dot(refl, sp.view_dir);
                if (c > 0.0) {
                    const double lobe = lobe_norm * std::pow(c, nsp);
                    f += ks * lobe;
                }
            }
            radiance += cwise_mul(light.radiance[i], f) * (ndl * light.solid_angle[i]);
        }
        img.data[idx * 3] = radiance.x;
        img.data[idx * 3 + 1] = radiance.y;
        img.data[idx * 3 + 2] = radiance.z;
    }
    return img;
}

void shade_backward(const RenderBuffers& buffers, const TriMesh& mesh,
                    std::span<const TextureField* const> textures, int trainable_slot,
                    const EnvLight& light, const Camera& cam, const RenderConfig& config,
                    const Image& pixel_grad, std::span<const uint8_t> pixel_mask,
                    std::vector<double>& param_grad) {
    const TextureField& tex = *textures[trainable_slot];
    if (param_grad.size() != tex.params().size())
        throw std::invalid_argument("shade_backward: gradient buffer size mismatch");
    std::vector<Vec3> smooth_n;
    if (config.smooth_normals) smooth_n = vertex_normals(mesh);

    for (size_t idx = 0; idx < buffers.pixel_count(); ++idx) {
        if (!buffers.object_mask[idx]) continue;
        if (!pixel_mask.empty() && !pixel_mask[idx]) continue;
        const int face = buffers.face_id[idx];
        int slot = mesh.face_texture.empty() ? 0 : mesh.face_texture[face];
        slot = std::min(slot, int(textures.size()) - 1);
        if (slot != trainable_slot) continue;

        const Vec3 up{pixel_grad.data[idx * 3], pixel_grad.data[idx * 3 + 1],
                      pixel_grad.data[idx * 3 + 2]};
        if (up.x == 0.0 && up.y == 0.0 && up.z == 0.0) continue;

        ShadePoint sp = shade_point(buffers, mesh, smooth_n, cam, config, idx);
        TextureField::Stencil stencil = tex.stencil(sp.position);
        std::array<double, TextureField::kChannels> raw = tex.eval_raw(sp.position);
        Material mat = tex.eval(sp.position);

        const Vec3 n = sp.tangent * mat.normal_ts.x + sp.bitangent * mat.normal_ts.y +
                       sp.geo_normal * mat.normal_ts.z;
        const Vec3 ks = specular_color(mat.diffuse, mat.metalness);
        const double m = mat.metalness;
        const double nsp = specular_exponent(mat.roughness);
        const double lobe_norm = (nsp + 2.0) / kTwoPi;
        const bool rough_active = mat.roughness * mat.roughness > 1e-4;

        Vec3 d_kd{}, d_n{};
        double d_rough = 0.0, d_metal = 0.0;
        for (size_t i = 0; i < light.directions.size(); ++i) {
            const Vec3& wi = light.directions[i];
            const double ndl = dot(n, wi);
            if (ndl <= 0.0) continue;
            const double dw = light.solid_angle[i];
            const Vec3 rad = light.radiance[i];

            double lobe = 0.0, dlobe_dnsp = 0.0, dlobe_dc = 0.0, c = 0.0;
            if (config.enable_specular) {
                const Vec3 refl = n * (2.0 * ndl) - wi;
                c = dot(refl, sp.view_dir);
                if (c > 0.0) {
                    const double cp = std::pow(c, nsp);
                    lobe = lobe_norm * cp;
                    dlobe_dnsp = cp / kTwoPi + lobe * std::log(c);
                    dlobe_dc = nsp > 0.0 ? lobe_norm * nsp * std::pow(c, nsp - 1.0) : 0.0;
                }
            }

            // f per channel: kd*(1-m)/pi + ks*lobe ; pixel += rad*f*ndl*dw
            Vec3 f = mat.diffuse * ((1.0 - m) / kPi) + ks * lobe;
            for (int ch = 0; ch < 3; ++ch) {
                const double u = up[ch] * rad[ch] * ndl * dw;
                d_kd[ch] += u * ((1.0 - m) / kPi + m * lobe);
                d_metal += u * (-mat.diffuse[ch] / kPi + (mat.diffuse[ch] - 0.04) * lobe);
                if (rough_active && c > 0.0) {
                    const double dnsp_drough = -4.0 / std::pow(mat.roughness, 3);
                    d_rough += u * ks[ch] * dlobe_dnsp * dnsp_drough;
                }
            }

            // Normal path: through the ndl factor and the reflection lobe.
            Vec3 coeff{};
            for (int ch = 0; ch < 3; ++ch) coeff[ch] = up[ch] * rad[ch] * dw;
            const double cf = coeff.x * f.x + coeff.y * f.y + coeff.z * f.z;
            d_n += wi * cf;
            if (c > 0.0) {
                const double cks = coeff.x * ks.x + coeff.y * ks.y + coeff.z * ks.z;
                const Vec3 dc_dn = wi * (2.0 * dot(n, sp.view_dir)) + sp.view_dir * (2.0 * ndl);
                d_n += dc_dn * (cks * dlobe_dc * ndl);
            }
        }

        // Chain into the raw texture parameters.
        const Vec3 d_t{dot(d_n, sp.tangent), dot(d_n, sp.bitangent), dot(d_n, sp.geo_normal)};
        const Vec3 raw_n{raw[5], raw[6], raw[7]};
        const Mat3 dec_jac = decode_normal_jacobian(raw_n);
        const Vec3 d_raw_n = dec_jac.transposed() * d_t;
        for (int cidx = 0; cidx < 8; ++cidx) {
            const int corner = stencil.corner[cidx];
            const double w = stencil.weight[cidx];
            const size_t row = size_t(corner) * TextureField::kChannels;
            param_grad[row + 0] += d_kd.x * w * tex.squash_deriv(corner, 0);
            param_grad[row + 1] += d_kd.y * w * tex.squash_deriv(corner, 1);
            param_grad[row + 2] += d_kd.z * w * tex.squash_deriv(corner, 2);
            param_grad[row + 3] += d_rough * w * tex.squash_deriv(corner, 3);
            param_grad[row + 4] += d_metal * w * tex.squash_deriv(corner, 4);
            param_grad[row + 5] += d_raw_n.x * w;
            param_grad[row + 6] += d_raw_n.y * w;
            param_grad[row + 7] += d_raw_n.z * w;
        }
    }
}

Image compose(const Image& base_img, const Image& edit_img, const RenderBuffers& buffers,
              const Vec3& background) {
    if (!base_img.same_shape(edit_img) || base_img.width != buffers.width ||
        base_img.height != buffers.height || base_img.channels != 3)
        throw std::invalid_argument("compose: resolution mismatch");
    Image out(base_img.width, base_img.height, 3);
    for (size_t idx = 0; idx < buffers.pixel_count(); ++idx) {
        const double* src = nullptr;
        switch (buffers.pdm[idx]) {
            case PdmLabel::Base: src = &base_img.data[idx * 3]; break;
            case PdmLabel::Editable: src = &edit_img.data[idx * 3]; break;
            case PdmLabel::Background: break;
        }
        if (src) {
            out.data[idx * 3] = src[0];
            out.data[idx * 3 + 1] = src[1];
            out.data[idx * 3 + 2] = src[2];
        } else {
            out.data[idx * 3] = background.x;
            out.data[idx * 3 + 1] = background.y;
            out.data[idx * 3 + 2] = background.z;
        }
    }
    return out;
}

namespace {

// Exact box filter from src_len samples to dst_len samples with fractional
// overlap weights.
void box_weights(int src_len, int dst_len, int dst_i, int& begin, std::vector<double>& w) {
    const double scale = double(src_len) / dst_len;
    const double lo = dst_i * scale, hi = (dst_i + 1) * scale;
    begin = int(std::floor(lo));
    const int end = std::min(src_len, int(std::ceil(hi)));
    w.clear();
    for (int s = begin; s < end; ++s) {
        double cover = std::min<double>(hi, s + 1) - std::max<double>(lo, s);
        w.push_back(std::max(cover, 0.0) / scale);
    }
}

}  // namespace

Image coarse_shape_encoding(const Image& normal_map, const Image& object_mask) {
    if (normal_map.channels != 3 || object_mask.channels != 1)
        throw std::invalid_argument("coarse encoding: expected 3ch normals and 1ch mask");
    if (normal_map.width != object_mask.width || normal_map.height != object_mask.height)
        throw std::invalid_argument("coarse encoding: input resolutions differ");
    if (normal_map.width < 64 || normal_map.height < 64)
        throw std::invalid_argument("coarse encoding: inputs must be at least 64x64");

    constexpr int kOut = 64;
    Image out(kOut, kOut, 4);
    std::vector<double> wx, wy;
    int bx = 0, by = 0;
    for (int oy = 0; oy < kOut; ++oy) {
        box_weights(normal_map.height, kOut, oy, by, wy);
        for (int ox = 0; ox < kOut; ++ox) {
            box_weights(normal_map.width, kOut, ox, bx, wx);
            double acc[4] = {0, 0, 0, 0};
            for (size_t iy = 0; iy < wy.size(); ++iy)
                for (size_t ix = 0; ix < wx.size(); ++ix) {
                    const double w = wx[ix] * wy[iy];
                    const int sx = bx + int(ix), sy = by + int(iy);
                    acc[0] += w * normal_map.at(sx, sy, 0);
                    acc[1] += w * normal_map.at(sx, sy, 1);
                    acc[2] += w * normal_map.at(sx, sy, 2);
                    acc[3] += w * object_mask.at(sx, sy, 0);
                }
            for (int c = 0; c < 4; ++c) out.at(ox, oy, c) = acc[c];
        }
    }
    return out;
}

namespace {

void face_normal_backward(const Vec3& p0, const Vec3& p1, const Vec3& p2, const Vec3& d_n,
                          Vec3& g0, Vec3& g1, Vec3& g2) {
    const Vec3 a = p1 - p0, b = p2 - p0;
    const Vec3 c = cross(a, b);
    const double len = norm(c);
    if (len < 1e-18) return;
    const Vec3 n = c / len;
    const Vec3 d_c = (d_n - n * dot(n, d_n)) / len;
    const Vec3 d_a = cross(b, d_c);
    const Vec3 d_b = cross(d_c, a);
    g1 += d_a;
    g2 += d_b;
    g0 -= d_a + d_b;
}

}  // namespace

NormalMapObjective normal_map_objective(const RenderBuffers& buffers, const TriMesh& mesh,
                                        const Image& target_normals, const Image& target_mask,
                                        bool coarse) {
    NormalMapObjective out;
    out.d_positions.assign(mesh.positions.size(), Vec3{});

    // Current flat normal map at fixed coverage.
    Image nmap(buffers.width, buffers.height, 3);
    std::vector<Vec3> face_n(mesh.faces.size(), Vec3{});
    std::vector<uint8_t> face_touched(mesh.faces.size(), 0);
    for (size_t idx = 0; idx < buffers.pixel_count(); ++idx) {
        if (!buffers.object_mask[idx]) continue;
        const int f = buffers.face_id[idx];
        if (!face_touched[f]) {
            face_n[f] = mesh.face_normal(f);
            face_touched[f] = 1;
        }
        nmap.data[idx * 3] = face_n[f].x;
        nmap.data[idx * 3 + 1] = face_n[f].y;
        nmap.data[idx * 3 + 2] = face_n[f].z;
    }

    // d(value)/d(normal map pixel), channel-wise.
    Image d_nmap(buffers.width, buffers.height, 3);

    if (coarse) {
        Image enc = coarse_shape_encoding(nmap, buffers.mask_image());
        Image enc_t = coarse_shape_encoding(target_normals, target_mask);
        const double inv_n = 1.0 / double(enc.data.size());
        double sum = 0.0;
        Image d_enc(64, 64, 4);
        for (size_t i = 0; i < enc.data.size(); ++i) {
            const double r = enc.data[i] - enc_t.data[i];
            sum += r * r;
            d_enc.data[i] = 2.0 * r * inv_n;
        }
        out.value = sum * inv_n;
        // Push through the (linear) box filter; the mask channel carries no
        // geometry gradient.
        std::vector<double> wx, wy;
        int bx = 0, by = 0;
        for (int oy = 0; oy < 64; ++oy) {
            box_weights(buffers.height, 64, oy, by, wy);
            for (int ox = 0; ox < 64; ++ox) {
                box_weights(buffers.width, 64, ox, bx, wx);
                for (size_t iy = 0; iy < wy.size(); ++iy)
                    for (size_t ix = 0; ix < wx.size(); ++ix) {
                        const double w = wx[ix] * wy[iy];
                        const int sx = bx + int(ix), sy = by + int(iy);
                        for (int c = 0; c < 3; ++c)
                            d_nmap.at(sx, sy, c) += w * d_enc.at(ox, oy, c);
                    }
            }
        }
    } else {
        if (!nmap.same_shape(target_normals))
            throw std::invalid_argument("normal objective: target resolution mismatch");
        const double inv_n = 1.0 / double(nmap.data.size());
        double sum = 0.0;
        for (size_t i = 0; i < nmap.data.size(); ++i) {
            const double r = nmap.data[i] - target_normals.data[i];
            sum += r * r;
            d_nmap.data[i] = 2.0 * r * inv_n;
        }
        out.value = sum * inv_n;
    }

    // Accumulate per-face normal gradients, then push into vertex positions.
    std::vector<Vec3> d_face_n(mesh.faces.size(), Vec3{});
    for (size_t idx = 0; idx < buffers.pixel_count(); ++idx) {
        if (!buffers.object_mask[idx]) continue;
        const int f = buffers.face_id[idx];
        d_face_n[f] += Vec3{d_nmap.data[idx * 3], d_nmap.data[idx * 3 + 1],
                            d_nmap.data[idx * 3 + 2]};
    }
    for (size_t f = 0; f < mesh.faces.size(); ++f) {
        if (d_face_n[f].x == 0.0 && d_face_n[f].y == 0.0 && d_face_n[f].z == 0.0) continue;
        const auto& tri = mesh.faces[f];
        face_normal_backward(mesh.positions[tri[0]], mesh.positions[tri[1]],
                             mesh.positions[tri[2]], d_face_n[f], out.d_positions[tri[0]],
                             out.d_positions[tri[1]], out.d_positions[tri[2]]);
    }
    return out;
}

}  // namespace focalfuse
