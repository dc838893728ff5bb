#include "focalfuse/texture.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace focalfuse {

TextureField::TextureField(int resolution, const Aabb& domain)
    : resolution_(resolution), domain_(domain) {
    if (resolution < 1) throw std::invalid_argument("texture field: resolution must be >= 1");
    size_t points = size_t(resolution + 1) * (resolution + 1) * (resolution + 1);
    params_.assign(points * kChannels, 0.0);
}

void TextureField::fill_constant(const Vec3& diffuse, double roughness, double metalness) {
    auto safe_logit = [](double v) { return logit(std::clamp(v, 1e-4, 1.0 - 1e-4)); };
    size_t points = params_.size() / kChannels;
    for (size_t i = 0; i < points; ++i) {
        double* row = &params_[i * kChannels];
        row[0] = safe_logit(diffuse.x);
        row[1] = safe_logit(diffuse.y);
        row[2] = safe_logit(diffuse.z);
        row[3] = safe_logit(roughness);
        row[4] = safe_logit(metalness);
        row[5] = row[6] = row[7] = 0.0;
    }
}

TextureField::Stencil TextureField::stencil(const Vec3& p) const {
    const int r = resolution_;
    Vec3 ext = domain_.extent();
    double fx = std::clamp((p.x - domain_.lo.x) / ext.x * r, 0.0, double(r));
    double fy = std::clamp((p.y - domain_.lo.y) / ext.y * r, 0.0, double(r));
    double fz = std::clamp((p.z - domain_.lo.z) / ext.z * r, 0.0, double(r));
    int i = std::min(int(fx), r - 1);
    int j = std::min(int(fy), r - 1);
    int k = std::min(int(fz), r - 1);
    double tx = fx - i, ty = fy - j, tz = fz - k;
    Stencil s;
    int n = 0;
    const int stride_j = r + 1, stride_k = (r + 1) * (r + 1);
    for (int dz = 0; dz < 2; ++dz)
        for (int dy = 0; dy < 2; ++dy)
            for (int dx = 0; dx < 2; ++dx) {
                s.corner[n] = (i + dx) + (j + dy) * stride_j + (k + dz) * stride_k;
                s.weight[n] = (dx ? tx : 1.0 - tx) * (dy ? ty : 1.0 - ty) * (dz ? tz : 1.0 - tz);
                ++n;
            }
    return s;
}

std::array<double, TextureField::kChannels> TextureField::eval_raw(const Vec3& p) const {
    Stencil s = stencil(p);
    std::array<double, kChannels> out{};
    for (int c = 0; c < 8; ++c) {
        const double* row = &params_[size_t(s.corner[c]) * kChannels];
        for (int ch = 0; ch < kChannels; ++ch) out[ch] += s.weight[c] * row[ch];
    }
    return out;
}

Material TextureField::eval(const Vec3& p) const {
    Stencil s = stencil(p);
    Material m;
    m.diffuse = {};
    m.roughness = m.metalness = 0.0;
    Vec3 raw_n{};
    for (int c = 0; c < 8; ++c) {
        const double* row = &params_[size_t(s.corner[c]) * kChannels];
        const double w = s.weight[c];
        m.diffuse.x += w * sigmoid(row[0]);
        m.diffuse.y += w * sigmoid(row[1]);
        m.diffuse.z += w * sigmoid(row[2]);
        m.roughness += w * sigmoid(row[3]);
        m.metalness += w * sigmoid(row[4]);
        raw_n += Vec3{row[5], row[6], row[7]} * w;
    }
    m.normal_ts = decode_normal(raw_n);
    return m;
}

double TextureField::squash_deriv(int corner_row, int channel) const {
    return sigmoid_deriv(params_[size_t(corner_row) * kChannels + channel]);
}

uint64_t TextureField::content_hash() const {
    // FNV-1a over the raw parameter bytes.
    uint64_t h = 1469598103934665603ULL;
    const auto* bytes = reinterpret_cast<const unsigned char*>(params_.data());
    for (size_t i = 0; i < params_.size() * sizeof(double); ++i) {
        h ^= bytes[i];
        h *= 1099511628211ULL;
    }
    return h;
}

Vec3 decode_normal(const Vec3& raw_offset) {
    Vec3 u{raw_offset.x, raw_offset.y, 1.0 + raw_offset.z};
    double n = norm(u);
    if (n < 1e-12) return {0.0, 0.0, 1.0};
    return u / n;
}

Mat3 decode_normal_jacobian(const Vec3& raw_offset) {
    Vec3 u{raw_offset.x, raw_offset.y, 1.0 + raw_offset.z};
    double n = norm(u);
    if (n < 1e-12) return Mat3{};
    Vec3 d = u / n;
    Mat3 jac;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) jac(r, c) = ((r == c ? 1.0 : 0.0) - d[r] * d[c]) / n;
    return jac;
}

Vec3 specular_color(const Vec3& diffuse, double metalness) {
    if (metalness < 0.0 || metalness > 1.0)
        throw std::invalid_argument("specular_color: metalness must be in [0,1]");
    return Vec3{0.04, 0.04, 0.04} * (1.0 - metalness) + diffuse * metalness;
}

BakedMaps bake_texture_maps(const TextureField& field, const TriMesh& mesh, int resolution) {
    if (resolution < 1) throw std::invalid_argument("bake: resolution must be >= 1");
    BakedMaps out;
    out.diffuse = Image(resolution, resolution, 3);
    out.roughness_metalness = Image(resolution, resolution, 3);
    out.normal = Image(resolution, resolution, 3);
    const int n_faces = int(mesh.faces.size());
    out.face_uvs.assign(size_t(std::max(n_faces, 0)), {});
    if (n_faces == 0) return out;

    int blocks = 1;
    while (blocks * blocks < n_faces) ++blocks;
    const double block_px = double(resolution) / blocks;

    for (int f = 0; f < n_faces; ++f) {
        const auto& tri = mesh.faces[f];
        const Vec3& a = mesh.positions[tri[0]];
        const Vec3& b = mesh.positions[tri[1]];
        const Vec3& c = mesh.positions[tri[2]];
        if (norm(cross(b - a, c - a)) < 1e-18) {
            ++out.skipped_degenerate;
            continue;
        }
        const int bx = f % blocks, by = f / blocks;
        // Lower-left right triangle of the block, with a half-texel margin so
        // bilinear lookups at the corners stay inside the chart.
        const double pad = std::min(0.75, 0.2 * block_px);
        const double u0 = bx * block_px + pad, v0 = by * block_px + pad;
        const double leg = std::max(block_px - 2.0 * pad, 0.5);
        out.face_uvs[f] = {u0 / resolution,         v0 / resolution,
                           (u0 + leg) / resolution, v0 / resolution,
                           u0 / resolution,         (v0 + leg) / resolution};

        const int px_lo_x = std::max(0, int(std::floor(bx * block_px)));
        const int px_hi_x = std::min(resolution - 1, int(std::ceil((bx + 1) * block_px)));
        const int px_lo_y = std::max(0, int(std::floor(by * block_px)));
        const int px_hi_y = std::min(resolution - 1, int(std::ceil((by + 1) * block_px)));
        for (int py = px_lo_y; py <= px_hi_y; ++py) {
            for (int px = px_lo_x; px <= px_hi_x; ++px) {
                // Every texel of the block samples its face, with barycentrics
                // clamped onto the triangle; texels beyond the chart edge
                // become padding instead of bleeding black into lookups.
                double s = ((px + 0.5) - u0) / leg;
                double t = ((py + 0.5) - v0) / leg;
                double sc = std::clamp(s, 0.0, 1.0);
                double tc = std::clamp(t, 0.0, 1.0 - sc);
                Vec3 p = a + (b - a) * sc + (c - a) * tc;
                Material mat = field.eval(p);
                out.diffuse.at(px, py, 0) = mat.diffuse.x;
                out.diffuse.at(px, py, 1) = mat.diffuse.y;
                out.diffuse.at(px, py, 2) = mat.diffuse.z;
                out.roughness_metalness.at(px, py, 0) = mat.roughness;
                out.roughness_metalness.at(px, py, 1) = mat.metalness;
                out.normal.at(px, py, 0) = 0.5 * (mat.normal_ts.x + 1.0);
                out.normal.at(px, py, 1) = 0.5 * (mat.normal_ts.y + 1.0);
                out.normal.at(px, py, 2) = 0.5 * (mat.normal_ts.z + 1.0);
            }
        }
    }
    return out;
}

}  // namespace focalfuse
