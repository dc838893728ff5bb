#include "focalfuse/tetgrid.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <unordered_map>

namespace focalfuse {

Vec3 TriMesh::face_normal(int f) const {
    const auto& t = faces[f];
    return normalized(cross(positions[t[1]] - positions[t[0]], positions[t[2]] - positions[t[0]]));
}

Vec3 TriMesh::face_centroid(int f) const {
    const auto& t = faces[f];
    return (positions[t[0]] + positions[t[1]] + positions[t[2]]) / 3.0;
}

double TriMesh::face_area(int f) const {
    const auto& t = faces[f];
    return 0.5 * norm(cross(positions[t[1]] - positions[t[0]], positions[t[2]] - positions[t[0]]));
}

double TriMesh::total_area() const {
    double a = 0.0;
    for (int f = 0; f < int(faces.size()); ++f) a += face_area(f);
    return a;
}

Aabb TriMesh::bounds() const {
    Aabb b;
    for (const auto& p : positions) b.expand(p);
    return b;
}

Vec3 TetGrid::cell_spacing() const {
    Vec3 e = domain.extent();
    return {e.x / resolution[0], e.y / resolution[1], e.z / resolution[2]};
}

double TetGrid::min_edge_length() const {
    Vec3 h = cell_spacing();
    return std::min({h.x, h.y, h.z});
}

double TetGrid::cell_diagonal() const { return norm(cell_spacing()); }

double TetGrid::tet_signed_volume(int t) const {
    const auto& q = tets[t];
    Vec3 a = deformed_position(q[0]);
    Vec3 b = deformed_position(q[1]);
    Vec3 c = deformed_position(q[2]);
    Vec3 d = deformed_position(q[3]);
    return dot(cross(b - a, c - a), d - a) / 6.0;
}

void TetGrid::interpolation_stencil(const Vec3& p, std::array<int, 8>& idx,
                                    std::array<double, 8>& w) const {
    Vec3 h = cell_spacing();
    double fx = std::clamp((p.x - domain.lo.x) / h.x, 0.0, double(resolution[0]));
    double fy = std::clamp((p.y - domain.lo.y) / h.y, 0.0, double(resolution[1]));
    double fz = std::clamp((p.z - domain.lo.z) / h.z, 0.0, double(resolution[2]));
    int i = std::min(int(fx), resolution[0] - 1);
    int j = std::min(int(fy), resolution[1] - 1);
    int k = std::min(int(fz), resolution[2] - 1);
    double tx = fx - i, ty = fy - j, tz = fz - k;
    int n = 0;
    for (int dz = 0; dz < 2; ++dz)
        for (int dy = 0; dy < 2; ++dy)
            for (int dx = 0; dx < 2; ++dx) {
                idx[n] = vertex_index(i + dx, j + dy, k + dz);
                w[n] = (dx ? tx : 1.0 - tx) * (dy ? ty : 1.0 - ty) * (dz ? tz : 1.0 - tz);
                ++n;
            }
}

double TetGrid::interpolate(std::span<const double> field, const Vec3& p) const {
    std::array<int, 8> idx;
    std::array<double, 8> w;
    interpolation_stencil(p, idx, w);
    double v = 0.0;
    for (int n = 0; n < 8; ++n) v += w[n] * field[idx[n]];
    return v;
}

TetGrid build_grid(const std::array<int, 3>& resolution, const Aabb& bounds) {
    for (int r : resolution)
        if (r < 1) throw std::invalid_argument("build_grid: need at least 1 cell per axis");
    if (!bounds.valid() || bounds.extent().x <= 0 || bounds.extent().y <= 0 ||
        bounds.extent().z <= 0)
        throw std::invalid_argument("build_grid: degenerate bounds");

    TetGrid g;
    g.resolution = resolution;
    g.domain = bounds;
    const int nx = resolution[0] + 1, ny = resolution[1] + 1, nz = resolution[2] + 1;
    g.vertices.reserve(size_t(nx) * ny * nz);
    Vec3 h = {bounds.extent().x / resolution[0], bounds.extent().y / resolution[1],
              bounds.extent().z / resolution[2]};
    for (int k = 0; k < nz; ++k)
        for (int j = 0; j < ny; ++j)
            for (int i = 0; i < nx; ++i)
                g.vertices.push_back(
                    {bounds.lo.x + i * h.x, bounds.lo.y + j * h.y, bounds.lo.z + k * h.z});

    // Six tetrahedra around the cube's main diagonal, identical in every
    // cell; opposing cell faces then carry matching diagonals, so extraction
    // is crack-free.
    static const int kPaths[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2},
                                     {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
    g.tets.reserve(size_t(resolution[0]) * resolution[1] * resolution[2] * 6);
    auto corner = [&](int i, int j, int k, int dx, int dy, int dz) {
        return g.vertex_index(i + dx, j + dy, k + dz);
    };
    for (int k = 0; k < resolution[2]; ++k)
        for (int j = 0; j < resolution[1]; ++j)
            for (int i = 0; i < resolution[0]; ++i)
                for (const auto& path : kPaths) {
                    int d[3] = {0, 0, 0};
                    std::array<int, 4> tet;
                    tet[0] = corner(i, j, k, 0, 0, 0);
                    d[path[0]] = 1;
                    tet[1] = corner(i, j, k, d[0], d[1], d[2]);
                    d[path[1]] = 1;
                    tet[2] = corner(i, j, k, d[0], d[1], d[2]);
                    tet[3] = corner(i, j, k, 1, 1, 1);
                    // Normalize to positive signed volume.
                    Vec3 a = g.vertices[tet[0]], b = g.vertices[tet[1]], c = g.vertices[tet[2]],
                         e = g.vertices[tet[3]];
                    if (dot(cross(b - a, c - a), e - a) < 0.0) std::swap(tet[1], tet[2]);
                    g.tets.push_back(tet);
                }

    g.base_sdf.assign(g.vertices.size(), 0.0);
    g.edit_sdf.assign(g.vertices.size(), 0.0);
    g.offsets.assign(g.vertices.size(), Vec3{});
    g.focal_dist.assign(g.vertices.size(), 0.0);
    g.inside_region.assign(g.vertices.size(), 0);
    return g;
}

double mt_crossing_parameter(double s_a, double s_b) { return s_a / (s_a - s_b); }

MtVertexGradient mt_vertex_gradient(const Vec3& a, const Vec3& b, double s_a, double s_b,
                                    const Vec3& upstream) {
    const double denom = (s_a - s_b) * (s_a - s_b);
    const Vec3 dir = b - a;
    const double u = dot(upstream, dir);
    return {u * (-s_b) / denom, u * s_a / denom};
}

namespace {

// Edge order within a tet: (0,1) (0,2) (0,3) (1,2) (1,3) (2,3).
constexpr int kTetEdges[6][2] = {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}};

// Constant field gradient inside a tet with values s at deformed corners p.
Vec3 tet_field_gradient(const Vec3 p[4], const double s[4]) {
    Mat3 m;
    for (int r = 0; r < 3; ++r) {
        Vec3 e = p[r + 1] - p[0];
        m(r, 0) = e.x;
        m(r, 1) = e.y;
        m(r, 2) = e.z;
    }
    Vec3 rhs{s[1] - s[0], s[2] - s[0], s[3] - s[0]};
    return m.inverse() * rhs;
}

}  // namespace

TriMesh marching_tetrahedra(const TetGrid& grid, std::span<const double> field, Part label) {
    if (field.size() != grid.vertex_count())
        throw std::invalid_argument("marching_tetrahedra: field length != vertex count");

    TriMesh mesh;
    std::unordered_map<uint64_t, int> edge_vertex;
    edge_vertex.reserve(grid.vertex_count() / 4 + 16);

    auto perturbed = [&](int v) {
        double s = field[v];
        return s == 0.0 ? 1e-12 : s;
    };

    // Crossing vertices are keyed on the global lattice edge and always
    // computed with the lower-index endpoint first, so adjacent tets agree
    // bit-for-bit.
    auto crossing_vertex = [&](int ga, int gb) {
        if (ga > gb) std::swap(ga, gb);
        uint64_t key = (uint64_t(ga) << 32) | uint64_t(gb);
        auto it = edge_vertex.find(key);
        if (it != edge_vertex.end()) return it->second;
        double sa = perturbed(ga), sb = perturbed(gb);
        Vec3 a = grid.deformed_position(ga), b = grid.deformed_position(gb);
        double t = mt_crossing_parameter(sa, sb);
        int idx = int(mesh.positions.size());
        mesh.positions.push_back(a + (b - a) * t);
        mesh.crossings.push_back({ga, gb, sa, sb});
        edge_vertex.emplace(key, idx);
        return idx;
    };

    double s[4];
    Vec3 p[4];
    for (size_t t = 0; t < grid.tet_count(); ++t) {
        const auto& tet = grid.tets[t];
        int mask = 0;
        for (int i = 0; i < 4; ++i) {
            s[i] = perturbed(tet[i]);
            if (s[i] > 0.0) mask |= 1 << i;
        }
        if (mask == 0 || mask == 15) continue;
        for (int i = 0; i < 4; ++i) p[i] = grid.deformed_position(tet[i]);

        int crossing_edges[4];
        int n_crossing = 0;
        for (int e = 0; e < 6; ++e) {
            bool pa = (mask >> kTetEdges[e][0]) & 1, pb = (mask >> kTetEdges[e][1]) & 1;
            if (pa != pb) crossing_edges[n_crossing++] = e;
        }

        int tri_buf[2][3];
        int n_tris = 0;
        if (n_crossing == 3) {
            for (int i = 0; i < 3; ++i)
                tri_buf[0][i] =
                    crossing_vertex(tet[kTetEdges[crossing_edges[i]][0]],
                                    tet[kTetEdges[crossing_edges[i]][1]]);
            n_tris = 1;
        } else {
            // Two-positive / two-negative: order the four crossings into a
            // ring where consecutive edges share a tet corner, then fan.
            int ring[4] = {crossing_edges[0], -1, -1, -1};
            bool used[4] = {true, false, false, false};
            for (int slot = 1; slot < 4; ++slot) {
                int prev = ring[slot - 1];
                for (int c = 1; c < 4; ++c) {
                    if (used[c]) continue;
                    int e = crossing_edges[c];
                    bool shares =
                        kTetEdges[e][0] == kTetEdges[prev][0] || kTetEdges[e][0] == kTetEdges[prev][1] ||
                        kTetEdges[e][1] == kTetEdges[prev][0] || kTetEdges[e][1] == kTetEdges[prev][1];
                    if (shares) {
                        ring[slot] = e;
                        used[c] = true;
                        break;
                    }
                }
            }
            int q[4];
            for (int i = 0; i < 4; ++i)
                q[i] = crossing_vertex(tet[kTetEdges[ring[i]][0]], tet[kTetEdges[ring[i]][1]]);
            tri_buf[0][0] = q[0]; tri_buf[0][1] = q[1]; tri_buf[0][2] = q[2];
            tri_buf[1][0] = q[0]; tri_buf[1][1] = q[2]; tri_buf[1][2] = q[3];
            n_tris = 2;
        }

        // Orient so the normal opposes the field gradient (points outside).
        Vec3 grad = tet_field_gradient(p, s);
        for (int i = 0; i < n_tris; ++i) {
            Vec3 a = mesh.positions[tri_buf[i][0]];
            Vec3 b = mesh.positions[tri_buf[i][1]];
            Vec3 c = mesh.positions[tri_buf[i][2]];
            if (dot(cross(b - a, c - a), grad) > 0.0) std::swap(tri_buf[i][1], tri_buf[i][2]);
            mesh.faces.push_back({tri_buf[i][0], tri_buf[i][1], tri_buf[i][2]});
            mesh.face_part.push_back(label);
        }
    }
    return mesh;
}

std::vector<uint8_t> apply_offset_mask(TetGrid& grid, double margin) {
    std::vector<uint8_t> keep(grid.vertex_count(), 1);
    for (size_t v = 0; v < grid.vertex_count(); ++v) {
        if (grid.edit_sdf[v] < -margin) {
            grid.offsets[v] = Vec3{};
            keep[v] = 0;
        }
    }
    return keep;
}

void clamp_offsets(TetGrid& grid) {
    const double max_norm = 0.5 * grid.min_edge_length();
    for (auto& o : grid.offsets) {
        double n = norm(o);
        if (n > max_norm) o *= max_norm / n;
    }
    // The half-edge clamp alone cannot rule out coordinated inversions, so
    // shrink offenders until every tet keeps positive volume.
    const double vol_floor = 1e-12 * std::pow(grid.min_edge_length(), 3);
    for (int pass = 0; pass < 64; ++pass) {
        bool any = false;
        for (size_t t = 0; t < grid.tet_count(); ++t) {
            if (grid.tet_signed_volume(int(t)) <= vol_floor) {
                for (int i = 0; i < 4; ++i) grid.offsets[grid.tets[t][i]] *= 0.5;
                any = true;
            }
        }
        if (!any) return;
    }
    for (size_t t = 0; t < grid.tet_count(); ++t)
        if (grid.tet_signed_volume(int(t)) <= vol_floor)
            for (int i = 0; i < 4; ++i) grid.offsets[grid.tets[t][i]] = Vec3{};
}

namespace {

constexpr char kGridMagic[8] = {'f', 'f', 'g', 'r', 'i', 'd', '0', '1'};

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
    uint64_t n = v.size();
    write_pod(out, n);
    out.write(reinterpret_cast<const char*>(v.data()), std::streamsize(n * sizeof(T)));
}

template <typename T>
void read_vec(std::istream& in, std::vector<T>& v) {
    uint64_t n = 0;
    read_pod(in, n);
    v.resize(n);
    in.read(reinterpret_cast<char*>(v.data()), std::streamsize(n * sizeof(T)));
}

}  // namespace

void save_grid_snapshot(const TetGrid& grid, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("grid snapshot: cannot open " + path);
    f.write(kGridMagic, 8);
    write_pod(f, grid.resolution);
    write_pod(f, grid.domain.lo);
    write_pod(f, grid.domain.hi);
    write_vec(f, grid.vertices);
    write_vec(f, grid.tets);
    write_vec(f, grid.base_sdf);
    write_vec(f, grid.edit_sdf);
    write_vec(f, grid.offsets);
    write_vec(f, grid.focal_dist);
    write_vec(f, grid.inside_region);
    if (!f) throw std::runtime_error("grid snapshot: write failed for " + path);
}

TetGrid load_grid_snapshot(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("grid snapshot: cannot open " + path);
    char magic[8];
    f.read(magic, 8);
    if (std::memcmp(magic, kGridMagic, 8) != 0)
        throw std::runtime_error("grid snapshot: bad magic in " + path);
    TetGrid g;
    read_pod(f, g.resolution);
    read_pod(f, g.domain.lo);
    read_pod(f, g.domain.hi);
    read_vec(f, g.vertices);
    read_vec(f, g.tets);
    read_vec(f, g.base_sdf);
    read_vec(f, g.edit_sdf);
    read_vec(f, g.offsets);
    read_vec(f, g.focal_dist);
    read_vec(f, g.inside_region);
    if (!f) throw std::runtime_error("grid snapshot: truncated file " + path);
    return g;
}

}  // namespace focalfuse
