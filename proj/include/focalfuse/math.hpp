#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>

namespace focalfuse {

struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;

    constexpr Vec3() = default;
    constexpr Vec3(double x_, double y_, double z_) : x(x_), y(y_), z(z_) {}

    double& operator[](int i) { return (&x)[i]; }
    double operator[](int i) const { return (&x)[i]; }

    Vec3 operator-() const { return {-x, -y, -z}; }
    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
    Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }
    Vec3& operator-=(const Vec3& o) { x -= o.x; y -= o.y; z -= o.z; return *this; }
    Vec3& operator*=(double s) { x *= s; y *= s; z *= s; return *this; }
    bool operator==(const Vec3& o) const { return x == o.x && y == o.y && z == o.z; }
};

inline Vec3 operator*(double s, const Vec3& v) { return v * s; }

inline double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }

inline Vec3 cross(const Vec3& a, const Vec3& b) {
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

inline double norm_sq(const Vec3& v) { return dot(v, v); }
inline double norm(const Vec3& v) { return std::sqrt(dot(v, v)); }

inline Vec3 normalized(const Vec3& v) {
    double n = norm(v);
    return n > 0.0 ? v / n : Vec3{0.0, 0.0, 0.0};
}

inline Vec3 cwise_min(const Vec3& a, const Vec3& b) {
    return {std::min(a.x, b.x), std::min(a.y, b.y), std::min(a.z, b.z)};
}

inline Vec3 cwise_max(const Vec3& a, const Vec3& b) {
    return {std::max(a.x, b.x), std::max(a.y, b.y), std::max(a.z, b.z)};
}

inline Vec3 cwise_mul(const Vec3& a, const Vec3& b) { return {a.x * b.x, a.y * b.y, a.z * b.z}; }

inline double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

/// Row-major 3x3 matrix. m(r, c) addresses row r, column c.
struct Mat3 {
    std::array<double, 9> m{};

    static Mat3 identity() {
        Mat3 r;
        r.m = {1, 0, 0, 0, 1, 0, 0, 0, 1};
        return r;
    }

    static Mat3 diagonal(const Vec3& d) {
        Mat3 r;
        r.m = {d.x, 0, 0, 0, d.y, 0, 0, 0, d.z};
        return r;
    }

    double& operator()(int r, int c) { return m[r * 3 + c]; }
    double operator()(int r, int c) const { return m[r * 3 + c]; }

    Vec3 operator*(const Vec3& v) const {
        return {m[0] * v.x + m[1] * v.y + m[2] * v.z,
                m[3] * v.x + m[4] * v.y + m[5] * v.z,
                m[6] * v.x + m[7] * v.y + m[8] * v.z};
    }

    Mat3 operator*(const Mat3& o) const {
        Mat3 r;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                double s = 0.0;
                for (int k = 0; k < 3; ++k) s += (*this)(i, k) * o(k, j);
                r(i, j) = s;
            }
        return r;
    }

    Mat3 transposed() const {
        Mat3 r;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) r(i, j) = (*this)(j, i);
        return r;
    }

    double determinant() const {
        return m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6]) +
               m[2] * (m[3] * m[7] - m[4] * m[6]);
    }

    Mat3 inverse() const {
        double det = determinant();
        Mat3 r;
        double inv = 1.0 / det;
        r.m[0] = (m[4] * m[8] - m[5] * m[7]) * inv;
        r.m[1] = (m[2] * m[7] - m[1] * m[8]) * inv;
        r.m[2] = (m[1] * m[5] - m[2] * m[4]) * inv;
        r.m[3] = (m[5] * m[6] - m[3] * m[8]) * inv;
        r.m[4] = (m[0] * m[8] - m[2] * m[6]) * inv;
        r.m[5] = (m[2] * m[3] - m[0] * m[5]) * inv;
        r.m[6] = (m[3] * m[7] - m[4] * m[6]) * inv;
        r.m[7] = (m[1] * m[6] - m[0] * m[7]) * inv;
        r.m[8] = (m[0] * m[4] - m[1] * m[3]) * inv;
        return r;
    }
};

inline Mat3 rotation_x(double a) {
    Mat3 r = Mat3::identity();
    double c = std::cos(a), s = std::sin(a);
    r(1, 1) = c; r(1, 2) = -s;
    r(2, 1) = s; r(2, 2) = c;
    return r;
}

inline Mat3 rotation_y(double a) {
    Mat3 r = Mat3::identity();
    double c = std::cos(a), s = std::sin(a);
    r(0, 0) = c; r(0, 2) = s;
    r(2, 0) = -s; r(2, 2) = c;
    return r;
}

inline Mat3 rotation_z(double a) {
    Mat3 r = Mat3::identity();
    double c = std::cos(a), s = std::sin(a);
    r(0, 0) = c; r(0, 1) = -s;
    r(1, 0) = s; r(1, 1) = c;
    return r;
}

/// Rotation about X, then Y, then Z: R = Rz * Ry * Rx.
inline Mat3 rotation_xyz(const Vec3& angles) {
    return rotation_z(angles.z) * rotation_y(angles.y) * rotation_x(angles.x);
}

/// p -> linear * p + offset
struct Affine {
    Mat3 linear = Mat3::identity();
    Vec3 offset{};

    Vec3 operator()(const Vec3& p) const { return linear * p + offset; }

    Affine then(const Affine& next) const {
        return {next.linear * linear, next.linear * offset + next.offset};
    }

    Affine inverse() const {
        Mat3 inv = linear.inverse();
        return {inv, -(inv * offset)};
    }
};

struct Aabb {
    Vec3 lo{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
            std::numeric_limits<double>::infinity()};
    Vec3 hi{-std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity(),
            -std::numeric_limits<double>::infinity()};

    Aabb() = default;
    Aabb(const Vec3& lo_, const Vec3& hi_) : lo(lo_), hi(hi_) {}

    static Aabb cube(double half_extent) {
        return {{-half_extent, -half_extent, -half_extent}, {half_extent, half_extent, half_extent}};
    }

    void expand(const Vec3& p) {
        lo = cwise_min(lo, p);
        hi = cwise_max(hi, p);
    }

    void expand(const Aabb& b) {
        lo = cwise_min(lo, b.lo);
        hi = cwise_max(hi, b.hi);
    }

    bool contains(const Vec3& p) const {
        return p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y && p.z >= lo.z &&
               p.z <= hi.z;
    }

    bool overlaps(const Aabb& b) const {
        return lo.x <= b.hi.x && b.lo.x <= hi.x && lo.y <= b.hi.y && b.lo.y <= hi.y &&
               lo.z <= b.hi.z && b.lo.z <= hi.z;
    }

    Vec3 extent() const { return hi - lo; }
    Vec3 center() const { return (lo + hi) * 0.5; }
    bool valid() const { return lo.x <= hi.x && lo.y <= hi.y && lo.z <= hi.z; }

    /// Squared distance from p to the box (0 inside).
    double distance_sq(const Vec3& p) const {
        double d = 0.0;
        for (int i = 0; i < 3; ++i) {
            double v = p[i];
            if (v < lo[i]) d += (lo[i] - v) * (lo[i] - v);
            else if (v > hi[i]) d += (v - hi[i]) * (v - hi[i]);
        }
        return d;
    }
};

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline double sigmoid_deriv(double x) {
    double s = sigmoid(x);
    return s * (1.0 - s);
}
/// Inverse of sigmoid; v must lie strictly inside (0, 1).
inline double logit(double v) { return std::log(v / (1.0 - v)); }

}  // namespace focalfuse
