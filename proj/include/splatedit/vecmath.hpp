#pragma once

#include <array>
#include <cmath>
#include <cstddef>

namespace splatedit {

template <typename T>
struct Vec2 {
    T x{}, y{};

    Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
    Vec2 operator*(T s) const { return {x * s, y * s}; }
    Vec2& operator+=(const Vec2& o) { x += o.x; y += o.y; return *this; }
    T dot(const Vec2& o) const { return x * o.x + y * o.y; }
    T norm() const { return std::sqrt(x * x + y * y); }
};

template <typename T>
struct Vec3 {
    T x{}, y{}, z{};

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(T s) const { return {x * s, y * s, z * s}; }
    Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }
    T dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
    T norm() const { return std::sqrt(x * x + y * y + z * z); }
    T& operator[](int i) { return i == 0 ? x : (i == 1 ? y : z); }
    T operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }
};

template <typename T>
struct Vec4 {
    T w{}, x{}, y{}, z{};

    Vec4 operator+(const Vec4& o) const { return {w + o.w, x + o.x, y + o.y, z + o.z}; }
    T norm() const { return std::sqrt(w * w + x * x + y * y + z * z); }
};

/// Quaternion in (w, x, y, z) order, Hamilton convention, right-handed.
/// Storage is unconstrained; consumers normalize before use.
template <typename T>
struct Quaternion {
    T w{1}, x{0}, y{0}, z{0};

    T norm() const { return std::sqrt(w * w + x * x + y * y + z * z); }
};

/// Row-major 3x3 matrix.
template <typename T>
struct Mat3 {
    std::array<std::array<T, 3>, 3> m{};

    static Mat3 identity() {
        Mat3 r;
        r.m[0][0] = r.m[1][1] = r.m[2][2] = T(1);
        return r;
    }
    static Mat3 diagonal(T a, T b, T c) {
        Mat3 r;
        r.m[0][0] = a; r.m[1][1] = b; r.m[2][2] = c;
        return r;
    }

    std::array<T, 3>& operator[](int i) { return m[i]; }
    const std::array<T, 3>& operator[](int i) const { return m[i]; }

    Mat3 transposed() const {
        Mat3 r;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                r.m[i][j] = m[j][i];
        return r;
    }

    Mat3 operator*(const Mat3& o) const {
        Mat3 r;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                T s = 0;
                for (int k = 0; k < 3; ++k) s += m[i][k] * o.m[k][j];
                r.m[i][j] = s;
            }
        return r;
    }

    Mat3 operator+(const Mat3& o) const {
        Mat3 r;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                r.m[i][j] = m[i][j] + o.m[i][j];
        return r;
    }

    Mat3 operator*(T s) const {
        Mat3 r;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                r.m[i][j] = m[i][j] * s;
        return r;
    }

    Vec3<T> operator*(const Vec3<T>& v) const {
        return {m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z,
                m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
                m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z};
    }

    T max_abs() const {
        T r = 0;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                r = std::max(r, std::abs(m[i][j]));
        return r;
    }
};

/// Row-major 2x2 matrix.
template <typename T>
struct Mat2 {
    T m00{}, m01{}, m10{}, m11{};

    static Mat2 identity() { return {T(1), T(0), T(0), T(1)}; }

    Mat2 operator*(const Mat2& o) const {
        return {m00 * o.m00 + m01 * o.m10, m00 * o.m01 + m01 * o.m11,
                m10 * o.m00 + m11 * o.m10, m10 * o.m01 + m11 * o.m11};
    }
    Mat2 operator+(const Mat2& o) const {
        return {m00 + o.m00, m01 + o.m01, m10 + o.m10, m11 + o.m11};
    }
    Mat2 operator*(T s) const { return {m00 * s, m01 * s, m10 * s, m11 * s}; }
    Mat2 transposed() const { return {m00, m10, m01, m11}; }
    T det() const { return m00 * m11 - m01 * m10; }
};

template <typename T>
inline T sigmoid(T v) {
    return T(1) / (T(1) + std::exp(-v));
}

template <typename T>
inline T clamp01(T v) {
    return v < T(0) ? T(0) : (v > T(1) ? T(1) : v);
}

}  // namespace splatedit
