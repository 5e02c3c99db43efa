#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>

#include "splatedit/vecmath.hpp"

namespace splatedit {

/// Low-pass floor added to both diagonal entries of a projected 2D covariance
/// before inversion (pixels^2). Keeps sub-pixel conics invertible.
inline constexpr double kLowpassFloor = 0.3;

/// Pinhole camera with a rigid world-to-camera transform.
template <typename T>
struct Camera {
    T fx{}, fy{};        // focal lengths, pixels
    T cx{}, cy{};        // principal point, pixels
    int width = 0, height = 0;
    Mat3<T> rotation;    // world-to-camera rotation W
    Vec3<T> translation; // world-to-camera translation
    T znear = T(0.01);   // scene units

    Vec3<T> to_camera(const Vec3<T>& p_world) const { return rotation * p_world + translation; }

    /// Camera center in world coordinates: -W^T t.
    Vec3<T> center() const {
        const Mat3<T> rt = rotation.transposed();
        const Vec3<T> c = rt * translation;
        return {-c.x, -c.y, -c.z};
    }

    void validate() const {
        if (!(fx > T(0)) || !(fy > T(0))) throw std::invalid_argument("camera: fx, fy must be > 0");
        if (width < 1 || height < 1) throw std::invalid_argument("camera: width, height must be >= 1");
        if (!(znear > T(0))) throw std::invalid_argument("camera: znear must be > 0");
        const Mat3<T> gram = rotation.transposed() * rotation;
        Mat3<T> err = gram;
        for (int i = 0; i < 3; ++i) err[i][i] -= T(1);
        if (err.max_abs() >= T(1e-6))
            throw std::invalid_argument("camera: rotation block is not orthonormal");
    }
};

/// Symmetric 3x3 covariance, scene units^2.
template <typename T>
struct Covariance3 {
    Mat3<T> m;
};

/// Symmetric 2x2 screen-space covariance (pixels^2) with its inverse (conic)
/// and determinant cached. Determinant is guaranteed > 0 after the low-pass
/// floor has been applied.
template <typename T>
struct Covariance2 {
    T xx{}, xy{}, yy{};          // floored covariance entries
    T conic_a{}, conic_b{}, conic_c{};  // inverse: [a b; b c]
    T det{};

    static Covariance2 from_floored(T xx, T xy, T yy) {
        Covariance2 c;
        c.xx = xx; c.xy = xy; c.yy = yy;
        c.det = xx * yy - xy * xy;
        c.conic_a = yy / c.det;
        c.conic_b = -xy / c.det;
        c.conic_c = xx / c.det;
        return c;
    }
};

/// Rotation matrix from a quaternion; the input is normalized internally, so
/// quat_to_rotation(q) == quat_to_rotation(k*q) for any k > 0.
template <typename T>
Mat3<T> quat_to_rotation(const Quaternion<T>& q) {
    const T n = q.norm();
    if (!(n > T(1e-12))) throw std::invalid_argument("quat_to_rotation: zero-norm quaternion");
    const T w = q.w / n, x = q.x / n, y = q.y / n, z = q.z / n;
    Mat3<T> r;
    r[0][0] = T(1) - T(2) * (y * y + z * z);
    r[0][1] = T(2) * (x * y - w * z);
    r[0][2] = T(2) * (x * z + w * y);
    r[1][0] = T(2) * (x * y + w * z);
    r[1][1] = T(1) - T(2) * (x * x + z * z);
    r[1][2] = T(2) * (y * z - w * x);
    r[2][0] = T(2) * (x * z - w * y);
    r[2][1] = T(2) * (y * z + w * x);
    r[2][2] = T(1) - T(2) * (x * x + y * y);
    return r;
}

/// Sigma = R diag(s)^2 R^T. Scales are post-activation (all > 0).
template <typename T>
Covariance3<T> build_covariance(const Quaternion<T>& rot, const Vec3<T>& s) {
    const Mat3<T> r = quat_to_rotation(rot);
    const Mat3<T> d = Mat3<T>::diagonal(s.x * s.x, s.y * s.y, s.z * s.z);
    return {r * d * r.transposed()};
}

template <typename T>
struct ProjectedGaussian {
    Vec2<T> mu;          // pixels
    Covariance2<T> cov;  // pixels^2, low-pass floored
    T depth{};           // camera-space z, scene units
};

/// EWA projection of a 3D Gaussian to screen space: mu is the pinhole
/// projection of x, and the 2D covariance is the upper 2x2 block of
/// J W Sigma W^T J^T plus the low-pass floor, with J the perspective
/// Jacobian at x. Returns nullopt when the point is closer than znear.
template <typename T>
std::optional<ProjectedGaussian<T>> project_gaussian(const Vec3<T>& x, const Covariance3<T>& sigma,
                                                     const Camera<T>& cam) {
    const Vec3<T> p = cam.to_camera(x);
    if (p.z < cam.znear) return std::nullopt;

    const T inv_z = T(1) / p.z;
    const T inv_z2 = inv_z * inv_z;
    const Vec2<T> mu{cam.fx * p.x * inv_z + cam.cx, cam.fy * p.y * inv_z + cam.cy};

    // J is 2x3: [fx/z, 0, -fx x/z^2; 0, fy/z, -fy y/z^2].
    const T j00 = cam.fx * inv_z;
    const T j02 = -cam.fx * p.x * inv_z2;
    const T j11 = cam.fy * inv_z;
    const T j12 = -cam.fy * p.y * inv_z2;

    const Mat3<T> m = cam.rotation * sigma.m * cam.rotation.transposed();

    // V = J M J^T, expanded with the sparsity of J.
    const T a0 = j00 * m[0][0] + j02 * m[2][0];
    const T a1 = j00 * m[0][1] + j02 * m[2][1];
    const T a2 = j00 * m[0][2] + j02 * m[2][2];
    const T b0 = j11 * m[1][0] + j12 * m[2][0];
    const T b1 = j11 * m[1][1] + j12 * m[2][1];
    const T b2 = j11 * m[1][2] + j12 * m[2][2];

    const T vxx = a0 * j00 + a2 * j02 + T(kLowpassFloor);
    const T vxy = a1 * j11 + a2 * j12;
    const T vyy = b1 * j11 + b2 * j12 + T(kLowpassFloor);

    return ProjectedGaussian<T>{mu, Covariance2<T>::from_floored(vxx, vxy, vyy), p.z};
}

template <typename T>
struct ProjectionGrads {
    Vec3<T> d_position;  // world frame
    Mat3<T> d_sigma;     // full-matrix convention, symmetric
};

/// Backward of project_gaussian. d_mu is the loss gradient of the projected
/// mean; (d_conic_a, d_conic_b, d_conic_c) are gradients of the conic with
/// the off-diagonal counted once (the falloff uses q = a dx^2 + 2b dxdy + c dy^2).
/// Depth feeds only the sort, so it carries no gradient.
template <typename T>
ProjectionGrads<T> project_gaussian_backward(const Vec3<T>& x, const Covariance3<T>& sigma,
                                             const Camera<T>& cam, const Vec2<T>& d_mu,
                                             T d_conic_a, T d_conic_b, T d_conic_c) {
    const Vec3<T> p = cam.to_camera(x);
    const T inv_z = T(1) / p.z;
    const T inv_z2 = inv_z * inv_z;
    const T inv_z3 = inv_z2 * inv_z;

    const T j00 = cam.fx * inv_z;
    const T j02 = -cam.fx * p.x * inv_z2;
    const T j11 = cam.fy * inv_z;
    const T j12 = -cam.fy * p.y * inv_z2;

    const Mat3<T> m = cam.rotation * sigma.m * cam.rotation.transposed();

    // Recompute the floored 2D covariance and its inverse.
    const T a0 = j00 * m[0][0] + j02 * m[2][0];
    const T a1 = j00 * m[0][1] + j02 * m[2][1];
    const T a2 = j00 * m[0][2] + j02 * m[2][2];
    const T b0 = j11 * m[1][0] + j12 * m[2][0];
    const T b1 = j11 * m[1][1] + j12 * m[2][1];
    const T b2 = j11 * m[1][2] + j12 * m[2][2];
    const T vxx = a0 * j00 + a2 * j02 + T(kLowpassFloor);
    const T vxy = a1 * j11 + a2 * j12;
    const T vyy = b1 * j11 + b2 * j12 + T(kLowpassFloor);
    const T det = vxx * vyy - vxy * vxy;
    const Mat2<T> conic{vyy / det, -vxy / det, -vxy / det, vxx / det};

    // d(inv(V)) = -inv(V) dV inv(V); G_conic in full-matrix form.
    const Mat2<T> g_conic{d_conic_a, d_conic_b / T(2), d_conic_b / T(2), d_conic_c};
    const Mat2<T> g_v = (conic * g_conic * conic) * T(-1);

    // V = J M J^T with J = [[j00,0,j02],[0,j11,j12]]:
    // G_J = 2 G_V J M, G_M = J^T G_V J.
    const T jm00 = j00 * m[0][0] + j02 * m[2][0];
    const T jm01 = j00 * m[0][1] + j02 * m[2][1];
    const T jm02 = j00 * m[0][2] + j02 * m[2][2];
    const T jm10 = j11 * m[1][0] + j12 * m[2][0];
    const T jm11 = j11 * m[1][1] + j12 * m[2][1];
    const T jm12 = j11 * m[1][2] + j12 * m[2][2];
    const T gj00 = T(2) * (g_v.m00 * jm00 + g_v.m01 * jm10);
    const T gj02 = T(2) * (g_v.m00 * jm02 + g_v.m01 * jm12);
    const T gj11 = T(2) * (g_v.m10 * jm01 + g_v.m11 * jm11);
    const T gj12 = T(2) * (g_v.m10 * jm02 + g_v.m11 * jm12);

    Mat3<T> g_m;
    const T jrow0[3] = {j00, T(0), j02};
    const T jrow1[3] = {T(0), j11, j12};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            g_m[i][j] = jrow0[i] * (g_v.m00 * jrow0[j] + g_v.m01 * jrow1[j]) +
                        jrow1[i] * (g_v.m10 * jrow0[j] + g_v.m11 * jrow1[j]);

    ProjectionGrads<T> out;
    out.d_sigma = cam.rotation.transposed() * g_m * cam.rotation;

    // Mean path: the pinhole Jacobian is J itself.
    Vec3<T> d_cam{d_mu.x * j00, d_mu.y * j11, d_mu.x * j02 + d_mu.y * j12};
    // J entries also depend on the camera-space point.
    const T dfxz2 = -cam.fx * inv_z2;
    const T dfyz2 = -cam.fy * inv_z2;
    d_cam.x += gj02 * dfxz2;
    d_cam.y += gj12 * dfyz2;
    d_cam.z += gj00 * dfxz2 + gj02 * (T(2) * cam.fx * p.x * inv_z3) + gj11 * dfyz2 +
               gj12 * (T(2) * cam.fy * p.y * inv_z3);

    out.d_position = cam.rotation.transposed() * d_cam;
    return out;
}

template <typename T>
struct CovarianceGrads {
    Vec4<T> d_quat;   // wrt the unnormalized quaternion
    Vec3<T> d_scale;  // wrt activated scales
};

/// Backward of build_covariance given the full-matrix gradient of Sigma.
template <typename T>
CovarianceGrads<T> build_covariance_backward(const Quaternion<T>& rot, const Vec3<T>& s,
                                             const Mat3<T>& g_sigma) {
    const T n = rot.norm();
    const T w = rot.w / n, x = rot.x / n, y = rot.y / n, z = rot.z / n;
    const Mat3<T> r = quat_to_rotation(rot);
    const Mat3<T> d = Mat3<T>::diagonal(s.x * s.x, s.y * s.y, s.z * s.z);

    // Sigma = R D R^T: G_R = 2 G_Sigma R D, ds_k = 2 s_k (R^T G_Sigma R)_kk.
    const Mat3<T> g_r = (g_sigma * (r * d)) * T(2);
    const Mat3<T> rtgr = r.transposed() * g_sigma * r;

    CovarianceGrads<T> out;
    out.d_scale = {T(2) * s.x * rtgr[0][0], T(2) * s.y * rtgr[1][1], T(2) * s.z * rtgr[2][2]};

    const auto& g = g_r;
    const T dw = T(2) * (z * (g[1][0] - g[0][1]) + y * (g[0][2] - g[2][0]) + x * (g[2][1] - g[1][2]));
    const T dx = T(2) * (y * (g[0][1] + g[1][0]) + z * (g[0][2] + g[2][0]) -
                         T(2) * x * (g[1][1] + g[2][2]) + w * (g[2][1] - g[1][2]));
    const T dy = T(2) * (x * (g[0][1] + g[1][0]) + z * (g[1][2] + g[2][1]) -
                         T(2) * y * (g[0][0] + g[2][2]) + w * (g[0][2] - g[2][0]));
    const T dz = T(2) * (x * (g[0][2] + g[2][0]) + y * (g[1][2] + g[2][1]) -
                         T(2) * z * (g[0][0] + g[1][1]) + w * (g[1][0] - g[0][1]));

    // Through the normalization q_hat = q / |q|.
    const T dot = dw * w + dx * x + dy * y + dz * z;
    out.d_quat = {(dw - dot * w) / n, (dx - dot * x) / n, (dy - dot * y) / n, (dz - dot * z) / n};
    return out;
}

}  // namespace splatedit
