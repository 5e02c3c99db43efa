#pragma once

// Shared test utilities: independent oracles (reference compositor, finite
// differences, statistics) and scene builders. These deliberately avoid the
// library's tiled compositing path so they can stand as external checks.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "splatedit/deformation.hpp"
#include "splatedit/gaussian_cloud.hpp"
#include "splatedit/geometry.hpp"
#include "splatedit/image.hpp"
#include "splatedit/renderer.hpp"
#include "splatedit/rng.hpp"

namespace testsupport {

using namespace splatedit;

/// Straight-line per-pixel reference compositor: loops over every sorted
/// splat with no tiling. Alpha uses the same canonical expression as the
/// renderer contract: opacity * exp(-0.5 * (a dx^2 + 2 b dx dy + c dy^2)).
template <typename T>
Image<T> reference_composite(const std::vector<SplatPrimitive2D<T>>& sorted_splats, int width,
                             int height, const Vec3<T>& background,
                             Image<T>* transmittance_out = nullptr) {
    Image<T> img(height, width, 3);
    if (transmittance_out) *transmittance_out = Image<T>(height, width, 1);
    for (int py = 0; py < height; ++py) {
        for (int px = 0; px < width; ++px) {
            T trans = T(1);
            T rgb[3] = {T(0), T(0), T(0)};
            for (const auto& s : sorted_splats) {
                const T dx = T(px) - s.mu.x;
                const T dy = T(py) - s.mu.y;
                const T q = s.conic_a * dx * dx + T(2) * s.conic_b * dx * dy + s.conic_c * dy * dy;
                if (q < T(0)) continue;
                T alpha = s.opacity * std::exp(T(-0.5) * q);
                if (alpha < T(kAlphaMin)) continue;
                if (alpha > T(kAlphaMax)) alpha = T(kAlphaMax);
                const T w = alpha * trans;
                rgb[0] += w * s.color.x;
                rgb[1] += w * s.color.y;
                rgb[2] += w * s.color.z;
                trans *= (T(1) - alpha);
                if (trans < T(kTransmittanceMin)) break;
            }
            img.at(py, px, 0) = rgb[0] + trans * background.x;
            img.at(py, px, 1) = rgb[1] + trans * background.y;
            img.at(py, px, 2) = rgb[2] + trans * background.z;
            if (transmittance_out) transmittance_out->at(py, px, 0) = trans;
        }
    }
    return img;
}

/// Projects and depth-sorts a Gaussian set exactly like the renderer front
/// end, for feeding the reference compositor.
template <typename T>
std::vector<SplatPrimitive2D<T>> project_and_sort(const DeformedGaussians<T>& g,
                                                  const Camera<T>& cam) {
    std::vector<SplatPrimitive2D<T>> splats;
    for (std::size_t i = 0; i < g.size(); ++i) {
        const auto cov3 = build_covariance(g.rotations_raw[i], g.scales[i]);
        const auto proj = project_gaussian(g.positions[i], cov3, cam);
        if (!proj) continue;
        SplatPrimitive2D<T> s;
        s.mu = proj->mu;
        s.conic_a = proj->cov.conic_a;
        s.conic_b = proj->cov.conic_b;
        s.conic_c = proj->cov.conic_c;
        s.depth = proj->depth;
        s.color = g.colors[i];
        s.opacity = g.opacities[i];
        s.source_index = int(i);
        splats.push_back(s);
    }
    std::sort(splats.begin(), splats.end(), [](const auto& a, const auto& b) {
        if (a.depth != b.depth) return a.depth < b.depth;
        return a.source_index < b.source_index;
    });
    return splats;
}

/// Central finite difference of a scalar function.
inline double central_diff(const std::function<double(double)>& f, double x0, double h) {
    return (f(x0 + h) - f(x0 - h)) / (2.0 * h);
}

/// Relative agreement with an absolute floor for near-zero values.
inline bool close_rel(double a, double b, double rel, double abs_floor = 1e-10) {
    const double diff = std::abs(a - b);
    return diff <= abs_floor + rel * std::max(std::abs(a), std::abs(b));
}

/// Simple axis-aligned test camera looking down +z from the origin.
template <typename T>
Camera<T> make_camera(int width, int height, T fx = T(60), T znear = T(0.1)) {
    Camera<T> cam;
    cam.fx = fx;
    cam.fy = fx;
    cam.cx = T(width) / T(2);
    cam.cy = T(height) / T(2);
    cam.width = width;
    cam.height = height;
    cam.rotation = Mat3<T>::identity();
    cam.translation = Vec3<T>{T(0), T(0), T(0)};
    cam.znear = znear;
    return cam;
}

/// Random cloud in front of the test camera (depths ~[2.5, 4.5]).
template <typename T>
GaussianCloud<T> random_cloud(std::size_t n, std::uint64_t seed, double scale_lo = 0.03,
                              double scale_hi = 0.25) {
    Rng rng(seed);
    GaussianCloud<T> cloud;
    cloud.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        cloud.positions[i] = {T(rng.uniform(-1.0, 1.0)), T(rng.uniform(-1.0, 1.0)),
                              T(rng.uniform(2.5, 4.5))};
        cloud.rotations_raw[i] = {T(rng.normal()), T(rng.normal()), T(rng.normal()), T(rng.normal())};
        if (cloud.rotations_raw[i].norm() < T(0.5)) cloud.rotations_raw[i] = {T(1), T(0), T(0), T(0)};
        cloud.scales_raw[i] = {T(std::log(rng.uniform(scale_lo, scale_hi))),
                               T(std::log(rng.uniform(scale_lo, scale_hi))),
                               T(std::log(rng.uniform(scale_lo, scale_hi)))};
        cloud.opacities_raw[i] = T(rng.uniform(-1.0, 2.5));
        cloud.colors_raw[i] = {T(rng.uniform(-2.0, 2.0)), T(rng.uniform(-2.0, 2.0)),
                               T(rng.uniform(-2.0, 2.0))};
    }
    return cloud;
}

/// Kolmogorov-Smirnov statistic of samples against a provided CDF.
inline double ks_statistic(std::vector<double> samples, const std::function<double(double)>& cdf) {
    std::sort(samples.begin(), samples.end());
    const double n = double(samples.size());
    double d = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const double f = cdf(samples[i]);
        d = std::max(d, std::abs(f - double(i) / n));
        d = std::max(d, std::abs(double(i + 1) / n - f));
    }
    return d;
}

inline double normal_cdf(double x, double mean, double stddev) {
    return 0.5 * std::erfc(-(x - mean) / (stddev * std::sqrt(2.0)));
}

}  // namespace testsupport
