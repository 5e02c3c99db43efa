#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

#include "splatedit/vecmath.hpp"

namespace splatedit {

/// Canonical Gaussian set, stored as raw (pre-activation) parameter arrays.
/// Activations: scale = exp(scale_raw), opacity = sigmoid(opacity_raw),
/// color = sigmoid(color_raw); rotations are normalized at use.
template <typename T>
struct GaussianCloud {
    std::vector<Vec3<T>> positions;
    std::vector<Quaternion<T>> rotations_raw;
    std::vector<Vec3<T>> scales_raw;   // log-space
    std::vector<T> opacities_raw;      // logit-space
    std::vector<Vec3<T>> colors_raw;   // logit-space RGB

    std::size_t size() const { return positions.size(); }

    void check_consistent() const {
        const std::size_t n = positions.size();
        if (rotations_raw.size() != n || scales_raw.size() != n || opacities_raw.size() != n ||
            colors_raw.size() != n)
            throw std::logic_error("gaussian cloud: parameter arrays disagree on length");
    }

    void resize(std::size_t n) {
        positions.resize(n);
        rotations_raw.resize(n);
        scales_raw.resize(n);
        opacities_raw.resize(n);
        colors_raw.resize(n);
    }

    Vec3<T> activated_scale(std::size_t i) const {
        return {std::exp(scales_raw[i].x), std::exp(scales_raw[i].y), std::exp(scales_raw[i].z)};
    }
    T activated_opacity(std::size_t i) const { return sigmoid(opacities_raw[i]); }
    Vec3<T> activated_color(std::size_t i) const {
        return {sigmoid(colors_raw[i].x), sigmoid(colors_raw[i].y), sigmoid(colors_raw[i].z)};
    }

    template <typename U>
    GaussianCloud<U> cast() const {
        GaussianCloud<U> out;
        out.resize(size());
        for (std::size_t i = 0; i < size(); ++i) {
            out.positions[i] = {U(positions[i].x), U(positions[i].y), U(positions[i].z)};
            out.rotations_raw[i] = {U(rotations_raw[i].w), U(rotations_raw[i].x),
                                    U(rotations_raw[i].y), U(rotations_raw[i].z)};
            out.scales_raw[i] = {U(scales_raw[i].x), U(scales_raw[i].y), U(scales_raw[i].z)};
            out.opacities_raw[i] = U(opacities_raw[i]);
            out.colors_raw[i] = {U(colors_raw[i].x), U(colors_raw[i].y), U(colors_raw[i].z)};
        }
        return out;
    }
};

/// Per-Gaussian deformation offsets (the output of the deformation field).
template <typename T>
struct DeformOffsets {
    std::vector<Vec3<T>> dx;
    std::vector<Vec4<T>> dr;  // (w,x,y,z) raw-quaternion offset
    std::vector<Vec3<T>> ds;  // log-space scale offset

    void resize_zero(std::size_t n) {
        dx.assign(n, Vec3<T>{});
        dr.assign(n, Vec4<T>{T(0), T(0), T(0), T(0)});
        ds.assign(n, Vec3<T>{});
    }
};

}  // namespace splatedit
