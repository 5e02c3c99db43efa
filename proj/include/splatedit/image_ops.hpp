#pragma once

#include <cmath>
#include <stdexcept>

#include "splatedit/image.hpp"
#include "splatedit/rng.hpp"
#include "splatedit/vecmath.hpp"

namespace splatedit {

/// 2D affine map applied about the image center: rotation and x-shear plus a
/// translation in pixels. Warping is inverse-mapped with bilinear sampling
/// and reflect-101 border fill.
struct AffineTransform {
    double rotation_rad = 0.0;
    double shear_rad = 0.0;
    double tx = 0.0, ty = 0.0;  // pixels

    bool is_identity() const {
        return rotation_rad == 0.0 && shear_rad == 0.0 && tx == 0.0 && ty == 0.0;
    }
};

namespace detail {

inline int reflect101i(int i, int n) {
    while (i < 0 || i >= n) {
        if (i < 0) i = -i;
        if (i >= n) i = 2 * n - 2 - i;
    }
    return i;
}

}  // namespace detail

template <typename T>
Image<T> warp_affine(const Image<T>& img, const AffineTransform& tf) {
    if (tf.is_identity()) return img;
    const double cx = (img.width - 1) / 2.0;
    const double cy = (img.height - 1) / 2.0;
    // Forward map: p_out = R * Sh * (p - c) + c + t. Inverse-sample it.
    const double cr = std::cos(tf.rotation_rad), sr = std::sin(tf.rotation_rad);
    const double sh = std::tan(tf.shear_rad);
    // M = R * Sh, R = [cr -sr; sr cr], Sh = [1 sh; 0 1].
    const double m00 = cr, m01 = cr * sh - sr;
    const double m10 = sr, m11 = sr * sh + cr;
    const double det = m00 * m11 - m01 * m10;
    const double i00 = m11 / det, i01 = -m01 / det;
    const double i10 = -m10 / det, i11 = m00 / det;

    Image<T> out(img.height, img.width, img.channels);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            const double dx = x - cx - tf.tx;
            const double dy = y - cy - tf.ty;
            const double sx = i00 * dx + i01 * dy + cx;
            const double sy = i10 * dx + i11 * dy + cy;
            const int x0 = int(std::floor(sx)), y0 = int(std::floor(sy));
            const double fx = sx - x0, fy = sy - y0;
            const int xs[2] = {detail::reflect101i(x0, img.width),
                               detail::reflect101i(x0 + 1, img.width)};
            const int ys[2] = {detail::reflect101i(y0, img.height),
                               detail::reflect101i(y0 + 1, img.height)};
            for (int c = 0; c < img.channels; ++c) {
                const double v00 = img.at(ys[0], xs[0], c), v01 = img.at(ys[0], xs[1], c);
                const double v10 = img.at(ys[1], xs[0], c), v11 = img.at(ys[1], xs[1], c);
                const double v = (1 - fy) * ((1 - fx) * v00 + fx * v01) +
                                 fy * ((1 - fx) * v10 + fx * v11);
                out.at(y, x, c) = T(v);
            }
        }
    }
    return out;
}

/// Hue rotation about the gray axis: M = cos(a) I + (1 - cos(a)) L + sin(a) Z
/// with L the BT.601 luma projector. At a = 0 the matrix is exactly the
/// identity. Pixels outside the mask are copied bit-exactly; results are
/// clamped to [0,1].
template <typename T>
Image<T> mask_recolor(const Image<T>& image, const Mask& mask, double hue_radians) {
    if (image.channels != 3) throw std::invalid_argument("mask_recolor: needs an RGB image");
    if (mask.height != image.height || mask.width != image.width)
        throw std::invalid_argument("mask_recolor: mask shape mismatch");
    static const double L[3][3] = {{0.299, 0.587, 0.114},
                                   {0.299, 0.587, 0.114},
                                   {0.299, 0.587, 0.114}};
    static const double Z[3][3] = {{0.168, 0.330, -0.497},
                                   {-0.328, 0.035, 0.292},
                                   {1.250, -1.050, -0.203}};
    const double c = std::cos(hue_radians), s = std::sin(hue_radians);
    double m[3][3];
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) m[i][j] = c * (i == j ? 1.0 : 0.0) + (1.0 - c) * L[i][j] + s * Z[i][j];

    Image<T> out = image;
    for (int y = 0; y < image.height; ++y) {
        for (int x = 0; x < image.width; ++x) {
            if (!mask.at(y, x)) continue;
            const double r = image.at(y, x, 0), g = image.at(y, x, 1), b = image.at(y, x, 2);
            for (int i = 0; i < 3; ++i)
                out.at(y, x, i) = clamp01(T(m[i][0] * r + m[i][1] * g + m[i][2] * b));
        }
    }
    return out;
}

/// Alpha-composites an RGBA sprite onto the image at the given top-left
/// anchor. Pixels with zero sprite alpha are untouched bit-exactly.
template <typename T>
Image<T> overlay(const Image<T>& image, const Image<T>& sprite, int anchor_y, int anchor_x) {
    if (image.channels != 3) throw std::invalid_argument("overlay: needs an RGB image");
    if (sprite.channels != 4) throw std::invalid_argument("overlay: sprite must be RGBA");
    Image<T> out = image;
    for (int sy = 0; sy < sprite.height; ++sy) {
        const int y = anchor_y + sy;
        if (y < 0 || y >= image.height) continue;
        for (int sx = 0; sx < sprite.width; ++sx) {
            const int x = anchor_x + sx;
            if (x < 0 || x >= image.width) continue;
            const T a = sprite.at(sy, sx, 3);
            if (a == T(0)) continue;
            for (int c = 0; c < 3; ++c)
                out.at(y, x, c) = clamp01((T(1) - a) * image.at(y, x, c) + a * sprite.at(sy, sx, c));
        }
    }
    return out;
}

}  // namespace splatedit
