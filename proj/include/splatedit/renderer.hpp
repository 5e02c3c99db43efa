#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "splatedit/deformation.hpp"
#include "splatedit/geometry.hpp"
#include "splatedit/image.hpp"
#include "splatedit/threading.hpp"

namespace splatedit {

inline constexpr int kTileSize = 16;
inline constexpr double kAlphaMin = 1.0 / 255.0;
inline constexpr double kAlphaMax = 0.99;
inline constexpr double kTransmittanceMin = 1e-4;
// Conservative bounding-rect radius in sigma units. Must satisfy
// max_opacity * exp(-r^2/2) < kAlphaMin so that any pixel outside the rect
// would be skipped by the alpha threshold anyway; 3.5 > sqrt(2 ln(255*0.99)).
inline constexpr double kBoundingRadiusSigma = 3.5;

/// One projected splat, ready for per-pixel evaluation:
/// alpha(p) = opacity * exp(-0.5 * (a dx^2 + 2 b dx dy + c dy^2)).
template <typename T>
struct SplatPrimitive2D {
    Vec2<T> mu;
    T conic_a{}, conic_b{}, conic_c{};
    T depth{};
    Vec3<T> color;
    T opacity{};  // activated, in (0,1)
    int source_index = -1;
};

template <typename T>
struct RenderOutput {
    Image<T> image;               // H x W x 3
    Image<T> transmittance;       // H x W x 1, transmittance left after compositing
    std::vector<int> contributing;  // per-pixel composited splat count
};

/// Gradients for every raw parameter array of the cloud and the deformation
/// field, plus per-Gaussian screen-space positional gradient statistics.
template <typename T>
struct GradBuffers {
    std::vector<Vec3<T>> d_positions;
    std::vector<Vec4<T>> d_rotations_raw;
    std::vector<Vec3<T>> d_scales_raw;
    std::vector<T> d_opacities_raw;
    std::vector<Vec3<T>> d_colors_raw;
    std::vector<T> d_field_params;

    std::vector<T> accum_pos_grad_norm;  // sum over backward passes of ||dL/dmu||
    std::vector<int> accum_count;

    void init(std::size_t n, std::size_t field_params) {
        d_positions.assign(n, Vec3<T>{});
        d_rotations_raw.assign(n, Vec4<T>{T(0), T(0), T(0), T(0)});
        d_scales_raw.assign(n, Vec3<T>{});
        d_opacities_raw.assign(n, T(0));
        d_colors_raw.assign(n, Vec3<T>{});
        d_field_params.assign(field_params, T(0));
        accum_pos_grad_norm.assign(n, T(0));
        accum_count.assign(n, 0);
    }

    void zero_gradients() {
        std::fill(d_positions.begin(), d_positions.end(), Vec3<T>{});
        std::fill(d_rotations_raw.begin(), d_rotations_raw.end(), Vec4<T>{T(0), T(0), T(0), T(0)});
        std::fill(d_scales_raw.begin(), d_scales_raw.end(), Vec3<T>{});
        std::fill(d_opacities_raw.begin(), d_opacities_raw.end(), T(0));
        std::fill(d_colors_raw.begin(), d_colors_raw.end(), Vec3<T>{});
        std::fill(d_field_params.begin(), d_field_params.end(), T(0));
    }

    void reset_accumulators() {
        std::fill(accum_pos_grad_norm.begin(), accum_pos_grad_norm.end(), T(0));
        std::fill(accum_count.begin(), accum_count.end(), 0);
    }
};

namespace detail {

template <typename T>
void check_finite(const DeformedGaussians<T>& g) {
    for (std::size_t i = 0; i < g.size(); ++i) {
        const bool ok = std::isfinite(g.positions[i].x) && std::isfinite(g.positions[i].y) &&
                        std::isfinite(g.positions[i].z) && std::isfinite(g.rotations_raw[i].w) &&
                        std::isfinite(g.rotations_raw[i].x) && std::isfinite(g.rotations_raw[i].y) &&
                        std::isfinite(g.rotations_raw[i].z) && std::isfinite(g.scales[i].x) &&
                        std::isfinite(g.scales[i].y) && std::isfinite(g.scales[i].z) &&
                        std::isfinite(g.opacities[i]) && std::isfinite(g.colors[i].x) &&
                        std::isfinite(g.colors[i].y) && std::isfinite(g.colors[i].z);
        if (!ok)
            throw std::runtime_error("rasterize: non-finite parameter in Gaussian " +
                                     std::to_string(i));
    }
}

template <typename T>
struct SplatRect {
    int x0, x1, y0, y1;  // inclusive pixel bounds, clipped to the image
    bool empty;
};

template <typename T>
SplatRect<T> splat_rect(const SplatPrimitive2D<T>& s, T cov_xx, T cov_yy, int width, int height) {
    const T rx = T(kBoundingRadiusSigma) * std::sqrt(cov_xx);
    const T ry = T(kBoundingRadiusSigma) * std::sqrt(cov_yy);
    SplatRect<T> r;
    r.x0 = std::max(0, int(std::ceil(s.mu.x - rx)));
    r.x1 = std::min(width - 1, int(std::floor(s.mu.x + rx)));
    r.y0 = std::max(0, int(std::ceil(s.mu.y - ry)));
    r.y1 = std::min(height - 1, int(std::floor(s.mu.y + ry)));
    r.empty = r.x0 > r.x1 || r.y0 > r.y1;
    return r;
}

}  // namespace detail

/// Projects, depth-sorts and buckets the visible splats. Splats are listed
/// per tile in global depth order (ties broken by source index), so tiling
/// cannot change per-pixel compositing order.
template <typename T>
struct SplatIndex {
    std::vector<SplatPrimitive2D<T>> splats;  // depth-sorted
    std::vector<T> cov_xx, cov_yy;            // floored covariance diagonals, for rects
    std::vector<std::vector<std::int32_t>> tile_lists;
    int tiles_x = 0, tiles_y = 0;

    void build(const DeformedGaussians<T>& gaussians, const Camera<T>& cam) {
        detail::check_finite(gaussians);
        splats.clear();
        cov_xx.clear();
        cov_yy.clear();
        struct Raw {
            SplatPrimitive2D<T> s;
            T cxx, cyy;
        };
        std::vector<Raw> raw;
        raw.reserve(gaussians.size());
        for (std::size_t i = 0; i < gaussians.size(); ++i) {
            const Covariance3<T> sigma = build_covariance(gaussians.rotations_raw[i], gaussians.scales[i]);
            const auto proj = project_gaussian(gaussians.positions[i], sigma, cam);
            if (!proj) continue;  // near-plane cull
            Raw r;
            r.s.mu = proj->mu;
            r.s.conic_a = proj->cov.conic_a;
            r.s.conic_b = proj->cov.conic_b;
            r.s.conic_c = proj->cov.conic_c;
            r.s.depth = proj->depth;
            r.s.color = gaussians.colors[i];
            r.s.opacity = gaussians.opacities[i];
            r.s.source_index = int(i);
            r.cxx = proj->cov.xx;
            r.cyy = proj->cov.yy;
            raw.push_back(r);
        }
        std::sort(raw.begin(), raw.end(), [](const Raw& a, const Raw& b) {
            if (a.s.depth != b.s.depth) return a.s.depth < b.s.depth;
            return a.s.source_index < b.s.source_index;
        });
        splats.reserve(raw.size());
        for (auto& r : raw) {
            splats.push_back(r.s);
            cov_xx.push_back(r.cxx);
            cov_yy.push_back(r.cyy);
        }

        tiles_x = (cam.width + kTileSize - 1) / kTileSize;
        tiles_y = (cam.height + kTileSize - 1) / kTileSize;
        tile_lists.assign(std::size_t(tiles_x) * tiles_y, {});
        for (std::size_t k = 0; k < splats.size(); ++k) {
            const auto r = detail::splat_rect(splats[k], cov_xx[k], cov_yy[k], cam.width, cam.height);
            if (r.empty) continue;
            for (int ty = r.y0 / kTileSize; ty <= r.y1 / kTileSize; ++ty)
                for (int tx = r.x0 / kTileSize; tx <= r.x1 / kTileSize; ++tx)
                    tile_lists[std::size_t(ty) * tiles_x + tx].push_back(std::int32_t(k));
        }
    }
};

template <typename T>
RenderOutput<T> rasterize_indexed(const SplatIndex<T>& index, const Camera<T>& cam,
                                  const Vec3<T>& background);

/// Forward alpha compositing. Per pixel, splats are walked front to back in
/// the global sorted order; alpha below 1/255 is skipped, alpha is clamped to
/// 0.99, and compositing stops once transmittance drops below 1e-4. The
/// remaining transmittance times the background is added at the end.
template <typename T>
RenderOutput<T> rasterize(const DeformedGaussians<T>& gaussians, const Camera<T>& cam,
                          const Vec3<T>& background) {
    SplatIndex<T> index;
    index.build(gaussians, cam);
    return rasterize_indexed(index, cam, background);
}

template <typename T>
RenderOutput<T> rasterize_indexed(const SplatIndex<T>& index, const Camera<T>& cam,
                                  const Vec3<T>& background) {
    RenderOutput<T> out;
    out.image = Image<T>(cam.height, cam.width, 3);
    out.transmittance = Image<T>(cam.height, cam.width, 1);
    out.contributing.assign(std::size_t(cam.height) * cam.width, 0);

    parallel_for(index.tile_lists.size(), [&](std::size_t tile) {
        const int tx = int(tile) % index.tiles_x;
        const int ty = int(tile) / index.tiles_x;
        const auto& list = index.tile_lists[tile];
        const int x0 = tx * kTileSize, x1 = std::min(cam.width, x0 + kTileSize);
        const int y0 = ty * kTileSize, y1 = std::min(cam.height, y0 + kTileSize);
        for (int py = y0; py < y1; ++py) {
            for (int px = x0; px < x1; ++px) {
                T trans = T(1);
                T rgb[3] = {T(0), T(0), T(0)};
                int count = 0;
                for (const std::int32_t k : list) {
                    const auto& s = index.splats[k];
                    const T dx = T(px) - s.mu.x;
                    const T dy = T(py) - s.mu.y;
                    const T q = s.conic_a * dx * dx + T(2) * s.conic_b * dx * dy +
                                s.conic_c * dy * dy;
                    if (q < T(0)) continue;
                    T alpha = s.opacity * std::exp(T(-0.5) * q);
                    if (alpha < T(kAlphaMin)) continue;
                    if (alpha > T(kAlphaMax)) alpha = T(kAlphaMax);
                    const T w = alpha * trans;
                    rgb[0] += w * s.color.x;
                    rgb[1] += w * s.color.y;
                    rgb[2] += w * s.color.z;
                    ++count;
                    trans *= (T(1) - alpha);
                    if (trans < T(kTransmittanceMin)) break;
                }
                out.image.at(py, px, 0) = rgb[0] + trans * background.x;
                out.image.at(py, px, 1) = rgb[1] + trans * background.y;
                out.image.at(py, px, 2) = rgb[2] + trans * background.z;
                out.transmittance.at(py, px, 0) = trans;
                out.contributing[std::size_t(py) * cam.width + px] = count;
            }
        }
    });
    return out;
}

namespace detail {

template <typename T>
struct SplatGrad2D {
    T dmu_x{}, dmu_y{};
    T da{}, db{}, dc{};
    T dopacity{};
    T dcolor[3] = {T(0), T(0), T(0)};
    bool touched = false;
};

}  // namespace detail

/// Backward pass of the rasterizer through compositing, conic, projection,
/// covariance construction, activations and the deformation offsets.
/// Gradients are ACCUMULATED into grads; densification statistics are updated
/// for every Gaussian that contributed to at least one pixel. grad_image must
/// be H x W x 3 and is the loss gradient of the output image. When d_offsets
/// is given (pre-sized, zeroed by the caller), per-Gaussian offset gradients
/// are also accumulated for the deformation-field backward of this render.
template <typename T>
void rasterize_backward(const DeformedGaussians<T>& gaussians, const Camera<T>& cam,
                        const Vec3<T>& background, const Image<T>& grad_image,
                        GradBuffers<T>& grads, DeformOffsets<T>* d_offsets = nullptr) {
    if (grad_image.height != cam.height || grad_image.width != cam.width || grad_image.channels != 3)
        throw std::invalid_argument("rasterize_backward: grad_image shape mismatch");

    SplatIndex<T> index;
    index.build(gaussians, cam);

    // Per-tile gradient partials, reduced in tile order so the result does
    // not depend on the worker count.
    std::vector<std::vector<detail::SplatGrad2D<T>>> tile_grads(index.tile_lists.size());
    parallel_for(index.tile_lists.size(), [&](std::size_t tile) {
        const int tx = int(tile) % index.tiles_x;
        const int ty = int(tile) / index.tiles_x;
        const auto& list = index.tile_lists[tile];
        auto& local = tile_grads[tile];
        local.assign(list.size(), {});
        const int x0 = tx * kTileSize, x1 = std::min(cam.width, x0 + kTileSize);
        const int y0 = ty * kTileSize, y1 = std::min(cam.height, y0 + kTileSize);
        struct Step {
            std::size_t pos;  // position in tile list
            T alpha;
            T trans_before;
            bool clamped;
        };
        std::vector<Step> steps;
        for (int py = y0; py < y1; ++py) {
            for (int px = x0; px < x1; ++px) {
                // Re-run the forward walk for this pixel, recording each
                // composited step.
                steps.clear();
                T trans = T(1);
                for (std::size_t li = 0; li < list.size(); ++li) {
                    const auto& s = index.splats[list[li]];
                    const T dx = T(px) - s.mu.x;
                    const T dy = T(py) - s.mu.y;
                    const T q = s.conic_a * dx * dx + T(2) * s.conic_b * dx * dy +
                                s.conic_c * dy * dy;
                    if (q < T(0)) continue;
                    T alpha = s.opacity * std::exp(T(-0.5) * q);
                    if (alpha < T(kAlphaMin)) continue;
                    const bool clamped = alpha > T(kAlphaMax);
                    if (clamped) alpha = T(kAlphaMax);
                    steps.push_back({li, alpha, trans, clamped});
                    trans *= (T(1) - alpha);
                    if (trans < T(kTransmittanceMin)) break;
                }

                const T g[3] = {grad_image.at(py, px, 0), grad_image.at(py, px, 1),
                                grad_image.at(py, px, 2)};
                // Suffix color: contributions composited after splat i,
                // including the background term.
                T suffix[3] = {trans * background.x, trans * background.y, trans * background.z};
                for (std::size_t si = steps.size(); si-- > 0;) {
                    const Step& st = steps[si];
                    const auto& s = index.splats[list[st.pos]];
                    auto& acc = local[st.pos];
                    acc.touched = true;

                    const T w = st.alpha * st.trans_before;
                    T d_alpha = T(0);
                    for (int ch = 0; ch < 3; ++ch) {
                        acc.dcolor[ch] += g[ch] * w;
                        const T c = ch == 0 ? s.color.x : (ch == 1 ? s.color.y : s.color.z);
                        d_alpha += g[ch] * (c * st.trans_before - suffix[ch] / (T(1) - st.alpha));
                    }
                    for (int ch = 0; ch < 3; ++ch) {
                        const T c = ch == 0 ? s.color.x : (ch == 1 ? s.color.y : s.color.z);
                        suffix[ch] += w * c;
                    }
                    if (st.clamped) continue;  // clamp cuts the alpha chain

                    const T dx = T(px) - s.mu.x;
                    const T dy = T(py) - s.mu.y;
                    const T q = s.conic_a * dx * dx + T(2) * s.conic_b * dx * dy +
                                s.conic_c * dy * dy;
                    const T falloff = std::exp(T(-0.5) * q);
                    acc.dopacity += d_alpha * falloff;
                    const T dq = T(-0.5) * st.alpha * d_alpha;
                    acc.da += dq * dx * dx;
                    acc.db += dq * T(2) * dx * dy;
                    acc.dc += dq * dy * dy;
                    acc.dmu_x += dq * (T(-2) * (s.conic_a * dx + s.conic_b * dy));
                    acc.dmu_y += dq * (T(-2) * (s.conic_b * dx + s.conic_c * dy));
                }
            }
        }
    });

    // Deterministic reduction over tiles.
    std::vector<detail::SplatGrad2D<T>> splat_grads(index.splats.size());
    for (std::size_t tile = 0; tile < index.tile_lists.size(); ++tile) {
        const auto& list = index.tile_lists[tile];
        const auto& local = tile_grads[tile];
        for (std::size_t li = 0; li < list.size(); ++li) {
            auto& dst = splat_grads[list[li]];
            const auto& src = local[li];
            dst.dmu_x += src.dmu_x;
            dst.dmu_y += src.dmu_y;
            dst.da += src.da;
            dst.db += src.db;
            dst.dc += src.dc;
            dst.dopacity += src.dopacity;
            for (int ch = 0; ch < 3; ++ch) dst.dcolor[ch] += src.dcolor[ch];
            dst.touched = dst.touched || src.touched;
        }
    }

    // Chain through projection, covariance, activations and offsets.
    parallel_for(index.splats.size(), [&](std::size_t k) {
        const auto& sg = splat_grads[k];
        if (!sg.touched) return;
        const int i = index.splats[k].source_index;

        const Covariance3<T> sigma = build_covariance(gaussians.rotations_raw[i], gaussians.scales[i]);
        const auto proj_grads = project_gaussian_backward(
            gaussians.positions[i], sigma, cam, Vec2<T>{sg.dmu_x, sg.dmu_y}, sg.da, sg.db, sg.dc);
        const auto cov_grads =
            build_covariance_backward(gaussians.rotations_raw[i], gaussians.scales[i], proj_grads.d_sigma);

        // Position: x + dx is additive, and the encoding input carries a
        // stop-gradient, so the same gradient flows to both x and dx.
        grads.d_positions[i] += proj_grads.d_position;
        grads.d_rotations_raw[i] = grads.d_rotations_raw[i] + cov_grads.d_quat;

        // Scale: s = exp(scale_raw + ds).
        const Vec3<T> d_scale_raw{cov_grads.d_scale.x * gaussians.scales[i].x,
                                  cov_grads.d_scale.y * gaussians.scales[i].y,
                                  cov_grads.d_scale.z * gaussians.scales[i].z};
        grads.d_scales_raw[i] += d_scale_raw;

        if (d_offsets) {
            d_offsets->dx[i] += proj_grads.d_position;
            d_offsets->dr[i] = d_offsets->dr[i] + cov_grads.d_quat;
            d_offsets->ds[i] += d_scale_raw;
        }

        const T op = gaussians.opacities[i];
        grads.d_opacities_raw[i] += sg.dopacity * op * (T(1) - op);

        const Vec3<T> c = gaussians.colors[i];
        grads.d_colors_raw[i] += Vec3<T>{sg.dcolor[0] * c.x * (T(1) - c.x),
                                         sg.dcolor[1] * c.y * (T(1) - c.y),
                                         sg.dcolor[2] * c.z * (T(1) - c.z)};

        grads.accum_pos_grad_norm[i] += std::sqrt(sg.dmu_x * sg.dmu_x + sg.dmu_y * sg.dmu_y);
        grads.accum_count[i] += 1;
    });
}

/// Deformed render at a query time: rasterize(deformed_gaussians(cloud, t)).
template <typename T>
RenderOutput<T> render_at_time(const GaussianCloud<T>& cloud, const DeformationField<T>& field,
                               T t, const Camera<T>& cam, const Vec3<T>& background) {
    return rasterize(deformed_gaussians(cloud, field, t), cam, background);
}

/// Forward state of one differentiable render, kept for the backward pass.
template <typename T>
struct RenderPass {
    T time{};
    DeformCache<T> cache;
    DeformOffsets<T> offsets;
    DeformedGaussians<T> gaussians;
    RenderOutput<T> output;
};

template <typename T>
RenderPass<T> render_forward(const GaussianCloud<T>& cloud, const DeformationField<T>& field, T t,
                             const Camera<T>& cam, const Vec3<T>& background) {
    RenderPass<T> pass;
    pass.time = t;
    pass.offsets = field.deform_cached(cloud, t, pass.cache);
    pass.gaussians = apply_offsets(cloud, pass.offsets);
    pass.output = rasterize(pass.gaussians, cam, background);
    return pass;
}

/// Full-chain backward for one render: rasterizer, activations, and the
/// deformation MLP. Accumulates into grads.
template <typename T>
void render_backward(const DeformationField<T>& field, const RenderPass<T>& pass,
                     const Camera<T>& cam, const Vec3<T>& background, const Image<T>& grad_image,
                     GradBuffers<T>& grads) {
    DeformOffsets<T> d_offsets;
    d_offsets.resize_zero(pass.gaussians.size());
    rasterize_backward(pass.gaussians, cam, background, grad_image, grads, &d_offsets);
    field.backward(pass.cache, d_offsets, grads.d_field_params);
}

/// Writes the per-pixel contributor lists of a render as a diagnostic text
/// file: one line per pixel, "px py : splat_index:alpha ...", splats in
/// compositing order. Intended for cross-checking against the reference
/// compositor.
template <typename T>
void dump_contributors(const DeformedGaussians<T>& gaussians, const Camera<T>& cam,
                       const std::string& path) {
    SplatIndex<T> index;
    index.build(gaussians, cam);
    std::ofstream out(path);
    if (!out) throw std::runtime_error("dump_contributors: cannot open " + path);
    for (int py = 0; py < cam.height; ++py) {
        for (int px = 0; px < cam.width; ++px) {
            const int tx = px / kTileSize, ty = py / kTileSize;
            const auto& list = index.tile_lists[std::size_t(ty) * index.tiles_x + tx];
            out << px << " " << py << " :";
            T trans = T(1);
            for (const std::int32_t k : list) {
                const auto& s = index.splats[k];
                const T dx = T(px) - s.mu.x;
                const T dy = T(py) - s.mu.y;
                const T q = s.conic_a * dx * dx + T(2) * s.conic_b * dx * dy + s.conic_c * dy * dy;
                if (q < T(0)) continue;
                T alpha = s.opacity * std::exp(T(-0.5) * q);
                if (alpha < T(kAlphaMin)) continue;
                if (alpha > T(kAlphaMax)) alpha = T(kAlphaMax);
                out << " " << s.source_index << ":" << double(alpha);
                trans *= (T(1) - alpha);
                if (trans < T(kTransmittanceMin)) break;
            }
            out << "\n";
        }
    }
}

}  // namespace splatedit
