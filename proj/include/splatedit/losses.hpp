#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <stdexcept>

#include "splatedit/image.hpp"

namespace splatedit {
namespace losses {

template <typename T>
struct LossWeights {
    T lambda_dssim = T(0.2);
    T lambda_temporal = T(0.001);

    void validate() const {
        if (!(lambda_dssim >= T(0) && lambda_dssim <= T(1)))
            throw std::invalid_argument("loss weights: lambda_dssim must be in [0,1]");
        if (!(lambda_temporal >= T(0)))
            throw std::invalid_argument("loss weights: lambda_temporal must be >= 0");
    }
};

template <typename T>
struct LossResult {
    T value{};
    Image<T> grad;  // with respect to the first image argument
};

/// Mean absolute difference over all pixels and channels. The subgradient at
/// exact ties is zero.
template <typename T>
LossResult<T> l1_loss(const Image<T>& rendered, const Image<T>& target) {
    require_same_shape(rendered, target, "l1_loss");
    LossResult<T> r;
    r.grad = Image<T>(rendered.height, rendered.width, rendered.channels);
    const T inv_n = T(1) / T(rendered.size());
    T sum = T(0);
    for (std::size_t i = 0; i < rendered.data.size(); ++i) {
        const T d = rendered.data[i] - target.data[i];
        sum += std::abs(d);
        r.grad.data[i] = d > T(0) ? inv_n : (d < T(0) ? -inv_n : T(0));
    }
    r.value = sum * inv_n;
    return r;
}

namespace detail {

inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;
inline constexpr double kSsimC1 = 0.01 * 0.01;  // (K1 * L)^2, L = 1
inline constexpr double kSsimC2 = 0.03 * 0.03;

template <typename T>
std::array<T, kSsimWindow> ssim_kernel() {
    std::array<T, kSsimWindow> k{};
    T sum = T(0);
    const int c = kSsimWindow / 2;
    for (int i = 0; i < kSsimWindow; ++i) {
        const T v = std::exp(T(-(i - c) * (i - c)) / T(2.0 * kSsimSigma * kSsimSigma));
        k[i] = v;
        sum += v;
    }
    for (auto& v : k) v /= sum;
    return k;
}

/// Reflect-101 index: mirrors about edge pixels without repeating them.
inline int reflect101(int i, int n) {
    while (i < 0 || i >= n) {
        if (i < 0) i = -i;
        if (i >= n) i = 2 * n - 2 - i;
    }
    return i;
}

}  // namespace detail

/// Structural dissimilarity (1 - SSIM) / 2, SSIM computed per channel with an
/// 11x11 Gaussian window (sigma 1.5), K1=0.01, K2=0.03, dynamic range 1, and
/// reflect-101 padding; channels averaged. The analytic gradient is with
/// respect to `rendered`.
template <typename T>
LossResult<T> dssim_loss(const Image<T>& rendered, const Image<T>& target) {
    require_same_shape(rendered, target, "dssim_loss");
    const int h = rendered.height, w = rendered.width, ch = rendered.channels;
    if (h < detail::kSsimWindow || w < detail::kSsimWindow)
        throw std::invalid_argument("dssim_loss: image smaller than the 11x11 SSIM window");

    const auto kern = detail::ssim_kernel<T>();
    const int c = detail::kSsimWindow / 2;
    const std::size_t plane = std::size_t(h) * w;

    LossResult<T> r;
    r.grad = Image<T>(h, w, ch);
    T ssim_total = T(0);

    std::vector<T> mu_x(plane), mu_y(plane), s_xx(plane), s_yy(plane), s_xy(plane);
    std::vector<T> f_mu(plane), f_sxx(plane), f_sxy(plane);
    std::vector<T> g_mu(plane), g_sxx(plane), g_sxy(plane);

    // dL/ds per pixel: loss = (1 - mean(s)) / 2.
    const T dl_ds = T(-0.5) / T(plane * std::size_t(ch));

    for (int channel = 0; channel < ch; ++channel) {
        // Windowed moments with reflect padding.
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                T mx = 0, my = 0, sxx = 0, syy = 0, sxy = 0;
                for (int oy = 0; oy < detail::kSsimWindow; ++oy) {
                    const int yy = detail::reflect101(y + oy - c, h);
                    for (int ox = 0; ox < detail::kSsimWindow; ++ox) {
                        const int xx = detail::reflect101(x + ox - c, w);
                        const T wgt = kern[oy] * kern[ox];
                        const T a = rendered.at(yy, xx, channel);
                        const T b = target.at(yy, xx, channel);
                        mx += wgt * a;
                        my += wgt * b;
                        sxx += wgt * a * a;
                        syy += wgt * b * b;
                        sxy += wgt * a * b;
                    }
                }
                const std::size_t i = std::size_t(y) * w + x;
                mu_x[i] = mx;
                mu_y[i] = my;
                s_xx[i] = sxx;
                s_yy[i] = syy;
                s_xy[i] = sxy;
            }
        }

        // SSIM map and the per-pixel partials wrt (mu_x, S_xx, S_xy).
        for (std::size_t i = 0; i < plane; ++i) {
            const T mx = mu_x[i], my = mu_y[i];
            const T var_x = s_xx[i] - mx * mx;
            const T var_y = s_yy[i] - my * my;
            const T cov = s_xy[i] - mx * my;
            const T a1 = T(2) * mx * my + T(detail::kSsimC1);
            const T a2 = T(2) * cov + T(detail::kSsimC2);
            const T b1 = mx * mx + my * my + T(detail::kSsimC1);
            const T b2 = var_x + var_y + T(detail::kSsimC2);
            const T denom = b1 * b2;
            const T s = (a1 * a2) / denom;
            ssim_total += s;

            const T ds_dmu = (T(2) * my * a2 - T(2) * my * a1) / denom -
                             s * (T(2) * mx / b1 - T(2) * mx / b2);
            const T ds_dsxx = -s / b2;
            const T ds_dsxy = T(2) * a1 / denom;
            f_mu[i] = dl_ds * ds_dmu;
            f_sxx[i] = dl_ds * ds_dsxx;
            f_sxy[i] = dl_ds * ds_dsxy;
        }

        // Adjoint of the padded window convolution: scatter back to inputs.
        std::fill(g_mu.begin(), g_mu.end(), T(0));
        std::fill(g_sxx.begin(), g_sxx.end(), T(0));
        std::fill(g_sxy.begin(), g_sxy.end(), T(0));
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                const std::size_t i = std::size_t(y) * w + x;
                for (int oy = 0; oy < detail::kSsimWindow; ++oy) {
                    const int yy = detail::reflect101(y + oy - c, h);
                    for (int ox = 0; ox < detail::kSsimWindow; ++ox) {
                        const int xx = detail::reflect101(x + ox - c, w);
                        const T wgt = kern[oy] * kern[ox];
                        const std::size_t j = std::size_t(yy) * w + xx;
                        g_mu[j] += wgt * f_mu[i];
                        g_sxx[j] += wgt * f_sxx[i];
                        g_sxy[j] += wgt * f_sxy[i];
                    }
                }
            }
        }
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const std::size_t j = std::size_t(y) * w + x;
                r.grad.at(y, x, channel) = g_mu[j] + T(2) * rendered.at(y, x, channel) * g_sxx[j] +
                                           target.at(y, x, channel) * g_sxy[j];
            }
    }

    const T mean_ssim = ssim_total / T(plane * std::size_t(ch));
    r.value = (T(1) - mean_ssim) / T(2);
    return r;
}

/// Plain mean SSIM value (no gradient); used by the evaluation metrics.
template <typename T>
T ssim_value(const Image<T>& a, const Image<T>& b) {
    return T(1) - T(2) * dssim_loss(a, b).value;
}

enum class TemporalKind { L1, L2 };

template <typename T>
struct TemporalResult {
    T value{};
    Image<T> grad_a;
    Image<T> grad_b;
};

/// Per-pixel difference between renders of temporally adjacent frames from
/// the same camera. Gradients flow to both renders.
template <typename T>
TemporalResult<T> temporal_loss(const Image<T>& render_a, const Image<T>& render_b,
                                TemporalKind kind = TemporalKind::L1) {
    require_same_shape(render_a, render_b, "temporal_loss");
    TemporalResult<T> r;
    r.grad_a = Image<T>(render_a.height, render_a.width, render_a.channels);
    r.grad_b = Image<T>(render_a.height, render_a.width, render_a.channels);
    const T inv_n = T(1) / T(render_a.size());
    T sum = T(0);
    for (std::size_t i = 0; i < render_a.data.size(); ++i) {
        const T d = render_a.data[i] - render_b.data[i];
        if (kind == TemporalKind::L1) {
            sum += std::abs(d);
            const T g = d > T(0) ? inv_n : (d < T(0) ? -inv_n : T(0));
            r.grad_a.data[i] = g;
            r.grad_b.data[i] = -g;
        } else {
            sum += d * d;
            r.grad_a.data[i] = T(2) * d * inv_n;
            r.grad_b.data[i] = T(-2) * d * inv_n;
        }
    }
    r.value = sum * inv_n;
    return r;
}

/// Weighted combination of Eq.-style components:
/// (1 - lambda_d) l1 + lambda_d dssim [+ lambda_t temporal].
template <typename T>
T combine_components(T l1, T dssim, T temporal, bool has_temporal, const LossWeights<T>& weights) {
    T v = (T(1) - weights.lambda_dssim) * l1 + weights.lambda_dssim * dssim;
    if (has_temporal) v += weights.lambda_temporal * temporal;
    return v;
}

template <typename T>
struct TotalLossResult {
    T value{};
    T l1{};
    T dssim{};
    T temporal{};
    Image<T> grad_rendered;
    std::optional<Image<T>> grad_adjacent;
};

/// (1 - lambda_d) L1 + lambda_d DSSIM + lambda_t L_temp. The temporal term is
/// evaluated only when an adjacent render is supplied.
template <typename T>
TotalLossResult<T> total_loss(const Image<T>& rendered, const Image<T>& target,
                              const Image<T>* render_adjacent, const LossWeights<T>& weights,
                              TemporalKind temporal_kind = TemporalKind::L1) {
    weights.validate();
    auto l1 = l1_loss(rendered, target);
    auto ds = dssim_loss(rendered, target);

    TotalLossResult<T> out;
    out.l1 = l1.value;
    out.dssim = ds.value;
    out.grad_rendered = Image<T>(rendered.height, rendered.width, rendered.channels);
    for (std::size_t i = 0; i < out.grad_rendered.data.size(); ++i)
        out.grad_rendered.data[i] = (T(1) - weights.lambda_dssim) * l1.grad.data[i] +
                                    weights.lambda_dssim * ds.grad.data[i];

    if (render_adjacent) {
        auto temp = temporal_loss(rendered, *render_adjacent, temporal_kind);
        out.temporal = temp.value;
        for (std::size_t i = 0; i < out.grad_rendered.data.size(); ++i)
            out.grad_rendered.data[i] += weights.lambda_temporal * temp.grad_a.data[i];
        out.grad_adjacent = Image<T>(rendered.height, rendered.width, rendered.channels);
        for (std::size_t i = 0; i < out.grad_adjacent->data.size(); ++i)
            out.grad_adjacent->data[i] = weights.lambda_temporal * temp.grad_b.data[i];
    }
    out.value = combine_components(out.l1, out.dssim, out.temporal,
                                   render_adjacent != nullptr, weights);
    return out;
}

}  // namespace losses
}  // namespace splatedit
