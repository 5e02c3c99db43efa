#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "splatedit/adam.hpp"
#include "splatedit/gaussian_cloud.hpp"
#include "splatedit/geometry.hpp"
#include "splatedit/renderer.hpp"
#include "splatedit/rng.hpp"

namespace splatedit {

struct DensifyConfig {
    double grad_threshold = 2e-4;        // mean screen-space positional gradient norm
    double percent_dense = 0.01;         // fraction of scene extent separating clone from split
    double opacity_prune_threshold = 0.005;
    int split_count = 2;
    int interval_iters = 100;
    std::size_t max_gaussians = 500000;

    void validate() const {
        if (!(grad_threshold > 0) || !(percent_dense > 0) || !(opacity_prune_threshold > 0))
            throw std::invalid_argument("densify: thresholds must be > 0");
        if (split_count < 2) throw std::invalid_argument("densify: split_count must be >= 2");
        if (interval_iters < 1) throw std::invalid_argument("densify: interval must be >= 1");
    }
};

/// Scale divisor applied to split children (3DGS convention).
inline constexpr double kSplitScaleFactor = 1.6;

struct DensifyReport {
    std::size_t cloned = 0;
    std::size_t split = 0;
    std::size_t pruned = 0;
    bool skipped_cap = false;  // clone/split skipped because max_gaussians would be exceeded
};

/// Handles to the optimizer groups that track the cloud arrays.
struct CloudGroupIds {
    int position = -1;
    int rotation = -1;
    int scale = -1;
    int opacity = -1;
    int color = -1;
};

/// Adaptive density control: Gaussians whose mean accumulated positional
/// gradient reaches grad_threshold are cloned (small ones, offset by a sample
/// of their own covariance) or split (large ones, split_count children with
/// scales divided by 1.6); Gaussians with activated opacity below the prune
/// threshold are removed. Optimizer moments follow rows: kept rows carry
/// over, new rows start at zero. Gradient accumulators are reset by resizing
/// grads afterwards.
template <typename T>
DensifyReport densify_and_prune(GaussianCloud<T>& cloud, GradBuffers<T>& grads,
                                const DensifyConfig& cfg, T scene_extent, Adam<T>& adam,
                                const CloudGroupIds& groups, Rng& rng) {
    cfg.validate();
    if (!(scene_extent > T(0))) throw std::invalid_argument("densify: scene_extent must be > 0");
    const std::size_t n = cloud.size();
    if (grads.accum_pos_grad_norm.size() != n || grads.accum_count.size() != n)
        throw std::invalid_argument("densify: gradient statistics size mismatch");

    const T size_limit = T(cfg.percent_dense) * scene_extent;
    std::vector<bool> prune(n, false), clone(n, false), split(n, false);
    DensifyReport report;

    for (std::size_t i = 0; i < n; ++i) {
        if (cloud.activated_opacity(i) < T(cfg.opacity_prune_threshold)) {
            prune[i] = true;
            continue;
        }
        if (grads.accum_count[i] == 0) continue;
        const T mean_grad = grads.accum_pos_grad_norm[i] / T(grads.accum_count[i]);
        if (mean_grad < T(cfg.grad_threshold)) continue;
        const Vec3<T> s = cloud.activated_scale(i);
        const T max_scale = std::max(s.x, std::max(s.y, s.z));
        if (max_scale <= size_limit)
            clone[i] = true;
        else
            split[i] = true;
    }

    std::size_t n_clone = 0, n_split = 0, n_prune = 0;
    for (std::size_t i = 0; i < n; ++i) {
        n_clone += clone[i];
        n_split += split[i];
        n_prune += prune[i];
    }
    const std::size_t n_after =
        n - n_prune - n_split + n_clone + n_split * std::size_t(cfg.split_count);
    if (n_after > cfg.max_gaussians) {
        report.skipped_cap = true;
        std::fill(clone.begin(), clone.end(), false);
        std::fill(split.begin(), split.end(), false);
        n_clone = n_split = 0;
    }
    report.cloned = n_clone;
    report.split = n_split;
    report.pruned = n_prune;

    GaussianCloud<T> next;
    std::vector<int> old_of_new;
    auto copy_row = [&](std::size_t src) {
        next.positions.push_back(cloud.positions[src]);
        next.rotations_raw.push_back(cloud.rotations_raw[src]);
        next.scales_raw.push_back(cloud.scales_raw[src]);
        next.opacities_raw.push_back(cloud.opacities_raw[src]);
        next.colors_raw.push_back(cloud.colors_raw[src]);
    };
    auto sample_offset = [&](std::size_t src) {
        const Vec3<T> s = cloud.activated_scale(src);
        const Mat3<T> r = quat_to_rotation(cloud.rotations_raw[src]);
        const Vec3<T> local{T(rng.normal()) * s.x, T(rng.normal()) * s.y, T(rng.normal()) * s.z};
        return r * local;
    };

    for (std::size_t i = 0; i < n; ++i) {
        if (prune[i] || split[i]) continue;
        copy_row(i);
        old_of_new.push_back(int(i));
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (!clone[i]) continue;
        copy_row(i);
        next.positions.back() += sample_offset(i);
        old_of_new.push_back(-1);
    }
    const T log_split = std::log(T(kSplitScaleFactor));
    for (std::size_t i = 0; i < n; ++i) {
        if (!split[i]) continue;
        for (int k = 0; k < cfg.split_count; ++k) {
            copy_row(i);
            next.positions.back() = cloud.positions[i] + sample_offset(i);
            next.scales_raw.back() =
                cloud.scales_raw[i] - Vec3<T>{log_split, log_split, log_split};
            old_of_new.push_back(-1);
        }
    }

    cloud = std::move(next);
    adam.remap_rows(groups.position, old_of_new, 3);
    adam.remap_rows(groups.rotation, old_of_new, 4);
    adam.remap_rows(groups.scale, old_of_new, 3);
    adam.remap_rows(groups.opacity, old_of_new, 1);
    adam.remap_rows(groups.color, old_of_new, 3);

    grads.init(cloud.size(), grads.d_field_params.size());
    return report;
}

}  // namespace splatedit
