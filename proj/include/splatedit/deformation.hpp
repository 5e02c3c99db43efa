#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

#include "splatedit/encoding.hpp"
#include "splatedit/gaussian_cloud.hpp"
#include "splatedit/rng.hpp"
#include "splatedit/threading.hpp"

namespace splatedit {

struct DeformationConfig {
    int hidden_layers = 6;
    int width = 128;
    int levels_position = 10;
    int levels_time = 6;
};

/// Fully-connected ReLU network over one flat parameter buffer. The final
/// layer is zero-initialized so the network output is exactly zero before
/// any training step.
template <typename T>
struct Mlp {
    std::vector<int> dims;        // [in, hidden..., out]
    std::vector<T> params;        // per layer: weights (out x in, row-major), then bias
    std::vector<std::size_t> layer_offsets;

    int layer_count() const { return int(dims.size()) - 1; }
    std::size_t param_count() const { return params.size(); }

    const T* weights(int layer) const { return params.data() + layer_offsets[layer]; }
    T* weights(int layer) { return params.data() + layer_offsets[layer]; }
    const T* bias(int layer) const {
        return params.data() + layer_offsets[layer] + std::size_t(dims[layer + 1]) * dims[layer];
    }
    T* bias(int layer) {
        return params.data() + layer_offsets[layer] + std::size_t(dims[layer + 1]) * dims[layer];
    }

    void init(const std::vector<int>& dims_in, std::uint64_t seed) {
        dims = dims_in;
        if (dims.size() < 2) throw std::invalid_argument("mlp: need at least one layer");
        layer_offsets.clear();
        std::size_t total = 0;
        for (int l = 0; l < layer_count(); ++l) {
            layer_offsets.push_back(total);
            total += std::size_t(dims[l + 1]) * dims[l] + dims[l + 1];
        }
        params.assign(total, T(0));
        Rng rng(seed);
        // He-normal hidden layers; the output layer stays zero.
        for (int l = 0; l + 1 < layer_count(); ++l) {
            const double std_dev = std::sqrt(2.0 / dims[l]);
            T* w = weights(l);
            const std::size_t n = std::size_t(dims[l + 1]) * dims[l];
            for (std::size_t i = 0; i < n; ++i) w[i] = T(rng.normal() * std_dev);
        }
    }

    /// scratch must hold the per-layer activations; layout: inputs of each
    /// layer back to back ([in] [h1] [h2] ... [h_{L-1}]), caller-provided so
    /// batched calls can keep caches for the backward pass.
    std::size_t scratch_size() const {
        std::size_t s = 0;
        for (int l = 0; l < layer_count(); ++l) s += dims[l];
        return s;
    }

    void forward(const T* input, T* scratch, T* output) const {
        const int layers = layer_count();
        T* cur = scratch;
        for (int i = 0; i < dims[0]; ++i) cur[i] = input[i];
        for (int l = 0; l < layers; ++l) {
            const int in = dims[l], out = dims[l + 1];
            const T* w = weights(l);
            const T* b = bias(l);
            T* next = (l + 1 < layers) ? cur + in : output;
            for (int o = 0; o < out; ++o) {
                T acc = b[o];
                const T* wrow = w + std::size_t(o) * in;
                for (int i = 0; i < in; ++i) acc += wrow[i] * cur[i];
                next[o] = (l + 1 < layers && acc < T(0)) ? T(0) : acc;  // ReLU on hidden layers
            }
            cur = next;
        }
    }

    /// Accumulates parameter gradients into grad (same layout as params),
    /// given the cached layer inputs from forward(). Input gradients are not
    /// produced: the encoding input carries a stop-gradient.
    void backward(const T* scratch, const T* grad_output, T* grad) const {
        const int layers = layer_count();
        std::vector<const T*> inputs(layers);
        {
            const T* cur = scratch;
            for (int l = 0; l < layers; ++l) {
                inputs[l] = cur;
                cur += dims[l];
            }
        }
        std::vector<T> g(grad_output, grad_output + dims[layers]);
        std::vector<T> g_prev;
        for (int l = layers - 1; l >= 0; --l) {
            const int in = dims[l], out = dims[l + 1];
            const T* x = inputs[l];
            T* gw = grad + layer_offsets[l];
            T* gb = gw + std::size_t(out) * in;
            for (int o = 0; o < out; ++o) {
                const T go = g[o];
                gb[o] += go;
                T* row = gw + std::size_t(o) * in;
                for (int i = 0; i < in; ++i) row[i] += go * x[i];
            }
            if (l == 0) break;
            g_prev.assign(in, T(0));
            const T* w = weights(l);
            for (int o = 0; o < out; ++o) {
                const T go = g[o];
                const T* wrow = w + std::size_t(o) * in;
                for (int i = 0; i < in; ++i) g_prev[i] += go * wrow[i];
            }
            // ReLU: layer input x is the activated output of layer l-1.
            for (int i = 0; i < in; ++i)
                if (!(x[i] > T(0))) g_prev[i] = T(0);
            g.swap(g_prev);
        }
    }

    template <typename U>
    Mlp<U> cast() const {
        Mlp<U> out;
        out.dims = dims;
        out.layer_offsets = layer_offsets;
        out.params.resize(params.size());
        for (std::size_t i = 0; i < params.size(); ++i) out.params[i] = U(params[i]);
        return out;
    }
};

/// Batched forward cache: activations for every Gaussian, so the backward
/// pass can run without re-deriving the forward state.
template <typename T>
struct DeformCache {
    std::size_t count = 0;
    std::size_t stride = 0;
    std::vector<T> scratch;  // count x stride
};

/// Time-conditioned deformation field: offsets
/// (dx, dr, ds) = MLP(encode(sg(position)), encode(t)).
template <typename T>
struct DeformationField {
    PositionalEncoding encoding;
    Mlp<T> mlp;

    static constexpr int kOutputDim = 10;  // dx(3) + dr(4) + ds(3)

    void init(const DeformationConfig& cfg, std::uint64_t seed) {
        encoding.levels_position = cfg.levels_position;
        encoding.levels_time = cfg.levels_time;
        std::vector<int> dims;
        dims.push_back(encoding.input_dim());
        for (int i = 0; i < cfg.hidden_layers; ++i) dims.push_back(cfg.width);
        dims.push_back(kOutputDim);
        mlp.init(dims, seed);
    }

    void build_input(const Vec3<T>& pos, T t, T* out) const {
        const T p[3] = {pos.x, pos.y, pos.z};
        encode_into(p, 3, encoding.levels_position, out);
        encode_into(&t, 1, encoding.levels_time, out + encoding.position_dim());
    }

    DeformOffsets<T> deform(const GaussianCloud<T>& cloud, T t) const {
        DeformCache<T> cache;
        return deform_cached(cloud, t, cache);
    }

    DeformOffsets<T> deform_cached(const GaussianCloud<T>& cloud, T t, DeformCache<T>& cache) const {
        const std::size_t n = cloud.size();
        DeformOffsets<T> out;
        out.resize_zero(n);
        cache.count = n;
        cache.stride = mlp.scratch_size();
        cache.scratch.resize(n * cache.stride);
        parallel_for(n, [&](std::size_t i) {
            std::vector<T> input(encoding.input_dim());
            build_input(cloud.positions[i], t, input.data());
            T y[kOutputDim];
            mlp.forward(input.data(), cache.scratch.data() + i * cache.stride, y);
            out.dx[i] = {y[0], y[1], y[2]};
            out.dr[i] = {y[3], y[4], y[5], y[6]};
            out.ds[i] = {y[7], y[8], y[9]};
        });
        return out;
    }

    /// Accumulates MLP parameter gradients from per-Gaussian offset gradients.
    /// Reduction over fixed-size chunks in chunk order keeps the result
    /// independent of the worker count.
    void backward(const DeformCache<T>& cache, const DeformOffsets<T>& grad_offsets,
                  std::vector<T>& grad_params) const {
        if (grad_params.size() != mlp.param_count())
            throw std::invalid_argument("deformation backward: gradient buffer size mismatch");
        const std::size_t n = cache.count;
        constexpr std::size_t kChunk = 512;
        const std::size_t chunks = chunk_count(n, kChunk);
        std::vector<std::vector<T>> partials(chunks);
        parallel_chunks(n, kChunk, [&](std::size_t c, std::size_t lo, std::size_t hi) {
            auto& part = partials[c];
            part.assign(mlp.param_count(), T(0));
            for (std::size_t i = lo; i < hi; ++i) {
                T g[kOutputDim] = {grad_offsets.dx[i].x,  grad_offsets.dx[i].y,  grad_offsets.dx[i].z,
                                   grad_offsets.dr[i].w,  grad_offsets.dr[i].x,  grad_offsets.dr[i].y,
                                   grad_offsets.dr[i].z,  grad_offsets.ds[i].x,  grad_offsets.ds[i].y,
                                   grad_offsets.ds[i].z};
                mlp.backward(cache.scratch.data() + i * cache.stride, g, part.data());
            }
        });
        for (const auto& part : partials)
            for (std::size_t k = 0; k < part.size(); ++k) grad_params[k] += part[k];
    }

    template <typename U>
    DeformationField<U> cast() const {
        DeformationField<U> out;
        out.encoding = encoding;
        out.mlp = mlp.template cast<U>();
        return out;
    }
};

/// Gaussians ready for rasterization at one time: position x + dx, raw
/// rotation r + dr normalized downstream, scale exp(scale_raw + ds), opacity
/// and color activated unchanged.
template <typename T>
struct DeformedGaussians {
    std::vector<Vec3<T>> positions;
    std::vector<Quaternion<T>> rotations_raw;  // summed raw quaternion, pre-normalization
    std::vector<Vec3<T>> scales;               // activated
    std::vector<T> opacities;                  // activated
    std::vector<Vec3<T>> colors;               // activated

    std::size_t size() const { return positions.size(); }
};

template <typename T>
DeformedGaussians<T> apply_offsets(const GaussianCloud<T>& cloud, const DeformOffsets<T>& off) {
    const std::size_t n = cloud.size();
    DeformedGaussians<T> out;
    out.positions.resize(n);
    out.rotations_raw.resize(n);
    out.scales.resize(n);
    out.opacities.resize(n);
    out.colors.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        out.positions[i] = cloud.positions[i] + off.dx[i];
        out.rotations_raw[i] = {cloud.rotations_raw[i].w + off.dr[i].w,
                                cloud.rotations_raw[i].x + off.dr[i].x,
                                cloud.rotations_raw[i].y + off.dr[i].y,
                                cloud.rotations_raw[i].z + off.dr[i].z};
        out.scales[i] = {std::exp(cloud.scales_raw[i].x + off.ds[i].x),
                         std::exp(cloud.scales_raw[i].y + off.ds[i].y),
                         std::exp(cloud.scales_raw[i].z + off.ds[i].z)};
        out.opacities[i] = cloud.activated_opacity(i);
        out.colors[i] = cloud.activated_color(i);
    }
    return out;
}

template <typename T>
DeformedGaussians<T> deformed_gaussians(const GaussianCloud<T>& cloud,
                                        const DeformationField<T>& field, T t) {
    return apply_offsets(cloud, field.deform(cloud, t));
}

}  // namespace splatedit
