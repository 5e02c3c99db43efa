#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "splatedit/image.hpp"
#include "splatedit/rng.hpp"

namespace splatedit {
namespace diffusion {

struct DenoiserConfig {
    int width = 32;        // base channel count
    int blocks = 4;        // residual conv blocks
    int time_embed_dim = 64;
    int text_embed_dim = 32;
    int vocab_size = 16;   // index 0 is the null text condition, index 1 is the rare token
    int image_channels = 3;
};

/// Reserved text-condition indices.
inline constexpr int kNullTextIndex = 0;
inline constexpr int kRareTokenIndex = 1;

/// Conditional convolutional noise predictor. The noisy image and the
/// conditioning image are concatenated channelwise; a sinusoidal timestep
/// embedding and a pooled text-table embedding modulate each residual block
/// with a per-channel scale and shift. The output projection starts at zero,
/// so an untrained net predicts zero noise.
///
/// Layout per block: h <- h + conv3x3( relu(h) * (1 + scale_k) + shift_k ).
/// All parameters live in one flat buffer (conv kernels channel-last,
/// [ky][kx][ic][oc]) so the optimizer and checkpoints can treat the network
/// as a single group.
template <typename T>
struct DenoiserNet {
    DenoiserConfig cfg;
    std::vector<T> params;

    // Flat layout offsets.
    std::size_t off_conv_in = 0;
    std::vector<std::size_t> off_blocks;
    std::size_t off_conv_out = 0;
    std::size_t off_cond1 = 0, off_cond2 = 0;
    std::size_t off_table = 0;

    static std::size_t conv_size(int ic, int oc) { return std::size_t(9) * ic * oc + oc; }

    void init(const DenoiserConfig& c, std::uint64_t seed) {
        cfg = c;
        const int w = cfg.width;
        const int cond_in = cfg.time_embed_dim + cfg.text_embed_dim;
        const int cond_hidden = cfg.time_embed_dim;
        const int cond_out = cfg.blocks * 2 * w;

        std::size_t total = 0;
        off_conv_in = total;
        total += conv_size(2 * cfg.image_channels, w);
        off_blocks.clear();
        for (int b = 0; b < cfg.blocks; ++b) {
            off_blocks.push_back(total);
            total += conv_size(w, w);
        }
        off_conv_out = total;
        total += conv_size(w, cfg.image_channels);
        off_cond1 = total;
        total += std::size_t(cond_hidden) * cond_in + cond_hidden;
        off_cond2 = total;
        total += std::size_t(cond_out) * cond_hidden + cond_out;
        off_table = total;
        total += std::size_t(cfg.vocab_size) * cfg.text_embed_dim;

        params.assign(total, T(0));
        Rng rng(seed);
        auto he_conv = [&](std::size_t off, int ic, int oc) {
            const double stddev = std::sqrt(2.0 / (9.0 * ic));
            for (std::size_t i = 0; i < std::size_t(9) * ic * oc; ++i)
                params[off + i] = T(rng.normal() * stddev);
        };
        he_conv(off_conv_in, 2 * cfg.image_channels, w);
        for (int b = 0; b < cfg.blocks; ++b) he_conv(off_blocks[b], w, w);
        // conv_out stays zero (zero-noise prediction at init).
        {
            const double stddev = std::sqrt(2.0 / cond_in);
            for (std::size_t i = 0; i < std::size_t(cond_hidden) * cond_in; ++i)
                params[off_cond1 + i] = T(rng.normal() * stddev);
        }
        // cond2 stays zero: FiLM starts as the identity.
        for (std::size_t i = 0; i < std::size_t(cfg.vocab_size) * cfg.text_embed_dim; ++i)
            params[off_table + i] = T(rng.normal() * 0.02);
    }

    std::size_t param_count() const { return params.size(); }

    void time_embedding(int t, T* out) const {
        const int half = cfg.time_embed_dim / 2;
        for (int i = 0; i < half; ++i) {
            const double freq = std::exp(-std::log(10000.0) * double(i) / double(half));
            out[2 * i] = T(std::sin(double(t) * freq));
            out[2 * i + 1] = T(std::cos(double(t) * freq));
        }
    }

    /// Mean-pooled table rows for an index sequence. An empty sequence is the
    /// null condition (index 0).
    void text_embedding(const std::vector<int>& tokens, T* out) const {
        std::vector<int> idx = tokens.empty() ? std::vector<int>{kNullTextIndex} : tokens;
        for (int d = 0; d < cfg.text_embed_dim; ++d) out[d] = T(0);
        for (int token : idx) {
            if (token < 0 || token >= cfg.vocab_size)
                throw std::invalid_argument("denoiser: text token out of vocabulary: " +
                                            std::to_string(token));
            const T* row = params.data() + off_table + std::size_t(token) * cfg.text_embed_dim;
            for (int d = 0; d < cfg.text_embed_dim; ++d) out[d] += row[d];
        }
        const T inv = T(1) / T(idx.size());
        for (int d = 0; d < cfg.text_embed_dim; ++d) out[d] *= inv;
    }
};

namespace detail {

/// conv 3x3, zero padding, channel-last activations [y][x][c], kernel
/// [ky][kx][ic][oc] followed by bias [oc].
template <typename T>
void conv3x3_forward(const T* in, int h, int w, int ic, const T* kernel, int oc, T* out) {
    const T* bias = kernel + std::size_t(9) * ic * oc;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            T* acc = out + (std::size_t(y) * w + x) * oc;
            for (int o = 0; o < oc; ++o) acc[o] = bias[o];
            for (int ky = 0; ky < 3; ++ky) {
                const int yy = y + ky - 1;
                if (yy < 0 || yy >= h) continue;
                for (int kx = 0; kx < 3; ++kx) {
                    const int xx = x + kx - 1;
                    if (xx < 0 || xx >= w) continue;
                    const T* src = in + (std::size_t(yy) * w + xx) * ic;
                    const T* kbase = kernel + std::size_t(ky * 3 + kx) * ic * oc;
                    for (int i = 0; i < ic; ++i) {
                        const T v = src[i];
                        const T* krow = kbase + std::size_t(i) * oc;
                        for (int o = 0; o < oc; ++o) acc[o] += v * krow[o];
                    }
                }
            }
        }
    }
}

/// Backward of conv3x3_forward. Accumulates kernel/bias grads into
/// grad_kernel and input grads into grad_in (pass nullptr to skip).
template <typename T>
void conv3x3_backward(const T* in, int h, int w, int ic, const T* kernel, int oc,
                      const T* grad_out, T* grad_kernel, T* grad_in) {
    T* grad_bias = grad_kernel + std::size_t(9) * ic * oc;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const T* go = grad_out + (std::size_t(y) * w + x) * oc;
            for (int o = 0; o < oc; ++o) grad_bias[o] += go[o];
            for (int ky = 0; ky < 3; ++ky) {
                const int yy = y + ky - 1;
                if (yy < 0 || yy >= h) continue;
                for (int kx = 0; kx < 3; ++kx) {
                    const int xx = x + kx - 1;
                    if (xx < 0 || xx >= w) continue;
                    const T* src = in + (std::size_t(yy) * w + xx) * ic;
                    const std::size_t kbase = std::size_t(ky * 3 + kx) * ic * oc;
                    T* gk = grad_kernel + kbase;
                    for (int i = 0; i < ic; ++i) {
                        const T v = src[i];
                        T* gkrow = gk + std::size_t(i) * oc;
                        for (int o = 0; o < oc; ++o) gkrow[o] += v * go[o];
                    }
                    if (grad_in) {
                        T* gi = grad_in + (std::size_t(yy) * w + xx) * ic;
                        const T* kb = kernel + kbase;
                        for (int i = 0; i < ic; ++i) {
                            const T* krow = kb + std::size_t(i) * oc;
                            T acc = T(0);
                            for (int o = 0; o < oc; ++o) acc += krow[o] * go[o];
                            gi[i] += acc;
                        }
                    }
                }
            }
        }
    }
}

}  // namespace detail

/// Forward activations kept for the backward pass.
template <typename T>
struct DenoiserTape {
    int h = 0, w = 0;
    std::vector<int> tokens;
    int t = 0;
    std::vector<T> input;       // concat(z, I), channel-last
    std::vector<T> h0;          // conv_in output
    std::vector<std::vector<T>> block_in;    // h before each block
    std::vector<std::vector<T>> block_mod;   // relu(h)*(1+scale)+shift per block
    std::vector<T> final_relu;  // relu(h) before conv_out
    std::vector<T> t_emb, x_emb, cond_hidden_pre, cond_hidden, film;  // cond path
};

/// eps_theta(z_t, t, I, C_T). The null image condition is an all-zeros image;
/// the null text condition is token index 0.
template <typename T>
Image<T> denoiser_forward(const DenoiserNet<T>& net, const Image<T>& z, int t,
                          const Image<T>& cond_image, const std::vector<int>& tokens,
                          DenoiserTape<T>* tape = nullptr) {
    require_same_shape(z, cond_image, "denoiser");
    const int h = z.height, w = z.width, chans = net.cfg.image_channels;
    if (z.channels != chans) throw std::invalid_argument("denoiser: channel count mismatch");
    const int width = net.cfg.width;
    const std::size_t plane = std::size_t(h) * w;

    // Conditioning vector -> per-block FiLM (scale, shift).
    const int te = net.cfg.time_embed_dim, xe = net.cfg.text_embed_dim;
    std::vector<T> t_emb(te), x_emb(xe);
    net.time_embedding(t, t_emb.data());
    net.text_embedding(tokens, x_emb.data());
    const int cond_in = te + xe;
    const int cond_hidden_dim = te;
    const int cond_out = net.cfg.blocks * 2 * width;
    std::vector<T> cond_input(cond_in);
    for (int i = 0; i < te; ++i) cond_input[i] = t_emb[i];
    for (int i = 0; i < xe; ++i) cond_input[te + i] = x_emb[i];

    std::vector<T> hidden_pre(cond_hidden_dim), hidden(cond_hidden_dim), film(cond_out);
    {
        const T* w1 = net.params.data() + net.off_cond1;
        const T* b1 = w1 + std::size_t(cond_hidden_dim) * cond_in;
        for (int o = 0; o < cond_hidden_dim; ++o) {
            T acc = b1[o];
            const T* row = w1 + std::size_t(o) * cond_in;
            for (int i = 0; i < cond_in; ++i) acc += row[i] * cond_input[i];
            hidden_pre[o] = acc;
            hidden[o] = acc > T(0) ? acc : T(0);
        }
        const T* w2 = net.params.data() + net.off_cond2;
        const T* b2 = w2 + std::size_t(cond_out) * cond_hidden_dim;
        for (int o = 0; o < cond_out; ++o) {
            T acc = b2[o];
            const T* row = w2 + std::size_t(o) * cond_hidden_dim;
            for (int i = 0; i < cond_hidden_dim; ++i) acc += row[i] * hidden[i];
            film[o] = acc;
        }
    }

    // Stack input: z and the conditioning image interleaved channel-last.
    std::vector<T> input(plane * 2 * chans);
    for (std::size_t p = 0; p < plane; ++p) {
        for (int c = 0; c < chans; ++c) {
            input[p * 2 * chans + c] = z.data[p * chans + c];
            input[p * 2 * chans + chans + c] = cond_image.data[p * chans + c];
        }
    }

    std::vector<T> cur(plane * width);
    detail::conv3x3_forward(input.data(), h, w, 2 * chans, net.params.data() + net.off_conv_in,
                            width, cur.data());

    if (tape) {
        tape->h = h;
        tape->w = w;
        tape->t = t;
        tape->tokens = tokens;
        tape->input = input;
        tape->h0 = cur;
        tape->block_in.clear();
        tape->block_mod.clear();
        tape->t_emb = t_emb;
        tape->x_emb = x_emb;
        tape->cond_hidden_pre = hidden_pre;
        tape->cond_hidden = hidden;
        tape->film = film;
    }

    std::vector<T> mod(plane * width), conv_out_buf(plane * width);
    for (int b = 0; b < net.cfg.blocks; ++b) {
        const T* scale = film.data() + std::size_t(b) * 2 * width;
        const T* shift = scale + width;
        if (tape) tape->block_in.push_back(cur);
        for (std::size_t p = 0; p < plane; ++p) {
            T* m = mod.data() + p * width;
            const T* src = cur.data() + p * width;
            for (int c = 0; c < width; ++c) {
                const T r = src[c] > T(0) ? src[c] : T(0);
                m[c] = r * (T(1) + scale[c]) + shift[c];
            }
        }
        if (tape) tape->block_mod.push_back(mod);
        detail::conv3x3_forward(mod.data(), h, w, width, net.params.data() + net.off_blocks[b],
                                width, conv_out_buf.data());
        for (std::size_t i = 0; i < cur.size(); ++i) cur[i] += conv_out_buf[i];
    }

    std::vector<T> final_relu(plane * width);
    for (std::size_t i = 0; i < cur.size(); ++i) final_relu[i] = cur[i] > T(0) ? cur[i] : T(0);
    if (tape) {
        tape->block_in.push_back(cur);  // input of conv_out (pre-relu), blocks+1 entries
        tape->final_relu = final_relu;
    }

    Image<T> out(h, w, chans);
    std::vector<T> out_cl(plane * chans);
    detail::conv3x3_forward(final_relu.data(), h, w, width, net.params.data() + net.off_conv_out,
                            chans, out_cl.data());
    out.data = std::move(out_cl);
    return out;
}

/// Accumulates parameter gradients for one forward pass given dL/d(output).
template <typename T>
void denoiser_backward(const DenoiserNet<T>& net, const DenoiserTape<T>& tape,
                       const Image<T>& grad_out, std::vector<T>& grad_params) {
    if (grad_params.size() != net.param_count())
        throw std::invalid_argument("denoiser backward: gradient buffer size mismatch");
    const int h = tape.h, w = tape.w, chans = net.cfg.image_channels, width = net.cfg.width;
    const std::size_t plane = std::size_t(h) * w;

    // conv_out backward.
    std::vector<T> d_final_relu(plane * width, T(0));
    detail::conv3x3_backward(tape.final_relu.data(), h, w, width,
                             net.params.data() + net.off_conv_out, chans, grad_out.data.data(),
                             grad_params.data() + net.off_conv_out, d_final_relu.data());

    // relu before conv_out; input is block_in[blocks].
    std::vector<T> d_cur(plane * width);
    {
        const auto& pre = tape.block_in[net.cfg.blocks];
        for (std::size_t i = 0; i < d_cur.size(); ++i)
            d_cur[i] = pre[i] > T(0) ? d_final_relu[i] : T(0);
    }

    const int cond_out = net.cfg.blocks * 2 * width;
    std::vector<T> d_film(cond_out, T(0));

    std::vector<T> d_mod(plane * width);
    for (int b = net.cfg.blocks - 1; b >= 0; --b) {
        // h_{b+1} = h_b + conv(mod_b): residual passes d_cur through, conv
        // contributes to mod and the kernel.
        std::fill(d_mod.begin(), d_mod.end(), T(0));
        detail::conv3x3_backward(tape.block_mod[b].data(), h, w, width,
                                 net.params.data() + net.off_blocks[b], width, d_cur.data(),
                                 grad_params.data() + net.off_blocks[b], d_mod.data());
        const T* scale = tape.film.data() + std::size_t(b) * 2 * width;
        T* d_scale = d_film.data() + std::size_t(b) * 2 * width;
        T* d_shift = d_scale + width;
        const auto& pre = tape.block_in[b];
        for (std::size_t p = 0; p < plane; ++p) {
            const T* src = pre.data() + p * width;
            const T* dm = d_mod.data() + p * width;
            T* dc = d_cur.data() + p * width;
            for (int c = 0; c < width; ++c) {
                const T r = src[c] > T(0) ? src[c] : T(0);
                d_scale[c] += dm[c] * r;
                d_shift[c] += dm[c];
                // Through mod = relu(h)(1+scale)+shift and the residual.
                if (src[c] > T(0)) dc[c] += dm[c] * (T(1) + scale[c]);
            }
        }
    }

    // conv_in backward (no input grads needed).
    detail::conv3x3_backward(tape.input.data(), h, w, 2 * chans,
                             net.params.data() + net.off_conv_in, width, d_cur.data(),
                             grad_params.data() + net.off_conv_in, static_cast<T*>(nullptr));

    // Conditioning path.
    const int te = net.cfg.time_embed_dim, xe = net.cfg.text_embed_dim;
    const int cond_in = te + xe;
    const int cond_hidden_dim = te;
    {
        const T* w2 = net.params.data() + net.off_cond2;
        T* gw2 = grad_params.data() + net.off_cond2;
        T* gb2 = gw2 + std::size_t(cond_out) * cond_hidden_dim;
        std::vector<T> d_hidden(cond_hidden_dim, T(0));
        for (int o = 0; o < cond_out; ++o) {
            const T go = d_film[o];
            gb2[o] += go;
            const T* row = w2 + std::size_t(o) * cond_hidden_dim;
            T* grow = gw2 + std::size_t(o) * cond_hidden_dim;
            for (int i = 0; i < cond_hidden_dim; ++i) {
                grow[i] += go * tape.cond_hidden[i];
                d_hidden[i] += go * row[i];
            }
        }
        for (int i = 0; i < cond_hidden_dim; ++i)
            if (!(tape.cond_hidden_pre[i] > T(0))) d_hidden[i] = T(0);

        T* gw1 = grad_params.data() + net.off_cond1;
        T* gb1 = gw1 + std::size_t(cond_hidden_dim) * cond_in;
        std::vector<T> d_cond_input(cond_in, T(0));
        std::vector<T> cond_input(cond_in);
        for (int i = 0; i < te; ++i) cond_input[i] = tape.t_emb[i];
        for (int i = 0; i < xe; ++i) cond_input[te + i] = tape.x_emb[i];
        const T* w1 = net.params.data() + net.off_cond1;
        for (int o = 0; o < cond_hidden_dim; ++o) {
            const T go = d_hidden[o];
            if (go == T(0)) continue;
            gb1[o] += go;
            const T* row = w1 + std::size_t(o) * cond_in;
            T* grow = gw1 + std::size_t(o) * cond_in;
            for (int i = 0; i < cond_in; ++i) {
                grow[i] += go * cond_input[i];
                d_cond_input[i] += go * row[i];
            }
        }
        // Text-table rows (time features are fixed functions of t).
        std::vector<int> idx = tape.tokens.empty() ? std::vector<int>{kNullTextIndex} : tape.tokens;
        const T inv = T(1) / T(idx.size());
        for (int token : idx) {
            T* grow = grad_params.data() + net.off_table + std::size_t(token) * xe;
            for (int d = 0; d < xe; ++d) grow[d] += inv * d_cond_input[te + d];
        }
    }
}

}  // namespace diffusion
}  // namespace splatedit
