#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "splatedit/vecmath.hpp"

namespace splatedit {

/// Frequency encoding: maps each input component v_i to
/// (sin(2^j pi v_i), cos(2^j pi v_i)) for j = 0..L-1, no identity passthrough.
/// Output length is 2*L per input component, sin/cos interleaved per octave.
template <typename T>
void encode_into(const T* v, int k, int levels, T* out) {
    if (levels < 1) throw std::invalid_argument("encode: frequency count must be >= 1");
    const T pi = T(3.14159265358979323846);
    int o = 0;
    for (int i = 0; i < k; ++i) {
        T freq = pi;
        for (int j = 0; j < levels; ++j) {
            out[o++] = std::sin(freq * v[i]);
            out[o++] = std::cos(freq * v[i]);
            freq *= T(2);
        }
    }
}

template <typename T>
std::vector<T> encode(const std::vector<T>& v, int levels) {
    std::vector<T> out(v.size() * 2 * std::size_t(levels));
    encode_into(v.data(), int(v.size()), levels, out.data());
    return out;
}

struct PositionalEncoding {
    int levels_position = 10;
    int levels_time = 6;

    int position_dim() const { return 3 * 2 * levels_position; }
    int time_dim() const { return 2 * levels_time; }
    int input_dim() const { return position_dim() + time_dim(); }
};

}  // namespace splatedit
