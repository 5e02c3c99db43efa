#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace splatedit {

/// Row-major interleaved image, values in [0,1] by convention.
template <typename T>
struct Image {
    int height = 0;
    int width = 0;
    int channels = 0;
    std::vector<T> data;

    Image() = default;
    Image(int h, int w, int c, T fill = T(0))
        : height(h), width(w), channels(c), data(std::size_t(h) * w * c, fill) {}

    T& at(int y, int x, int c) { return data[(std::size_t(y) * width + x) * channels + c]; }
    T at(int y, int x, int c) const { return data[(std::size_t(y) * width + x) * channels + c]; }

    std::size_t size() const { return data.size(); }
    bool same_shape(const Image& o) const {
        return height == o.height && width == o.width && channels == o.channels;
    }

    template <typename U>
    Image<U> cast() const {
        Image<U> out(height, width, channels);
        for (std::size_t i = 0; i < data.size(); ++i) out.data[i] = U(data[i]);
        return out;
    }
};

template <typename T>
void require_same_shape(const Image<T>& a, const Image<T>& b, const std::string& what) {
    if (!a.same_shape(b))
        throw std::invalid_argument(what + ": image shape mismatch (" +
                                    std::to_string(a.height) + "x" + std::to_string(a.width) + "x" +
                                    std::to_string(a.channels) + " vs " + std::to_string(b.height) +
                                    "x" + std::to_string(b.width) + "x" + std::to_string(b.channels) + ")");
}

/// Single-channel 0/1 region mask.
struct Mask {
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> data;

    Mask() = default;
    Mask(int h, int w, std::uint8_t fill = 0) : height(h), width(w), data(std::size_t(h) * w, fill) {}

    std::uint8_t& at(int y, int x) { return data[std::size_t(y) * width + x]; }
    std::uint8_t at(int y, int x) const { return data[std::size_t(y) * width + x]; }

    static Mask rect(int h, int w, int y0, int x0, int rh, int rw) {
        Mask m(h, w, 0);
        for (int y = y0; y < y0 + rh; ++y)
            for (int x = x0; x < x0 + rw; ++x)
                if (y >= 0 && y < h && x >= 0 && x < w) m.at(y, x) = 1;
        return m;
    }
};

// 8-bit PNG I/O. Values are mapped to [0,1]; the float-to-byte conversion
// rounds half to even.
template <typename T>
Image<T> load_png(const std::string& path);
template <typename T>
void save_png(const Image<T>& img, const std::string& path);

}  // namespace splatedit
