#include <png.h>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "splatedit/image.hpp"
#include "splatedit/vecmath.hpp"

namespace splatedit {

namespace {

png_uint_32 format_for_channels(int channels) {
    switch (channels) {
        case 1: return PNG_FORMAT_GRAY;
        case 3: return PNG_FORMAT_RGB;
        case 4: return PNG_FORMAT_RGBA;
        default: throw std::invalid_argument("png: unsupported channel count " + std::to_string(channels));
    }
}

}  // namespace

template <typename T>
Image<T> load_png(const std::string& path) {
    png_image im{};
    im.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&im, path.c_str()))
        throw std::runtime_error("png: cannot read " + path + ": " + im.message);

    int channels = 3;
    if (im.format & PNG_FORMAT_FLAG_ALPHA)
        channels = 4;
    else if (!(im.format & PNG_FORMAT_FLAG_COLOR))
        channels = 1;
    im.format = format_for_channels(channels);

    std::vector<std::uint8_t> bytes(PNG_IMAGE_SIZE(im));
    if (!png_image_finish_read(&im, nullptr, bytes.data(), 0, nullptr)) {
        png_image_free(&im);
        throw std::runtime_error("png: decode failed for " + path + ": " + im.message);
    }

    Image<T> out(int(im.height), int(im.width), channels);
    for (std::size_t i = 0; i < bytes.size(); ++i) out.data[i] = T(bytes[i]) / T(255);
    return out;
}

template <typename T>
void save_png(const Image<T>& img, const std::string& path) {
    png_image im{};
    im.version = PNG_IMAGE_VERSION;
    im.width = png_uint_32(img.width);
    im.height = png_uint_32(img.height);
    im.format = format_for_channels(img.channels);

    std::vector<std::uint8_t> bytes(img.data.size());
    for (std::size_t i = 0; i < img.data.size(); ++i) {
        // Round half to even; nearbyint honours the default rounding mode.
        const double v = std::nearbyint(double(clamp01(img.data[i])) * 255.0);
        bytes[i] = std::uint8_t(v);
    }
    if (!png_image_write_to_file(&im, path.c_str(), 0, bytes.data(), 0, nullptr))
        throw std::runtime_error("png: cannot write " + path + ": " + im.message);
}

template Image<float> load_png<float>(const std::string&);
template Image<double> load_png<double>(const std::string&);
template void save_png<float>(const Image<float>&, const std::string&);
template void save_png<double>(const Image<double>&, const std::string&);

}  // namespace splatedit
