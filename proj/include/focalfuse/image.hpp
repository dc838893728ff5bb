#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace focalfuse {

/// Row-major interleaved float image; values live in linear space and the
/// writers clamp/encode as needed.
struct Image {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<double> data;

    Image() = default;
    Image(int w, int h, int c) : width(w), height(h), channels(c), data(size_t(w) * h * c, 0.0) {}

    double& at(int x, int y, int c) { return data[(size_t(y) * width + x) * channels + c]; }
    double at(int x, int y, int c) const { return data[(size_t(y) * width + x) * channels + c]; }

    size_t pixel_count() const { return size_t(width) * height; }
    bool same_shape(const Image& o) const {
        return width == o.width && height == o.height && channels == o.channels;
    }
};

double linear_to_srgb(double v);
double srgb_to_linear(double v);

/// 8-bit PNG. channels must be 1 or 3. srgb selects the transfer function
/// applied before quantization.
void write_png(const std::string& path, const Image& img, bool srgb);

/// 16-bit PNG, linear encoding. Used for normal-map dumps.
void write_png16(const std::string& path, const Image& img);

/// Binary PPM (P6), 8-bit, sRGB-encoded.
void write_ppm(const std::string& path, const Image& img);

Image read_ppm(const std::string& path);

/// Portable float map (PF/Pf), the HDR input format for environment maps.
Image read_pfm(const std::string& path);

}  // namespace focalfuse
