#include "focalfuse/image.hpp"

#include <zlib.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace focalfuse {

double linear_to_srgb(double v) {
    v = std::clamp(v, 0.0, 1.0);
    return v <= 0.0031308 ? 12.92 * v : 1.055 * std::pow(v, 1.0 / 2.4) - 0.055;
}

double srgb_to_linear(double v) {
    v = std::clamp(v, 0.0, 1.0);
    return v <= 0.04045 ? v / 12.92 : std::pow((v + 0.055) / 1.055, 2.4);
}

namespace {

void append_u32(std::vector<uint8_t>& out, uint32_t v) {
    out.push_back(uint8_t(v >> 24));
    out.push_back(uint8_t(v >> 16));
    out.push_back(uint8_t(v >> 8));
    out.push_back(uint8_t(v));
}

void append_chunk(std::vector<uint8_t>& out, const char type[4], const std::vector<uint8_t>& payload) {
    append_u32(out, uint32_t(payload.size()));
    size_t crc_start = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), payload.begin(), payload.end());
    uint32_t crc = crc32(0L, out.data() + crc_start, uInt(out.size() - crc_start));
    append_u32(out, crc);
}

std::vector<uint8_t> zlib_compress(const std::vector<uint8_t>& raw) {
    uLongf bound = compressBound(uLong(raw.size()));
    std::vector<uint8_t> buf(bound);
    if (compress2(buf.data(), &bound, raw.data(), uLong(raw.size()), 6) != Z_OK)
        throw std::runtime_error("png: zlib compression failed");
    buf.resize(bound);
    return buf;
}

void write_png_impl(const std::string& path, const Image& img, int bit_depth, bool srgb) {
    if (img.channels != 1 && img.channels != 3)
        throw std::invalid_argument("png: channel count must be 1 or 3");
    if (img.width <= 0 || img.height <= 0) throw std::invalid_argument("png: empty image");

    const int bytes_per_sample = bit_depth / 8;
    std::vector<uint8_t> raw;
    raw.reserve(size_t(img.height) * (1 + size_t(img.width) * img.channels * bytes_per_sample));
    for (int y = 0; y < img.height; ++y) {
        raw.push_back(0);  // filter: none
        for (int x = 0; x < img.width; ++x) {
            for (int c = 0; c < img.channels; ++c) {
                double v = img.at(x, y, c);
                v = srgb ? linear_to_srgb(v) : std::clamp(v, 0.0, 1.0);
                if (bit_depth == 8) {
                    raw.push_back(uint8_t(std::lround(v * 255.0)));
                } else {
                    auto q = uint16_t(std::lround(v * 65535.0));
                    raw.push_back(uint8_t(q >> 8));
                    raw.push_back(uint8_t(q & 0xff));
                }
            }
        }
    }

    std::vector<uint8_t> ihdr;
    append_u32(ihdr, uint32_t(img.width));
    append_u32(ihdr, uint32_t(img.height));
    ihdr.push_back(uint8_t(bit_depth));
    ihdr.push_back(img.channels == 3 ? 2 : 0);  // truecolor or grayscale
    ihdr.push_back(0);
    ihdr.push_back(0);
    ihdr.push_back(0);

    std::vector<uint8_t> out;
    const uint8_t sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    out.insert(out.end(), sig, sig + 8);
    append_chunk(out, "IHDR", ihdr);
    append_chunk(out, "IDAT", zlib_compress(raw));
    append_chunk(out, "IEND", {});

    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("png: cannot open " + path);
    f.write(reinterpret_cast<const char*>(out.data()), std::streamsize(out.size()));
    if (!f) throw std::runtime_error("png: write failed for " + path);
}

}  // namespace

void write_png(const std::string& path, const Image& img, bool srgb) {
    write_png_impl(path, img, 8, srgb);
}

void write_png16(const std::string& path, const Image& img) { write_png_impl(path, img, 16, false); }

void write_ppm(const std::string& path, const Image& img) {
    if (img.channels != 3) throw std::invalid_argument("ppm: need 3 channels");
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("ppm: cannot open " + path);
    f << "P6\n" << img.width << " " << img.height << "\n255\n";
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < 3; ++c)
                f.put(char(std::lround(linear_to_srgb(img.at(x, y, c)) * 255.0)));
    if (!f) throw std::runtime_error("ppm: write failed for " + path);
}

namespace {

void skip_ppm_whitespace(std::istream& in) {
    for (;;) {
        int c = in.peek();
        if (c == '#') {
            std::string line;
            std::getline(in, line);
        } else if (std::isspace(c)) {
            in.get();
        } else {
            break;
        }
    }
}

}  // namespace

Image read_ppm(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("ppm: cannot open " + path);
    std::string magic;
    f >> magic;
    if (magic != "P6") throw std::runtime_error("ppm: unsupported magic in " + path);
    int w = 0, h = 0, maxv = 0;
    skip_ppm_whitespace(f);
    f >> w;
    skip_ppm_whitespace(f);
    f >> h;
    skip_ppm_whitespace(f);
    f >> maxv;
    f.get();  // single whitespace before raster
    if (w <= 0 || h <= 0 || maxv != 255) throw std::runtime_error("ppm: bad header in " + path);
    Image img(w, h, 3);
    std::vector<uint8_t> row(size_t(w) * 3);
    for (int y = 0; y < h; ++y) {
        f.read(reinterpret_cast<char*>(row.data()), std::streamsize(row.size()));
        if (!f) throw std::runtime_error("ppm: truncated raster in " + path);
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c) img.at(x, y, c) = srgb_to_linear(row[x * 3 + c] / 255.0);
    }
    return img;
}

Image read_pfm(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("pfm: cannot open " + path);
    std::string magic;
    f >> magic;
    bool color;
    if (magic == "PF") color = true;
    else if (magic == "Pf") color = false;
    else throw std::runtime_error("pfm: unsupported magic in " + path);
    int w = 0, h = 0;
    double scale = 0.0;
    f >> w >> h >> scale;
    f.get();
    if (w <= 0 || h <= 0 || scale == 0.0) throw std::runtime_error("pfm: bad header in " + path);
    const bool little_endian = scale < 0.0;
    const int nc = color ? 3 : 1;
    Image img(w, h, nc);
    std::vector<float> row(size_t(w) * nc);
    // PFM stores rows bottom-up.
    for (int y = h - 1; y >= 0; --y) {
        f.read(reinterpret_cast<char*>(row.data()), std::streamsize(row.size() * sizeof(float)));
        if (!f) throw std::runtime_error("pfm: truncated raster in " + path);
        for (size_t i = 0; i < row.size(); ++i) {
            float v = row[i];
            if (!little_endian) {
                uint32_t bits;
                std::memcpy(&bits, &v, 4);
                bits = __builtin_bswap32(bits);
                std::memcpy(&v, &bits, 4);
            }
            img.data[(size_t(y) * w) * nc + i] = double(v);
        }
    }
    return img;
}

}  // namespace focalfuse
