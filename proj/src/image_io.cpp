#include "asbu/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>

#include <png.h>

namespace asbu {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

ImageU8 read_png(const std::string& path) {
    FilePtr f(std::fopen(path.c_str(), "rb"));
    if (!f) throw FormatError("cannot open image: " + path);

    png_byte header[8];
    if (std::fread(header, 1, 8, f.get()) != 8 || png_sig_cmp(header, 0, 8) != 0) {
        throw FormatError("not a PNG file: " + path);
    }
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw FormatError("libpng init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw FormatError("failed to decode PNG: " + path);
    }
    png_init_io(png, f.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);

    png_uint_32 w = png_get_image_width(png, info);
    png_uint_32 h = png_get_image_height(png, info);
    int color = png_get_color_type(png, info);
    int depth = png_get_bit_depth(png, info);

    if (depth == 16) png_set_strip_16(png);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    png_read_update_info(png, info);

    int channels = png_get_channels(png, info);
    if (channels != 1 && channels != 3) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw FormatError("unsupported PNG channel count: " + std::to_string(channels));
    }

    ImageU8 img;
    img.h = static_cast<int>(h);
    img.w = static_cast<int>(w);
    img.channels = channels;
    img.pixels.resize(static_cast<std::size_t>(h) * w * channels);
    std::vector<png_bytep> rows(h);
    for (png_uint_32 y = 0; y < h; ++y) {
        rows[y] = img.pixels.data() + static_cast<std::size_t>(y) * w * channels;
    }
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return img;
}

namespace {

void write_png_impl(const std::string& path, const std::vector<std::uint8_t>& pixels, int h,
                    int w, int channels) {
    if (h < 1 || w < 1 ||
        pixels.size() != static_cast<std::size_t>(h) * w * static_cast<std::size_t>(channels)) {
        throw ShapeError("write_png: pixel buffer does not match dims");
    }
    FilePtr f(std::fopen(path.c_str(), "wb"));
    if (!f) throw FormatError("cannot open for writing: " + path);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        throw FormatError("libpng init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw FormatError("failed to encode PNG: " + path);
    }
    png_init_io(png, f.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 8,
                 channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<png_bytep> rows(static_cast<std::size_t>(h));
    for (int y = 0; y < h; ++y) {
        rows[static_cast<std::size_t>(y)] = const_cast<png_bytep>(
            pixels.data() + static_cast<std::size_t>(y) * w * channels);
    }
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

}  // namespace

void write_png_gray(const std::string& path, const std::vector<std::uint8_t>& pixels, int h,
                    int w) {
    write_png_impl(path, pixels, h, w, 1);
}

void write_png_rgb(const std::string& path, const std::vector<std::uint8_t>& pixels, int h,
                   int w) {
    write_png_impl(path, pixels, h, w, 3);
}

Tensor image_to_tensor(const ImageU8& img) {
    Tensor t(1, 3, img.h, img.w);
    for (int y = 0; y < img.h; ++y) {
        for (int x = 0; x < img.w; ++x) {
            for (int c = 0; c < 3; ++c) {
                int src = img.channels == 1 ? 0 : c;
                t.e(0, c, y, x) =
                    img.pixels[(static_cast<std::size_t>(y) * img.w + x) * img.channels + src] /
                    255.0;
            }
        }
    }
    return t;
}

ImageU8 tensor_to_image(const Tensor& t, int batch_index) {
    ImageU8 img;
    img.h = t.shape.h;
    img.w = t.shape.w;
    img.channels = 3;
    img.pixels.resize(static_cast<std::size_t>(img.h) * img.w * 3);
    for (int y = 0; y < img.h; ++y) {
        for (int x = 0; x < img.w; ++x) {
            for (int c = 0; c < 3; ++c) {
                double v = std::clamp(t.e(batch_index, std::min(c, t.shape.c - 1), y, x), 0.0,
                                      1.0);
                img.pixels[(static_cast<std::size_t>(y) * img.w + x) * 3 + c] =
                    static_cast<std::uint8_t>(std::lround(v * 255.0));
            }
        }
    }
    return img;
}

BinaryMask mask_from_image(const ImageU8& img) {
    BinaryMask m(img.h, img.w, 0);
    for (int y = 0; y < img.h; ++y) {
        for (int x = 0; x < img.w; ++x) {
            // first channel decides for RGB inputs
            std::uint8_t v =
                img.pixels[(static_cast<std::size_t>(y) * img.w + x) * img.channels];
            m.at(y, x) = v >= 128 ? 1 : 0;
        }
    }
    return m;
}

std::vector<std::uint8_t> mask_to_gray(const BinaryMask& mask) {
    std::vector<std::uint8_t> out(mask.bits.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = mask.bits[i] ? 255 : 0;
    return out;
}

std::vector<std::uint8_t> heatmap_gray(const Tensor& mask, int batch_index) {
    std::vector<std::uint8_t> out(static_cast<std::size_t>(mask.shape.h) * mask.shape.w);
    for (int y = 0; y < mask.shape.h; ++y) {
        for (int x = 0; x < mask.shape.w; ++x) {
            double v = std::clamp(mask.e(batch_index, 0, y, x), 0.0, 1.0);
            out[static_cast<std::size_t>(y) * mask.shape.w + x] =
                static_cast<std::uint8_t>(std::lround(v * 255.0));
        }
    }
    return out;
}

}  // namespace asbu
