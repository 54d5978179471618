#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "asbu/segeval.hpp"
#include "asbu/tensor.hpp"

namespace asbu {

/// Interleaved 8-bit image, 1 (gray) or 3 (RGB) channels.
struct ImageU8 {
    int h = 0;
    int w = 0;
    int channels = 0;
    std::vector<std::uint8_t> pixels;
};

ImageU8 read_png(const std::string& path);
void write_png_gray(const std::string& path, const std::vector<std::uint8_t>& pixels, int h,
                    int w);
void write_png_rgb(const std::string& path, const std::vector<std::uint8_t>& pixels, int h,
                   int w);

/// (1,3,H,W) tensor in [0,1]; gray inputs are replicated across channels.
Tensor image_to_tensor(const ImageU8& img);
ImageU8 tensor_to_image(const Tensor& t, int batch_index = 0);

/// 0 stays background; any value >= 128 is foreground.
BinaryMask mask_from_image(const ImageU8& img);
std::vector<std::uint8_t> mask_to_gray(const BinaryMask& mask);  // 0 / 255

/// Probability plane scaled to 0..255.
std::vector<std::uint8_t> heatmap_gray(const Tensor& mask, int batch_index = 0);

}  // namespace asbu
