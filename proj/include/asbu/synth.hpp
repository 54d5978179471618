#pragma once

#include <cstdint>

#include "asbu/segeval.hpp"
#include "asbu/tensor.hpp"

namespace asbu {

/// One generated segmentation sample: a 3-channel image in [0,1] over a
/// textured background with 1-4 soft-edged bright blobs, and the exact
/// binary blob mask.
struct SyntheticSample {
    Tensor image;      // (1, 3, S, S)
    BinaryMask label;  // (S, S)

    struct BlobMeta {
        double cx = 0, cy = 0;      // center, pixels
        double rx = 0, ry = 0;      // semi-axes, pixels
        double angle = 0;           // rotation, radians
        int kind = 0;               // 0 = ellipse, 1 = wobbled polygon
        double linear_size() const;
    };
    std::vector<BlobMeta> blobs;
};

struct DatasetOptions {
    double min_radius_frac = 1.0 / 16;  // of image size
    double max_radius_frac = 1.0 / 3;
    bool allow_occlusion = true;
    double max_foreground_frac = 0.9;
};

/// Deterministic for a given seed. Image size must be divisible by 16.
std::vector<SyntheticSample> generate_dataset(int n, int image_size, std::uint64_t seed,
                                              const DatasetOptions& opts = {});

struct AugmentOptions {
    double flip_prob = 0.5;
    bool crop = true;
    double min_crop_area = 0.8;  // fraction of the original area
    bool noise = true;
    double noise_sigma = 0.03;  // Gaussian, applied to the image only
};

/// The geometric transform an augment call applied, for consistency checks.
struct AugmentApplied {
    bool flipped = false;
    int crop_x0 = 0, crop_y0 = 0;
    int crop_w = 0, crop_h = 0;  // 0 when no crop ran
};

/// Horizontal flip / random crop-and-resize / Gaussian noise; the label is
/// transformed consistently with the image (nearest-neighbor resampling).
SyntheticSample augment(const SyntheticSample& sample, std::uint64_t seed,
                        const AugmentOptions& opts = {}, AugmentApplied* applied = nullptr);

}  // namespace asbu
