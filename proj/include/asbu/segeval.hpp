#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "asbu/errors.hpp"

namespace asbu {

struct BinaryMask {
    int h = 0;
    int w = 0;
    std::vector<std::uint8_t> bits;  // strictly 0/1, row-major

    BinaryMask() = default;
    BinaryMask(int h, int w, std::uint8_t fill = 0);

    std::uint8_t& at(int y, int x) { return bits[static_cast<std::size_t>(y) * w + x]; }
    std::uint8_t at(int y, int x) const { return bits[static_cast<std::size_t>(y) * w + x]; }
    std::int64_t count() const;

    bool operator==(const BinaryMask&) const = default;
};

struct IgnoreBandParams {
    double osf_beta = 0.05;  // band radius per object: beta * sqrt(area)
    int min_radius = 1;      // 0 disables the band entirely
    double threshold = 0.5;  // binarization threshold for soft predictions
};

/// Structuring-element radius for one labeled object.
int object_radius(std::int64_t area, const IgnoreBandParams& params);

/// Minkowski dilation with a Euclidean disk (radius 1 = 4-neighborhood plus
/// center); pixels outside the image are background.
BinaryMask dilate(const BinaryMask& mask, int radius);
/// Erosion; pixels outside the image count as foreground so a full mask stays
/// full.
BinaryMask erode(const BinaryMask& mask, int radius);

/// 8-connected component labeling; labels[i] is 0 for background or the
/// 1-based component id. Returns the component count.
int connected_components(const BinaryMask& mask, std::vector<int>& labels);

/// Per label component: radius from its area, dilate/erode it in isolation,
/// XOR, union over components, then complement. Returned pixels are 1 where
/// evaluation counts.
BinaryMask ignore_band(const BinaryMask& label, const IgnoreBandParams& params);

/// Jaccard of label and prediction restricted to the counted region; 1.0 when
/// the masked union is empty.
double masked_jaccard(const BinaryMask& label, const BinaryMask& pred,
                      const IgnoreBandParams& params);

/// Misdetections are 8-connected components of the prediction with zero
/// label overlap that appear at least partly outside the ignore band; each
/// costs 1.0 and is excluded from the Jaccard union (it is priced by the
/// penalty alone). Fragments connected to a true detection are not billed.
int count_misdetections(const BinaryMask& label, const BinaryMask& pred,
                        const IgnoreBandParams& params);

double score_with_penalty(const BinaryMask& label, const BinaryMask& pred,
                          const IgnoreBandParams& params);

struct EvalEntry {
    std::string name;
    double jaccard = 0.0;
    int misdetections = 0;
    double score = 0.0;
};

struct EvalReport {
    std::vector<EvalEntry> entries;
    double mean_score = 0.0;
    double mean_jaccard = 0.0;
    std::int64_t total_misdetections = 0;
};

EvalReport evaluate_dataset(const std::vector<BinaryMask>& labels,
                            const std::vector<BinaryMask>& preds,
                            const IgnoreBandParams& params,
                            const std::vector<std::string>* names = nullptr);

}  // namespace asbu
