#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "asbu/errors.hpp"

namespace asbu {

enum class RFKind { conv, atrous_conv, pool };

struct RFLayer {
    std::string name;
    RFKind kind = RFKind::conv;
    int kernel = 3;
    int stride = 1;
    int dilation = 1;
    // Marks the last layer of a network stage (e.g. an ASB layer's atrous
    // branch); stage boundaries drive the growth-linearity report.
    bool stage_end = false;
};

/// alpha*(k-1) + 1: the support of a k-tap kernel with taps spaced alpha.
int effective_kernel(int k, int dilation);

struct RFRow {
    std::string name;
    RFKind kind = RFKind::conv;
    int eff_kernel = 0;
    std::int64_t eff_stride = 0;  // product of strides of preceding layers
    std::int64_t rf = 0;          // cumulative receptive field up to this layer
    bool stage_end = false;
};

struct RFTrace {
    std::vector<RFRow> rows;
    std::int64_t final_rf() const { return rows.empty() ? 1 : rows.back().rf; }
};

/// Cumulative receptive field along the stack:
/// r_L = sum_l (k_eff_l - 1) * prod_{i<l} s_i + 1.
RFTrace receptive_field(const std::vector<RFLayer>& layers);

// Flag threshold on the max successive stage-increment ratio. Chosen so the
// rise-then-fall default schedule (max ratio 1.5) reads near-linear while a
// dilation-doubling schedule (ratio -> 2) does not.
inline constexpr double kNearLinearMaxRatio = 1.75;

struct LinearityReport {
    std::vector<std::int64_t> stage_rf;    // cumulative RF at each stage end
    std::vector<double> stage_increments;  // per-stage RF growth in units of the
                                           // stage's own feature grid
    std::vector<double> ratios;            // symmetric successive-increment ratios
    double max_ratio = 1.0;
    double threshold = kNearLinearMaxRatio;
    bool near_linear = true;
};

/// Per-stage growth analysis. A stage's increment is the sum of
/// (eff_kernel - 1) over the conv rows since the previous stage end, i.e.
/// RF growth measured in units of the stage's own feature grid. Pool rows
/// rescale the grid and are excluded.
LinearityReport linearity_report(const RFTrace& trace,
                                 double near_linear_max_ratio = kNearLinearMaxRatio);

std::string format_rf_table(const RFTrace& trace);
std::string rf_growth_svg(const RFTrace& trace);

}  // namespace asbu
