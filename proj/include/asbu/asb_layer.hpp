#pragma once

#include "asbu/layers.hpp"

namespace asbu {

/// Tunable filter counts of one atrous space bender layer: a 3x3 squeeze
/// convolution feeding three parallel expand branches (1x1, 3x3, atrous 3x3)
/// whose outputs are concatenated in that order.
struct ASBLayerConfig {
    int ss3x3 = 0;   // squeeze filters
    int e1x1 = 0;    // pointwise expand filters
    int se3x3 = 0;   // spatial expand filters
    int ase3x3 = 0;  // atrous spatial expand filters
    int dilation = 1;
    bool use_batchnorm = true;

    int out_channels() const { return e1x1 + se3x3 + ase3x3; }
    void validate() const;

    bool operator==(const ASBLayerConfig&) const = default;
};

struct ASBWeights {
    ASBLayerConfig cfg;
    ConvBlock squeeze;
    ConvBlock e1x1;
    ConvBlock se3x3;
    ConvBlock ase3x3;
};

struct ASBTrace {
    Tensor squeeze_out;
    BlockTrace sq, e1, se, ase;
};

ASBWeights make_asb_layer(const std::string& name, int in_channels, const ASBLayerConfig& cfg,
                          Rng& rng);

/// Stride-1 same-padded throughout, so H and W are preserved for any
/// dilation rate. Output channels = e1x1 + se3x3 + ase3x3.
Tensor asb_forward(const Tensor& x, ASBWeights& layer, bool training, ASBTrace* tr);

/// Chain rule through concat and the three branches; branch input gradients
/// sum at the squeeze output. Returns the gradient w.r.t. the layer input.
Tensor asb_backward(const Tensor& x_in, const Tensor& out, ASBWeights& layer, const ASBTrace& tr,
                    const Tensor& grad_out);

/// Convolution weights + biases of the four sub-layers, excluding batch norm.
std::int64_t asb_parameter_count(int in_channels, const ASBLayerConfig& cfg);

}  // namespace asbu
