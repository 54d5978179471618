#pragma once

#include <optional>
#include <string>

#include "asbu/nn_ops.hpp"
#include "asbu/rng.hpp"

namespace asbu {

/// Convolution with optional batch norm and ReLU, plus gradient buffers.
/// Forward order is conv -> BN -> ReLU.
struct ConvBlock {
    std::string name;
    ConvParams conv;
    std::optional<BatchNormState> bn;
    bool relu = true;

    std::vector<double> grad_bias;
    std::vector<double> grad_gamma, grad_beta;

    void ensure_grads();
    void zero_grads();
};

struct BlockTrace {
    BatchNormCache bn;
};

/// Kaiming-He normal init (fan-in mode, ReLU gain): N(0, sqrt(2/fan_in)).
/// Samples are snapped to f32-representable values so checkpoints round-trip
/// bit-exactly.
void kaiming_init(Tensor& kernel, Rng& rng);

ConvBlock make_conv_block(const std::string& name, int in_ch, int out_ch, int k, int stride,
                          int dilation, bool batchnorm, bool relu, Rng& rng);

Tensor conv_block_forward(const Tensor& x, ConvBlock& blk, bool training, BlockTrace* tr);

/// Accumulates parameter gradients into the block's buffers and returns the
/// gradient w.r.t. the block input. `out` is the forward output (ReLU mask).
Tensor conv_block_backward(const Tensor& x_in, const Tensor& out, ConvBlock& blk,
                           const BlockTrace& tr, const Tensor& grad_out);

}  // namespace asbu
