#include "asbu/layers.hpp"

#include <cmath>

namespace asbu {

void ConvBlock::ensure_grads() {
    conv.kernel.ensure_grad();
    if (grad_bias.size() != conv.bias.size()) {
        grad_bias.assign(conv.bias.size(), 0.0);
    }
    if (bn && grad_gamma.size() != bn->gamma.size()) {
        grad_gamma.assign(bn->gamma.size(), 0.0);
        grad_beta.assign(bn->beta.size(), 0.0);
    }
}

void ConvBlock::zero_grads() {
    conv.kernel.clear_grad();
    std::fill(grad_bias.begin(), grad_bias.end(), 0.0);
    std::fill(grad_gamma.begin(), grad_gamma.end(), 0.0);
    std::fill(grad_beta.begin(), grad_beta.end(), 0.0);
}

void kaiming_init(Tensor& kernel, Rng& rng) {
    const std::int64_t fan_in =
        static_cast<std::int64_t>(kernel.shape.c) * kernel.shape.h * kernel.shape.w;
    const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
    for (double& w : kernel.v) {
        w = static_cast<double>(static_cast<float>(rng.normal(0.0, stddev)));
    }
}

ConvBlock make_conv_block(const std::string& name, int in_ch, int out_ch, int k, int stride,
                          int dilation, bool batchnorm, bool relu, Rng& rng) {
    ConvBlock blk;
    blk.name = name;
    blk.conv.kernel = Tensor(out_ch, in_ch, k, k);
    kaiming_init(blk.conv.kernel, rng);
    blk.conv.bias.assign(static_cast<std::size_t>(out_ch), 0.0);
    blk.conv.stride = stride;
    blk.conv.dilation = dilation;
    blk.conv.pad = same_padding(k, k, dilation);
    if (batchnorm) {
        blk.bn = BatchNormState::identity(out_ch);
    }
    blk.relu = relu;
    blk.ensure_grads();
    return blk;
}

Tensor conv_block_forward(const Tensor& x, ConvBlock& blk, bool training, BlockTrace* tr) {
    Tensor y = conv2d_forward(x, blk.conv);
    if (blk.bn) {
        y = batchnorm_forward(y, *blk.bn, training, tr ? &tr->bn : nullptr);
    }
    if (blk.relu) {
        y = relu(y);
    }
    return y;
}

Tensor conv_block_backward(const Tensor& x_in, const Tensor& out, ConvBlock& blk,
                           const BlockTrace& tr, const Tensor& grad_out) {
    Tensor g = grad_out;
    if (blk.relu) {
        g = relu_backward(out, g);
    }
    if (blk.bn) {
        BatchNormGrads bg = batchnorm_backward(*blk.bn, tr.bn, g);
        for (std::size_t i = 0; i < blk.grad_gamma.size(); ++i) {
            blk.grad_gamma[i] += bg.grad_gamma[i];
            blk.grad_beta[i] += bg.grad_beta[i];
        }
        g = std::move(bg.grad_x);
    }
    ConvGrads cg = conv2d_backward(x_in, blk.conv, g);
    accumulate_grad(blk.conv.kernel, cg.grad_kernel);
    for (std::size_t i = 0; i < blk.grad_bias.size(); ++i) {
        blk.grad_bias[i] += cg.grad_bias[i];
    }
    return std::move(cg.grad_x);
}

}  // namespace asbu
