#pragma once

#include <cstdint>
#include <vector>

#include "asbu/tensor.hpp"

namespace asbu {

struct Padding {
    int top = 0;
    int left = 0;
    int bottom = 0;
    int right = 0;

    bool operator==(const Padding&) const = default;
};

/// "Same" padding: total = dilation*(k-1), split floor left/top, ceil
/// right/bottom. Preserves spatial dims for stride 1.
Padding same_padding(int kh, int kw, int dilation);

struct ConvParams {
    Tensor kernel;  // (out_channels, in_channels, kh, kw)
    std::vector<double> bias;
    int stride = 1;
    int dilation = 1;
    Padding pad;

    int out_channels() const { return kernel.shape.n; }
    int in_channels() const { return kernel.shape.c; }
    int kh() const { return kernel.shape.h; }
    int kw() const { return kernel.shape.w; }
};

/// Dilated cross-correlation plus bias. Output spatial dims follow
/// floor((H + pad_total - dilation*(kh-1) - 1)/stride) + 1.
Tensor conv2d_forward(const Tensor& x, const ConvParams& p);

struct ConvGrads {
    Tensor grad_x;
    Tensor grad_kernel;
    std::vector<double> grad_bias;
};

ConvGrads conv2d_backward(const Tensor& x, const ConvParams& p, const Tensor& grad_out);

struct PoolParams {
    int kernel = 2;
    int stride = 2;
};

struct PoolResult {
    Tensor out;
    // Flat index into the input value array of each window maximum; ties go
    // to the first occurrence in row-major window order.
    std::vector<std::int64_t> argmax;
};

PoolResult maxpool_forward(const Tensor& x, const PoolParams& p);
Tensor maxpool_backward(const Shape4& in_shape, const std::vector<std::int64_t>& argmax,
                        const Tensor& grad_out);

struct BatchNormState {
    std::vector<double> gamma, beta;
    std::vector<double> running_mean, running_var;
    double average_decay = 0.99;
    double epsilon = 1e-5;

    static BatchNormState identity(int channels, double decay = 0.99);
    int channels() const { return static_cast<int>(gamma.size()); }
};

struct BatchNormCache {
    std::vector<double> x_hat;           // normalized input, same layout as x
    std::vector<double> mean, inv_std;   // per channel (batch stats in training)
    std::int64_t per_channel_count = 0;  // N*H*W
    bool training = false;
};

/// Training mode normalizes by batch statistics and updates running stats as
/// running <- decay*running + (1-decay)*batch. Inference uses running stats.
Tensor batchnorm_forward(const Tensor& x, BatchNormState& s, bool training,
                         BatchNormCache* cache = nullptr);

struct BatchNormGrads {
    Tensor grad_x;
    std::vector<double> grad_gamma, grad_beta;
};

BatchNormGrads batchnorm_backward(const BatchNormState& s, const BatchNormCache& cache,
                                  const Tensor& grad_out);

/// Bilinear interpolation, align_corners=false (pixel centers at
/// half-integers, border samples clamped).
Tensor bilinear_resize(const Tensor& x, int out_h, int out_w);
Tensor bilinear_resize_backward(const Shape4& in_shape, const Tensor& grad_out);

/// Channel concatenation; all inputs must agree on batch/height/width.
Tensor concat_channels(const std::vector<const Tensor*>& xs);
std::vector<Tensor> concat_channels_backward(const std::vector<Shape4>& in_shapes,
                                             const Tensor& grad_out);
Tensor slice_channels(const Tensor& x, int c_begin, int c_end);

Tensor relu(const Tensor& x);
/// ReLU gradient using the activation output as mask (out > 0 iff pre > 0).
Tensor relu_backward(const Tensor& out, const Tensor& grad_out);

Tensor sigmoid(const Tensor& x);
Tensor sigmoid_backward(const Tensor& y, const Tensor& grad_out);

// Logits are clamped to +-kBceLogitClamp before the loss to avoid log(0).
inline constexpr double kBceLogitClamp = 30.0;

/// Mean of pos_weight*y*softplus(-z) + (1-y)*softplus(z) over all elements.
double weighted_bce_from_logits(const Tensor& logits, const Tensor& labels, double pos_weight);
Tensor weighted_bce_grad_from_logits(const Tensor& logits, const Tensor& labels,
                                     double pos_weight);

/// Probability-domain entry point; converts to logits internally.
double weighted_bce(const Tensor& pred, const Tensor& labels, double pos_weight);

}  // namespace asbu
