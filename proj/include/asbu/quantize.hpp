#pragma once

#include <map>

#include "asbu/checkpoint.hpp"
#include "asbu/network.hpp"

namespace asbu {

enum class QuantScheme {
    symmetric_int8_weights,   // range [-127, 127], zero_point fixed at 0
    affine_uint8_activations  // range [0, 255]
};

struct QuantParams {
    double scale = 1.0;
    int zero_point = 0;
    QuantScheme scheme = QuantScheme::symmetric_int8_weights;

    int qmin() const { return scheme == QuantScheme::symmetric_int8_weights ? -127 : 0; }
    int qmax() const { return scheme == QuantScheme::symmetric_int8_weights ? 127 : 255; }
};

inline constexpr double kQuantScaleFloor = 1e-12;

/// scale = max|w|/127 (floored), zero_point 0.
QuantParams weight_qparams(const std::vector<double>& values);
/// Affine params over [min, max] widened to include 0.
QuantParams activation_qparams(double observed_min, double observed_max);

/// q = clamp(round(x/scale) + zero_point, range).
std::vector<int> quantize(const std::vector<double>& x, const QuantParams& qp);
std::vector<double> dequantize(const std::vector<int>& q, const QuantParams& qp);

/// Per-tensor int8 weights plus per-conv-input activation ranges. The
/// embedded float network carries structure, biases and batch-norm state;
/// its kernels hold the dequantized weights.
struct QuantizedModel {
    Network net;
    std::map<std::string, std::vector<std::int8_t>> qkernels;
    std::map<std::string, QuantParams> weight_qp;
    std::map<std::string, QuantParams> act_qp;
};

/// Min/max calibration over forward passes of the sample inputs.
QuantizedModel calibrate(Network& net, const std::vector<Tensor>& sample_inputs);

/// Integer-accumulation convolutions (int32) with float requantization
/// multipliers; pooling, resizing, batch norm and activations run in float.
Tensor quantized_forward(QuantizedModel& model, const Tensor& x);

std::vector<std::uint8_t> save_quantized_checkpoint_bytes(QuantizedModel& model);
void save_quantized_checkpoint(QuantizedModel& model, const std::string& path);
QuantizedModel load_quantized_checkpoint_bytes(const std::vector<std::uint8_t>& bytes);
QuantizedModel load_quantized_checkpoint(const std::string& path);

}  // namespace asbu
