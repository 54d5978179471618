#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "asbu/asb_layer.hpp"
#include "asbu/rf.hpp"

namespace asbu {

enum class Scaling { OneEighth, OneSixteenth };

std::string scaling_str(Scaling s);          // "1/8" or "1/16"
Scaling parse_scaling(const std::string& s);

struct Conv1Spec {
    int filters = 16;
    int kernel = 3;
    int stride = 2;

    bool operator==(const Conv1Spec&) const = default;
};

struct DecoderStageSpec {
    std::string skip;      // encoder stage feeding this long-connect block
    int proj_filters = 0;  // 1x1 skip projection width
    ASBLayerConfig asb;    // dilation must be 1

    // The 1x1 merge conv after concat outputs the stage ASB's expand total.
    int merge_filters() const { return asb.out_channels(); }

    bool operator==(const DecoderStageSpec&) const = default;
};

struct HeadSpec {
    int c1x1 = 16;
    int c3x3 = 1;

    bool operator==(const HeadSpec&) const = default;
};

struct DecoderSpec {
    std::vector<DecoderStageSpec> stages;  // deepest resolution first
    HeadSpec head;

    bool operator==(const DecoderSpec&) const = default;
};

struct NetworkSpec {
    Scaling scaling = Scaling::OneSixteenth;
    int input_channels = 3;
    bool use_batchnorm = true;
    Conv1Spec conv1;
    std::vector<ASBLayerConfig> asb_configs;  // exactly 7
    std::vector<std::string> pool_after;      // subset of {conv1, asb1..asb7}
    DecoderSpec decoder;

    void validate() const;
    /// conv1 stride times 2 per pooling step.
    int downsample_factor() const;

    bool operator==(const NetworkSpec&) const = default;
};

/// Pinned defaults: dilation schedule [1,2,3,4,3,2,1], expand totals
/// [32,48,48,64,64,96,96] with squeeze = half the total and filters split
/// e1x1:se3x3:ase3x3 = 2:1:1; pooling after conv1/asb3/asb5 (1/16) or
/// conv1/asb3 (1/8).
NetworkSpec build_default_spec(Scaling scaling);

/// Canonical key=value serialization; parse(serialize(s)) == s and the
/// serialized text is byte-stable (it is embedded in checkpoints).
std::string serialize_spec(const NetworkSpec& spec);
NetworkSpec parse_spec(const std::string& text);

struct DecoderStageWeights {
    DecoderStageSpec spec;
    ConvBlock proj;   // 1x1 + ReLU on the skip
    ConvBlock merge;  // 1x1 + ReLU after concat
    ASBWeights asb;
};

struct Network {
    NetworkSpec spec;
    ConvBlock conv1;
    std::vector<ASBWeights> asb;  // 7
    std::vector<DecoderStageWeights> stages;
    ConvBlock head1;  // 1x1 + ReLU
    ConvBlock head3;  // 3x3, linear
};

/// Kaiming-He initialized network; bit-identical weights for equal seeds.
Network build_network(const NetworkSpec& spec, std::uint64_t seed);

struct ParamView {
    std::string name;
    std::vector<std::uint32_t> dims;
    double* value = nullptr;
    double* grad = nullptr;  // null for running statistics
    std::size_t size = 0;
    bool trainable = false;
};

/// Visits every serializable array (kernels, biases, BN parameters and
/// running stats) in a fixed topological order.
void visit_params(Network& net, const std::function<void(const ParamView&)>& fn);

/// Trainable scalars only (kernels, biases, gamma, beta).
std::int64_t parameter_count(Network& net);

void zero_grads(Network& net);

using ActivationObserver = std::function<void(const std::string&, const Tensor&)>;

struct PoolTrace {
    std::vector<std::int64_t> argmax;
    Shape4 in_shape;
};

struct EncoderTrace {
    Tensor input;
    Tensor conv1_out;
    BlockTrace conv1_tr;
    std::vector<Tensor> asb_in;
    std::vector<Tensor> asb_out;
    std::vector<ASBTrace> asb_tr;
    std::map<std::string, PoolTrace> pools;  // keyed by the stage pooled after
    std::map<std::string, Tensor> skips;     // captured immediately before pooling
};

struct DecoderStageTrace {
    Tensor dec_in;
    Tensor up;
    Tensor proj_out;
    BlockTrace proj_tr;
    Tensor cat;
    Tensor merge_out;
    BlockTrace merge_tr;
    Tensor asb_out;
    ASBTrace asb_tr;
};

struct NetTrace {
    EncoderTrace enc;
    std::vector<DecoderStageTrace> stages;
    Tensor head1_out;
    BlockTrace head1_tr;
    Tensor head3_out;  // logits at the pre-resize resolution
    BlockTrace head3_tr;
    Tensor logits;  // resized to input resolution
    Tensor mask;    // sigmoid(logits)
};

struct EncoderResult {
    Tensor bottleneck;
    std::map<std::string, Tensor> skips;
};

/// Input H and W must be divisible by the downsample factor.
EncoderResult encoder_forward(Network& net, const Tensor& x, bool training = false);

Tensor decoder_forward(Network& net, const Tensor& bottleneck,
                       const std::map<std::string, Tensor>& skips, bool training = false);

/// Full forward pass; returns the sigmoid mask at input resolution. The
/// observer, when set, is invoked with (conv name, conv input) at every
/// convolution.
Tensor network_forward(Network& net, const Tensor& x, bool training, NetTrace* trace,
                       const ActivationObserver* observer = nullptr);

/// Backpropagates d(loss)/d(logits), accumulating parameter gradients.
void network_backward(Network& net, NetTrace& trace, const Tensor& grad_logits);

/// Longest-support path of the encoder (conv1, pools, and per-ASB
/// squeeze + atrous branch) for receptive-field analysis.
std::vector<RFLayer> encoder_rf_layers(const NetworkSpec& spec);

}  // namespace asbu
