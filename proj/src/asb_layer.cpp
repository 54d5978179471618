#include "asbu/asb_layer.hpp"

namespace asbu {

void ASBLayerConfig::validate() const {
    if (ss3x3 < 1) {
        throw ConfigError("asb config: squeeze filter count must be >= 1");
    }
    if (e1x1 < 0 || se3x3 < 0 || ase3x3 < 0) {
        throw ConfigError("asb config: negative filter count");
    }
    if (se3x3 + ase3x3 < 1) {
        throw ConfigError("asb config: at least one spatial expand branch must carry filters");
    }
    if (ss3x3 >= out_channels()) {
        throw ConfigError("asb config: squeeze:expand ratio must stay below 1 (ss3x3=" +
                          std::to_string(ss3x3) + ", expand=" + std::to_string(out_channels()) +
                          ")");
    }
    if (dilation < 1) {
        throw ConfigError("asb config: dilation must be >= 1");
    }
}

ASBWeights make_asb_layer(const std::string& name, int in_channels, const ASBLayerConfig& cfg,
                          Rng& rng) {
    cfg.validate();
    ASBWeights w;
    w.cfg = cfg;
    w.squeeze = make_conv_block(name + ".squeeze", in_channels, cfg.ss3x3, 3, 1, 1,
                                cfg.use_batchnorm, true, rng);
    w.e1x1 = make_conv_block(name + ".e1x1", cfg.ss3x3, cfg.e1x1, 1, 1, 1, cfg.use_batchnorm,
                             true, rng);
    w.se3x3 = make_conv_block(name + ".se3x3", cfg.ss3x3, cfg.se3x3, 3, 1, 1, cfg.use_batchnorm,
                              true, rng);
    w.ase3x3 = make_conv_block(name + ".ase3x3", cfg.ss3x3, cfg.ase3x3, 3, 1, cfg.dilation,
                               cfg.use_batchnorm, true, rng);
    return w;
}

Tensor asb_forward(const Tensor& x, ASBWeights& layer, bool training, ASBTrace* tr) {
    ASBTrace local;
    ASBTrace& t = tr ? *tr : local;
    t.squeeze_out = conv_block_forward(x, layer.squeeze, training, &t.sq);
    Tensor b1 = conv_block_forward(t.squeeze_out, layer.e1x1, training, &t.e1);
    Tensor b2 = conv_block_forward(t.squeeze_out, layer.se3x3, training, &t.se);
    Tensor b3 = conv_block_forward(t.squeeze_out, layer.ase3x3, training, &t.ase);
    return concat_channels({&b1, &b2, &b3});
}

Tensor asb_backward(const Tensor& x_in, const Tensor& out, ASBWeights& layer, const ASBTrace& tr,
                    const Tensor& grad_out) {
    check_same_shape(out, grad_out, "asb_backward");
    const int c1 = layer.cfg.e1x1;
    const int c2 = c1 + layer.cfg.se3x3;
    const int c3 = c2 + layer.cfg.ase3x3;

    Tensor g1 = slice_channels(grad_out, 0, c1);
    Tensor g2 = slice_channels(grad_out, c1, c2);
    Tensor g3 = slice_channels(grad_out, c2, c3);
    Tensor o1 = slice_channels(out, 0, c1);
    Tensor o2 = slice_channels(out, c1, c2);
    Tensor o3 = slice_channels(out, c2, c3);

    Tensor gsq = conv_block_backward(tr.squeeze_out, o1, layer.e1x1, tr.e1, g1);
    Tensor gsq2 = conv_block_backward(tr.squeeze_out, o2, layer.se3x3, tr.se, g2);
    Tensor gsq3 = conv_block_backward(tr.squeeze_out, o3, layer.ase3x3, tr.ase, g3);
    for (std::size_t i = 0; i < gsq.v.size(); ++i) {
        gsq.v[i] += gsq2.v[i] + gsq3.v[i];
    }
    return conv_block_backward(x_in, tr.squeeze_out, layer.squeeze, tr.sq, gsq);
}

std::int64_t asb_parameter_count(int in_channels, const ASBLayerConfig& cfg) {
    auto conv_params = [](std::int64_t out, std::int64_t in, std::int64_t k) {
        return out * in * k * k + out;
    };
    return conv_params(cfg.ss3x3, in_channels, 3) + conv_params(cfg.e1x1, cfg.ss3x3, 1) +
           conv_params(cfg.se3x3, cfg.ss3x3, 3) + conv_params(cfg.ase3x3, cfg.ss3x3, 3);
}

}  // namespace asbu
