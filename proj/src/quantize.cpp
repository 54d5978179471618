#include "asbu/quantize.hpp"

#include <algorithm>
#include <cmath>

#include "asbu/parallel.hpp"

namespace asbu {

QuantParams weight_qparams(const std::vector<double>& values) {
    double amax = 0.0;
    for (double v : values) amax = std::max(amax, std::abs(v));
    QuantParams qp;
    qp.scheme = QuantScheme::symmetric_int8_weights;
    qp.scale = std::max(amax / 127.0, kQuantScaleFloor);
    qp.zero_point = 0;
    return qp;
}

QuantParams activation_qparams(double observed_min, double observed_max) {
    double lo = std::min(0.0, observed_min);
    double hi = std::max(0.0, observed_max);
    QuantParams qp;
    qp.scheme = QuantScheme::affine_uint8_activations;
    qp.scale = std::max((hi - lo) / 255.0, kQuantScaleFloor);
    qp.zero_point =
        static_cast<int>(std::clamp<long>(std::lround(-lo / qp.scale), 0L, 255L));
    return qp;
}

std::vector<int> quantize(const std::vector<double>& x, const QuantParams& qp) {
    std::vector<int> q(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        long v = std::lround(x[i] / qp.scale) + qp.zero_point;
        q[i] = static_cast<int>(std::clamp<long>(v, qp.qmin(), qp.qmax()));
    }
    return q;
}

std::vector<double> dequantize(const std::vector<int>& q, const QuantParams& qp) {
    std::vector<double> x(q.size());
    for (std::size_t i = 0; i < q.size(); ++i) {
        x[i] = (q[i] - qp.zero_point) * qp.scale;
    }
    return x;
}

namespace {

struct RangeMap {
    std::map<std::string, std::pair<double, double>> ranges;

    void observe(const std::string& name, const Tensor& t) {
        double mn = t.v[0], mx = t.v[0];
        for (double v : t.v) {
            mn = std::min(mn, v);
            mx = std::max(mx, v);
        }
        auto it = ranges.find(name);
        if (it == ranges.end()) {
            ranges[name] = {mn, mx};
        } else {
            it->second.first = std::min(it->second.first, mn);
            it->second.second = std::max(it->second.second, mx);
        }
    }
};

void quantize_block(const ConvBlock& blk, QuantizedModel& model) {
    QuantParams wqp = weight_qparams(blk.conv.kernel.v);
    std::vector<std::int8_t> q(blk.conv.kernel.v.size());
    for (std::size_t i = 0; i < q.size(); ++i) {
        long v = std::lround(blk.conv.kernel.v[i] / wqp.scale);
        q[i] = static_cast<std::int8_t>(std::clamp<long>(v, -127, 127));
    }
    model.weight_qp[blk.name] = wqp;
    model.qkernels[blk.name] = std::move(q);
}

void dequantize_kernels_into(QuantizedModel& model, ConvBlock& blk) {
    const auto& q = model.qkernels.at(blk.name);
    const QuantParams& wqp = model.weight_qp.at(blk.name);
    for (std::size_t i = 0; i < q.size(); ++i) {
        blk.conv.kernel.v[i] = q[i] * wqp.scale;
    }
}

template <typename Fn>
void for_each_block(Network& net, Fn&& fn) {
    fn(net.conv1);
    for (ASBWeights& a : net.asb) {
        fn(a.squeeze);
        fn(a.e1x1);
        fn(a.se3x3);
        fn(a.ase3x3);
    }
    for (DecoderStageWeights& st : net.stages) {
        fn(st.proj);
        fn(st.merge);
        fn(st.asb.squeeze);
        fn(st.asb.e1x1);
        fn(st.asb.se3x3);
        fn(st.asb.ase3x3);
    }
    fn(net.head1);
    fn(net.head3);
}

}  // namespace

QuantizedModel calibrate(Network& net, const std::vector<Tensor>& sample_inputs) {
    if (sample_inputs.empty()) {
        throw NumericError("calibrate: empty calibration set");
    }
    RangeMap ranges;
    ActivationObserver obs = [&](const std::string& name, const Tensor& t) {
        ranges.observe(name, t);
    };
    for (const Tensor& x : sample_inputs) {
        network_forward(net, x, false, nullptr, &obs);
    }

    QuantizedModel model;
    model.net = net;
    for_each_block(model.net, [&](ConvBlock& blk) {
        quantize_block(blk, model);
        auto it = ranges.ranges.find(blk.name);
        if (it == ranges.ranges.end()) {
            throw NumericError("calibrate: no activation range observed for " + blk.name);
        }
        model.act_qp[blk.name] = activation_qparams(it->second.first, it->second.second);
        dequantize_kernels_into(model, blk);
    });
    return model;
}

namespace {

/// Integer conv: acc = sum (qx - zp) * qw over taps, then float requant by
/// act_scale * weight_scale, plus float bias; BN/ReLU follow in float.
Tensor quantized_conv_block(const Tensor& x, ConvBlock& blk, QuantizedModel& model) {
    const QuantParams& aqp = model.act_qp.at(blk.name);
    const QuantParams& wqp = model.weight_qp.at(blk.name);
    const std::vector<std::int8_t>& qw = model.qkernels.at(blk.name);

    std::vector<std::uint8_t> qx(x.v.size());
    for (std::size_t i = 0; i < x.v.size(); ++i) {
        long v = std::lround(x.v[i] / aqp.scale) + aqp.zero_point;
        qx[i] = static_cast<std::uint8_t>(std::clamp<long>(v, 0, 255));
    }

    const ConvParams& p = blk.conv;
    const int N = x.shape.n, IC = x.shape.c, H = x.shape.h, W = x.shape.w;
    const int OC = p.out_channels(), KH = p.kh(), KW = p.kw();
    const int s = p.stride, dil = p.dilation;
    const int OH =
        (H + p.pad.top + p.pad.bottom - dil * (KH - 1) - 1) / s + 1;
    const int OW =
        (W + p.pad.left + p.pad.right - dil * (KW - 1) - 1) / s + 1;
    if (x.shape.c != p.in_channels()) {
        throw ShapeError("quantized conv: channel mismatch at " + blk.name);
    }
    const double requant = aqp.scale * wqp.scale;
    const int zp = aqp.zero_point;

    Tensor out(N, OC, OH, OW);
    parallel_for(static_cast<std::int64_t>(N) * OC, [&](std::int64_t idx) {
        const int b = static_cast<int>(idx / OC);
        const int oc = static_cast<int>(idx % OC);
        for (int oy = 0; oy < OH; ++oy) {
            for (int ox = 0; ox < OW; ++ox) {
                std::int32_t acc = 0;
                for (int ic = 0; ic < IC; ++ic) {
                    const std::uint8_t* xp =
                        qx.data() + static_cast<std::size_t>(x.offset(b, ic, 0, 0));
                    const std::int8_t* wp =
                        qw.data() +
                        (static_cast<std::size_t>(oc) * IC + ic) * KH * KW;
                    for (int ky = 0; ky < KH; ++ky) {
                        const int iy = oy * s - p.pad.top + ky * dil;
                        if (iy < 0 || iy >= H) continue;  // zero padding: zp - zp = 0
                        for (int kx = 0; kx < KW; ++kx) {
                            const int ix = ox * s - p.pad.left + kx * dil;
                            if (ix < 0 || ix >= W) continue;
                            acc += (static_cast<std::int32_t>(xp[iy * W + ix]) - zp) *
                                   static_cast<std::int32_t>(wp[ky * KW + kx]);
                        }
                    }
                }
                out.e(b, oc, oy, ox) = acc * requant + p.bias[static_cast<std::size_t>(oc)];
            }
        }
    });

    if (blk.bn) {
        out = batchnorm_forward(out, *blk.bn, false, nullptr);
    }
    if (blk.relu) {
        out = relu(out);
    }
    return out;
}

Tensor quantized_asb(const Tensor& x, ASBWeights& layer, QuantizedModel& model) {
    Tensor sq = quantized_conv_block(x, layer.squeeze, model);
    Tensor b1 = quantized_conv_block(sq, layer.e1x1, model);
    Tensor b2 = quantized_conv_block(sq, layer.se3x3, model);
    Tensor b3 = quantized_conv_block(sq, layer.ase3x3, model);
    return concat_channels({&b1, &b2, &b3});
}

}  // namespace

Tensor quantized_forward(QuantizedModel& model, const Tensor& x) {
    Network& net = model.net;
    const int factor = net.spec.downsample_factor();
    if (x.shape.h % factor != 0 || x.shape.w % factor != 0) {
        throw ShapeError("quantized_forward: input not divisible by " + std::to_string(factor));
    }
    auto pooled = [&](const std::string& stage) {
        return std::find(net.spec.pool_after.begin(), net.spec.pool_after.end(), stage) !=
               net.spec.pool_after.end();
    };
    PoolParams pool{2, 2};

    Tensor current = quantized_conv_block(x, net.conv1, model);
    std::map<std::string, Tensor> skips;
    if (pooled("conv1")) {
        skips["conv1"] = current;
        current = maxpool_forward(current, pool).out;
    }
    for (int i = 0; i < 7; ++i) {
        current = quantized_asb(current, net.asb[i], model);
        std::string stage = "asb" + std::to_string(i + 1);
        if (pooled(stage)) {
            skips[stage] = current;
            current = maxpool_forward(current, pool).out;
        }
    }
    for (DecoderStageWeights& sw : net.stages) {
        Tensor up = bilinear_resize(current, current.shape.h * 2, current.shape.w * 2);
        Tensor proj = quantized_conv_block(skips.at(sw.spec.skip), sw.proj, model);
        Tensor cat = concat_channels({&up, &proj});
        Tensor merged = quantized_conv_block(cat, sw.merge, model);
        current = quantized_asb(merged, sw.asb, model);
    }
    current = quantized_conv_block(current, net.head1, model);
    current = quantized_conv_block(current, net.head3, model);
    current = bilinear_resize(current, x.shape.h, x.shape.w);
    return sigmoid(current);
}

std::vector<std::uint8_t> save_quantized_checkpoint_bytes(QuantizedModel& model) {
    ByteWriter w;
    w.raw(kCheckpointMagic, 4);
    w.u32(kCheckpointVersionInt8);
    std::string spec_text = serialize_spec(model.net.spec);
    w.u32(static_cast<std::uint32_t>(spec_text.size()));
    w.raw(spec_text.data(), spec_text.size());

    visit_params(model.net, [&](const ParamView& p) {
        w.str(p.name);
        w.u8(static_cast<std::uint8_t>(p.dims.size()));
        for (std::uint32_t d : p.dims) w.u32(d);
        bool is_kernel = p.name.size() > 7 && p.name.substr(p.name.size() - 7) == ".kernel";
        auto qk = is_kernel ? model.qkernels.find(p.name.substr(0, p.name.size() - 7))
                            : model.qkernels.end();
        if (is_kernel && qk != model.qkernels.end()) {
            const QuantParams& qp = model.weight_qp.at(qk->first);
            w.u8(1);  // int8 payload
            w.f32(static_cast<float>(qp.scale));
            w.i32(qp.zero_point);
            w.raw(qk->second.data(), qk->second.size());
        } else {
            w.u8(0);  // f32 payload
            for (std::size_t i = 0; i < p.size; ++i) w.f32(static_cast<float>(p.value[i]));
        }
    });

    w.u32(static_cast<std::uint32_t>(model.act_qp.size()));
    for (const auto& [name, qp] : model.act_qp) {
        w.str(name);
        w.f32(static_cast<float>(qp.scale));
        w.i32(qp.zero_point);
    }
    w.append_crc();
    return std::move(w.bytes);
}

void save_quantized_checkpoint(QuantizedModel& model, const std::string& path) {
    write_file_bytes(path, save_quantized_checkpoint_bytes(model));
}

QuantizedModel load_quantized_checkpoint_bytes(const std::vector<std::uint8_t>& bytes) {
    ByteReader r(bytes);
    std::uint32_t version = r.open_container();
    if (version != kCheckpointVersionInt8) {
        throw FormatError("quantized checkpoint: unsupported version " +
                          std::to_string(version));
    }
    std::uint32_t spec_len = r.u32();
    std::string spec_text(spec_len, '\0');
    r.raw(spec_text.data(), spec_len);
    NetworkSpec spec = parse_spec(spec_text);

    QuantizedModel model;
    model.net = build_network(spec, 0);
    visit_params(model.net, [&](const ParamView& p) {
        std::string name = r.str();
        if (name != p.name) {
            throw FormatError("quantized checkpoint: shape-table mismatch at '" + name + "'");
        }
        std::uint8_t rank = r.u8();
        if (rank != p.dims.size()) {
            throw FormatError("quantized checkpoint: rank mismatch at '" + name + "'");
        }
        std::size_t count = 1;
        for (std::uint8_t i = 0; i < rank; ++i) {
            std::uint32_t d = r.u32();
            if (d != p.dims[i]) {
                throw FormatError("quantized checkpoint: dim mismatch at '" + name + "'");
            }
            count *= d;
        }
        std::uint8_t dtype = r.u8();
        if (dtype == 1) {
            QuantParams qp;
            qp.scheme = QuantScheme::symmetric_int8_weights;
            qp.scale = r.f32();
            qp.zero_point = r.i32();
            std::vector<std::int8_t> q(count);
            r.raw(q.data(), count);
            for (std::size_t i = 0; i < count; ++i) {
                p.value[i] = q[i] * qp.scale;
            }
            std::string blk = name.substr(0, name.size() - 7);
            model.weight_qp[blk] = qp;
            model.qkernels[blk] = std::move(q);
        } else if (dtype == 0) {
            for (std::size_t i = 0; i < count; ++i) p.value[i] = static_cast<double>(r.f32());
        } else {
            throw FormatError("quantized checkpoint: unknown payload dtype");
        }
    });
    std::uint32_t n_act = r.u32();
    for (std::uint32_t i = 0; i < n_act; ++i) {
        std::string name = r.str();
        QuantParams qp;
        qp.scheme = QuantScheme::affine_uint8_activations;
        qp.scale = r.f32();
        qp.zero_point = r.i32();
        model.act_qp[name] = qp;
    }
    if (r.remaining() != 0) {
        throw FormatError("quantized checkpoint: trailing bytes");
    }
    return model;
}

QuantizedModel load_quantized_checkpoint(const std::string& path) {
    return load_quantized_checkpoint_bytes(read_file_bytes(path));
}

}  // namespace asbu
