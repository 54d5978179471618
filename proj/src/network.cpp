#include "asbu/network.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "asbu/config.hpp"

namespace asbu {

std::string scaling_str(Scaling s) { return s == Scaling::OneEighth ? "1/8" : "1/16"; }

Scaling parse_scaling(const std::string& s) {
    if (s == "1/8") return Scaling::OneEighth;
    if (s == "1/16") return Scaling::OneSixteenth;
    throw ConfigError("scaling must be 1/8 or 1/16, got '" + s + "'");
}

namespace {

std::string asb_stage_name(int i) { return "asb" + std::to_string(i + 1); }

int stage_out_channels(const NetworkSpec& spec, const std::string& stage) {
    if (stage == "conv1") return spec.conv1.filters;
    for (int i = 0; i < static_cast<int>(spec.asb_configs.size()); ++i) {
        if (stage == asb_stage_name(i)) return spec.asb_configs[i].out_channels();
    }
    throw ConfigError("unknown encoder stage '" + stage + "'");
}

}  // namespace

void NetworkSpec::validate() const {
    if (input_channels < 1) throw ConfigError("spec: input_channels must be >= 1");
    if (conv1.filters < 1 || conv1.kernel < 1 || conv1.stride < 1) {
        throw ConfigError("spec: bad conv1");
    }
    if (asb_configs.size() != 7) {
        throw ConfigError("spec: encoder must have exactly 7 ASB layers, got " +
                          std::to_string(asb_configs.size()));
    }
    for (const ASBLayerConfig& c : asb_configs) c.validate();

    std::set<std::string> pools(pool_after.begin(), pool_after.end());
    if (pools.size() != pool_after.size()) throw ConfigError("spec: duplicate pool stage");
    const std::set<std::string> expected =
        scaling == Scaling::OneSixteenth ? std::set<std::string>{"conv1", "asb3", "asb5"}
                                         : std::set<std::string>{"conv1", "asb3"};
    if (pools != expected) {
        throw ConfigError("spec: pooling placement does not match scaling " +
                          scaling_str(scaling));
    }

    if (decoder.stages.size() != pool_after.size()) {
        throw ConfigError("spec: long-connect stage count must equal pooling step count");
    }
    // Decode order mirrors the encoder pools, deepest resolution first.
    std::vector<std::string> encoder_order;
    if (std::find(pool_after.begin(), pool_after.end(), "conv1") != pool_after.end()) {
        encoder_order.push_back("conv1");
    }
    for (int i = 0; i < 7; ++i) {
        std::string n = asb_stage_name(i);
        if (pools.count(n)) encoder_order.push_back(n);
    }
    for (std::size_t i = 0; i < decoder.stages.size(); ++i) {
        const DecoderStageSpec& st = decoder.stages[i];
        if (st.skip != encoder_order[encoder_order.size() - 1 - i]) {
            throw ConfigError("spec: decoder stage " + std::to_string(i + 1) +
                              " must consume skip '" +
                              encoder_order[encoder_order.size() - 1 - i] + "'");
        }
        if (st.proj_filters < 1) throw ConfigError("spec: skip projection filters must be >= 1");
        if (st.asb.dilation != 1) {
            throw ConfigError("spec: long-connect ASB layers must use dilation 1");
        }
        st.asb.validate();
    }
    if (decoder.head.c1x1 < 1 || decoder.head.c3x3 < 1) throw ConfigError("spec: bad head");
}

int NetworkSpec::downsample_factor() const {
    int f = conv1.stride;
    for (std::size_t i = 0; i < pool_after.size(); ++i) f *= 2;
    return f;
}

NetworkSpec build_default_spec(Scaling scaling) {
    NetworkSpec spec;
    spec.scaling = scaling;
    spec.input_channels = 3;
    spec.use_batchnorm = true;
    spec.conv1 = Conv1Spec{16, 3, 2};

    const int dilation[7] = {1, 2, 3, 4, 3, 2, 1};
    const int expand_total[7] = {32, 48, 48, 64, 64, 96, 96};
    for (int i = 0; i < 7; ++i) {
        ASBLayerConfig c;
        c.ss3x3 = expand_total[i] / 2;
        c.e1x1 = expand_total[i] / 2;
        c.se3x3 = expand_total[i] / 4;
        c.ase3x3 = expand_total[i] / 4;
        c.dilation = dilation[i];
        c.use_batchnorm = true;
        spec.asb_configs.push_back(c);
    }

    spec.pool_after = scaling == Scaling::OneSixteenth
                          ? std::vector<std::string>{"conv1", "asb3", "asb5"}
                          : std::vector<std::string>{"conv1", "asb3"};

    auto stage = [](const std::string& skip, int proj, int total) {
        DecoderStageSpec st;
        st.skip = skip;
        st.proj_filters = proj;
        st.asb.ss3x3 = total / 2;
        st.asb.e1x1 = total / 2;
        st.asb.se3x3 = total / 4;
        st.asb.ase3x3 = total / 4;
        st.asb.dilation = 1;
        st.asb.use_batchnorm = true;
        return st;
    };
    if (scaling == Scaling::OneSixteenth) {
        spec.decoder.stages = {stage("asb5", 48, 64), stage("asb3", 24, 48),
                               stage("conv1", 16, 32)};
    } else {
        spec.decoder.stages = {stage("asb3", 24, 48), stage("conv1", 16, 32)};
    }
    spec.decoder.head = HeadSpec{16, 1};
    spec.validate();
    return spec;
}

std::string serialize_spec(const NetworkSpec& spec) {
    std::ostringstream os;
    os << "format = asbu-netspec-v1\n";
    os << "scaling = " << scaling_str(spec.scaling) << "\n";
    os << "input_channels = " << spec.input_channels << "\n";
    os << "use_batchnorm = " << (spec.use_batchnorm ? 1 : 0) << "\n";
    os << "conv1.filters = " << spec.conv1.filters << "\n";
    os << "conv1.kernel = " << spec.conv1.kernel << "\n";
    os << "conv1.stride = " << spec.conv1.stride << "\n";
    os << "asb.count = " << spec.asb_configs.size() << "\n";
    for (std::size_t i = 0; i < spec.asb_configs.size(); ++i) {
        const ASBLayerConfig& c = spec.asb_configs[i];
        std::string p = "asb" + std::to_string(i + 1) + ".";
        os << p << "squeeze = " << c.ss3x3 << "\n";
        os << p << "e1x1 = " << c.e1x1 << "\n";
        os << p << "se3x3 = " << c.se3x3 << "\n";
        os << p << "ase3x3 = " << c.ase3x3 << "\n";
        os << p << "dilation = " << c.dilation << "\n";
    }
    os << "pool_after = ";
    for (std::size_t i = 0; i < spec.pool_after.size(); ++i) {
        os << (i ? "," : "") << spec.pool_after[i];
    }
    os << "\n";
    os << "decoder.stages = " << spec.decoder.stages.size() << "\n";
    for (std::size_t i = 0; i < spec.decoder.stages.size(); ++i) {
        const DecoderStageSpec& st = spec.decoder.stages[i];
        std::string p = "dec" + std::to_string(i + 1) + ".";
        os << p << "skip = " << st.skip << "\n";
        os << p << "proj = " << st.proj_filters << "\n";
        os << p << "squeeze = " << st.asb.ss3x3 << "\n";
        os << p << "e1x1 = " << st.asb.e1x1 << "\n";
        os << p << "se3x3 = " << st.asb.se3x3 << "\n";
        os << p << "ase3x3 = " << st.asb.ase3x3 << "\n";
    }
    os << "head.c1x1 = " << spec.decoder.head.c1x1 << "\n";
    os << "head.c3x3 = " << spec.decoder.head.c3x3 << "\n";
    return os.str();
}

NetworkSpec parse_spec(const std::string& text) {
    KVConfig kv = KVConfig::parse(text);
    if (kv.get_or("format", "") != "asbu-netspec-v1") {
        throw FormatError("spec blob: unknown format tag");
    }
    NetworkSpec spec;
    spec.scaling = parse_scaling(kv.get("scaling"));
    spec.input_channels = kv.get_int("input_channels");
    spec.use_batchnorm = kv.get_bool("use_batchnorm");
    spec.conv1.filters = kv.get_int("conv1.filters");
    spec.conv1.kernel = kv.get_int("conv1.kernel");
    spec.conv1.stride = kv.get_int("conv1.stride");

    std::vector<std::string> known = {"format",        "scaling",      "input_channels",
                                      "use_batchnorm", "conv1.filters", "conv1.kernel",
                                      "conv1.stride",  "asb.count",    "pool_after",
                                      "decoder.stages", "head.c1x1",   "head.c3x3"};

    int n_asb = kv.get_int("asb.count");
    for (int i = 0; i < n_asb; ++i) {
        std::string p = "asb" + std::to_string(i + 1) + ".";
        ASBLayerConfig c;
        c.ss3x3 = kv.get_int(p + "squeeze");
        c.e1x1 = kv.get_int(p + "e1x1");
        c.se3x3 = kv.get_int(p + "se3x3");
        c.ase3x3 = kv.get_int(p + "ase3x3");
        c.dilation = kv.get_int(p + "dilation");
        c.use_batchnorm = spec.use_batchnorm;
        spec.asb_configs.push_back(c);
        for (const char* f : {"squeeze", "e1x1", "se3x3", "ase3x3", "dilation"}) {
            known.push_back(p + f);
        }
    }

    std::string pools = kv.get("pool_after");
    std::size_t pos = 0;
    while (pos < pools.size()) {
        std::size_t comma = pools.find(',', pos);
        if (comma == std::string::npos) comma = pools.size();
        spec.pool_after.push_back(pools.substr(pos, comma - pos));
        pos = comma + 1;
    }

    int n_dec = kv.get_int("decoder.stages");
    for (int i = 0; i < n_dec; ++i) {
        std::string p = "dec" + std::to_string(i + 1) + ".";
        DecoderStageSpec st;
        st.skip = kv.get(p + "skip");
        st.proj_filters = kv.get_int(p + "proj");
        st.asb.ss3x3 = kv.get_int(p + "squeeze");
        st.asb.e1x1 = kv.get_int(p + "e1x1");
        st.asb.se3x3 = kv.get_int(p + "se3x3");
        st.asb.ase3x3 = kv.get_int(p + "ase3x3");
        st.asb.dilation = 1;
        st.asb.use_batchnorm = spec.use_batchnorm;
        spec.decoder.stages.push_back(st);
        for (const char* f : {"skip", "proj", "squeeze", "e1x1", "se3x3", "ase3x3"}) {
            known.push_back(p + f);
        }
    }
    spec.decoder.head.c1x1 = kv.get_int("head.c1x1");
    spec.decoder.head.c3x3 = kv.get_int("head.c3x3");

    kv.require_known(known);
    spec.validate();
    return spec;
}

Network build_network(const NetworkSpec& spec, std::uint64_t seed) {
    spec.validate();
    Rng rng(seed);
    Network net;
    net.spec = spec;
    net.conv1 = make_conv_block("conv1", spec.input_channels, spec.conv1.filters,
                                spec.conv1.kernel, spec.conv1.stride, 1, spec.use_batchnorm,
                                true, rng);
    int channels = spec.conv1.filters;
    for (int i = 0; i < 7; ++i) {
        net.asb.push_back(make_asb_layer(asb_stage_name(i), channels, spec.asb_configs[i], rng));
        channels = spec.asb_configs[i].out_channels();
    }
    int dec_channels = channels;  // bottleneck width
    for (std::size_t i = 0; i < spec.decoder.stages.size(); ++i) {
        const DecoderStageSpec& st = spec.decoder.stages[i];
        std::string p = "dec" + std::to_string(i + 1);
        DecoderStageWeights w;
        w.spec = st;
        w.proj = make_conv_block(p + ".proj", stage_out_channels(spec, st.skip),
                                 st.proj_filters, 1, 1, 1, false, true, rng);
        w.merge = make_conv_block(p + ".merge", dec_channels + st.proj_filters,
                                  st.merge_filters(), 1, 1, 1, false, true, rng);
        w.asb = make_asb_layer(p + ".asb", st.merge_filters(), st.asb, rng);
        dec_channels = st.asb.out_channels();
        net.stages.push_back(std::move(w));
    }
    net.head1 = make_conv_block("head.c1x1", dec_channels, spec.decoder.head.c1x1, 1, 1, 1,
                                false, true, rng);
    net.head3 = make_conv_block("head.c3x3", spec.decoder.head.c1x1, spec.decoder.head.c3x3, 3,
                                1, 1, false, false, rng);
    return net;
}

namespace {

void visit_block(ConvBlock& blk, const std::function<void(const ParamView&)>& fn) {
    blk.ensure_grads();
    const Shape4& ks = blk.conv.kernel.shape;
    fn({blk.name + ".kernel",
        {static_cast<std::uint32_t>(ks.n), static_cast<std::uint32_t>(ks.c),
         static_cast<std::uint32_t>(ks.h), static_cast<std::uint32_t>(ks.w)},
        blk.conv.kernel.v.data(), blk.conv.kernel.grad->data(), blk.conv.kernel.v.size(), true});
    fn({blk.name + ".bias",
        {static_cast<std::uint32_t>(blk.conv.bias.size())},
        blk.conv.bias.data(), blk.grad_bias.data(), blk.conv.bias.size(), true});
    if (blk.bn) {
        fn({blk.name + ".bn.gamma",
            {static_cast<std::uint32_t>(blk.bn->gamma.size())},
            blk.bn->gamma.data(), blk.grad_gamma.data(), blk.bn->gamma.size(), true});
        fn({blk.name + ".bn.beta",
            {static_cast<std::uint32_t>(blk.bn->beta.size())},
            blk.bn->beta.data(), blk.grad_beta.data(), blk.bn->beta.size(), true});
        fn({blk.name + ".bn.running_mean",
            {static_cast<std::uint32_t>(blk.bn->running_mean.size())},
            blk.bn->running_mean.data(), nullptr, blk.bn->running_mean.size(), false});
        fn({blk.name + ".bn.running_var",
            {static_cast<std::uint32_t>(blk.bn->running_var.size())},
            blk.bn->running_var.data(), nullptr, blk.bn->running_var.size(), false});
    }
}

void visit_asb(ASBWeights& asb, const std::function<void(const ParamView&)>& fn) {
    visit_block(asb.squeeze, fn);
    visit_block(asb.e1x1, fn);
    visit_block(asb.se3x3, fn);
    visit_block(asb.ase3x3, fn);
}

}  // namespace

void visit_params(Network& net, const std::function<void(const ParamView&)>& fn) {
    visit_block(net.conv1, fn);
    for (ASBWeights& a : net.asb) visit_asb(a, fn);
    for (DecoderStageWeights& st : net.stages) {
        visit_block(st.proj, fn);
        visit_block(st.merge, fn);
        visit_asb(st.asb, fn);
    }
    visit_block(net.head1, fn);
    visit_block(net.head3, fn);
}

std::int64_t parameter_count(Network& net) {
    std::int64_t n = 0;
    visit_params(net, [&](const ParamView& p) {
        if (p.trainable) n += static_cast<std::int64_t>(p.size);
    });
    return n;
}

void zero_grads(Network& net) {
    visit_params(net, [](const ParamView& p) {
        if (p.grad) std::fill(p.grad, p.grad + p.size, 0.0);
    });
}

namespace {

bool is_pooled(const NetworkSpec& spec, const std::string& stage) {
    return std::find(spec.pool_after.begin(), spec.pool_after.end(), stage) !=
           spec.pool_after.end();
}

void observe_asb(const ActivationObserver* obs, ASBWeights& layer, const Tensor& input,
                 const ASBTrace& tr) {
    if (!obs) return;
    (*obs)(layer.squeeze.name, input);
    (*obs)(layer.e1x1.name, tr.squeeze_out);
    (*obs)(layer.se3x3.name, tr.squeeze_out);
    (*obs)(layer.ase3x3.name, tr.squeeze_out);
}

Tensor run_encoder(Network& net, const Tensor& x, bool training, EncoderTrace& tr,
                   const ActivationObserver* obs) {
    const int factor = net.spec.downsample_factor();
    if (x.shape.h % factor != 0 || x.shape.w % factor != 0) {
        throw ShapeError("encoder: input " + x.shape.str() + " not divisible by " +
                         std::to_string(factor));
    }
    tr.input = x;
    if (obs) (*obs)(net.conv1.name, x);
    tr.conv1_out = conv_block_forward(x, net.conv1, training, &tr.conv1_tr);

    PoolParams pool{2, 2};
    Tensor current = tr.conv1_out;
    if (is_pooled(net.spec, "conv1")) {
        tr.skips["conv1"] = tr.conv1_out;
        PoolResult pr = maxpool_forward(current, pool);
        tr.pools["conv1"] = PoolTrace{std::move(pr.argmax), current.shape};
        current = std::move(pr.out);
    }
    tr.asb_in.resize(7);
    tr.asb_out.resize(7);
    tr.asb_tr.resize(7);
    for (int i = 0; i < 7; ++i) {
        tr.asb_in[i] = std::move(current);
        tr.asb_out[i] = asb_forward(tr.asb_in[i], net.asb[i], training, &tr.asb_tr[i]);
        observe_asb(obs, net.asb[i], tr.asb_in[i], tr.asb_tr[i]);
        current = tr.asb_out[i];
        std::string stage = asb_stage_name(i);
        if (is_pooled(net.spec, stage)) {
            tr.skips[stage] = tr.asb_out[i];
            PoolResult pr = maxpool_forward(current, pool);
            tr.pools[stage] = PoolTrace{std::move(pr.argmax), current.shape};
            current = std::move(pr.out);
        }
    }
    return current;
}

Tensor run_decoder(Network& net, const Tensor& bottleneck,
                   const std::map<std::string, Tensor>& skips, bool training, NetTrace& tr,
                   int out_h, int out_w, const ActivationObserver* obs) {
    Tensor current = bottleneck;
    tr.stages.resize(net.stages.size());
    for (std::size_t i = 0; i < net.stages.size(); ++i) {
        DecoderStageWeights& sw = net.stages[i];
        DecoderStageTrace& st = tr.stages[i];
        auto skip_it = skips.find(sw.spec.skip);
        if (skip_it == skips.end()) {
            throw ShapeError("decoder: missing skip '" + sw.spec.skip + "'");
        }
        st.dec_in = std::move(current);
        st.up = bilinear_resize(st.dec_in, st.dec_in.shape.h * 2, st.dec_in.shape.w * 2);
        if (obs) (*obs)(sw.proj.name, skip_it->second);
        st.proj_out = conv_block_forward(skip_it->second, sw.proj, training, &st.proj_tr);
        st.cat = concat_channels({&st.up, &st.proj_out});
        if (obs) (*obs)(sw.merge.name, st.cat);
        st.merge_out = conv_block_forward(st.cat, sw.merge, training, &st.merge_tr);
        st.asb_out = asb_forward(st.merge_out, sw.asb, training, &st.asb_tr);
        observe_asb(obs, sw.asb, st.merge_out, st.asb_tr);
        current = st.asb_out;
    }
    if (obs) (*obs)(net.head1.name, current);
    tr.head1_out = conv_block_forward(current, net.head1, training, &tr.head1_tr);
    if (obs) (*obs)(net.head3.name, tr.head1_out);
    tr.head3_out = conv_block_forward(tr.head1_out, net.head3, training, &tr.head3_tr);
    tr.logits = bilinear_resize(tr.head3_out, out_h, out_w);
    tr.mask = sigmoid(tr.logits);
    return tr.mask;
}

}  // namespace

EncoderResult encoder_forward(Network& net, const Tensor& x, bool training) {
    EncoderTrace tr;
    Tensor bottleneck = run_encoder(net, x, training, tr, nullptr);
    return EncoderResult{std::move(bottleneck), std::move(tr.skips)};
}

Tensor decoder_forward(Network& net, const Tensor& bottleneck,
                       const std::map<std::string, Tensor>& skips, bool training) {
    NetTrace tr;
    const int factor = net.spec.downsample_factor();
    return run_decoder(net, bottleneck, skips, training, tr, bottleneck.shape.h * factor,
                       bottleneck.shape.w * factor, nullptr);
}

Tensor network_forward(Network& net, const Tensor& x, bool training, NetTrace* trace,
                       const ActivationObserver* observer) {
    NetTrace local;
    NetTrace& tr = trace ? *trace : local;
    Tensor bottleneck = run_encoder(net, x, training, tr.enc, observer);
    return run_decoder(net, bottleneck, tr.enc.skips, training, tr, x.shape.h, x.shape.w,
                       observer);
}

void network_backward(Network& net, NetTrace& trace, const Tensor& grad_logits) {
    check_same_shape(trace.logits, grad_logits, "network_backward");

    Tensor g = bilinear_resize_backward(trace.head3_out.shape, grad_logits);
    g = conv_block_backward(trace.head1_out, trace.head3_out, net.head3, trace.head3_tr, g);
    const Tensor& head_in =
        trace.stages.empty() ? trace.enc.asb_out.back() : trace.stages.back().asb_out;
    g = conv_block_backward(head_in, trace.head1_out, net.head1, trace.head1_tr, g);

    std::map<std::string, Tensor> skip_grads;
    for (std::size_t ri = net.stages.size(); ri-- > 0;) {
        DecoderStageWeights& sw = net.stages[ri];
        DecoderStageTrace& st = trace.stages[ri];
        g = asb_backward(st.merge_out, st.asb_out, sw.asb, st.asb_tr, g);
        g = conv_block_backward(st.cat, st.merge_out, sw.merge, st.merge_tr, g);
        std::vector<Tensor> split =
            concat_channels_backward({st.up.shape, st.proj_out.shape}, g);
        const Tensor& skip_in = trace.enc.skips.at(sw.spec.skip);
        Tensor sg = conv_block_backward(skip_in, st.proj_out, sw.proj, st.proj_tr, split[1]);
        skip_grads[sw.spec.skip] = std::move(sg);
        g = bilinear_resize_backward(st.dec_in.shape, split[0]);
    }

    // Encoder, deepest stage first.
    for (int i = 6; i >= 0; --i) {
        std::string stage = asb_stage_name(i);
        if (trace.enc.pools.count(stage)) {
            const PoolTrace& pt = trace.enc.pools.at(stage);
            g = maxpool_backward(pt.in_shape, pt.argmax, g);
        }
        auto sg = skip_grads.find(stage);
        if (sg != skip_grads.end()) {
            for (std::size_t k = 0; k < g.v.size(); ++k) g.v[k] += sg->second.v[k];
        }
        g = asb_backward(trace.enc.asb_in[i], trace.enc.asb_out[i], net.asb[i],
                         trace.enc.asb_tr[i], g);
    }
    if (trace.enc.pools.count("conv1")) {
        const PoolTrace& pt = trace.enc.pools.at("conv1");
        g = maxpool_backward(pt.in_shape, pt.argmax, g);
    }
    auto sg = skip_grads.find("conv1");
    if (sg != skip_grads.end()) {
        for (std::size_t k = 0; k < g.v.size(); ++k) g.v[k] += sg->second.v[k];
    }
    conv_block_backward(trace.enc.input, trace.enc.conv1_out, net.conv1, trace.enc.conv1_tr, g);
}

std::vector<RFLayer> encoder_rf_layers(const NetworkSpec& spec) {
    std::vector<RFLayer> layers;
    layers.push_back({"conv1", RFKind::conv, spec.conv1.kernel, spec.conv1.stride, 1, false});
    auto add_pool = [&](const std::string& after) {
        layers.push_back({"pool(" + after + ")", RFKind::pool, 2, 2, 1, false});
    };
    if (is_pooled(spec, "conv1")) add_pool("conv1");
    for (int i = 0; i < 7; ++i) {
        std::string name = asb_stage_name(i);
        const ASBLayerConfig& c = spec.asb_configs[i];
        layers.push_back({name + ".squeeze", RFKind::conv, 3, 1, 1, false});
        layers.push_back({name + ".ase3x3", RFKind::atrous_conv, 3, 1, c.dilation, true});
        if (is_pooled(spec, name)) add_pool(name);
    }
    return layers;
}

}  // namespace asbu
