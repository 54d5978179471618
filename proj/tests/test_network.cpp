#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>

#include "asbu/checkpoint.hpp"
#include "oracles.hpp"

using namespace asbu;

TEST_CASE("default spec pins pooling placement per scaling") {
    NetworkSpec s16 = build_default_spec(Scaling::OneSixteenth);
    CHECK(std::set<std::string>(s16.pool_after.begin(), s16.pool_after.end()) ==
          std::set<std::string>{"conv1", "asb3", "asb5"});
    CHECK(s16.downsample_factor() == 16);
    CHECK(s16.asb_configs.size() == 7);

    NetworkSpec s8 = build_default_spec(Scaling::OneEighth);
    CHECK(std::set<std::string>(s8.pool_after.begin(), s8.pool_after.end()) ==
          std::set<std::string>{"conv1", "asb3"});
    CHECK(s8.downsample_factor() == 8);

    // dilation schedule rises to a peak at asb4 then falls, symmetric
    std::vector<int> dil;
    for (const auto& c : s16.asb_configs) dil.push_back(c.dilation);
    CHECK(dil == std::vector<int>{1, 2, 3, 4, 3, 2, 1});
    for (int i = 0; i < 3; ++i) CHECK(dil[i] < dil[i + 1]);
    for (int i = 3; i < 6; ++i) CHECK(dil[i] > dil[i + 1]);
    for (int i = 0; i < 7; ++i) CHECK(dil[i] == dil[6 - i]);

    // expand totals non-decreasing, squeeze ratio below 1
    for (std::size_t i = 1; i < 7; ++i) {
        CHECK(s16.asb_configs[i].out_channels() >= s16.asb_configs[i - 1].out_channels());
    }
    for (const auto& c : s16.asb_configs) CHECK(c.ss3x3 < c.out_channels());

    // every long-connect stage uses dilation 1
    for (const auto& st : s16.decoder.stages) CHECK(st.asb.dilation == 1);
    CHECK(s16.decoder.stages.size() == s16.pool_after.size());
}

TEST_CASE("spec validation rejects inconsistent layouts") {
    NetworkSpec spec = build_default_spec(Scaling::OneSixteenth);
    spec.pool_after = {"conv1", "asb3"};  // wrong for 1/16
    CHECK_THROWS_AS(spec.validate(), ConfigError);

    spec = build_default_spec(Scaling::OneSixteenth);
    spec.decoder.stages[0].asb.dilation = 2;
    CHECK_THROWS_AS(spec.validate(), ConfigError);

    spec = build_default_spec(Scaling::OneSixteenth);
    spec.asb_configs.pop_back();
    CHECK_THROWS_AS(spec.validate(), ConfigError);

    spec = build_default_spec(Scaling::OneSixteenth);
    spec.decoder.stages.pop_back();
    CHECK_THROWS_AS(spec.validate(), ConfigError);
}

TEST_CASE("spec serialization round-trips canonically") {
    for (Scaling s : {Scaling::OneSixteenth, Scaling::OneEighth}) {
        NetworkSpec spec = build_default_spec(s);
        std::string text = serialize_spec(spec);
        NetworkSpec back = parse_spec(text);
        CHECK(back == spec);
        CHECK(serialize_spec(back) == text);
    }
    CHECK_THROWS_AS(parse_spec("format = bogus\n"), FormatError);
    std::string with_unknown = serialize_spec(build_default_spec(Scaling::OneEighth));
    with_unknown += "mystery_key = 3\n";
    CHECK_THROWS_AS(parse_spec(with_unknown), ConfigError);
}

TEST_CASE("build_network is deterministic and He-initialized") {
    NetworkSpec spec = build_default_spec(Scaling::OneSixteenth);
    Network a = build_network(spec, 42);
    Network b = build_network(spec, 42);
    bool identical = true;
    std::vector<ParamView> pa, pb;
    visit_params(a, [&](const ParamView& p) { pa.push_back(p); });
    visit_params(b, [&](const ParamView& p) { pb.push_back(p); });
    REQUIRE(pa.size() == pb.size());
    for (std::size_t i = 0; i < pa.size(); ++i) {
        CHECK(pa[i].name == pb[i].name);
        for (std::size_t k = 0; k < pa[i].size; ++k) {
            if (pa[i].value[k] != pb[i].value[k]) identical = false;
        }
    }
    CHECK(identical);

    Network c = build_network(spec, 43);
    CHECK(c.conv1.conv.kernel.v != a.conv1.conv.kernel.v);

    // sampled kernel variance ~ 2/fan_in within 10%
    const Tensor& k7 = a.asb[6].squeeze.conv.kernel;  // 48*96*3*3 > 10^4 weights
    REQUIRE(k7.size() >= 10000);
    double mean = 0.0;
    for (double v : k7.v) mean += v;
    mean /= static_cast<double>(k7.v.size());
    double var = 0.0;
    for (double v : k7.v) var += (v - mean) * (v - mean);
    var /= static_cast<double>(k7.v.size());
    double fan_in = 96.0 * 9.0;
    CHECK(var == doctest::Approx(2.0 / fan_in).epsilon(0.10));
}

TEST_CASE("parameter count equals the closed-form layer arithmetic") {
    for (Scaling s : {Scaling::OneSixteenth, Scaling::OneEighth}) {
        NetworkSpec spec = build_default_spec(s);
        Network net = build_network(spec, 1);

        auto conv_params = [](std::int64_t oc, std::int64_t ic, std::int64_t k) {
            return oc * ic * k * k + oc;
        };
        std::int64_t expected = conv_params(spec.conv1.filters, spec.input_channels, 3) +
                                2 * spec.conv1.filters;  // conv1 + bn gamma/beta
        int ch = spec.conv1.filters;
        for (const ASBLayerConfig& c : spec.asb_configs) {
            expected += asb_parameter_count(ch, c);
            expected += 2 * (c.ss3x3 + c.out_channels());  // bn gamma/beta per sub-conv
            ch = c.out_channels();
        }
        int dec = ch;
        for (const DecoderStageSpec& st : spec.decoder.stages) {
            int skip_ch = st.skip == "conv1"
                              ? spec.conv1.filters
                              : spec.asb_configs[st.skip == "asb3" ? 2 : 4].out_channels();
            expected += conv_params(st.proj_filters, skip_ch, 1);
            expected += conv_params(st.merge_filters(), dec + st.proj_filters, 1);
            expected += asb_parameter_count(st.merge_filters(), st.asb);
            expected += 2 * (st.asb.ss3x3 + st.asb.out_channels());
            dec = st.asb.out_channels();
        }
        expected += conv_params(spec.decoder.head.c1x1, dec, 1);
        expected += conv_params(spec.decoder.head.c3x3, spec.decoder.head.c1x1, 3);

        CHECK(parameter_count(net) == expected);
    }
}

TEST_CASE("encoder bottleneck and skip resolutions") {
    NetworkSpec spec = build_default_spec(Scaling::OneSixteenth);
    Network net = build_network(spec, 3);
    Tensor x(1, 3, 224, 224, 0.25);
    EncoderResult enc = encoder_forward(net, x);
    CHECK(enc.bottleneck.shape.h == 14);
    CHECK(enc.bottleneck.shape.w == 14);
    CHECK(enc.bottleneck.shape.c == spec.asb_configs[6].out_channels());

    // skips are captured immediately before each pooling step:
    // conv1 output at 1/2 (stride-2 stem), asb3 at 1/4, asb5 at 1/8
    REQUIRE(enc.skips.size() == 3);
    CHECK(enc.skips.at("conv1").shape.h == 112);
    CHECK(enc.skips.at("asb3").shape.h == 56);
    CHECK(enc.skips.at("asb5").shape.h == 28);

    NetworkSpec spec8 = build_default_spec(Scaling::OneEighth);
    Network net8 = build_network(spec8, 3);
    Tensor x8(1, 3, 64, 64, 0.25);
    EncoderResult enc8 = encoder_forward(net8, x8);
    CHECK(enc8.bottleneck.shape.h == 8);
    REQUIRE(enc8.skips.size() == 2);
    CHECK(enc8.skips.at("conv1").shape.h == 32);
    CHECK(enc8.skips.at("asb3").shape.h == 16);

    Tensor bad(1, 3, 100, 100);  // not divisible by 16
    CHECK_THROWS_AS(encoder_forward(net, bad), ShapeError);
}

TEST_CASE("decoder restores input resolution with sigmoid outputs") {
    Rng rng(9);
    for (auto [scaling, size] : {std::pair{Scaling::OneSixteenth, 224},
                                 std::pair{Scaling::OneSixteenth, 128},
                                 std::pair{Scaling::OneEighth, 64}}) {
        NetworkSpec spec = build_default_spec(scaling);
        Network net = build_network(spec, 5);
        Tensor x = oracle::random_tensor({1, 3, size, size}, rng, 0.0, 1.0);
        EncoderResult enc = encoder_forward(net, x);
        Tensor mask = decoder_forward(net, enc.bottleneck, enc.skips);
        CHECK(mask.shape == Shape4{1, 1, size, size});
        for (double v : mask.v) {
            CHECK(v > 0.0);
            CHECK(v < 1.0);
        }
        Tensor full = network_forward(net, x, false, nullptr);
        for (std::size_t i = 0; i < mask.v.size(); ++i) CHECK(full.v[i] == mask.v[i]);
    }
}

TEST_CASE("forward is bit-exact across runs") {
    NetworkSpec spec = build_default_spec(Scaling::OneEighth);
    Network net = build_network(spec, 7);
    Rng rng(21);
    Tensor x = oracle::random_tensor({2, 3, 32, 32}, rng, 0.0, 1.0);
    Tensor a = network_forward(net, x, false, nullptr);
    Tensor b = network_forward(net, x, false, nullptr);
    CHECK(a.v == b.v);
}

TEST_CASE("checkpoint round-trip is bit-exact") {
    NetworkSpec spec = build_default_spec(Scaling::OneEighth);
    Network net = build_network(spec, 11);
    std::vector<std::uint8_t> bytes = save_checkpoint_bytes(net);

    Network back = load_checkpoint_bytes(bytes);
    CHECK(save_checkpoint_bytes(back) == bytes);

    // init snaps weights to f32, so the reloaded net forwards identically
    Rng rng(31);
    Tensor x = oracle::random_tensor({1, 3, 32, 32}, rng, 0.0, 1.0);
    Tensor a = network_forward(net, x, false, nullptr);
    Tensor b = network_forward(back, x, false, nullptr);
    CHECK(a.v == b.v);
}

TEST_CASE("checkpoint corruption and mismatch detection") {
    NetworkSpec spec8 = build_default_spec(Scaling::OneEighth);
    Network net = build_network(spec8, 1);
    std::vector<std::uint8_t> bytes = save_checkpoint_bytes(net);

    // corrupted magic (CRC repaired to isolate the magic check)
    std::vector<std::uint8_t> bad = bytes;
    bad[0] = 'X';
    CHECK_THROWS_AS(load_checkpoint_bytes(bad), FormatError);

    std::vector<std::uint8_t> truncated(bytes.begin(), bytes.begin() + 8);
    CHECK_THROWS_AS(load_checkpoint_bytes(truncated), FormatError);

    // single-byte corruption is caught by the CRC
    std::vector<std::uint8_t> flipped = bytes;
    flipped[bytes.size() / 2] ^= 0x40;
    CHECK_THROWS_AS(load_checkpoint_bytes(flipped), FormatError);

    // checkpoint from a 1/8 spec refused by a 1/16 expectation
    NetworkSpec spec16 = build_default_spec(Scaling::OneSixteenth);
    CHECK_THROWS_AS(load_checkpoint_bytes(bytes, &spec16), FormatError);
    CHECK_NOTHROW(load_checkpoint_bytes(bytes, &spec8));
}

TEST_CASE("training-mode forward/backward leaves finite gradients everywhere") {
    NetworkSpec spec = build_default_spec(Scaling::OneEighth);
    Network net = build_network(spec, 17);
    Rng rng(8);
    Tensor x = oracle::random_tensor({2, 3, 16, 16}, rng, 0.0, 1.0);
    Tensor labels(2, 1, 16, 16);
    for (double& v : labels.v) v = rng.bernoulli(0.4) ? 1.0 : 0.0;

    NetTrace trace;
    network_forward(net, x, true, &trace);
    Tensor g = weighted_bce_grad_from_logits(trace.logits, labels, 2.0);
    zero_grads(net);
    network_backward(net, trace, g);

    std::int64_t nonzero = 0;
    visit_params(net, [&](const ParamView& p) {
        if (!p.grad) return;
        for (std::size_t i = 0; i < p.size; ++i) {
            CHECK(std::isfinite(p.grad[i]));
            nonzero += p.grad[i] != 0.0;
        }
    });
    CHECK(nonzero > 1000);
}
