#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "asbu/network.hpp"
#include "oracles.hpp"

using namespace asbu;

TEST_CASE("effective kernel values") {
    CHECK(effective_kernel(3, 2) == 5);
    CHECK(effective_kernel(3, 3) == 7);
    CHECK(effective_kernel(3, 4) == 9);
    CHECK(effective_kernel(3, 5) == 11);
    CHECK(effective_kernel(3, 1) == 3);
    for (int k = 1; k <= 9; ++k) CHECK(effective_kernel(k, 1) == k);
    CHECK_THROWS_AS(effective_kernel(0, 1), ShapeError);
}

TEST_CASE("cumulative receptive field, hand-evaluated stacks") {
    RFTrace single = receptive_field({{"c", RFKind::conv, 3, 1, 1, false}});
    CHECK(single.final_rf() == 3);

    RFTrace stack = receptive_field({{"c1", RFKind::conv, 3, 1, 1, false},
                                     {"p", RFKind::pool, 2, 2, 1, false},
                                     {"c2", RFKind::conv, 3, 1, 1, false}});
    // 2*1 + 1*1 + 2*2 + 1 = 8
    CHECK(stack.final_rf() == 8);
    CHECK(stack.rows[0].rf == 3);
    CHECK(stack.rows[1].rf == 4);
    CHECK(stack.rows[1].eff_stride == 1);
    CHECK(stack.rows[2].eff_stride == 2);

    CHECK_THROWS_AS(receptive_field({}), ShapeError);
}

TEST_CASE("removing the last layer never increases the RF") {
    Rng rng(23);
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<RFLayer> layers;
        int n = 2 + rng.uniform_int(0, 6);
        for (int i = 0; i < n; ++i) {
            RFLayer l;
            l.name = "l" + std::to_string(i);
            l.kind = rng.bernoulli(0.3) ? RFKind::pool : RFKind::atrous_conv;
            l.kernel = l.kind == RFKind::pool ? 2 : 3;
            l.stride = rng.bernoulli(0.3) ? 2 : 1;
            l.dilation = 1 + rng.uniform_int(0, 3);
            layers.push_back(l);
        }
        RFTrace full = receptive_field(layers);
        layers.pop_back();
        if (!layers.empty()) {
            RFTrace shorter = receptive_field(layers);
            CHECK(shorter.final_rf() <= full.final_rf());
        }
        for (std::size_t i = 1; i < full.rows.size(); ++i) {
            CHECK(full.rows[i].rf >= full.rows[i - 1].rf);
        }
    }
}

TEST_CASE("default encoder traces match the empirical support oracle per stage") {
    for (Scaling s : {Scaling::OneSixteenth, Scaling::OneEighth}) {
        NetworkSpec spec = build_default_spec(s);
        std::vector<RFLayer> layers = encoder_rf_layers(spec);
        RFTrace trace = receptive_field(layers);
        for (std::size_t depth = 1; depth <= layers.size(); ++depth) {
            std::vector<RFLayer> prefix(layers.begin(), layers.begin() + depth);
            std::int64_t measured =
                oracle::empirical_rf(prefix, trace.rows[depth - 1].rf);
            CHECK(measured == trace.rows[depth - 1].rf);
        }
    }
}

TEST_CASE("eq-2 matches the empirical oracle on assorted stacks") {
    std::vector<std::vector<RFLayer>> specs = {
        {{"c", RFKind::conv, 5, 1, 1, false}},
        {{"c", RFKind::conv, 3, 2, 1, false}, {"c2", RFKind::atrous_conv, 3, 1, 4, false}},
        {{"c", RFKind::atrous_conv, 3, 1, 2, false},
         {"p", RFKind::pool, 2, 2, 1, false},
         {"c2", RFKind::atrous_conv, 3, 1, 3, false}},
        {{"c", RFKind::conv, 7, 2, 1, false},
         {"c2", RFKind::conv, 3, 1, 1, false},
         {"p", RFKind::pool, 3, 3, 1, false},
         {"c3", RFKind::atrous_conv, 5, 1, 2, false}},
        {{"a", RFKind::atrous_conv, 3, 1, 1, false},
         {"b", RFKind::atrous_conv, 3, 1, 2, false},
         {"c", RFKind::atrous_conv, 3, 1, 3, false},
         {"d", RFKind::atrous_conv, 3, 1, 4, false}},
        {{"p", RFKind::pool, 2, 2, 1, false},
         {"p2", RFKind::pool, 2, 2, 1, false},
         {"c", RFKind::conv, 3, 1, 1, false}},
        {{"c", RFKind::conv, 1, 1, 1, false}, {"c2", RFKind::atrous_conv, 3, 1, 6, false}},
        {{"c", RFKind::conv, 3, 3, 1, false}, {"c2", RFKind::conv, 3, 1, 1, false}},
    };
    for (const auto& layers : specs) {
        RFTrace trace = receptive_field(layers);
        CHECK(oracle::empirical_rf(layers, trace.final_rf()) == trace.final_rf());
    }
}

namespace {

std::vector<RFLayer> asb_schedule_stack(const std::vector<int>& dilations) {
    std::vector<RFLayer> layers;
    for (std::size_t i = 0; i < dilations.size(); ++i) {
        std::string n = "asb" + std::to_string(i + 1);
        layers.push_back({n + ".squeeze", RFKind::conv, 3, 1, 1, false});
        layers.push_back({n + ".ase3x3", RFKind::atrous_conv, 3, 1, dilations[i], true});
    }
    return layers;
}

}  // namespace

TEST_CASE("linearity: constant stack is exactly linear") {
    std::vector<RFLayer> layers;
    for (int i = 0; i < 5; ++i) {
        layers.push_back({"c" + std::to_string(i), RFKind::conv, 3, 1, 1, true});
    }
    LinearityReport rep = linearity_report(receptive_field(layers));
    CHECK(rep.max_ratio == doctest::Approx(1.0));
    CHECK(rep.near_linear);
}

TEST_CASE("linearity: default schedule near-linear, geometric schedule flagged") {
    NetworkSpec spec = build_default_spec(Scaling::OneSixteenth);
    LinearityReport def = linearity_report(receptive_field(encoder_rf_layers(spec)));
    CHECK(def.max_ratio <= 2.0);
    CHECK(def.near_linear);
    REQUIRE(def.stage_increments.size() == 7);
    // rise-then-fall shape of the dilation schedule, symmetric around stage 4
    for (std::size_t i = 1; i < 4; ++i) {
        CHECK(def.stage_increments[i] >= def.stage_increments[i - 1] - 2.0);
    }
    CHECK(def.stage_increments[3] == 10.0);  // dilation peak 4 -> 2+2*4
    CHECK(def.stage_increments[2] == def.stage_increments[4]);

    LinearityReport geo =
        linearity_report(receptive_field(asb_schedule_stack({1, 2, 4, 8, 16, 32, 64})));
    CHECK_FALSE(geo.near_linear);
    CHECK(geo.max_ratio > def.max_ratio);

    CHECK_THROWS_AS(linearity_report(receptive_field({{"c", RFKind::conv, 3, 1, 1, true}})),
                    ShapeError);
}

TEST_CASE("rf table and svg render") {
    NetworkSpec spec = build_default_spec(Scaling::OneEighth);
    RFTrace trace = receptive_field(encoder_rf_layers(spec));
    std::string table = format_rf_table(trace);
    CHECK(table.find("conv1") != std::string::npos);
    CHECK(table.find("asb7.ase3x3") != std::string::npos);
    std::string svg = rf_growth_svg(trace);
    CHECK(svg.find("<svg") != std::string::npos);
    CHECK(svg.find("polyline") != std::string::npos);
}
