#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdint>

#include "restyle/bootstrap.hpp"
#include "restyle/encoder.hpp"
#include "restyle/generator.hpp"
#include "restyle/schemes.hpp"
#include "test_util.hpp"

using namespace restyle;
using testutil::random_image;

namespace {

struct Fixture {
    Generator g_base = Generator::build(11, 4, 16, 16, 200);
    Generator g_styled = Generator::build(11, 4, 16, 16, 200).finetune_stylized("posterize", 40, 77);
    Encoder e_base = Encoder::build(EncoderVariant::Simple, 6, g_base, 21);
    Encoder e_styled = Encoder::build(EncoderVariant::Simple, 6, g_styled, 22);
    ImageArray x;

    Fixture() {
        Rng r(88);
        auto seed = [&](Encoder& e) {
            for (auto& entry : e.head_params.entries())
                for (std::size_t i = 0; i < entry.value.numel(); ++i)
                    entry.value[i] = 0.05 * r.gaussian();
        };
        seed(e_base);
        seed(e_styled);
        x = g_base.synthesize(g_base.sample_latent(303));
    }
};

}  // namespace

TEST_CASE("init mode string round-trip") {
    CHECK(init_mode_from_string("average") == InitMode::Average);
    CHECK(init_mode_from_string("bootstrapped") == InitMode::Bootstrapped);
    CHECK(to_string(InitMode::Average) == "average");
    CHECK(to_string(InitMode::Bootstrapped) == "bootstrapped");
    CHECK_THROWS_AS(init_mode_from_string("warmstart"), ConfigError);
}

TEST_CASE("bootstrapped init copies the base step latent bitwise") {
    Fixture f;
    BootstrapResult r = bootstrap_invert(f.e_base, f.e_styled, f.g_base, f.g_styled, f.x, 3,
                                         InitMode::Bootstrapped);
    CHECK(r.base_trace.scheme == "bootstrap_base");
    CHECK(r.styled_trace.scheme == "bootstrap_styled");
    REQUIRE(r.base_trace.steps.size() == 2);   // one base refinement step
    REQUIRE(r.styled_trace.steps.size() == 4); // init + 3 styled steps
    const LatentCode& w1 = r.base_trace.steps.back().w;
    const LatentCode& w_init = r.styled_trace.steps[0].w;
    REQUIRE(w1.numel() == w_init.numel());
    for (std::size_t i = 0; i < w1.numel(); ++i) CHECK(w1[i] == w_init[i]);
    // the init reconstruction is the base step's render, carried over as-is
    const ImageArray& y1 = r.base_trace.steps.back().y_hat;
    for (std::size_t i = 0; i < y1.numel(); ++i)
        CHECK(r.styled_trace.steps[0].y_hat[i] == y1[i]);
    CHECK(r.styled_trace.replay_exact());
    CHECK(r.styled_trace.metadata.at("init_mode") == "bootstrapped");
}

TEST_CASE("average init matches plain iterative inference on the styled pair") {
    Fixture f;
    BootstrapResult r = bootstrap_invert(f.e_base, f.e_styled, f.g_base, f.g_styled, f.x, 3,
                                         InitMode::Average);
    InversionTrace ref = restyle_infer(f.e_styled, f.g_styled, f.x, 3);
    REQUIRE(r.styled_trace.steps.size() == ref.steps.size());
    for (std::size_t t = 0; t < ref.steps.size(); ++t) {
        for (std::size_t i = 0; i < ref.steps[t].w.numel(); ++i)
            CHECK(r.styled_trace.steps[t].w[i] == ref.steps[t].w[i]);
        for (std::size_t i = 0; i < ref.steps[t].y_hat.numel(); ++i)
            CHECK(r.styled_trace.steps[t].y_hat[i] == ref.steps[t].y_hat[i]);
    }
    CHECK(r.styled_trace.metadata.at("init_mode") == "average");
}

TEST_CASE("zero styled steps re-renders the seed latent through the styled generator") {
    Fixture f;
    BootstrapResult r = bootstrap_invert(f.e_base, f.e_styled, f.g_base, f.g_styled, f.x, 0,
                                         InitMode::Bootstrapped);
    REQUIRE(r.styled_trace.steps.size() == 1);
    const LatentCode& w1 = r.base_trace.steps.back().w;
    ImageArray expected = f.g_styled.synthesize(w1);
    for (std::size_t i = 0; i < expected.numel(); ++i)
        CHECK(r.styled_trace.steps[0].y_hat[i] == expected[i]);
}

TEST_CASE("bootstrap input validation") {
    Fixture f;
    Encoder e3 = Encoder::build(EncoderVariant::Simple, 3, f.g_base, 30);
    CHECK_THROWS_AS(bootstrap_invert(e3, f.e_styled, f.g_base, f.g_styled, f.x, 2,
                                     InitMode::Average),
                    ContractError);
    Generator g_other = Generator::build(12, 6, 16, 16, 100);
    CHECK_THROWS_AS(bootstrap_invert(f.e_base, f.e_styled, f.g_base, g_other, f.x, 2,
                                     InitMode::Average),
                    ContractError);
    CHECK_THROWS_AS(bootstrap_invert(f.e_base, f.e_styled, f.g_base, f.g_styled, f.x, -1,
                                     InitMode::Average),
                    ContractError);
}

TEST_CASE("pixel correlation behaves like a correlation") {
    ImageArray a = random_image(16, 1);
    CHECK(pixel_correlation(a, a) == doctest::Approx(1.0).epsilon(1e-12));
    ImageArray neg = a;
    neg *= -1.0;
    CHECK(pixel_correlation(a, neg) == doctest::Approx(-1.0).epsilon(1e-12));
    ImageArray shifted = a;
    for (std::size_t i = 0; i < shifted.numel(); ++i) shifted[i] = 2.0 * a[i] + 3.0;
    CHECK(pixel_correlation(a, shifted) == doctest::Approx(1.0).epsilon(1e-12));
    // independent noise: near zero, well inside (-1, 1)
    ImageArray b = random_image(16, 2);
    const double c = pixel_correlation(a, b);
    CHECK(std::abs(c) < 0.2);
    CHECK_THROWS_AS(pixel_correlation(a, Tensor({3, 8, 8})), ContractError);

    // oracle on a tiny hand case: x = (0,1,2,...), y = x^2 over 4 values
    Tensor ta({1, 2, 2}), tb({1, 2, 2});
    for (int i = 0; i < 4; ++i) {
        ta[static_cast<std::size_t>(i)] = i;
        tb[static_cast<std::size_t>(i)] = i * i;
    }
    // means 1.5 and 3.5; cov = 5, sd_x = sqrt(5), sd_y = sqrt(41.(6)-12.25)... compute
    double mx = 1.5, my = 3.5, cov = 0, vx = 0, vy = 0;
    for (int i = 0; i < 4; ++i) {
        cov += (i - mx) * (i * i - my);
        vx += (i - mx) * (i - mx);
        vy += (i * i - my) * (i * i - my);
    }
    CHECK(pixel_correlation(ta, tb) == doctest::Approx(cov / std::sqrt(vx * vy)).epsilon(1e-12));
}

TEST_CASE("alignment probe: identical generators correlate perfectly") {
    Generator g = Generator::build(13, 4, 16, 16, 200);
    AlignmentReport rep = alignment_probe(g, g, 8, 5);
    CHECK(rep.paired_mean == doctest::Approx(1.0).epsilon(1e-12));
    for (double p : rep.paired) CHECK(p == doctest::Approx(1.0).epsilon(1e-12));
    // shuffled pairs are different images, so strictly below 1
    CHECK(rep.shuffled_mean < 1.0);
    CHECK(rep.pass);
    REQUIRE(rep.paired.size() == 8);
    REQUIRE(rep.shuffled.size() == 8);
}

TEST_CASE("alignment probe: fine-tuned generator stays aligned to its parent") {
    Fixture f;
    AlignmentReport rep = alignment_probe(f.g_base, f.g_styled, 16, 5);
    CHECK(rep.pass);
    // paired correlation exceeds shuffled by a comfortable statistical margin
    CHECK(rep.paired_mean - rep.shuffled_mean > 3.0 * rep.se_diff);

    CHECK_THROWS_AS(alignment_probe(f.g_base, f.g_styled, 0, 5), ContractError);
    Generator g_other = Generator::build(14, 6, 16, 16, 100);
    CHECK_THROWS_AS(alignment_probe(f.g_base, g_other, 4, 5), ContractError);
}
