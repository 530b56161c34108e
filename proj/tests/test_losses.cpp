#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "restyle/generator.hpp"
#include "restyle/losses.hpp"
#include "test_util.hpp"

using namespace restyle;
using testutil::random_image;

TEST_CASE("l2 loss basics and brute-force oracle") {
    ImageArray x = random_image(8, 1);
    CHECK(l2_loss(x, x) == 0.0);

    ImageArray lo({3, 8, 8}), hi({3, 8, 8});
    lo.fill(-1.0);
    hi.fill(1.0);
    CHECK(l2_loss(lo, hi) == doctest::Approx(4.0));

    ImageArray a = random_image(8, 2), b = random_image(8, 3);
    double ref = 0.0;
    for (std::size_t i = 0; i < a.numel(); ++i) ref += (a[i] - b[i]) * (a[i] - b[i]);
    ref /= static_cast<double>(a.numel());
    CHECK(std::abs(l2_loss(a, b) - ref) < 1e-12);
    CHECK(l2_loss(a, b) == l2_loss(b, a));
    CHECK_THROWS_AS(l2_loss(a, Tensor({3, 4, 4})), ContractError);

    Tensor da = l2_loss_grad(a, b);
    auto J = [&] { return l2_loss(a, b); };
    CHECK(testutil::fd_max_rel_error(a, da, J, 1e-6) < 1e-6);
}

TEST_CASE("perceptual loss: identity, symmetry, structure sensitivity") {
    PerceptualNet p(5);
    ImageArray x = random_image(16, 4);
    CHECK(p.loss(x, x) == 0.0);
    ImageArray y = random_image(16, 5);
    CHECK(std::abs(p.loss(x, y) - p.loss(y, x)) < 1e-12);
    CHECK(p.loss(x, y) > 0.0);
    CHECK_THROWS_AS(p.loss(x, Tensor({3, 8, 8})), ContractError);

    // same seed => identical values bitwise
    PerceptualNet p2(5);
    CHECK(p.loss(x, y) == p2.loss(x, y));

    // smooth structure: a 1-pixel translation should be perceptually closer
    // than a random perturbation of equal pixel L2, most of the time
    Generator g = Generator::build(1, 4, 16, 16, 100);
    int wins = 0;
    const int trials = 50;
    for (int t = 0; t < trials; ++t) {
        ImageArray img = g.synthesize(g.sample_latent(1000 + static_cast<std::uint64_t>(t)));
        const int res = 16;
        ImageArray shifted({3, res, res});
        for (int c = 0; c < 3; ++c)
            for (int yy = 0; yy < res; ++yy)
                for (int xx = 0; xx < res; ++xx)
                    shifted.at3(c, yy, xx) = img.at3(c, yy, std::min(xx + 1, res - 1));
        const double d = std::sqrt(l2_loss(shifted, img));
        ImageArray noise = random_image(res, 7000 + static_cast<std::uint64_t>(t));
        noise *= d * std::sqrt(static_cast<double>(img.numel())) / noise.norm2();
        ImageArray perturbed = img + noise;
        CHECK(std::abs(l2_loss(perturbed, img) - l2_loss(shifted, img)) < 1e-9);
        if (p.loss(shifted, img) < p.loss(perturbed, img)) ++wins;
    }
    CHECK(wins >= (trials * 7) / 10);
}

TEST_CASE("perceptual gradient matches finite differences") {
    PerceptualNet p(6);
    ImageArray a = random_image(16, 8), b = random_image(16, 9);
    Tensor da(a.shape());
    p.loss_with_grad(a, b, da);
    auto J = [&] { return p.loss(a, b); };
    CHECK(testutil::fd_max_rel_error(a, da, J, 1e-5, 48) < 1e-4);
}

TEST_CASE("similarity: unit embeddings, bounds, continuity") {
    SimilarityNet s(7);
    ImageArray x = random_image(16, 10);
    CHECK(s.similarity(x, x) == doctest::Approx(1.0).epsilon(1e-12));
    Tensor e = s.embed(x);
    CHECK(e.shape() == std::vector<int>{SimilarityNet::kEmbedDim});
    CHECK(e.norm2() == doctest::Approx(1.0).epsilon(1e-12));

    Generator g = Generator::build(2, 4, 16, 16, 100);
    double near = 0.0, rand_pair = 0.0;
    const int trials = 32;
    for (int t = 0; t < trials; ++t) {
        LatentCode w = g.sample_latent(2000 + static_cast<std::uint64_t>(t));
        LatentCode w2 = w;
        Tensor eps = testutil::random_tensor(w.shape(), 3000 + static_cast<std::uint64_t>(t), 0.05);
        w2 += eps;
        near += s.similarity(g.synthesize(w), g.synthesize(w2));
        rand_pair += s.similarity(g.synthesize(w),
                                  g.synthesize(g.sample_latent(5000 + static_cast<std::uint64_t>(t))));
        const double v = s.similarity(random_image(16, 100 + static_cast<std::uint64_t>(t)),
                                      random_image(16, 200 + static_cast<std::uint64_t>(t)));
        CHECK(v >= -1.0);
        CHECK(v <= 1.0);
    }
    CHECK(near / trials > rand_pair / trials);
}

TEST_CASE("similarity gradient matches finite differences") {
    SimilarityNet s(8);
    ImageArray a = random_image(16, 11), b = random_image(16, 12);
    Tensor da(a.shape());
    s.similarity_with_grad(a, b, da);
    auto J = [&] { return s.similarity(a, b); };
    CHECK(testutil::fd_max_rel_error(a, da, J, 1e-5, 48) < 1e-4);
}

TEST_CASE("weighted loss is exactly linear and drops zero-weight terms") {
    PerceptualNet p(9);
    SimilarityNet s(9);
    ImageArray y = random_image(16, 13), target = random_image(16, 14);
    LossWeights w{0.7, 0.3, 0.2};
    LossBreakdown bd = weighted_loss(&p, &s, y, target, w);
    CHECK(bd.total ==
          0.7 * bd.l2 + 0.3 * bd.perceptual + 0.2 * (1.0 - bd.similarity));
    CHECK(bd.l2 == l2_loss(y, target));
    CHECK(bd.perceptual == p.loss(y, target));
    CHECK(bd.similarity == s.similarity(y, target));

    // zero weight removes the gradient contribution entirely
    Tensor g_all(y.shape()), g_no_p(y.shape());
    weighted_loss(&p, &s, y, target, {0.7, 0.0, 0.2}, &g_no_p);
    weighted_loss(nullptr, &s, y, target, {0.7, 0.0, 0.2}, &g_all);
    for (std::size_t i = 0; i < g_all.numel(); ++i) CHECK(g_all[i] == g_no_p[i]);

    // full-gradient finite-difference check
    Tensor dy(y.shape());
    weighted_loss(&p, &s, y, target, w, &dy);
    auto J = [&] { return weighted_loss(&p, &s, y, target, w).total; };
    CHECK(testutil::fd_max_rel_error(y, dy, J, 1e-5, 48) < 1e-4);
}

TEST_CASE("timing helper") {
    const auto [v, t_noop] = timed([] { return 42; });
    CHECK(v == 42);
    CHECK(t_noop < 1e-3);
    CHECK(timed_void([] {}) >= 0.0);
}
