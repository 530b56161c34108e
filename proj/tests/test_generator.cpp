#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "restyle/generator.hpp"
#include "restyle/losses.hpp"
#include "test_util.hpp"

using namespace restyle;

TEST_CASE("build validates its arguments") {
    CHECK_THROWS_AS(Generator::build(1, 2, 64, 32, 100), ConfigError);   // k < 3
    CHECK_THROWS_AS(Generator::build(1, 8, 4, 32, 100), ConfigError);    // d < 8
    CHECK_THROWS_AS(Generator::build(1, 8, 64, 24, 100), ConfigError);   // bad resolution
    CHECK_THROWS_AS(Generator::build(1, 8, 64, 128, 100), ConfigError);  // too large
}

TEST_CASE("shape contract and determinism") {
    Generator g = Generator::build(1, 8, 64, 32, 200);
    CHECK(g.avg_latent().shape() == std::vector<int>{8, 64});
    LatentCode w = g.sample_latent(5);
    CHECK(w.shape() == std::vector<int>{8, 64});
    ImageArray img = g.synthesize(w);
    CHECK(img.shape() == std::vector<int>{3, 32, 32});
    CHECK(img.all_finite());
    for (std::size_t i = 0; i < img.numel(); ++i) {
        CHECK(img[i] >= -1.0);
        CHECK(img[i] <= 1.0);
    }

    Generator g2 = Generator::build(1, 8, 64, 32, 200);
    CHECK(g.mapping_params.checksum() == g2.mapping_params.checksum());
    CHECK(g.synthesis_params.checksum() == g2.synthesis_params.checksum());
    for (std::size_t i = 0; i < g.avg_latent().numel(); ++i)
        CHECK(g.avg_latent()[i] == g2.avg_latent()[i]);

    // purity: repeated synthesis agrees bitwise
    ImageArray img2 = g.synthesize(w);
    for (std::size_t i = 0; i < img.numel(); ++i) CHECK(img[i] == img2[i]);
}

TEST_CASE("sample_latent broadcasts one W row and varies with the seed") {
    Generator g = Generator::build(2, 6, 16, 16, 100);
    LatentCode w = g.sample_latent(9);
    for (int l = 1; l < 6; ++l)
        for (int j = 0; j < 16; ++j) CHECK(w.at2(l, j) == w.at2(0, j));
    LatentCode w2 = g.sample_latent(10);
    CHECK((w - w2).norm2() > 0.0);
}

TEST_CASE("cached average latent agrees with a fresh Monte-Carlo estimate") {
    // Two independent M-sample means of the mapped latent distribution, per
    // coordinate: difference ~ N(0, 2 sigma^2 / M). With d=16 coordinates we
    // check every coordinate stays within 4 combined standard errors and most
    // within 2 (a per-coordinate 2SE bound would flake by design).
    const int M = 10000;
    Generator g = Generator::build(3, 4, 16, 16, M);
    const int d = 16;
    std::vector<double> mean(d, 0.0), m2(d, 0.0);
    for (int i = 0; i < M; ++i) {
        LatentCode w = g.sample_latent(Rng::mix(0xFEEDu, static_cast<std::uint64_t>(i)));
        for (int j = 0; j < d; ++j) {
            const double delta = w.at2(0, j) - mean[j];
            mean[j] += delta / (i + 1);
            m2[j] += delta * (w.at2(0, j) - mean[j]);
        }
    }
    int within2 = 0;
    for (int j = 0; j < d; ++j) {
        const double var = m2[j] / (M - 1);
        const double se = std::sqrt(2.0 * var / M);
        const double diff = std::abs(mean[j] - g.avg_latent().at2(0, j));
        CHECK(diff <= 4.0 * se);
        if (diff <= 2.0 * se) ++within2;
    }
    CHECK(within2 >= (8 * d) / 10);
}

TEST_CASE("latent gradient of the l2 loss matches finite differences") {
    Generator g = Generator::build(4, 4, 8, 16, 100);
    LatentCode w = g.sample_latent(11);
    ImageArray x = g.synthesize(g.sample_latent(12));

    auto J = [&] { return l2_loss(g.synthesize(w), x); };
    Generator::SynthCache cache;
    ImageArray y = g.synthesize_cached(w, cache);
    LatentCode dw = g.synthesize_backward(cache, l2_loss_grad(y, x), nullptr);
    CHECK(testutil::fd_max_rel_error(w, dw, J, 1e-4, 32, 1e-7) < 1e-4);
}

TEST_CASE("coarse styles move the image more than fine styles") {
    Generator g = Generator::build(5, 8, 32, 32, 200);
    const StyleGroups& sg = g.style_groups();
    double coarse_sum = 0.0, fine_sum = 0.0;
    const int trials = 32;
    for (int i = 0; i < trials; ++i) {
        LatentCode w = g.sample_latent(100 + static_cast<std::uint64_t>(i));
        ImageArray base = g.synthesize(w);
        Tensor noise = testutil::random_tensor({1, 32}, 500 + static_cast<std::uint64_t>(i));
        noise *= 1.0 / noise.norm2();

        LatentCode wc = w, wf = w;
        for (int j = 0; j < 32; ++j) {
            wc.at2(0, j) += noise[static_cast<std::size_t>(j)];          // first coarse row
            wf.at2(sg.k - 1, j) += noise[static_cast<std::size_t>(j)];   // last fine row
        }
        coarse_sum += l2_loss(g.synthesize(wc), base);
        fine_sum += l2_loss(g.synthesize(wf), base);
    }
    CHECK(coarse_sum / trials > fine_sum / trials);
}

TEST_CASE("style groups partition the inputs in order") {
    for (int k : {3, 4, 8, 12}) {
        StyleGroups sg = default_style_groups(k);
        CHECK(sg.coarse_end >= 1);
        CHECK(sg.medium_end > sg.coarse_end);
        CHECK(sg.k > sg.medium_end);
        CHECK(sg.group_of(0) == 0);
        CHECK(sg.group_of(k - 1) == 2);
    }
}

TEST_CASE("pixel transforms") {
    ImageArray x = testutil::random_image(8, 77);
    CHECK_THROWS_AS(apply_pixel_transform("sepia", x), ConfigError);
    ImageArray inv = apply_pixel_transform("invert", x);
    for (std::size_t i = 0; i < x.numel(); ++i) CHECK(inv[i] == -x[i]);
    ImageArray hue = apply_pixel_transform("hue_shift", x);
    for (int yy = 0; yy < 8; ++yy)
        for (int xx = 0; xx < 8; ++xx) CHECK(hue.at3(0, yy, xx) == x.at3(1, yy, xx));
    ImageArray post = apply_pixel_transform("posterize", x);
    for (std::size_t i = 0; i < post.numel(); ++i) {
        CHECK(post[i] >= -1.0);
        CHECK(post[i] <= 1.0);
    }
}

TEST_CASE("stylized fine-tune fits the transform and leaves the original frozen") {
    Generator g = Generator::build(6, 4, 16, 16, 100);
    const double before_sum = g.synthesis_params.checksum();

    CHECK_THROWS_AS(g.finetune_stylized("sepia", 10, 1), ConfigError);

    Generator id = g.finetune_stylized("invert", 0, 1);
    CHECK(id.synthesis_params.checksum() == before_sum);

    Generator styled = g.finetune_stylized("invert", 120, 1);
    CHECK(g.synthesis_params.checksum() == before_sum);  // original untouched

    double err0 = 0.0, err1 = 0.0;
    for (int i = 0; i < 64; ++i) {
        LatentCode w = g.sample_latent(9000 + static_cast<std::uint64_t>(i));
        ImageArray target = apply_pixel_transform("invert", g.synthesize(w));
        err0 += l2_loss(id.synthesize(w), target);
        err1 += l2_loss(styled.synthesize(w), target);
    }
    CHECK(err1 < err0);

    // same-latent alignment beats randomly paired latents
    double paired = 0.0, shuffled = 0.0;
    auto corr = [](const ImageArray& a, const ImageArray& b) {
        double ma = a.mean(), mb = b.mean(), num = 0.0, va = 0.0, vb = 0.0;
        for (std::size_t i = 0; i < a.numel(); ++i) {
            num += (a[i] - ma) * (b[i] - mb);
            va += (a[i] - ma) * (a[i] - ma);
            vb += (b[i] - mb) * (b[i] - mb);
        }
        return num / std::sqrt(va * vb + 1e-30);
    };
    for (int i = 0; i < 64; ++i) {
        LatentCode w = g.sample_latent(400 + static_cast<std::uint64_t>(i));
        LatentCode wr = g.sample_latent(700 + static_cast<std::uint64_t>(i));
        paired += std::abs(corr(g.synthesize(w), styled.synthesize(w)));
        shuffled += std::abs(corr(g.synthesize(w), styled.synthesize(wr)));
    }
    CHECK(paired > shuffled);
}
