#include "restyle/losses.hpp"

#include <cmath>

namespace restyle {

double l2_loss(const ImageArray& a, const ImageArray& b) {
    if (!a.same_shape(b)) throw ContractError("l2_loss: shape mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.numel(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s / static_cast<double>(a.numel());
}

Tensor l2_loss_grad(const ImageArray& a, const ImageArray& b) {
    if (!a.same_shape(b)) throw ContractError("l2_loss_grad: shape mismatch");
    Tensor da(a.shape());
    const double scale = 2.0 / static_cast<double>(a.numel());
    for (std::size_t i = 0; i < a.numel(); ++i) da[i] = scale * (a[i] - b[i]);
    return da;
}

// ---- PerceptualNet ------------------------------------------------------

namespace {
constexpr double kFeatEps = 1e-10;
const int kPercChannels[3] = {16, 32, 32};
// shallower layers carry the sharper spatial signal
constexpr double kLayerWeights[3] = {0.6, 0.25, 0.15};
}  // namespace

PerceptualNet::PerceptualNet(std::uint64_t seed) : seed_(seed) {
    Rng rng(Rng::mix(seed, 0x50455243ULL));
    int in_ch = 3;
    for (int i = 0; i < 3; ++i) {
        const int out_ch = kPercChannels[i];
        w_.push_back(params_.add("perc.w" + std::to_string(i),
                                 nn::he_conv_init(rng, out_ch, in_ch, 3, 3)));
        Tensor b({out_ch});
        rng.fill_gaussian(b, 0.1);
        b_.push_back(params_.add("perc.b" + std::to_string(i), std::move(b)));
        in_ch = out_ch;
    }
    // calibrate fixed per-channel feature scales (inverse rms over a seeded
    // reference batch) so the layers contribute on comparable footing
    const int kCalibImages = 16, kCalibRes = 32;
    std::vector<Tensor> acc;
    for (int i = 0; i < 3; ++i) acc.emplace_back(std::vector<int>{kPercChannels[i]});
    Rng crng(Rng::mix(seed, 0xCA11B7ULL));
    for (int n = 0; n < kCalibImages; ++n) {
        Tensor h({3, kCalibRes, kCalibRes});
        for (std::size_t j = 0; j < h.numel(); ++j) h[j] = crng.uniform(-1.0, 1.0);
        for (int i = 0; i < 3; ++i) {
            h = nn::conv2d_forward(params_[w_[static_cast<std::size_t>(i)]],
                                   params_[b_[static_cast<std::size_t>(i)]], h, 2, 1, nullptr);
            h = nn::leaky_relu_forward(h, 0.2, nullptr);
            const double hw = static_cast<double>(h.dim(1)) * h.dim(2);
            for (int c = 0; c < h.dim(0); ++c) {
                double e = 0.0;
                for (int y = 0; y < h.dim(1); ++y)
                    for (int x = 0; x < h.dim(2); ++x) e += h.at3(c, y, x) * h.at3(c, y, x);
                acc[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)] += e / hw;
            }
        }
    }
    scale_.clear();
    for (int i = 0; i < 3; ++i) {
        Tensor sc({kPercChannels[i]});
        for (std::size_t c = 0; c < sc.numel(); ++c)
            sc[c] = 1.0 / std::sqrt(acc[static_cast<std::size_t>(i)][c] / kCalibImages +
                                    kFeatEps);
        scale_.push_back(std::move(sc));
    }
}

void PerceptualNet::features(const ImageArray& x, LayerFeatures& out) const {
    out.raw.clear();
    out.normed.clear();
    out.conv.assign(3, {});
    out.act.assign(3, {});
    Tensor h = x;
    for (int i = 0; i < 3; ++i) {
        h = nn::conv2d_forward(params_[w_[static_cast<std::size_t>(i)]],
                               params_[b_[static_cast<std::size_t>(i)]], h, 2, 1,
                               &out.conv[static_cast<std::size_t>(i)]);
        h = nn::leaky_relu_forward(h, 0.2, &out.act[static_cast<std::size_t>(i)]);
        out.raw.push_back(h);
        Tensor n(h.shape());
        const Tensor& sc = scale_[static_cast<std::size_t>(i)];
        for (int c = 0; c < h.dim(0); ++c)
            for (int y = 0; y < h.dim(1); ++y)
                for (int xx = 0; xx < h.dim(2); ++xx)
                    n.at3(c, y, xx) = h.at3(c, y, xx) * sc[static_cast<std::size_t>(c)];
        out.normed.push_back(std::move(n));
    }
}

double PerceptualNet::loss(const ImageArray& a, const ImageArray& b) const {
    if (!a.same_shape(b)) throw ContractError("perceptual_loss: shape mismatch");
    LayerFeatures fa, fb;
    features(a, fa);
    features(b, fb);
    double total = 0.0;
    for (int i = 0; i < 3; ++i) {
        const Tensor& na = fa.normed[static_cast<std::size_t>(i)];
        const Tensor& nb = fb.normed[static_cast<std::size_t>(i)];
        double s = 0.0;
        for (std::size_t j = 0; j < na.numel(); ++j) {
            const double d = na[j] - nb[j];
            s += d * d;
        }
        total += kLayerWeights[i] * s / static_cast<double>(na.numel());
    }
    return total;
}

double PerceptualNet::loss_with_grad(const ImageArray& a, const ImageArray& b,
                                     Tensor& da) const {
    if (!a.same_shape(b)) throw ContractError("perceptual_loss: shape mismatch");
    LayerFeatures fa, fb;
    features(a, fa);
    features(b, fb);

    double total = 0.0;
    std::vector<Tensor> draw(3);  // gradient w.r.t. raw features of a
    for (int i = 0; i < 3; ++i) {
        const Tensor& na = fa.normed[static_cast<std::size_t>(i)];
        const Tensor& nb = fb.normed[static_cast<std::size_t>(i)];
        const Tensor& sc = scale_[static_cast<std::size_t>(i)];
        const double w = 2.0 * kLayerWeights[i] / static_cast<double>(na.numel());
        double s = 0.0;
        Tensor dr(na.shape());
        for (int c = 0; c < na.dim(0); ++c)
            for (int y = 0; y < na.dim(1); ++y)
                for (int x = 0; x < na.dim(2); ++x) {
                    const double diff = na.at3(c, y, x) - nb.at3(c, y, x);
                    s += diff * diff;
                    dr.at3(c, y, x) = w * diff * sc[static_cast<std::size_t>(c)];
                }
        total += kLayerWeights[i] * s / static_cast<double>(na.numel());
        draw[static_cast<std::size_t>(i)] = std::move(dr);
    }

    // back through the conv stack, injecting each layer's tap gradient
    Tensor dh;
    for (int i = 2; i >= 0; --i) {
        Tensor d = draw[static_cast<std::size_t>(i)];
        if (!dh.empty()) d += dh;
        d = nn::leaky_relu_backward(fa.act[static_cast<std::size_t>(i)], 0.2, d);
        dh = nn::conv2d_backward(params_[w_[static_cast<std::size_t>(i)]],
                                 fa.conv[static_cast<std::size_t>(i)], d, 2, 1, nullptr,
                                 nullptr, true);
    }
    da += dh;
    return total;
}

// ---- SimilarityNet ------------------------------------------------------

SimilarityNet::SimilarityNet(std::uint64_t seed) : seed_(seed) {
    Rng rng(Rng::mix(seed, 0x53494D4EULL));
    const int widths[2] = {16, 32};
    int in_ch = 3;
    for (int i = 0; i < 2; ++i) {
        w_.push_back(params_.add("sim.w" + std::to_string(i),
                                 nn::he_conv_init(rng, widths[i], in_ch, 3, 3)));
        Tensor b({widths[i]});
        rng.fill_gaussian(b, 0.1);
        b_.push_back(params_.add("sim.b" + std::to_string(i), std::move(b)));
        in_ch = widths[i];
    }
    dense_w_ = params_.add("sim.dense_w", nn::he_dense_init(rng, kEmbedDim, in_ch));
    dense_b_ = params_.add("sim.dense_b", Tensor({kEmbedDim}));
}

Tensor SimilarityNet::embed_cached(const ImageArray& x, EmbedCache& cache) const {
    cache.conv.assign(2, {});
    cache.act.assign(2, {});
    Tensor h = x;
    for (int i = 0; i < 2; ++i) {
        h = nn::conv2d_forward(params_[w_[static_cast<std::size_t>(i)]],
                               params_[b_[static_cast<std::size_t>(i)]], h, 2, 1,
                               &cache.conv[static_cast<std::size_t>(i)]);
        h = nn::leaky_relu_forward(h, 0.2, &cache.act[static_cast<std::size_t>(i)]);
    }
    cache.pooled_shape = h.shape();
    const int c = h.dim(0), n = h.dim(1) * h.dim(2);
    Tensor pooled({c});
    for (int ch = 0; ch < c; ++ch) {
        double s = 0.0;
        const double* p = h.data() + static_cast<std::size_t>(ch) * n;
        for (int i = 0; i < n; ++i) s += p[i];
        pooled[static_cast<std::size_t>(ch)] = s / n;
    }
    Tensor u = nn::dense_forward(params_[dense_w_], params_[dense_b_], pooled, &cache.dense);
    cache.pre_norm = u;
    cache.norm = std::sqrt(u.norm2() * u.norm2() + 1e-12);
    Tensor e(u.shape());
    for (std::size_t i = 0; i < u.numel(); ++i) e[i] = u[i] / cache.norm;
    return e;
}

Tensor SimilarityNet::embed(const ImageArray& x) const {
    EmbedCache cache;
    return embed_cached(x, cache);
}

Tensor SimilarityNet::embed_backward(const EmbedCache& cache, const Tensor& dembed) const {
    // through u / ||u||
    const Tensor& u = cache.pre_norm;
    double dot = 0.0;
    for (std::size_t i = 0; i < u.numel(); ++i) dot += dembed[i] * u[i] / cache.norm;
    Tensor du(u.shape());
    for (std::size_t i = 0; i < u.numel(); ++i)
        du[i] = (dembed[i] - (u[i] / cache.norm) * dot) / cache.norm;
    Tensor dpooled = nn::dense_backward(params_[dense_w_], cache.dense, du, nullptr, nullptr);
    const int c = cache.pooled_shape[0];
    const int n = cache.pooled_shape[1] * cache.pooled_shape[2];
    Tensor dh(cache.pooled_shape);
    for (int ch = 0; ch < c; ++ch) {
        const double v = dpooled[static_cast<std::size_t>(ch)] / n;
        double* p = dh.data() + static_cast<std::size_t>(ch) * n;
        for (int i = 0; i < n; ++i) p[i] = v;
    }
    Tensor dx;
    for (int i = 1; i >= 0; --i) {
        Tensor d = (i == 1) ? dh : dx;
        d = nn::leaky_relu_backward(cache.act[static_cast<std::size_t>(i)], 0.2, d);
        dx = nn::conv2d_backward(params_[w_[static_cast<std::size_t>(i)]],
                                 cache.conv[static_cast<std::size_t>(i)], d, 2, 1, nullptr,
                                 nullptr, true);
    }
    return dx;
}

double SimilarityNet::similarity(const ImageArray& a, const ImageArray& b) const {
    if (!a.same_shape(b)) throw ContractError("similarity: shape mismatch");
    Tensor ea = embed(a), eb = embed(b);
    double s = 0.0;
    for (std::size_t i = 0; i < ea.numel(); ++i) s += ea[i] * eb[i];
    return s;
}

double SimilarityNet::similarity_with_grad(const ImageArray& a, const ImageArray& b,
                                           Tensor& da) const {
    if (!a.same_shape(b)) throw ContractError("similarity: shape mismatch");
    EmbedCache ca;
    Tensor ea = embed_cached(a, ca);
    Tensor eb = embed(b);
    double s = 0.0;
    for (std::size_t i = 0; i < ea.numel(); ++i) s += ea[i] * eb[i];
    da += embed_backward(ca, eb);
    return s;
}

// ---- weighted loss ------------------------------------------------------

LossBreakdown weighted_loss(const PerceptualNet* pnet, const SimilarityNet* snet,
                            const ImageArray& y, const ImageArray& target,
                            const LossWeights& weights, Tensor* dy) {
    LossBreakdown out;
    if (weights.l2 > 0.0) {
        out.l2 = l2_loss(y, target);
        if (dy) {
            Tensor g = l2_loss_grad(y, target);
            g *= weights.l2;
            *dy += g;
        }
    }
    if (weights.perceptual > 0.0 && pnet) {
        if (dy) {
            Tensor g(y.shape());
            out.perceptual = pnet->loss_with_grad(y, target, g);
            g *= weights.perceptual;
            *dy += g;
        } else {
            out.perceptual = pnet->loss(y, target);
        }
    }
    if (weights.similarity > 0.0 && snet) {
        if (dy) {
            Tensor g(y.shape());
            out.similarity = snet->similarity_with_grad(y, target, g);
            g *= -weights.similarity;  // loss term is (1 - similarity)
            *dy += g;
        } else {
            out.similarity = snet->similarity(y, target);
        }
    }
    out.total = weights.l2 * out.l2 + weights.perceptual * out.perceptual +
                weights.similarity * (1.0 - out.similarity);
    return out;
}

double timed_void(const std::function<void()>& f) {
    const auto t0 = std::chrono::steady_clock::now();
    f();
    const auto t1 = std::chrono::steady_clock::now();
    return std::chrono::duration<double>(t1 - t0).count();
}

}  // namespace restyle
