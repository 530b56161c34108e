#pragma once

#include <chrono>
#include <cstdint>
#include <utility>
#include <vector>

#include "restyle/errors.hpp"
#include "restyle/nn.hpp"
#include "restyle/tensor.hpp"

namespace restyle {

// Mean squared pixel difference.
double l2_loss(const ImageArray& a, const ImageArray& b);
// Gradient of l2_loss with respect to a.
Tensor l2_loss_grad(const ImageArray& a, const ImageArray& b);

// Fixed random 3-layer conv feature extractor. Features are rescaled by
// per-channel constants calibrated at construction (inverse rms over a
// seeded reference batch) and compared with a depth-weighted MSE.
class PerceptualNet {
public:
    explicit PerceptualNet(std::uint64_t seed);

    double loss(const ImageArray& a, const ImageArray& b) const;
    // Returns the loss and accumulates dloss/da into da (same shape as a).
    double loss_with_grad(const ImageArray& a, const ImageArray& b, Tensor& da) const;

    std::uint64_t seed() const { return seed_; }

private:
    struct LayerFeatures {
        std::vector<Tensor> raw;     // per layer, unscaled
        std::vector<Tensor> normed;  // per layer, after per-channel scaling
        std::vector<nn::ConvCache> conv;
        std::vector<nn::ActCache> act;
    };
    void features(const ImageArray& x, LayerFeatures& out) const;

    std::uint64_t seed_;
    nn::ParamStore params_;
    std::vector<int> w_, b_;
    std::vector<Tensor> scale_;  // per layer, per-channel calibration constants
};

// Fixed random embedding network producing unit-norm 32-vectors; the
// similarity score is the inner product of two embeddings.
class SimilarityNet {
public:
    static constexpr int kEmbedDim = 32;

    explicit SimilarityNet(std::uint64_t seed);

    Tensor embed(const ImageArray& x) const;
    double similarity(const ImageArray& a, const ImageArray& b) const;
    // similarity plus d(similarity)/da accumulated into da.
    double similarity_with_grad(const ImageArray& a, const ImageArray& b, Tensor& da) const;

    std::uint64_t seed() const { return seed_; }

private:
    struct EmbedCache {
        std::vector<nn::ConvCache> conv;
        std::vector<nn::ActCache> act;
        std::vector<int> pooled_shape;
        Tensor pre_norm;
        double norm;
        nn::DenseCache dense;
    };
    Tensor embed_cached(const ImageArray& x, EmbedCache& cache) const;
    Tensor embed_backward(const EmbedCache& cache, const Tensor& dembed) const;

    std::uint64_t seed_;
    nn::ParamStore params_;
    std::vector<int> w_, b_;
    int dense_w_ = -1, dense_b_ = -1;
};

struct LossWeights {
    double l2 = 1.0;
    double perceptual = 0.8;
    double similarity = 0.1;
};

struct LossBreakdown {
    double l2 = 0.0;
    double perceptual = 0.0;
    double similarity = 0.0;  // the score in [-1, 1], not the loss term
    double total = 0.0;
};

// total = w_l2 * L2 + w_p * perceptual + w_sim * (1 - similarity).
// Terms with weight 0 are skipped entirely (no gradient contribution).
LossBreakdown weighted_loss(const PerceptualNet* pnet, const SimilarityNet* snet,
                            const ImageArray& y, const ImageArray& target,
                            const LossWeights& weights, Tensor* dy = nullptr);

// Wall-clock helper; returns (result, seconds).
template <typename F>
auto timed(F&& f) -> std::pair<decltype(f()), double> {
    const auto t0 = std::chrono::steady_clock::now();
    auto result = f();
    const auto t1 = std::chrono::steady_clock::now();
    return {std::move(result), std::chrono::duration<double>(t1 - t0).count()};
}

double timed_void(const std::function<void()>& f);

}  // namespace restyle
