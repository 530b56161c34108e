#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "restyle/errors.hpp"
#include "restyle/generator.hpp"
#include "restyle/nn.hpp"
#include "restyle/tensor.hpp"

namespace restyle {

enum class EncoderVariant { Simple, Fpn };

// Channel concatenation x || y_hat: channels [0,3) are x, [3,6) are y_hat.
ImageArray concat_input(const ImageArray& x, const ImageArray& y_hat);

EncoderVariant encoder_variant_from_string(const std::string& s);
std::string to_string(EncoderVariant v);

// Inversion encoder: strided conv backbone plus k map2style heads, each
// ending in a zero-initialized dense layer so the untrained residual is 0.
// Simple variant reads all heads off the final feature map; the FPN variant
// attaches coarse/medium/fine heads to three backbone depths.
//
// Head outputs pass through a smooth per-coordinate bound
// (kResidualBound * tanh(raw / kResidualBound)), acting as a trust region:
// a single application can move each latent coordinate by less than the
// typical distance to the target, so distant targets are reached by
// accumulating several residual steps instead of one large jump. This keeps
// iterates in the well-conditioned neighborhood of the average latent.
inline constexpr double kResidualBound = 0.5;
class Encoder {
public:
    struct EncodeCache;

    static Encoder build(EncoderVariant variant, int in_channels, const Generator& g,
                         std::uint64_t seed);

    EncoderVariant variant() const { return variant_; }
    int in_channels() const { return in_channels_; }
    int k() const { return k_; }
    int d() const { return d_; }
    int resolution() const { return resolution_; }
    std::uint64_t seed() const { return seed_; }
    const StyleGroups& style_groups() const { return groups_; }

    // input: (in_channels, res, res) -> residual code (k, d)
    ResidualCode encode(const ImageArray& input) const;
    ResidualCode encode_cached(const ImageArray& input, EncodeCache& cache) const;
    // dout: (k, d). Accumulates parameter grads; returns d(input) when requested.
    Tensor encode_backward(const EncodeCache& cache, const Tensor& dout,
                           nn::GradStore* backbone_grads, nn::GradStore* head_grads,
                           bool need_dinput = false) const;

    double param_checksum() const {
        return backbone_params.checksum() + head_params.checksum();
    }

    nn::ParamStore backbone_params;
    nn::ParamStore head_params;

    static Encoder from_params(EncoderVariant variant, int in_channels, int k, int d,
                               int resolution, std::uint64_t seed, StyleGroups groups,
                               nn::ParamStore backbone, nn::ParamStore heads);

    struct Block {
        int w, b;
        int stride;
    };
    struct Head {
        int style_index;
        int tap;  // backbone block index whose output feeds this head
        std::vector<Block> convs;  // stride-2 reductions down to 1x1
        int dense_w, dense_b;
    };

    struct EncodeCache {
        std::vector<nn::ConvCache> block_conv;
        std::vector<nn::ActCache> block_act;
        std::vector<Tensor> taps;  // block outputs
        struct HeadCache {
            std::vector<nn::ConvCache> conv;
            std::vector<nn::ActCache> act;
            nn::DenseCache dense;
            Tensor bounded;  // tanh(style / bound), for the bound backward
        };
        std::vector<HeadCache> heads;
    };

private:
    Encoder() = default;
    void wire(std::uint64_t seed, bool init_params);

    EncoderVariant variant_ = EncoderVariant::Simple;
    int in_channels_ = 6;
    int k_ = 0, d_ = 0, resolution_ = 0;
    std::uint64_t seed_ = 0;
    StyleGroups groups_;

    std::vector<Block> blocks_;
    std::vector<int> block_out_size_;  // spatial size after each block
    std::vector<int> block_out_ch_;
    std::vector<Head> heads_;

public:
    const std::vector<Head>& heads() const { return heads_; }
};

}  // namespace restyle
