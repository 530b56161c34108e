#include "restyle/encoder.hpp"

#include <cmath>

namespace restyle {

ImageArray concat_input(const ImageArray& x, const ImageArray& y_hat) {
    if (x.ndim() != 3 || !x.same_shape(y_hat))
        throw ContractError("concat_input: shape mismatch between x " + x.shape_str() +
                            " and y_hat " + y_hat.shape_str());
    ImageArray out({x.dim(0) + y_hat.dim(0), x.dim(1), x.dim(2)});
    std::copy(x.data(), x.data() + x.numel(), out.data());
    std::copy(y_hat.data(), y_hat.data() + y_hat.numel(), out.data() + x.numel());
    return out;
}

EncoderVariant encoder_variant_from_string(const std::string& s) {
    if (s == "simple") return EncoderVariant::Simple;
    if (s == "fpn") return EncoderVariant::Fpn;
    throw ConfigError("unknown encoder variant: " + s);
}

std::string to_string(EncoderVariant v) {
    return v == EncoderVariant::Simple ? "simple" : "fpn";
}

namespace {
constexpr int kHeadWidth = 32;
const int kBlockWidths[4] = {16, 32, 64, 64};
}  // namespace

void Encoder::wire(std::uint64_t seed, bool init_params) {
    Rng rng(Rng::mix(seed, 0x454E4350ULL));

    // backbone: 4 blocks, stride 2 until the map reaches 4x4
    blocks_.clear();
    block_out_size_.clear();
    block_out_ch_.clear();
    int size = resolution_;
    int in_ch = in_channels_;
    for (int i = 0; i < 4; ++i) {
        const int out_ch = kBlockWidths[i];
        const int stride = size > 4 ? 2 : 1;
        Tensor w = init_params ? nn::he_conv_init(rng, out_ch, in_ch, 3, 3)
                               : Tensor({out_ch, in_ch, 3, 3});
        Block blk;
        blk.stride = stride;
        blk.w = backbone_params.add("backbone.b" + std::to_string(i) + ".w", std::move(w));
        blk.b = backbone_params.add("backbone.b" + std::to_string(i) + ".b", Tensor({out_ch}));
        blocks_.push_back(blk);
        size = (stride == 2) ? size / 2 : size;
        block_out_size_.push_back(size);
        block_out_ch_.push_back(out_ch);
        in_ch = out_ch;
    }

    heads_.clear();
    for (int s = 0; s < k_; ++s) {
        Head head;
        head.style_index = s;
        if (variant_ == EncoderVariant::Simple) {
            head.tap = 3;
        } else {
            // coarse on the deepest map, medium on the middle, fine shallowest
            const int group = groups_.group_of(s);
            head.tap = group == 0 ? 3 : (group == 1 ? 2 : 1);
        }
        int hs = block_out_size_[static_cast<std::size_t>(head.tap)];
        int hc = block_out_ch_[static_cast<std::size_t>(head.tap)];
        int c = 0;
        const std::string tag = "head." + std::to_string(s);
        while (hs > 1) {
            Tensor w = init_params ? nn::he_conv_init(rng, kHeadWidth, hc, 3, 3)
                                   : Tensor({kHeadWidth, hc, 3, 3});
            Block blk;
            blk.stride = 2;
            blk.w = head_params.add(tag + ".c" + std::to_string(c) + ".w", std::move(w));
            blk.b = head_params.add(tag + ".c" + std::to_string(c) + ".b", Tensor({kHeadWidth}));
            head.convs.push_back(blk);
            hs /= 2;
            hc = kHeadWidth;
            ++c;
        }
        // zero-initialized: the untrained encoder emits the zero residual
        head.dense_w = head_params.add(tag + ".dense_w", Tensor({d_, kHeadWidth}));
        head.dense_b = head_params.add(tag + ".dense_b", Tensor({d_}));
        heads_.push_back(std::move(head));
    }
}

Encoder Encoder::build(EncoderVariant variant, int in_channels, const Generator& g,
                       std::uint64_t seed) {
    if (in_channels != 3 && in_channels != 6)
        throw ConfigError("build_encoder: in_channels must be 3 or 6");
    Encoder e;
    e.variant_ = variant;
    e.in_channels_ = in_channels;
    e.k_ = g.k();
    e.d_ = g.d();
    e.resolution_ = g.resolution();
    e.seed_ = seed;
    e.groups_ = g.style_groups();
    e.wire(seed, true);
    return e;
}

Encoder Encoder::from_params(EncoderVariant variant, int in_channels, int k, int d,
                             int resolution, std::uint64_t seed, StyleGroups groups,
                             nn::ParamStore backbone, nn::ParamStore heads) {
    Encoder e;
    e.variant_ = variant;
    e.in_channels_ = in_channels;
    e.k_ = k;
    e.d_ = d;
    e.resolution_ = resolution;
    e.seed_ = seed;
    e.groups_ = groups;
    e.wire(seed, false);
    if (backbone.size() != e.backbone_params.size() || heads.size() != e.head_params.size())
        throw ConfigError("encoder checkpoint does not match wiring");
    e.backbone_params = std::move(backbone);
    e.head_params = std::move(heads);
    return e;
}

ResidualCode Encoder::encode_cached(const ImageArray& input, EncodeCache& cache) const {
    if (input.ndim() != 3 || input.dim(0) != in_channels_ || input.dim(1) != resolution_ ||
        input.dim(2) != resolution_)
        throw ContractError("encode: input shape " + input.shape_str() + " does not match (" +
                            std::to_string(in_channels_) + ", " + std::to_string(resolution_) +
                            ", " + std::to_string(resolution_) + ")");

    cache.block_conv.assign(blocks_.size(), {});
    cache.block_act.assign(blocks_.size(), {});
    cache.taps.assign(blocks_.size(), {});
    cache.heads.assign(heads_.size(), {});

    Tensor x = input;
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
        x = nn::conv2d_forward(backbone_params[blocks_[i].w], backbone_params[blocks_[i].b], x,
                               blocks_[i].stride, 1, &cache.block_conv[i]);
        x = nn::leaky_relu_forward(x, 0.2, &cache.block_act[i]);
        cache.taps[i] = x;
    }

    ResidualCode out({k_, d_});
    for (std::size_t h = 0; h < heads_.size(); ++h) {
        const Head& head = heads_[h];
        auto& hc = cache.heads[h];
        hc.conv.assign(head.convs.size(), {});
        hc.act.assign(head.convs.size(), {});
        Tensor f = cache.taps[static_cast<std::size_t>(head.tap)];
        for (std::size_t c = 0; c < head.convs.size(); ++c) {
            f = nn::conv2d_forward(head_params[head.convs[c].w], head_params[head.convs[c].b], f,
                                   2, 1, &hc.conv[c]);
            f = nn::leaky_relu_forward(f, 0.2, &hc.act[c]);
        }
        Tensor flat({static_cast<int>(f.numel())}, std::vector<double>(f.data(), f.data() + f.numel()));
        Tensor style = nn::dense_forward(head_params[head.dense_w], head_params[head.dense_b],
                                         flat, &hc.dense);
        hc.bounded = Tensor({d_});
        for (int c = 0; c < d_; ++c) {
            const double t = std::tanh(style[static_cast<std::size_t>(c)] / kResidualBound);
            hc.bounded[static_cast<std::size_t>(c)] = t;
            out.at2(head.style_index, c) = kResidualBound * t;
        }
    }
    return out;
}

ResidualCode Encoder::encode(const ImageArray& input) const {
    EncodeCache cache;
    return encode_cached(input, cache);
}

Tensor Encoder::encode_backward(const EncodeCache& cache, const Tensor& dout,
                                nn::GradStore* backbone_grads, nn::GradStore* head_grads,
                                bool need_dinput) const {
    // gradient flowing back into each backbone tap, accumulated across heads
    std::vector<Tensor> dtap(blocks_.size());
    for (std::size_t i = 0; i < blocks_.size(); ++i) dtap[i] = Tensor(cache.taps[i].shape());

    for (std::size_t h = 0; h < heads_.size(); ++h) {
        const Head& head = heads_[h];
        const auto& hc = cache.heads[h];
        Tensor dstyle({d_});
        for (int c = 0; c < d_; ++c) {
            const double t = hc.bounded[static_cast<std::size_t>(c)];
            dstyle[static_cast<std::size_t>(c)] = dout.at2(head.style_index, c) * (1.0 - t * t);
        }
        Tensor df = nn::dense_backward(head_params[head.dense_w], hc.dense, dstyle,
                                       head_grads ? &(*head_grads)[head.dense_w] : nullptr,
                                       head_grads ? &(*head_grads)[head.dense_b] : nullptr);
        // un-flatten to the last conv output shape (width, 1, 1)
        Tensor df3({kHeadWidth, 1, 1}, std::vector<double>(df.data(), df.data() + df.numel()));
        Tensor dcur = df3;
        for (std::size_t c = head.convs.size(); c-- > 0;) {
            dcur = nn::leaky_relu_backward(hc.act[c], 0.2, dcur);
            dcur = nn::conv2d_backward(head_params[head.convs[c].w], hc.conv[c], dcur, 2, 1,
                                       head_grads ? &(*head_grads)[head.convs[c].w] : nullptr,
                                       head_grads ? &(*head_grads)[head.convs[c].b] : nullptr,
                                       true);
        }
        dtap[static_cast<std::size_t>(head.tap)] += dcur;
    }

    Tensor dx;
    for (std::size_t i = blocks_.size(); i-- > 0;) {
        Tensor d = dtap[i];
        if (!dx.empty()) d += dx;
        d = nn::leaky_relu_backward(cache.block_act[i], 0.2, d);
        const bool need = need_dinput || i > 0;
        dx = nn::conv2d_backward(backbone_params[blocks_[i].w], cache.block_conv[i], d,
                                 blocks_[i].stride, 1,
                                 backbone_grads ? &(*backbone_grads)[blocks_[i].w] : nullptr,
                                 backbone_grads ? &(*backbone_grads)[blocks_[i].b] : nullptr,
                                 need);
    }
    return dx;
}

}  // namespace restyle
