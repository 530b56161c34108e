#include "restyle/generator.hpp"

#include <cmath>

namespace restyle {

namespace {

int level_count(int resolution) {
    int levels = 0;
    for (int s = 4; s <= resolution; s *= 2) ++levels;
    return levels;
}

// At least d/2 channels at every level so each style row's affine map
// (d -> 2*channels) can have full row rank; narrower levels would leave
// latent subspaces with no image effect, making inversion ill-posed.
int channels_for_size(int size) {
    switch (size) {
        case 4: return 48;
        case 8: return 40;
        case 16: return 32;
        case 32: return 32;
        default: return 32;
    }
}

}  // namespace

StyleGroups default_style_groups(int k) {
    StyleGroups g;
    g.k = k;
    g.coarse_end = std::max(1, k / 4);
    g.medium_end = std::min(k - 1, std::max(g.coarse_end + 1, (5 * k) / 8));
    return g;
}

void Generator::wire(std::uint64_t seed, int k, int d, int resolution, bool init_params) {
    k_ = k;
    d_ = d;
    resolution_ = resolution;
    seed_ = seed;
    groups_ = default_style_groups(k);

    Rng rng(Rng::mix(seed, 0x47454E50ULL));  // parameter stream

    // mapping MLP: two hidden layers of width d
    map_w_.clear();
    map_b_.clear();
    for (int layer = 0; layer < 3; ++layer) {
        Tensor w = init_params ? nn::he_dense_init(rng, d, d) : Tensor({d, d});
        Tensor b({d});
        if (init_params && layer == 2) rng.fill_gaussian(b, 0.2);
        map_w_.push_back(mapping_params.add("map.w" + std::to_string(layer), std::move(w)));
        map_b_.push_back(mapping_params.add("map.b" + std::to_string(layer), std::move(b)));
    }

    // style-to-level assignment: spread k styles over the pyramid levels,
    // extra styles go to the coarser levels first
    const int levels = level_count(resolution);
    std::vector<int> per_level(static_cast<std::size_t>(levels), k / levels);
    for (int i = 0; i < k % levels; ++i) per_level[static_cast<std::size_t>(i)] += 1;

    level_channels_.clear();
    for (int l = 0; l < levels; ++l) level_channels_.push_back(channels_for_size(4 << l));

    Tensor cst({level_channels_[0], 4, 4});
    if (init_params) rng.fill_gaussian(cst, 1.0);
    const_idx_ = synthesis_params.add("synth.const", std::move(cst));

    units_.clear();
    int next_style = 0;
    int prev_ch = level_channels_[0];
    for (int l = 0; l < levels; ++l) {
        const int ch = level_channels_[static_cast<std::size_t>(l)];
        const int n_units = std::max(1, per_level[static_cast<std::size_t>(l)]);
        for (int u = 0; u < n_units; ++u) {
            Unit unit;
            unit.level = l;
            unit.style_index =
                (u < per_level[static_cast<std::size_t>(l)]) ? next_style++ : -1;
            const int in_ch = (u == 0) ? prev_ch : ch;
            const std::string tag = "synth.l" + std::to_string(l) + "u" + std::to_string(u);
            Tensor cw = init_params ? nn::he_conv_init(rng, ch, in_ch, 3, 3)
                                    : Tensor({ch, in_ch, 3, 3});
            unit.conv_w = synthesis_params.add(tag + ".conv_w", std::move(cw));
            unit.conv_b = synthesis_params.add(tag + ".conv_b", Tensor({ch}));
            if (unit.style_index >= 0) {
                Tensor aw = init_params ? nn::he_dense_init(rng, 2 * ch, d)
                                        : Tensor({2 * ch, d});
                // finer levels get weaker modulation so that coarse styles
                // dominate the output, as in full-scale style generators
                // Keep modulation gains (1 + affine) mostly positive: large
                // affine swings flip feature signs, which makes the latent-to-
                // image map non-injective and hostile to inversion. The mild
                // per-level decay keeps coarse styles dominant.
                if (init_params) aw *= 0.3 * std::pow(0.85, l);
                unit.adain_w = synthesis_params.add(tag + ".adain_w", std::move(aw));
                unit.adain_b = synthesis_params.add(tag + ".adain_b", Tensor({2 * ch}));
            } else {
                unit.adain_w = unit.adain_b = -1;
            }
            units_.push_back(unit);
        }
        prev_ch = ch;
    }

    Tensor rw = init_params ? nn::he_conv_init(rng, 3, prev_ch, 1, 1)
                            : Tensor({3, prev_ch, 1, 1});
    rgb_w_ = synthesis_params.add("synth.rgb_w", std::move(rw));
    rgb_b_ = synthesis_params.add("synth.rgb_b", Tensor({3}));
}

Generator Generator::build(std::uint64_t seed, int k, int d, int resolution,
                           int avg_samples) {
    if (k < 3 || d < 8)
        throw ConfigError("build_generator: require k >= 3 and d >= 8");
    if (resolution != 16 && resolution != 32 && resolution != 64)
        throw ConfigError("build_generator: resolution must be 16, 32 or 64");
    if (avg_samples < 1) throw ConfigError("build_generator: avg_samples must be >= 1");
    Generator g;
    g.avg_samples_ = avg_samples;
    g.wire(seed, k, d, resolution, true);
    g.compute_avg_latent();
    return g;
}

Generator Generator::from_params(std::uint64_t seed, int k, int d, int resolution,
                                 int avg_samples, nn::ParamStore mapping,
                                 nn::ParamStore synthesis, LatentCode avg_latent,
                                 StyleGroups groups) {
    Generator g;
    g.avg_samples_ = avg_samples;
    g.wire(seed, k, d, resolution, false);
    if (mapping.size() != g.mapping_params.size() ||
        synthesis.size() != g.synthesis_params.size())
        throw ConfigError("generator checkpoint does not match wiring");
    for (std::size_t i = 0; i < mapping.size(); ++i) {
        if (!mapping[static_cast<int>(i)].same_shape(g.mapping_params[static_cast<int>(i)]))
            throw ConfigError("generator checkpoint: mapping shape mismatch");
    }
    for (std::size_t i = 0; i < synthesis.size(); ++i) {
        if (!synthesis[static_cast<int>(i)].same_shape(g.synthesis_params[static_cast<int>(i)]))
            throw ConfigError("generator checkpoint: synthesis shape mismatch");
    }
    g.mapping_params = std::move(mapping);
    g.synthesis_params = std::move(synthesis);
    g.avg_latent_ = std::move(avg_latent);
    g.groups_ = groups;
    return g;
}

Tensor Generator::map_z(const Tensor& z) const {
    Tensor h = z;
    for (int layer = 0; layer < 3; ++layer) {
        h = nn::dense_forward(mapping_params[map_w_[static_cast<std::size_t>(layer)]],
                              mapping_params[map_b_[static_cast<std::size_t>(layer)]], h,
                              nullptr);
        if (layer < 2) h = nn::leaky_relu_forward(h, 0.2, nullptr);
    }
    return h;
}

void Generator::compute_avg_latent() {
    Rng rng(Rng::mix(seed_, 0x41564747ULL));  // avg-latent sampling stream
    Tensor mean({d_});
    Tensor z({d_});
    for (int i = 0; i < avg_samples_; ++i) {
        rng.fill_gaussian(z);
        Tensor w = map_z(z);
        mean += w;
    }
    mean *= 1.0 / avg_samples_;
    avg_latent_ = Tensor({k_, d_});
    for (int r = 0; r < k_; ++r)
        for (int c = 0; c < d_; ++c) avg_latent_.at2(r, c) = mean[static_cast<std::size_t>(c)];
}

LatentCode Generator::sample_latent(std::uint64_t seed) const {
    Rng rng(Rng::mix(seed_ ^ 0x53414D50ULL, seed));
    Tensor z({d_});
    rng.fill_gaussian(z);
    Tensor w = map_z(z);
    LatentCode code({k_, d_});
    for (int r = 0; r < k_; ++r)
        for (int c = 0; c < d_; ++c) code.at2(r, c) = w[static_cast<std::size_t>(c)];
    return code;
}

ImageArray Generator::synthesize_cached(const LatentCode& w, SynthCache& cache) const {
    if (w.ndim() != 2 || w.dim(0) != k_ || w.dim(1) != d_)
        throw ContractError("synthesize: latent shape " + w.shape_str() + " does not match (" +
                            std::to_string(k_) + ", " + std::to_string(d_) + ")");
    if (!w.all_finite()) throw ContractError("synthesize: latent has non-finite entries");

    const std::size_t n_units = units_.size();
    cache.conv.assign(n_units, {});
    cache.adain.assign(n_units, {});
    cache.act.assign(n_units, {});
    cache.upsampled.assign(n_units, false);

    Tensor x = synthesis_params[const_idx_];
    int prev_level = 0;
    for (std::size_t i = 0; i < n_units; ++i) {
        const Unit& u = units_[i];
        if (u.level != prev_level) {
            x = nn::upsample2x(x);
            cache.upsampled[i] = true;
            prev_level = u.level;
        }
        x = nn::conv2d_forward(synthesis_params[u.conv_w], synthesis_params[u.conv_b], x, 1, 1,
                               &cache.conv[i]);
        if (u.style_index >= 0) {
            Tensor style({d_});
            for (int c = 0; c < d_; ++c) style[static_cast<std::size_t>(c)] = w.at2(u.style_index, c);
            x = nn::adain_forward(x, style, synthesis_params[u.adain_w],
                                  synthesis_params[u.adain_b], &cache.adain[i]);
        }
        x = nn::leaky_relu_forward(x, 0.2, &cache.act[i]);
    }
    x = nn::conv2d_forward(synthesis_params[rgb_w_], synthesis_params[rgb_b_], x, 1, 0,
                           &cache.rgb_conv);
    return nn::tanh_forward(x, &cache.rgb_act);
}

ImageArray Generator::synthesize(const LatentCode& w) const {
    SynthCache cache;
    return synthesize_cached(w, cache);
}

LatentCode Generator::synthesize_backward(const SynthCache& cache, const ImageArray& dimage,
                                          nn::GradStore* synth_grads) const {
    LatentCode dw({k_, d_});
    Tensor dx = nn::tanh_backward(cache.rgb_act, dimage);
    dx = nn::conv2d_backward(synthesis_params[rgb_w_], cache.rgb_conv, dx, 1, 0,
                             synth_grads ? &(*synth_grads)[rgb_w_] : nullptr,
                             synth_grads ? &(*synth_grads)[rgb_b_] : nullptr, true);
    for (std::size_t ii = units_.size(); ii-- > 0;) {
        const Unit& u = units_[ii];
        dx = nn::leaky_relu_backward(cache.act[ii], 0.2, dx);
        if (u.style_index >= 0) {
            Tensor dstyle({d_});
            dx = nn::adain_backward(synthesis_params[u.adain_w], cache.adain[ii], dx,
                                    synth_grads ? &(*synth_grads)[u.adain_w] : nullptr,
                                    synth_grads ? &(*synth_grads)[u.adain_b] : nullptr, &dstyle);
            for (int c = 0; c < d_; ++c)
                dw.at2(u.style_index, c) += dstyle[static_cast<std::size_t>(c)];
        }
        dx = nn::conv2d_backward(synthesis_params[u.conv_w], cache.conv[ii], dx, 1, 1,
                                 synth_grads ? &(*synth_grads)[u.conv_w] : nullptr,
                                 synth_grads ? &(*synth_grads)[u.conv_b] : nullptr, true);
        if (cache.upsampled[ii]) dx = nn::upsample2x_backward(dx);
    }
    if (synth_grads) (*synth_grads)[const_idx_] += dx;
    return dw;
}

Generator Generator::finetune_stylized(const std::string& transform_name, int steps,
                                       std::uint64_t seed) const {
    // validates the name even for steps == 0
    {
        Tensor probe({3, 1, 1});
        apply_pixel_transform(transform_name, probe);
    }
    if (steps < 0) throw ConfigError("finetune_stylized: steps must be >= 0");
    Generator tuned = *this;
    if (steps == 0) return tuned;

    const int batch = 4;
    nn::Adam opt(tuned.synthesis_params, 3e-3);
    nn::GradStore grads(tuned.synthesis_params);
    Rng wseed(Rng::mix(seed, 0x46544E45ULL));
    for (int step = 0; step < steps; ++step) {
        grads.zero();
        for (int b = 0; b < batch; ++b) {
            LatentCode w = sample_latent(wseed.next_u64());
            ImageArray target = apply_pixel_transform(transform_name, synthesize(w));
            SynthCache cache;
            ImageArray y = tuned.synthesize_cached(w, cache);
            Tensor dimg(y.shape());
            const double scale = 2.0 / (static_cast<double>(y.numel()) * batch);
            for (std::size_t i = 0; i < y.numel(); ++i) dimg[i] = scale * (y[i] - target[i]);
            tuned.synthesize_backward(cache, dimg, &grads);
        }
        opt.step(tuned.synthesis_params, grads);
    }
    return tuned;
}

ImageArray apply_pixel_transform(const std::string& name, const ImageArray& x) {
    if (x.ndim() != 3 || x.dim(0) != 3)
        throw ContractError("apply_pixel_transform: expected a (3, H, W) image");
    ImageArray y(x.shape());
    const int n = x.dim(1) * x.dim(2);
    if (name == "hue_shift") {
        // 120-degree hue rotation as a channel cycle
        for (int i = 0; i < n; ++i) {
            y[static_cast<std::size_t>(i)] = x[static_cast<std::size_t>(n + i)];
            y[static_cast<std::size_t>(n + i)] = x[static_cast<std::size_t>(2 * n + i)];
            y[static_cast<std::size_t>(2 * n + i)] = x[static_cast<std::size_t>(i)];
        }
    } else if (name == "invert") {
        for (std::size_t i = 0; i < x.numel(); ++i) y[i] = -x[i];
    } else if (name == "posterize") {
        const double levels = 4.0;  // 5 quantization points in [-1, 1]
        for (std::size_t i = 0; i < x.numel(); ++i)
            y[i] = std::round((x[i] + 1.0) * 0.5 * levels) / levels * 2.0 - 1.0;
    } else {
        throw ConfigError("unknown pixel transform: " + name);
    }
    return y;
}

}  // namespace restyle
