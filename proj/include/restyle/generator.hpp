#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "restyle/errors.hpp"
#include "restyle/nn.hpp"
#include "restyle/tensor.hpp"

namespace restyle {

// Partition of the k style inputs into coarse/medium/fine index ranges:
// [0, coarse_end), [coarse_end, medium_end), [medium_end, k).
struct StyleGroups {
    int coarse_end = 0;
    int medium_end = 0;
    int k = 0;

    int group_of(int style_index) const {
        if (style_index < coarse_end) return 0;
        if (style_index < medium_end) return 1;
        return 2;
    }
    static const char* group_name(int g) {
        static const char* names[] = {"coarse", "medium", "fine"};
        return names[g];
    }
};

// A frozen style-based generator: mapping MLP (z -> w) plus a synthesis
// pyramid from a learned 4x4 constant, one AdaIN modulation per style input.
// Handles are immutable after construction; fine-tuning returns a new one.
class Generator {
public:
    struct SynthCache;

    static Generator build(std::uint64_t seed, int k, int d, int resolution,
                           int avg_samples = 10000);

    int k() const { return k_; }
    int d() const { return d_; }
    int resolution() const { return resolution_; }
    std::uint64_t seed() const { return seed_; }
    int avg_samples() const { return avg_samples_; }
    const StyleGroups& style_groups() const { return groups_; }
    const LatentCode& avg_latent() const { return avg_latent_; }

    ImageArray synthesize(const LatentCode& w) const;
    ImageArray synthesize_cached(const LatentCode& w, SynthCache& cache) const;
    // Given dL/d(image), returns dL/dw; optionally accumulates synthesis
    // parameter gradients (used only by fine-tuning).
    LatentCode synthesize_backward(const SynthCache& cache, const ImageArray& dimage,
                                   nn::GradStore* synth_grads = nullptr) const;

    Tensor map_z(const Tensor& z) const;                // (d) -> (d)
    LatentCode sample_latent(std::uint64_t seed) const; // W sample broadcast to W+

    Generator finetune_stylized(const std::string& transform_name, int steps,
                                std::uint64_t seed) const;

    double param_checksum() const {
        return mapping_params.checksum() + synthesis_params.checksum();
    }

    nn::ParamStore mapping_params;
    nn::ParamStore synthesis_params;

    // Rebuild wiring from metadata after loading a checkpoint.
    static Generator from_params(std::uint64_t seed, int k, int d, int resolution,
                                 int avg_samples, nn::ParamStore mapping,
                                 nn::ParamStore synthesis, LatentCode avg_latent,
                                 StyleGroups groups);

    struct Unit {
        int level;         // pyramid level, 0 = 4x4
        int style_index;   // -1 for style-less filler units
        int conv_w, conv_b;
        int adain_w, adain_b;  // -1 when style_index < 0
    };
    const std::vector<Unit>& units() const { return units_; }

    struct SynthCache {
        std::vector<nn::ConvCache> conv;
        std::vector<nn::AdainCache> adain;
        std::vector<nn::ActCache> act;
        std::vector<Tensor> pre_upsample;  // input to each level's upsample
        std::vector<bool> upsampled;       // whether unit index starts a level
        nn::ConvCache rgb_conv;
        nn::ActCache rgb_act;
    };

private:
    Generator() = default;
    void wire(std::uint64_t seed, int k, int d, int resolution, bool init_params);
    void compute_avg_latent();

    int k_ = 0, d_ = 0, resolution_ = 0;
    std::uint64_t seed_ = 0;
    int avg_samples_ = 0;
    StyleGroups groups_;
    LatentCode avg_latent_;

    // mapping MLP parameter indices
    std::vector<int> map_w_, map_b_;
    // synthesis wiring
    int const_idx_ = -1;
    std::vector<Unit> units_;
    int rgb_w_ = -1, rgb_b_ = -1;
    std::vector<int> level_channels_;
};

// Deterministic pixel transforms defining toy "stylized" domains.
// name in {hue_shift, invert, posterize}.
ImageArray apply_pixel_transform(const std::string& name, const ImageArray& x);

StyleGroups default_style_groups(int k);

}  // namespace restyle
