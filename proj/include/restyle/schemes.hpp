#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "restyle/dataset.hpp"
#include "restyle/encoder.hpp"
#include "restyle/generator.hpp"
#include "restyle/losses.hpp"

namespace restyle {

struct StepRecord {
    LatentCode w;
    ResidualCode delta;  // empty at the initialization record
    ImageArray y_hat;
    std::map<std::string, double> losses;
    double wall_clock_s = 0.0;  // cumulative model time up to this step
};

struct InversionTrace {
    std::string scheme;
    nlohmann::json metadata;
    std::vector<StepRecord> steps;

    // Eq. 3 replay: w_{t+1} == w_t + delta_{t+1}, exactly.
    bool replay_exact() const;
    double final_loss(const std::string& name) const;
};

struct InferOptions {
    const PerceptualNet* pnet = nullptr;     // when set, per-step losses include it
    const SimilarityNet* snet = nullptr;
};

// ReStyle iterative inference (Eqs. 1-4), initialized at the average latent.
InversionTrace restyle_infer(const Encoder& e, const Generator& g, const ImageArray& x,
                             int n_steps, const InferOptions& opts = {});

// Conventional single-pass encoding; the N=1 special case.
InversionTrace single_pass_infer(const Encoder& e, const Generator& g, const ImageArray& x,
                                 const InferOptions& opts = {});

// Naive ablation: a conventional encoder applied to its own output image,
// its output read as an absolute latent (head output + average latent).
InversionTrace naive_iterate(const Encoder& e3, const Generator& g, const ImageArray& x,
                             int n_steps, const InferOptions& opts = {});

struct OptimizeOptions {
    double lr = 0.05;
    LossWeights weights{1.0, 0.8, 0.0};
    int record_every = 10;
    const PerceptualNet* pnet = nullptr;
    const SimilarityNet* snet = nullptr;
    double divergence_threshold = 1e6;
};

// Per-image gradient descent on w in W+ against a frozen generator.
InversionTrace optimize_latent(const Generator& g, const ImageArray& x,
                               const LatentCode& init, int n_iters,
                               const OptimizeOptions& opts = {});

// Encoder-initialized optimization; trace concatenates both phases.
InversionTrace hybrid_infer(const Encoder& e, const Generator& g, const ImageArray& x,
                            int n_opt_iters, int encoder_steps = 1,
                            const OptimizeOptions& opts = {});

struct TrainConfig {
    int n_steps = 5;
    int batch_size = 8;
    double learning_rate = 1e-3;
    LossWeights weights;
    int total_iterations = 0;
    std::uint64_t seed = 0;
    bool isolated_backprop = true;  // no gradient flow across steps (default)
    int n_threads = 1;

    void validate() const;
};

struct TrainLog {
    // per iteration: the per-step total losses (n_steps entries)
    std::vector<std::vector<double>> step_losses;
    double wall_clock_s = 0.0;
};

// Trains the encoder with the N-step scheme; the generator stays frozen.
// Returns the trained encoder (input untouched) and fills the log.
Encoder restyle_train(const Encoder& e, const Generator& g, const Dataset& data,
                      const TrainConfig& cfg, const PerceptualNet& pnet,
                      const SimilarityNet& snet, TrainLog* log = nullptr);

}  // namespace restyle
