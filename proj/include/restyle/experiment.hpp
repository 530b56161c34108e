#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "restyle/analysis.hpp"
#include "restyle/bootstrap.hpp"
#include "restyle/checkpoint.hpp"
#include "restyle/dataset.hpp"
#include "restyle/schemes.hpp"

namespace restyle {

struct GeneratorSpec {
    std::uint64_t seed = 1;
    int k = 8;
    int d = 64;
    int resolution = 32;
    int avg_samples = 10000;
};

struct EncoderSpec {
    std::string name = "restyle_simple";
    std::string variant = "simple";
    int in_channels = 6;
    int n_steps = 5;              // training steps per batch
    std::string domain = "base";  // "base" or "styled"
    std::uint64_t seed = 3;
};

struct EvalSpec {
    int n_images = 64;
    int max_steps = 10;
    int opt_images = 16;
    int opt_iters = 600;
    int opt_record_every = 10;
    double opt_lr = 0.05;
    int hybrid_opt_iters = 100;
    int hybrid_encoder_steps = 1;
    int trace_count = 4;  // traces persisted to disk per scheme
};

struct BootstrapSpec {
    bool enabled = false;
    std::string transform = "hue_shift";
    int finetune_steps = 150;
    std::uint64_t finetune_seed = 17;
    int n_images = 64;
    int n_steps = 5;
    int alignment_samples = 64;
};

struct ExperimentConfig {
    GeneratorSpec generator;
    DatasetSpec dataset;
    double train_ratio = 0.889;
    std::vector<EncoderSpec> encoders;
    TrainConfig train;
    EvalSpec eval;
    BootstrapSpec bootstrap;
    std::uint64_t losses_seed = 5;
    std::string out_dir;
    int n_threads = 4;

    nlohmann::json to_json() const;
    static ExperimentConfig from_json(const nlohmann::json& j);
    static ExperimentConfig load(const std::filesystem::path& path);
    // FNV-1a over the canonical JSON encoding; stamped into every CSV header.
    std::uint64_t hash() const;
    std::string hash_hex() const;
};

struct BootstrapComparison {
    double bootstrapped_mean_similarity = 0.0;
    double average_mean_similarity = 0.0;
    double bootstrapped_mean_l2 = 0.0;
    double average_mean_l2 = 0.0;
    AlignmentReport alignment;
};

struct ExperimentResult {
    std::filesystem::path dir;
    std::optional<Generator> generator;
    std::optional<Generator> styled_generator;
    std::map<std::string, Encoder> encoders;
    Dataset train_set, test_set;
    std::vector<analysis::MetricRecord> records;
    // per base-domain ReStyle encoder: every evaluated trace, in image order
    std::map<std::string, std::vector<InversionTrace>> traces;
    std::optional<BootstrapComparison> bootstrap;
    std::vector<std::string> summary_csvs;  // the bitwise-reproducible file set
};

// Runs the configured pipeline end to end and writes all artifacts under
// cfg.out_dir. Any stage failure is rethrown with the stage named.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

// report.md for an experiment directory produced by run_experiment.
void write_report(const ExperimentResult& result, const ExperimentConfig& cfg);

}  // namespace restyle
