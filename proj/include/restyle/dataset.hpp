#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "restyle/generator.hpp"
#include "restyle/tensor.hpp"

namespace restyle {

struct DatasetItem {
    int id = 0;
    ImageArray image;                      // encoder input
    ImageArray target;                     // reconstruction target (== image unless translated)
    std::optional<LatentCode> true_latent; // known for frozen-generator data with sigma == 0
};

struct Dataset {
    std::vector<DatasetItem> items;
    std::size_t size() const { return items.size(); }
    bool empty() const { return items.empty(); }
    std::uint64_t item_hash(std::size_t i) const;
};

struct DatasetSpec {
    std::string source = "frozen_generator";  // or "image_directory"
    std::string directory;                    // for image_directory
    int size = 0;
    std::uint64_t seed = 0;
    double latent_jitter = 0.0;  // per-entry gaussian noise on the latent rows
};

Dataset make_dataset(const Generator& g, const DatasetSpec& spec);

// Deterministic disjoint split by shuffled index; first portion is train.
std::pair<Dataset, Dataset> split_dataset(const Dataset& data, double train_ratio,
                                          std::uint64_t seed);

// Replaces every target with transform(image); used for stylized training.
Dataset with_transformed_targets(const Dataset& data, const std::string& transform_name);

}  // namespace restyle
