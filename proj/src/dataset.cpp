#include "restyle/dataset.hpp"

#include <algorithm>
#include <filesystem>

#include "restyle/errors.hpp"
#include "restyle/io.hpp"
#include "restyle/rng.hpp"

namespace restyle {

namespace fs = std::filesystem;

std::uint64_t Dataset::item_hash(std::size_t i) const {
    // FNV-1a over the raw image bytes plus the id
    const DatasetItem& it = items.at(i);
    std::uint64_t h = 1469598103934665603ULL;
    auto mix_bytes = [&h](const void* p, std::size_t n) {
        const auto* b = static_cast<const unsigned char*>(p);
        for (std::size_t j = 0; j < n; ++j) {
            h ^= b[j];
            h *= 1099511628211ULL;
        }
    };
    mix_bytes(&it.id, sizeof(it.id));
    mix_bytes(it.image.data(), it.image.numel() * sizeof(double));
    mix_bytes(it.target.data(), it.target.numel() * sizeof(double));
    return h;
}

Dataset make_dataset(const Generator& g, const DatasetSpec& spec) {
    if (spec.size < 0) throw ConfigError("make_dataset: size must be >= 0");
    Dataset data;
    if (spec.source == "frozen_generator") {
        data.items.reserve(static_cast<std::size_t>(spec.size));
        for (int i = 0; i < spec.size; ++i) {
            const std::uint64_t item_seed = Rng::mix(spec.seed, static_cast<std::uint64_t>(i));
            LatentCode w = g.sample_latent(item_seed);
            if (spec.latent_jitter > 0.0) {
                Rng jrng(Rng::mix(item_seed, 0x4A495454ULL));
                for (std::size_t j = 0; j < w.numel(); ++j)
                    w[j] += jrng.gaussian() * spec.latent_jitter;
            }
            DatasetItem item;
            item.id = i;
            item.image = g.synthesize(w);
            item.target = item.image;
            item.true_latent = std::move(w);
            data.items.push_back(std::move(item));
        }
    } else if (spec.source == "image_directory") {
        if (spec.directory.empty() || !fs::is_directory(spec.directory))
            throw ConfigError("make_dataset: image_directory source needs a directory");
        std::vector<fs::path> files;
        for (const auto& entry : fs::directory_iterator(spec.directory)) {
            const auto ext = entry.path().extension();
            if (ext == ".ppm" || ext == ".bin") files.push_back(entry.path());
        }
        if (files.empty())
            throw ConfigError("make_dataset: no .ppm/.bin images in " + spec.directory);
        std::sort(files.begin(), files.end());
        int id = 0;
        for (const auto& p : files) {
            DatasetItem item;
            item.id = id++;
            item.image = p.extension() == ".ppm" ? io::read_ppm(p) : io::read_tensor(p);
            if (item.image.ndim() != 3 || item.image.dim(0) != 3 ||
                item.image.dim(1) != g.resolution() || item.image.dim(2) != g.resolution())
                throw ConfigError("make_dataset: image " + p.string() +
                                  " does not match generator resolution");
            item.target = item.image;
            data.items.push_back(std::move(item));
            if (spec.size > 0 && id >= spec.size) break;
        }
    } else {
        throw ConfigError("make_dataset: unknown source " + spec.source);
    }
    return data;
}

std::pair<Dataset, Dataset> split_dataset(const Dataset& data, double train_ratio,
                                          std::uint64_t seed) {
    if (train_ratio < 0.0 || train_ratio > 1.0)
        throw ConfigError("split_dataset: train_ratio must be in [0, 1]");
    std::vector<std::size_t> idx(data.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    Rng rng(Rng::mix(seed, 0x53504C54ULL));
    for (std::size_t i = idx.size(); i > 1; --i)
        std::swap(idx[i - 1], idx[static_cast<std::size_t>(rng.next_below(i))]);
    const auto n_train = static_cast<std::size_t>(train_ratio * static_cast<double>(idx.size()));
    Dataset train, test;
    for (std::size_t i = 0; i < idx.size(); ++i)
        (i < n_train ? train : test).items.push_back(data.items[idx[i]]);
    return {std::move(train), std::move(test)};
}

Dataset with_transformed_targets(const Dataset& data, const std::string& transform_name) {
    Dataset out = data;
    for (auto& item : out.items) item.target = apply_pixel_transform(transform_name, item.image);
    return out;
}

}  // namespace restyle
