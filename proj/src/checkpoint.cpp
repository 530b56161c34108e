#include "restyle/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "restyle/errors.hpp"

namespace restyle {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'R', 'S', 'C', 'K', 'P', 'T', '1', '\n'};

void write_store(std::ofstream& f, const nn::ParamStore& store) {
    const std::uint64_t n = store.size();
    f.write(reinterpret_cast<const char*>(&n), 8);
    for (const auto& e : store.entries()) {
        const std::uint32_t name_len = static_cast<std::uint32_t>(e.name.size());
        f.write(reinterpret_cast<const char*>(&name_len), 4);
        f.write(e.name.data(), name_len);
        const std::uint32_t nd = static_cast<std::uint32_t>(e.value.ndim());
        f.write(reinterpret_cast<const char*>(&nd), 4);
        for (int i = 0; i < e.value.ndim(); ++i) {
            const std::int64_t d = e.value.dim(i);
            f.write(reinterpret_cast<const char*>(&d), 8);
        }
        f.write(reinterpret_cast<const char*>(e.value.data()),
                static_cast<std::streamsize>(e.value.numel() * sizeof(double)));
    }
}

nn::ParamStore read_store(std::ifstream& f) {
    nn::ParamStore store;
    std::uint64_t n = 0;
    f.read(reinterpret_cast<char*>(&n), 8);
    for (std::uint64_t i = 0; i < n; ++i) {
        std::uint32_t name_len = 0;
        f.read(reinterpret_cast<char*>(&name_len), 4);
        std::string name(name_len, '\0');
        f.read(name.data(), name_len);
        std::uint32_t nd = 0;
        f.read(reinterpret_cast<char*>(&nd), 4);
        std::vector<int> shape(nd);
        for (std::uint32_t j = 0; j < nd; ++j) {
            std::int64_t d = 0;
            f.read(reinterpret_cast<char*>(&d), 8);
            shape[j] = static_cast<int>(d);
        }
        Tensor t(shape);
        f.read(reinterpret_cast<char*>(t.data()),
               static_cast<std::streamsize>(t.numel() * sizeof(double)));
        store.add(std::move(name), std::move(t));
    }
    if (!f) throw ConfigError("checkpoint: truncated parameter block");
    return store;
}

void write_header(std::ofstream& f, const json& meta) {
    f.write(kMagic, 8);
    const std::string s = meta.dump();  // nlohmann sorts object keys
    const std::uint64_t len = s.size();
    f.write(reinterpret_cast<const char*>(&len), 8);
    f.write(s.data(), static_cast<std::streamsize>(s.size()));
}

json read_header(std::ifstream& f, const fs::path& path) {
    char magic[8];
    f.read(magic, 8);
    if (!f || std::memcmp(magic, kMagic, 8) != 0)
        throw ConfigError("checkpoint: bad magic in " + path.string());
    std::uint64_t len = 0;
    f.read(reinterpret_cast<char*>(&len), 8);
    std::string s(len, '\0');
    f.read(s.data(), static_cast<std::streamsize>(len));
    if (!f) throw ConfigError("checkpoint: truncated metadata in " + path.string());
    return json::parse(s);
}

Tensor tensor_from_store(nn::ParamStore& store, const std::string& name) {
    for (auto& e : store.entries())
        if (e.name == name) return e.value;
    throw ConfigError("checkpoint: missing array " + name);
}

}  // namespace

void save_generator(const fs::path& path, const Generator& g) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("save_generator: cannot open " + path.string());
    json meta;
    meta["kind"] = "generator";
    meta["k"] = g.k();
    meta["d"] = g.d();
    meta["resolution"] = g.resolution();
    meta["seed"] = g.seed();
    meta["avg_samples"] = g.avg_samples();
    meta["style_groups"] = {{"coarse_end", g.style_groups().coarse_end},
                            {"medium_end", g.style_groups().medium_end},
                            {"k", g.style_groups().k}};
    write_header(f, meta);
    write_store(f, g.mapping_params);
    write_store(f, g.synthesis_params);
    nn::ParamStore aux;
    Tensor avg = g.avg_latent();
    aux.add("avg_latent", std::move(avg));
    write_store(f, aux);
}

Generator load_generator(const fs::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ConfigError("load_generator: cannot open " + path.string());
    json meta = read_header(f, path);
    if (meta.value("kind", "") != "generator")
        throw ConfigError("load_generator: not a generator checkpoint");
    nn::ParamStore mapping = read_store(f);
    nn::ParamStore synthesis = read_store(f);
    nn::ParamStore aux = read_store(f);
    StyleGroups groups;
    groups.coarse_end = meta["style_groups"]["coarse_end"].get<int>();
    groups.medium_end = meta["style_groups"]["medium_end"].get<int>();
    groups.k = meta["style_groups"]["k"].get<int>();
    return Generator::from_params(meta["seed"].get<std::uint64_t>(), meta["k"].get<int>(),
                                  meta["d"].get<int>(), meta["resolution"].get<int>(),
                                  meta["avg_samples"].get<int>(), std::move(mapping),
                                  std::move(synthesis), tensor_from_store(aux, "avg_latent"),
                                  groups);
}

void save_encoder(const fs::path& path, const Encoder& e) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("save_encoder: cannot open " + path.string());
    json meta;
    meta["kind"] = "encoder";
    meta["variant"] = to_string(e.variant());
    meta["in_channels"] = e.in_channels();
    meta["k"] = e.k();
    meta["d"] = e.d();
    meta["resolution"] = e.resolution();
    meta["seed"] = e.seed();
    meta["style_groups"] = {{"coarse_end", e.style_groups().coarse_end},
                            {"medium_end", e.style_groups().medium_end},
                            {"k", e.style_groups().k}};
    write_header(f, meta);
    write_store(f, e.backbone_params);
    write_store(f, e.head_params);
}

Encoder load_encoder(const fs::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ConfigError("load_encoder: cannot open " + path.string());
    json meta = read_header(f, path);
    if (meta.value("kind", "") != "encoder")
        throw ConfigError("load_encoder: not an encoder checkpoint");
    nn::ParamStore backbone = read_store(f);
    nn::ParamStore heads = read_store(f);
    const int k = meta["k"].get<int>();
    StyleGroups groups = default_style_groups(k);
    if (meta.contains("style_groups")) {
        groups.coarse_end = meta["style_groups"]["coarse_end"].get<int>();
        groups.medium_end = meta["style_groups"]["medium_end"].get<int>();
        groups.k = meta["style_groups"]["k"].get<int>();
    }
    return Encoder::from_params(encoder_variant_from_string(meta["variant"].get<std::string>()),
                                meta["in_channels"].get<int>(), k, meta["d"].get<int>(),
                                meta["resolution"].get<int>(), meta["seed"].get<std::uint64_t>(),
                                groups, std::move(backbone), std::move(heads));
}

}  // namespace restyle
