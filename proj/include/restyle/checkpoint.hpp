#pragma once

#include <filesystem>

#include "restyle/encoder.hpp"
#include "restyle/generator.hpp"

namespace restyle {

// Single-file archive: magic, canonical JSON metadata, then the parameter
// arrays in declaration order. save -> load -> save is byte identical.
void save_generator(const std::filesystem::path& path, const Generator& g);
Generator load_generator(const std::filesystem::path& path);

void save_encoder(const std::filesystem::path& path, const Encoder& e);
Encoder load_encoder(const std::filesystem::path& path);

}  // namespace restyle
