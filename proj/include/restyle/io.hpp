#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "restyle/tensor.hpp"

namespace restyle::io {

// ---- raster output ------------------------------------------------------

// 8-bit RGB rows, top to bottom.
void write_png(const std::filesystem::path& path, const std::vector<std::uint8_t>& rgb,
               int width, int height);
void write_ppm(const std::filesystem::path& path, const std::vector<std::uint8_t>& rgb,
               int width, int height);
ImageArray read_ppm(const std::filesystem::path& path);  // -> (3, H, W) in [-1, 1]

// (3, H, W) in [-1, 1] -> packed RGB bytes.
std::vector<std::uint8_t> image_to_rgb8(const ImageArray& img);
// (H, W) in [0, 1] -> blue-to-red colormap bytes.
std::vector<std::uint8_t> heatmap_to_rgb8(const Tensor& map);

// ---- tensors ------------------------------------------------------------

void write_tensor(const std::filesystem::path& path, const Tensor& t);
Tensor read_tensor(const std::filesystem::path& path);

// ---- text ---------------------------------------------------------------

void write_text(const std::filesystem::path& path, const std::string& content);
std::string read_text(const std::filesystem::path& path);

// Canonical float formatting for reproducible CSV output.
std::string format_double(double v);

}  // namespace restyle::io
