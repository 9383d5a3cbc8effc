#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "lrpseg/relevance_map.hpp"
#include "lrpseg/tensor.hpp"

namespace lrpseg {

// 8-bit gray, gray+alpha, RGB or RGBA PNG -> 1 x 3 x H x W in [0, 1]; gray is replicated.
Tensor4 read_png(const std::filesystem::path& path);
// Nonzero pixels -> 1.
std::vector<std::uint8_t> read_mask_png(const std::filesystem::path& path, std::size_t* height = nullptr,
                                        std::size_t* width = nullptr);

void write_png_gray(const std::filesystem::path& path, std::size_t height, std::size_t width,
                    const std::vector<std::uint8_t>& pixels);
void write_png_rgb(const std::filesystem::path& path, std::size_t height, std::size_t width,
                   const std::vector<std::uint8_t>& pixels);

// Channel 0 of a 1 x C x H x W image, quantized to 8 bits.
void write_image_png(const std::filesystem::path& path, const Tensor4& image);
// 0/1 mask -> 0/255 PNG.
void write_mask_png(const std::filesystem::path& path, std::size_t height, std::size_t width,
                    const std::vector<std::uint8_t>& mask);

// Diverging colormap centered at zero: positive red, negative blue, zero white.
void write_heatmap_png(const std::filesystem::path& path, const RelevanceMap& map);
// Values in [0, 1] -> gray levels.
void write_score_png(const std::filesystem::path& path, const RelevanceMap& map);

}  // namespace lrpseg
