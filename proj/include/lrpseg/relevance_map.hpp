#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

namespace lrpseg {

// Single-channel float map: relevance heatmaps and per-pixel scores.
struct RelevanceMap {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<float> values;  // row-major
    std::size_t target_class = 0;
    std::string image_id;

    RelevanceMap() = default;
    RelevanceMap(std::size_t h, std::size_t w, float fill = 0.0f) : height(h), width(w), values(h * w, fill) {}

    float& at(std::size_t y, std::size_t x) { return values[y * width + x]; }
    float at(std::size_t y, std::size_t x) const { return values[y * width + x]; }
    std::size_t size() const { return values.size(); }
    double sum() const;
};

// Float dump: u32 height | u32 width | f32 values[height*width], little-endian.
void write_float_map(const std::filesystem::path& path, const RelevanceMap& map);
RelevanceMap read_float_map(const std::filesystem::path& path);

}  // namespace lrpseg
