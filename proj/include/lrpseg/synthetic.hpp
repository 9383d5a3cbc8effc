#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "lrpseg/network.hpp"
#include "lrpseg/tensor.hpp"

namespace lrpseg {

// Crack-like scene: textured background with an optional dark polyline.
struct SceneSpec {
    std::uint64_t seed = 0;
    std::size_t height = 64;
    std::size_t width = 64;
    // background
    double base_brightness = 0.55;
    double texture_amplitude = 0.08;  // low-frequency noise
    double gradient_strength = 0.15;  // linear brightness ramp
    double pixel_noise = 0.02;
    // crack
    bool has_crack = true;
    std::size_t min_points = 3;
    std::size_t max_points = 7;
    double min_width = 1.0;
    double max_width = 4.0;
    double min_contrast = 0.1;
    double max_contrast = 0.6;
    double min_coverage = 0.005;
    double max_coverage = 0.08;
};

struct Sample {
    std::string id;
    Tensor4 image;                   // 1 x 3 x H x W, gray replicated, 8-bit quantized
    Label label = Label::NoDamage;
    std::vector<std::uint8_t> mask;  // truth, evaluation only
};

// Deterministic per seed. Re-draws the crack up to 10 times to satisfy the
// coverage bounds, then throws DataError.
Sample generate(const SceneSpec& spec);

struct Dataset {
    std::vector<Sample> train;
    std::vector<Sample> val;
    std::vector<Sample> test;
};

// Stratified 60/20/20 split; val and test gain horizontally and vertically
// flipped copies of each image.
Dataset make_dataset(std::size_t n_pos, std::size_t n_neg, std::uint64_t seed, std::size_t size = 64);

Sample flipped(const Sample& s, bool horizontal);

// images/<id>.png, masks/<id>.png and manifest.csv (id,path,label,split).
void write_dataset(const std::filesystem::path& dir, const Dataset& data);

struct ManifestRow {
    std::string id;
    std::string path;
    Label label = Label::NoDamage;
    std::string split;
};

std::vector<ManifestRow> read_manifest(const std::filesystem::path& csv);
// Loads image and mask (when present) for every row of the given split ("" = all).
std::vector<Sample> read_split(const std::filesystem::path& dir, const std::string& split);

}  // namespace lrpseg
