#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace lrpseg {

// Network metadata carried alongside the tensors. Bounds are in raw pixel
// units; the z^B rule maps them through the same normalization as the image.
struct Manifest {
    std::string variant = "toy";
    std::array<std::string, 2> class_names{"damage", "no_damage"};
    std::size_t damage_index = 0;
    std::array<float, 3> mean{0.0f, 0.0f, 0.0f};
    std::array<float, 3> std{1.0f, 1.0f, 1.0f};
    std::array<float, 3> lower{0.0f, 0.0f, 0.0f};
    std::array<float, 3> upper{1.0f, 1.0f, 1.0f};

    std::string to_json() const;
    static Manifest from_json(const std::string& text);
};

struct TensorEntry {
    std::string name;
    std::vector<std::size_t> dims;
    std::vector<float> data;

    std::size_t count() const;
};

// In-memory image of an LRPW file.
//
//   "LRPW" | u16 version | u32 manifest_len | manifest (UTF-8 JSON)
//   then until EOF, per tensor:
//   u32 name_len | name | u32 rank | u32 dims[rank] | f32 payload[prod(dims)]
//
// All integers and floats little-endian.
struct WeightContainer {
    static constexpr std::uint16_t kVersion = 1;

    Manifest manifest;
    std::string manifest_text;  // verbatim, so save(load(f)) reproduces f byte for byte
    std::vector<TensorEntry> entries;

    void set_manifest(const Manifest& m);
    const TensorEntry* find(const std::string& name) const;
    TensorEntry* find(const std::string& name);
};

std::vector<std::uint8_t> serialize(const WeightContainer& weights);
// Parses the byte layout only; no architecture checks.
WeightContainer deserialize(const std::vector<std::uint8_t>& bytes);

// Reads, parses and validates against the architecture named in the manifest.
WeightContainer load_weights(const std::filesystem::path& path);
void save_weights(const WeightContainer& weights, const std::filesystem::path& path);

}  // namespace lrpseg
