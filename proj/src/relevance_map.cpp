#include "lrpseg/relevance_map.hpp"

#include <cstdint>
#include <cstring>

#include "lrpseg/error.hpp"
#include "lrpseg/io_util.hpp"

namespace lrpseg {

double RelevanceMap::sum() const {
    double s = 0.0;
    for (float v : values) s += v;
    return s;
}

void write_float_map(const std::filesystem::path& path, const RelevanceMap& map) {
    std::vector<std::uint8_t> bytes(8 + map.values.size() * sizeof(float));
    const auto h = static_cast<std::uint32_t>(map.height);
    const auto w = static_cast<std::uint32_t>(map.width);
    std::memcpy(bytes.data(), &h, 4);
    std::memcpy(bytes.data() + 4, &w, 4);
    std::memcpy(bytes.data() + 8, map.values.data(), map.values.size() * sizeof(float));
    write_file_atomic(path, bytes);
}

RelevanceMap read_float_map(const std::filesystem::path& path) {
    const auto bytes = read_file(path);
    if (bytes.size() < 8) throw FormatError("'" + path.string() + "' is too short for a float map");
    std::uint32_t h = 0, w = 0;
    std::memcpy(&h, bytes.data(), 4);
    std::memcpy(&w, bytes.data() + 4, 4);
    const std::size_t n = static_cast<std::size_t>(h) * w;
    if (bytes.size() != 8 + n * sizeof(float)) {
        throw FormatError("'" + path.string() + "' payload does not match its " + std::to_string(h) + "x" +
                          std::to_string(w) + " header");
    }
    RelevanceMap map(h, w);
    std::memcpy(map.values.data(), bytes.data() + 8, n * sizeof(float));
    map.image_id = path.stem().string();
    return map;
}

}  // namespace lrpseg
