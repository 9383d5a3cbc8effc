#include "lrpseg/weights.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include <json.hpp>

#include "lrpseg/error.hpp"
#include "lrpseg/io_util.hpp"
#include "lrpseg/network.hpp"

namespace lrpseg {

static_assert(std::endian::native == std::endian::little, "LRPW I/O assumes a little-endian host");

namespace {

template <typename T, std::size_t N>
std::array<T, N> read_array(const nlohmann::json& j, const char* key, std::array<T, N> fallback) {
    if (!j.contains(key)) return fallback;
    const auto& v = j.at(key);
    if (!v.is_array() || v.size() != N) {
        throw FormatError(std::string("manifest field '") + key + "' must be an array of " + std::to_string(N));
    }
    std::array<T, N> out{};
    for (std::size_t i = 0; i < N; ++i) out[i] = v[i].get<T>();
    return out;
}

class Reader {
public:
    explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

    bool done() const { return pos_ == bytes_.size(); }
    std::size_t remaining() const { return bytes_.size() - pos_; }

    void take(void* dst, std::size_t n, const std::string& what) {
        if (bytes_.size() - pos_ < n) throw FormatError("truncated weight file: " + what);
        std::memcpy(dst, bytes_.data() + pos_, n);
        pos_ += n;
    }

    template <typename T>
    T value(const std::string& what) {
        T v;
        take(&v, sizeof(T), what);
        return v;
    }

private:
    const std::vector<std::uint8_t>& bytes_;
    std::size_t pos_ = 0;
};

template <typename T>
void put(std::vector<std::uint8_t>& out, T v) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
    out.insert(out.end(), p, p + sizeof(T));
}

}  // namespace

std::string Manifest::to_json() const {
    nlohmann::ordered_json j;
    j["variant"] = variant;
    j["class_names"] = class_names;
    j["damage_index"] = damage_index;
    j["mean"] = mean;
    j["std"] = std;
    j["lower"] = lower;
    j["upper"] = upper;
    return j.dump(2);
}

Manifest Manifest::from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("manifest is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw FormatError("manifest must be a JSON object");
    Manifest m;
    try {
        if (!j.contains("variant")) throw FormatError("manifest lacks 'variant'");
        m.variant = j.at("variant").get<std::string>();
        m.class_names = read_array(j, "class_names", m.class_names);
        m.damage_index = j.value("damage_index", std::size_t{0});
        m.mean = read_array(j, "mean", m.mean);
        m.std = read_array(j, "std", m.std);
        m.lower = read_array(j, "lower", m.lower);
        m.upper = read_array(j, "upper", m.upper);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed manifest: ") + e.what());
    }
    if (m.damage_index != 0) throw FormatError("manifest damage_index must be 0 (output neuron 0 is damage)");
    for (std::size_t c = 0; c < 3; ++c) {
        if (!(m.lower[c] < m.upper[c])) {
            throw FormatError("manifest bounds for channel " + std::to_string(c) + " violate lower < upper");
        }
        if (!(m.std[c] > 0.0f)) throw FormatError("manifest std for channel " + std::to_string(c) + " must be > 0");
    }
    return m;
}

std::size_t TensorEntry::count() const {
    std::size_t n = 1;
    for (std::size_t d : dims) n *= d;
    return n;
}

void WeightContainer::set_manifest(const Manifest& m) {
    manifest = m;
    manifest_text = m.to_json();
}

const TensorEntry* WeightContainer::find(const std::string& name) const {
    for (const auto& e : entries)
        if (e.name == name) return &e;
    return nullptr;
}

TensorEntry* WeightContainer::find(const std::string& name) {
    for (auto& e : entries)
        if (e.name == name) return &e;
    return nullptr;
}

std::vector<std::uint8_t> serialize(const WeightContainer& weights) {
    std::vector<std::uint8_t> out{'L', 'R', 'P', 'W'};
    put<std::uint16_t>(out, WeightContainer::kVersion);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(weights.manifest_text.size()));
    out.insert(out.end(), weights.manifest_text.begin(), weights.manifest_text.end());
    for (const auto& e : weights.entries) {
        if (e.data.size() != e.count()) {
            throw FormatError("entry '" + e.name + "' payload does not match its dims");
        }
        put<std::uint32_t>(out, static_cast<std::uint32_t>(e.name.size()));
        out.insert(out.end(), e.name.begin(), e.name.end());
        put<std::uint32_t>(out, static_cast<std::uint32_t>(e.dims.size()));
        for (std::size_t d : e.dims) put<std::uint32_t>(out, static_cast<std::uint32_t>(d));
        const auto* p = reinterpret_cast<const std::uint8_t*>(e.data.data());
        out.insert(out.end(), p, p + e.data.size() * sizeof(float));
    }
    return out;
}

WeightContainer deserialize(const std::vector<std::uint8_t>& bytes) {
    Reader in(bytes);
    char magic[4];
    in.take(magic, 4, "magic");
    if (std::memcmp(magic, "LRPW", 4) != 0) throw FormatError("bad magic: not an LRPW weight file");
    const auto version = in.value<std::uint16_t>("version");
    if (version != WeightContainer::kVersion) {
        throw FormatError("unsupported LRPW version " + std::to_string(version));
    }
    const auto manifest_len = in.value<std::uint32_t>("manifest length");
    WeightContainer w;
    w.manifest_text.resize(manifest_len);
    in.take(w.manifest_text.data(), manifest_len, "manifest");
    w.manifest = Manifest::from_json(w.manifest_text);

    while (!in.done()) {
        TensorEntry e;
        const auto name_len = in.value<std::uint32_t>("entry name length");
        e.name.resize(name_len);
        in.take(e.name.data(), name_len, "entry name");
        const auto rank = in.value<std::uint32_t>("rank of entry '" + e.name + "'");
        if (rank == 0 || rank > 4) throw FormatError("entry '" + e.name + "' has unsupported rank " + std::to_string(rank));
        for (std::uint32_t i = 0; i < rank; ++i) e.dims.push_back(in.value<std::uint32_t>("dims of entry '" + e.name + "'"));
        // Check before allocating so corrupt dims cannot request absurd buffers.
        std::size_t count = 1;
        for (std::size_t d : e.dims) count = d != 0 && count > in.remaining() / d ? in.remaining() + 1 : count * d;
        if (count > in.remaining() / sizeof(float)) throw FormatError("truncated weight file: payload of entry '" + e.name + "'");
        e.data.resize(count);
        in.take(e.data.data(), e.data.size() * sizeof(float), "payload of entry '" + e.name + "'");
        if (w.find(e.name)) throw FormatError("duplicate entry '" + e.name + "'");
        w.entries.push_back(std::move(e));
    }
    return w;
}

WeightContainer load_weights(const std::filesystem::path& path) {
    WeightContainer w = deserialize(read_file(path));
    validate(Architecture::make(parse_variant(w.manifest.variant)), w);
    return w;
}

void save_weights(const WeightContainer& weights, const std::filesystem::path& path) {
    write_file_atomic(path, serialize(weights));
}

}  // namespace lrpseg
