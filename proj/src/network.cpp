#include "lrpseg/network.hpp"

#include <cmath>
#include <random>

#include "lrpseg/error.hpp"

namespace lrpseg {

std::string to_string(Variant v) {
    switch (v) {
        case Variant::VggA128N: return "vgg_a_128n";
        case Variant::VggAOneFC: return "vgg_a_one_fc";
        case Variant::Toy: return "toy";
    }
    return "unknown";
}

Variant parse_variant(const std::string& tag) {
    if (tag == "vgg_a_128n") return Variant::VggA128N;
    if (tag == "vgg_a_one_fc") return Variant::VggAOneFC;
    if (tag == "toy") return Variant::Toy;
    throw FormatError("unknown architecture variant '" + tag + "'");
}

std::string to_string(Label l) { return l == Label::Damage ? "damage" : "no_damage"; }

namespace {

LayerSpec conv(const std::string& name, std::size_t in, std::size_t out) {
    return {LayerKind::Conv, name, in, out, 3, 1, 1};
}
LayerSpec relu_after(const std::string& name) { return {LayerKind::Relu, name + ".relu"}; }
LayerSpec pool(const std::string& name) { return {LayerKind::MaxPool, name}; }
LayerSpec fc(const std::string& name, std::size_t in, std::size_t out) {
    return {LayerKind::Linear, name, in, out, 0, 0, 0};
}

void push_conv_relu(std::vector<LayerSpec>& layers, const std::string& name, std::size_t in, std::size_t out) {
    layers.push_back(conv(name, in, out));
    layers.push_back(relu_after(name));
}

// VGG-11 ("configuration A") convolutional stack, 3x224x224 -> 512x7x7.
std::vector<LayerSpec> vgg11_features() {
    std::vector<LayerSpec> l;
    push_conv_relu(l, "conv1_1", 3, 64);
    l.push_back(pool("pool1"));
    push_conv_relu(l, "conv2_1", 64, 128);
    l.push_back(pool("pool2"));
    push_conv_relu(l, "conv3_1", 128, 256);
    push_conv_relu(l, "conv3_2", 256, 256);
    l.push_back(pool("pool3"));
    push_conv_relu(l, "conv4_1", 256, 512);
    push_conv_relu(l, "conv4_2", 512, 512);
    l.push_back(pool("pool4"));
    push_conv_relu(l, "conv5_1", 512, 512);
    push_conv_relu(l, "conv5_2", 512, 512);
    l.push_back(pool("pool5"));
    l.push_back({LayerKind::Flatten, "flatten"});
    return l;
}

}  // namespace

Architecture Architecture::vgg_a_128n() {
    Architecture a;
    a.variant = Variant::VggA128N;
    a.input = {1, 3, 224, 224};
    a.layers = vgg11_features();
    a.layers.push_back(fc("fc1", 512 * 7 * 7, 128));
    a.layers.push_back(relu_after("fc1"));
    a.layers.push_back(fc("fc2", 128, 128));
    a.layers.push_back(relu_after("fc2"));
    a.layers.push_back(fc("fc3", 128, 2));
    return a;
}

Architecture Architecture::vgg_a_one_fc() {
    Architecture a;
    a.variant = Variant::VggAOneFC;
    a.input = {1, 3, 224, 224};
    a.layers = vgg11_features();
    a.layers.push_back(fc("fc", 512 * 7 * 7, 2));
    return a;
}

Architecture Architecture::toy() {
    Architecture a;
    a.variant = Variant::Toy;
    a.input = {1, 3, 64, 64};
    push_conv_relu(a.layers, "conv1_1", 3, 8);
    a.layers.push_back(pool("pool1"));
    push_conv_relu(a.layers, "conv2_1", 8, 16);
    a.layers.push_back(pool("pool2"));
    push_conv_relu(a.layers, "conv3_1", 16, 16);
    a.layers.push_back(pool("pool3"));
    a.layers.push_back({LayerKind::Flatten, "flatten"});
    a.layers.push_back(fc("fc", 16 * 8 * 8, 2));
    return a;
}

Architecture Architecture::make(Variant variant) {
    switch (variant) {
        case Variant::VggA128N: return vgg_a_128n();
        case Variant::VggAOneFC: return vgg_a_one_fc();
        case Variant::Toy: return toy();
    }
    throw ConfigError("unknown variant");
}

std::size_t Architecture::first_conv() const {
    for (std::size_t i = 0; i < layers.size(); ++i)
        if (layers[i].kind == LayerKind::Conv) return i;
    throw ConfigError("architecture has no convolution layer");
}

std::vector<std::pair<std::string, std::vector<std::size_t>>> Architecture::expected_entries() const {
    std::vector<std::pair<std::string, std::vector<std::size_t>>> out;
    for (const auto& l : layers) {
        if (l.kind == LayerKind::Conv) {
            out.emplace_back(l.name + ".weight", std::vector<std::size_t>{l.out, l.in, l.kernel, l.kernel});
            out.emplace_back(l.name + ".bias", std::vector<std::size_t>{l.out});
        } else if (l.kind == LayerKind::Linear) {
            out.emplace_back(l.name + ".weight", std::vector<std::size_t>{l.out, l.in});
            out.emplace_back(l.name + ".bias", std::vector<std::size_t>{l.out});
        }
    }
    return out;
}

namespace {

std::string dims_str(const std::vector<std::size_t>& dims) {
    std::string s = "[";
    for (std::size_t i = 0; i < dims.size(); ++i) s += (i ? "," : "") + std::to_string(dims[i]);
    return s + "]";
}

}  // namespace

void validate(const Architecture& arch, const WeightContainer& weights) {
    if (weights.manifest.variant != to_string(arch.variant)) {
        throw FormatError("manifest variant '" + weights.manifest.variant + "' does not match architecture '" +
                          to_string(arch.variant) + "'");
    }
    const auto expected = arch.expected_entries();
    for (const auto& [name, dims] : expected) {
        const TensorEntry* e = weights.find(name);
        if (!e) throw FormatError("weight container is missing entry '" + name + "'");
        if (e->dims != dims) {
            throw FormatError("entry '" + name + "' has dims " + dims_str(e->dims) + ", expected " + dims_str(dims));
        }
        if (e->data.size() != e->count()) throw FormatError("entry '" + name + "' payload does not match its dims");
    }
    for (const auto& e : weights.entries) {
        bool known = false;
        for (const auto& [name, dims] : expected) known = known || name == e.name;
        if (!known) throw FormatError("unexpected entry '" + e.name + "' for architecture " + to_string(arch.variant));
    }
}

Network::Network(Architecture arch, WeightContainer weights) : arch_(std::move(arch)), weights_(std::move(weights)) {
    validate(arch_, weights_);
    params_.resize(arch_.layers.size());
    for (std::size_t i = 0; i < arch_.layers.size(); ++i) {
        const auto& l = arch_.layers[i];
        auto& p = params_[i];
        if (l.kind == LayerKind::Conv) {
            const auto* w = weights_.find(l.name + ".weight");
            p.conv.kernel = Tensor4({l.out, l.in, l.kernel, l.kernel}, w->data);
            p.conv.bias = weights_.find(l.name + ".bias")->data;
            p.conv.stride = l.stride;
            p.conv.padding = l.padding;
        } else if (l.kind == LayerKind::Linear) {
            p.matrix.rows = l.out;
            p.matrix.cols = l.in;
            p.matrix.data = weights_.find(l.name + ".weight")->data;
            p.bias = weights_.find(l.name + ".bias")->data;
        }
    }
}

std::vector<std::pair<float, float>> Network::normalized_bounds() const {
    const Manifest& m = manifest();
    std::vector<std::pair<float, float>> out;
    for (std::size_t c = 0; c < arch_.input.c; ++c) {
        out.emplace_back((m.lower[c] - m.mean[c]) / m.std[c], (m.upper[c] - m.mean[c]) / m.std[c]);
    }
    return out;
}

Tensor4 Network::normalize(const Tensor4& image) const {
    const Shape& s = image.shape();
    if (s.n != 1 || s.c != arch_.input.c || s.h != arch_.input.h || s.w != arch_.input.w) {
        throw ShapeError("image dims " + s.str() + " do not match network input " + arch_.input.str());
    }
    const Manifest& m = manifest();
    Tensor4 out = image;
    for (std::size_t c = 0; c < s.c; ++c) {
        for (std::size_t i = 0; i < s.plane(); ++i) {
            float& v = out[c * s.plane() + i];
            v = (v - m.mean[c]) / m.std[c];
        }
    }
    return out;
}

Tensor4 Network::apply(std::size_t index, const Tensor4& input, PoolIndices* indices) const {
    const LayerSpec& l = arch_.layers.at(index);
    const LayerParams& p = params_[index];
    switch (l.kind) {
        case LayerKind::Conv: return conv2d(input, p.conv);
        case LayerKind::Relu: return relu(input);
        case LayerKind::MaxPool: {
            PoolResult r = maxpool2x2(input);
            if (indices) *indices = std::move(r.indices);
            return std::move(r.output);
        }
        case LayerKind::Flatten: {
            const Shape& s = input.shape();
            return input.reshaped({s.n, s.c * s.h * s.w, 1, 1});
        }
        case LayerKind::Linear: {
            const Shape& s = input.shape();
            const std::size_t features = s.c * s.h * s.w;
            Tensor4 out({s.n, p.matrix.rows, 1, 1});
            for (std::size_t n = 0; n < s.n; ++n) {
                const auto y = linear(input.data().subspan(n * features, features), p.matrix, p.bias);
                std::copy(y.begin(), y.end(), out.data().begin() + static_cast<std::ptrdiff_t>(n * p.matrix.rows));
            }
            return out;
        }
    }
    throw ConfigError("unknown layer kind");
}

ForwardTrace forward(const Network& net, const Tensor4& image) {
    ForwardTrace trace;
    const auto& layers = net.architecture().layers;
    trace.inputs.reserve(layers.size() + 1);
    trace.inputs.push_back(net.normalize(image));
    for (std::size_t i = 0; i < layers.size(); ++i) {
        PoolIndices idx;
        Tensor4 next = net.apply(i, trace.inputs.back(), &idx);
        if (layers[i].kind == LayerKind::MaxPool) trace.pool_indices.emplace(i, std::move(idx));
        trace.inputs.push_back(std::move(next));
    }
    const Tensor4& out = trace.inputs.back();
    if (out.size() != 2) throw ShapeError("network output has " + std::to_string(out.size()) + " values, expected 2");
    trace.logits = {out[0], out[1]};
    return trace;
}

Classification classify(std::array<float, 2> logits) {
    return {logits[0] > logits[1] ? Label::Damage : Label::NoDamage, logits};
}

Classification classify(const ForwardTrace& trace) { return classify(trace.logits); }

WeightContainer random_weights(const Architecture& arch, unsigned long long seed, bool zero_bias) {
    std::mt19937_64 rng(seed);
    WeightContainer w;
    Manifest m;
    m.variant = to_string(arch.variant);
    w.set_manifest(m);
    for (const auto& [name, dims] : arch.expected_entries()) {
        TensorEntry e{name, dims, {}};
        e.data.resize(e.count());
        const bool bias = dims.size() == 1;
        if (bias) {
            if (!zero_bias) {
                std::normal_distribution<float> dist(0.0f, 0.1f);
                for (float& v : e.data) v = dist(rng);
            }
        } else {
            std::size_t fan_in = 1;
            for (std::size_t i = 1; i < dims.size(); ++i) fan_in *= dims[i];
            std::normal_distribution<float> dist(0.0f, std::sqrt(2.0f / static_cast<float>(fan_in)));
            for (float& v : e.data) v = dist(rng);
        }
        w.entries.push_back(std::move(e));
    }
    return w;
}

}  // namespace lrpseg
