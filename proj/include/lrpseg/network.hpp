#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lrpseg/tensor.hpp"
#include "lrpseg/weights.hpp"

namespace lrpseg {

enum class Variant { VggA128N, VggAOneFC, Toy };

std::string to_string(Variant v);
Variant parse_variant(const std::string& tag);

enum class LayerKind { Conv, Relu, MaxPool, Flatten, Linear };

struct LayerSpec {
    LayerKind kind;
    std::string name;
    std::size_t in = 0;   // input channels (conv) or features (linear)
    std::size_t out = 0;  // output channels (conv) or features (linear)
    std::size_t kernel = 3;
    std::size_t stride = 1;
    std::size_t padding = 1;

    bool parameterized() const { return kind == LayerKind::Conv || kind == LayerKind::Linear; }
};

struct Architecture {
    Variant variant = Variant::Toy;
    std::vector<LayerSpec> layers;
    Shape input;  // 1 x channels x height x width
    std::size_t class_count = 2;

    static Architecture make(Variant variant);
    static Architecture vgg_a_128n();
    static Architecture vgg_a_one_fc();
    // 3x64x64 -> [conv 8, pool] -> [conv 16, pool] -> [conv 16, pool] -> linear 1024 -> 2.
    static Architecture toy();

    // Index of the first parameterized layer (the one that sees pixels).
    std::size_t first_conv() const;
    // Expected (name, dims) of every weight entry, in layer order.
    std::vector<std::pair<std::string, std::vector<std::size_t>>> expected_entries() const;
};

// Throws FormatError naming the first entry that is missing, extra or of the wrong dims.
void validate(const Architecture& arch, const WeightContainer& weights);

enum class Label { Damage, NoDamage };

std::string to_string(Label l);

// Parameters of one layer resolved out of a weight container.
struct LayerParams {
    ConvParams conv;  // for Conv
    Matrix matrix;    // for Linear
    std::vector<float> bias;  // for Linear
};

// Architecture bound to validated weights. Immutable; share freely between threads.
class Network {
public:
    Network(Architecture arch, WeightContainer weights);

    const Architecture& architecture() const { return arch_; }
    const WeightContainer& weights() const { return weights_; }
    const LayerParams& params(std::size_t layer) const { return params_[layer]; }
    const Manifest& manifest() const { return weights_.manifest; }

    // Per-channel input bounds mapped into normalized space.
    std::vector<std::pair<float, float>> normalized_bounds() const;

    // Raw image in pixel units -> normalized network input.
    Tensor4 normalize(const Tensor4& image) const;

    // Applies layer `index` to its input. `indices` receives pooling argmaxes.
    Tensor4 apply(std::size_t index, const Tensor4& input, PoolIndices* indices = nullptr) const;

private:
    Architecture arch_;
    WeightContainer weights_;
    std::vector<LayerParams> params_;
};

struct ForwardTrace {
    // inputs[i] is the activation entering layer i; inputs.back() is the logit tensor.
    std::vector<Tensor4> inputs;
    std::map<std::size_t, PoolIndices> pool_indices;
    std::array<float, 2> logits{};
};

ForwardTrace forward(const Network& net, const Tensor4& image);

struct Classification {
    Label label;
    std::array<float, 2> logits;
};

// Argmax with index 0 = damage; ties resolve to no_damage.
Classification classify(const ForwardTrace& trace);
Classification classify(std::array<float, 2> logits);

// Random He-initialized weights with zero biases for the given architecture.
WeightContainer random_weights(const Architecture& arch, unsigned long long seed, bool zero_bias = true);

}  // namespace lrpseg
