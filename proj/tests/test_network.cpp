#include <gtest/gtest.h>

#include <random>

#include "lrpseg/error.hpp"
#include "lrpseg/network.hpp"
#include "oracles.hpp"

using namespace lrpseg;

namespace {

Tensor4 random_image(const Shape& s, unsigned seed) {
    std::mt19937_64 rng(seed);
    return oracle::random_tensor(s, rng, 0.0f, 1.0f);
}

std::size_t count_kind(const Architecture& a, LayerKind k) {
    std::size_t n = 0;
    for (const auto& l : a.layers) n += l.kind == k;
    return n;
}

// Spatial shape after walking the layer list.
Shape walk(const Architecture& a) {
    Shape s = a.input;
    for (const auto& l : a.layers) {
        switch (l.kind) {
            case LayerKind::Conv: s = conv_output_shape(s, {l.out, l.in, l.kernel, l.kernel}, l.stride, l.padding); break;
            case LayerKind::MaxPool: s = {s.n, s.c, s.h / 2, s.w / 2}; break;
            case LayerKind::Flatten: s = {s.n, s.c * s.h * s.w, 1, 1}; break;
            case LayerKind::Linear:
                EXPECT_EQ(s.c, l.in) << l.name;
                s = {s.n, l.out, 1, 1};
                break;
            case LayerKind::Relu: break;
        }
    }
    return s;
}

}  // namespace

TEST(Architecture, VggA128NLayout) {
    const Architecture a = Architecture::vgg_a_128n();
    EXPECT_EQ(count_kind(a, LayerKind::Conv), 8u);
    EXPECT_EQ(count_kind(a, LayerKind::MaxPool), 5u);
    EXPECT_EQ(count_kind(a, LayerKind::Linear), 3u);
    EXPECT_EQ(walk(a), (Shape{1, 2, 1, 1}));
    const auto e = a.expected_entries();
    ASSERT_EQ(e.size(), 22u);
    EXPECT_EQ(e.front().first, "conv1_1.weight");
    EXPECT_EQ(e.front().second, (std::vector<std::size_t>{64, 3, 3, 3}));
    const auto fc1 = std::find_if(e.begin(), e.end(), [](const auto& p) { return p.first == "fc1.weight"; });
    ASSERT_NE(fc1, e.end());
    EXPECT_EQ(fc1->second, (std::vector<std::size_t>{128, 25088}));
    EXPECT_EQ(e.back().second, (std::vector<std::size_t>{2}));
}

TEST(Architecture, VggAOneFCLayout) {
    const Architecture a = Architecture::vgg_a_one_fc();
    EXPECT_EQ(count_kind(a, LayerKind::Linear), 1u);
    EXPECT_EQ(walk(a), (Shape{1, 2, 1, 1}));
    EXPECT_EQ(a.expected_entries().size(), 18u);
}

TEST(Architecture, ToyLayout) {
    const Architecture a = Architecture::toy();
    EXPECT_GE(count_kind(a, LayerKind::Conv), 2u);
    EXPECT_EQ(count_kind(a, LayerKind::Conv), count_kind(a, LayerKind::MaxPool));
    EXPECT_EQ(count_kind(a, LayerKind::Linear), 1u);
    EXPECT_EQ(walk(a), (Shape{1, 2, 1, 1}));
    EXPECT_EQ(a.first_conv(), 0u);
    EXPECT_EQ(a.layers[a.first_conv()].name, "conv1_1");
}

TEST(Architecture, VariantTags) {
    for (Variant v : {Variant::VggA128N, Variant::VggAOneFC, Variant::Toy}) {
        EXPECT_EQ(parse_variant(to_string(v)), v);
        EXPECT_EQ(Architecture::make(v).variant, v);
    }
    EXPECT_THROW(parse_variant("vgg16"), FormatError);
}

TEST(Forward, ZeroWeightsZeroImageGiveZeroLogits) {
    WeightContainer w = random_weights(Architecture::toy(), 1);
    for (auto& e : w.entries) std::fill(e.data.begin(), e.data.end(), 0.0f);
    const Network net(Architecture::toy(), w);
    const ForwardTrace t = forward(net, Tensor4({1, 3, 64, 64}));
    EXPECT_EQ(t.logits[0], 0.0f);
    EXPECT_EQ(t.logits[1], 0.0f);
}

TEST(Forward, ToyMatchesOracleKernels) {
    for (unsigned seed : {11u, 12u, 13u}) {
        WeightContainer w = random_weights(Architecture::toy(), seed, /*zero_bias=*/false);
        Manifest m = w.manifest;
        m.mean = {0.4f, 0.5f, 0.6f};
        m.std = {0.2f, 0.25f, 0.3f};
        w.set_manifest(m);
        const Network net(Architecture::toy(), w);
        const Tensor4 img = random_image({1, 3, 64, 64}, seed + 100);
        const auto golden = oracle::forward_logits(net, img);
        const ForwardTrace t = forward(net, img);
        for (int k = 0; k < 2; ++k) EXPECT_NEAR(t.logits[k], golden[k], 1e-4 * std::max(1.0f, std::abs(golden[k])));
    }
}

TEST(Forward, TraceReplayReproducesEveryStage) {
    const Network net(Architecture::toy(), random_weights(Architecture::toy(), 5, false));
    const ForwardTrace t = forward(net, random_image({1, 3, 64, 64}, 6));
    const auto& layers = net.architecture().layers;
    ASSERT_EQ(t.inputs.size(), layers.size() + 1);
    ASSERT_EQ(t.pool_indices.size(), 3u);
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const Tensor4 next = net.apply(i, t.inputs[i]);
        ASSERT_EQ(next.shape(), t.inputs[i + 1].shape()) << layers[i].name;
        for (std::size_t j = 0; j < next.size(); ++j) ASSERT_NEAR(next[j], t.inputs[i + 1][j], 1e-5) << layers[i].name;
    }
    EXPECT_EQ(t.logits[0], t.inputs.back()[0]);
}

TEST(Forward, Deterministic) {
    const Network net(Architecture::toy(), random_weights(Architecture::toy(), 7, false));
    const Tensor4 img = random_image({1, 3, 64, 64}, 8);
    const ForwardTrace a = forward(net, img), b = forward(net, img);
    for (std::size_t i = 0; i < a.inputs.size(); ++i) EXPECT_EQ(a.inputs[i], b.inputs[i]);
}

TEST(Forward, WrongInputDims) {
    const Network net(Architecture::toy(), random_weights(Architecture::toy(), 1));
    EXPECT_THROW(forward(net, Tensor4({1, 3, 32, 32})), ShapeError);
    EXPECT_THROW(forward(net, Tensor4({1, 1, 64, 64})), ShapeError);
}

TEST(Forward, NormalizationAndBounds) {
    WeightContainer w = random_weights(Architecture::toy(), 1);
    Manifest m = w.manifest;
    m.mean = {0.5f, 0.5f, 0.5f};
    m.std = {0.25f, 0.25f, 0.25f};
    w.set_manifest(m);
    const Network net(Architecture::toy(), w);
    for (const auto& [lo, hi] : net.normalized_bounds()) {
        EXPECT_FLOAT_EQ(lo, -2.0f);
        EXPECT_FLOAT_EQ(hi, 2.0f);
    }
    const Tensor4 n = net.normalize(Tensor4({1, 3, 64, 64}, 1.0f));
    EXPECT_FLOAT_EQ(n[0], 2.0f);
}

TEST(Classify, ArgmaxWithConservativeTie) {
    EXPECT_EQ(classify(std::array<float, 2>{2.0f, 1.0f}).label, Label::Damage);
    EXPECT_EQ(classify(std::array<float, 2>{0.5f, 0.5f}).label, Label::NoDamage);
    EXPECT_EQ(classify(std::array<float, 2>{-1.0f, 3.0f}).label, Label::NoDamage);
    std::mt19937_64 rng(3);
    std::normal_distribution<float> d;
    for (int i = 0; i < 200; ++i) {
        const std::array<float, 2> l{d(rng), d(rng)};
        const std::size_t argmax = l[0] > l[1] ? 0 : 1;
        EXPECT_EQ(classify(l).label, argmax == 0 ? Label::Damage : Label::NoDamage);
    }
}

TEST(RandomWeights, DeterministicPerSeed) {
    const auto a = random_weights(Architecture::toy(), 9), b = random_weights(Architecture::toy(), 9);
    const auto c = random_weights(Architecture::toy(), 10);
    EXPECT_EQ(a.entries[0].data, b.entries[0].data);
    EXPECT_NE(a.entries[0].data, c.entries[0].data);
    for (const auto& e : a.entries)
        if (e.dims.size() == 1) EXPECT_EQ(*std::max_element(e.data.begin(), e.data.end()), 0.0f) << e.name;
}
