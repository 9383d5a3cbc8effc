#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include <unistd.h>

#include "lrpseg/error.hpp"
#include "lrpseg/image_io.hpp"
#include "lrpseg/synthetic.hpp"
#include "lrpseg/trainer.hpp"

using namespace lrpseg;
namespace fs = std::filesystem;

namespace {

double coverage(const Sample& s) {
    return static_cast<double>(std::count(s.mask.begin(), s.mask.end(), 1)) / static_cast<double>(s.mask.size());
}

std::set<std::string> base_ids(const std::vector<Sample>& split) {
    std::set<std::string> ids;
    for (const auto& s : split) ids.insert(s.id.substr(0, s.id.find('_')));
    return ids;
}

class TempDir : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() / ("lrpseg_synth_" + std::to_string(::getpid()) + "_" +
                                            ::testing::UnitTest::GetInstance()->current_test_info()->name());
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }
    fs::path dir_;
};

}  // namespace

TEST(Generate, CoverageWithinBoundsOverManySeeds) {
    double lo = 1.0, hi = 0.0;
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
        SceneSpec spec;
        spec.seed = seed;
        const Sample s = generate(spec);
        const double c = coverage(s);
        lo = std::min(lo, c);
        hi = std::max(hi, c);
        ASSERT_GE(c, 0.005) << seed;
        ASSERT_LE(c, 0.08) << seed;
        ASSERT_EQ(s.label, Label::Damage);
    }
    EXPECT_LT(lo, hi);
}

TEST(Generate, NoCrackMeansEmptyMask) {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        SceneSpec spec;
        spec.seed = seed;
        spec.has_crack = false;
        const Sample s = generate(spec);
        EXPECT_EQ(std::count(s.mask.begin(), s.mask.end(), 1), 0);
        EXPECT_EQ(s.label, Label::NoDamage);
    }
}

TEST(Generate, DeterministicPerSeed) {
    SceneSpec spec;
    spec.seed = 42;
    const Sample a = generate(spec), b = generate(spec);
    EXPECT_EQ(a.image, b.image);
    EXPECT_EQ(a.mask, b.mask);
    spec.seed = 43;
    EXPECT_NE(generate(spec).mask, a.mask);
}

TEST(Generate, ImageIsQuantizedGrayInUnitRange) {
    SceneSpec spec;
    spec.seed = 7;
    const Sample s = generate(spec);
    const Shape& sh = s.image.shape();
    ASSERT_EQ(sh, (Shape{1, 3, 64, 64}));
    for (std::size_t i = 0; i < sh.plane(); ++i) {
        const float v = s.image[i];
        EXPECT_GE(v, 0.0f);
        EXPECT_LE(v, 1.0f);
        EXPECT_FLOAT_EQ(v * 255.0f, std::round(v * 255.0f));
        EXPECT_EQ(s.image[sh.plane() + i], v);
        EXPECT_EQ(s.image[2 * sh.plane() + i], v);
    }
}

TEST(Generate, CrackPixelsAreDarker) {
    double crack = 0.0, bg = 0.0;
    std::size_t nc = 0, nb = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        SceneSpec spec;
        spec.seed = seed;
        const Sample s = generate(spec);
        for (std::size_t i = 0; i < s.mask.size(); ++i) {
            (s.mask[i] ? crack : bg) += s.image[i];
            ++(s.mask[i] ? nc : nb);
        }
    }
    EXPECT_LT(crack / static_cast<double>(nc), bg / static_cast<double>(nb) - 0.05);
}

TEST(Generate, InvalidSpec) {
    SceneSpec spec;
    spec.min_points = 1;
    EXPECT_THROW(generate(spec), ConfigError);
}

TEST(Dataset, SplitCountsAndFlips) {
    const Dataset d = make_dataset(50, 50, 3);
    EXPECT_EQ(d.train.size(), 60u);
    EXPECT_EQ(d.val.size(), 3u * 20u);
    EXPECT_EQ(d.test.size(), 3u * 20u);
    for (const auto* split : {&d.val, &d.test})
        for (std::size_t i = 0; i < split->size(); i += 3) {
            const Sample &o = (*split)[i], &h = (*split)[i + 1], &v = (*split)[i + 2];
            EXPECT_EQ(h.id, o.id + "_hflip");
            EXPECT_EQ(v.id, o.id + "_vflip");
            EXPECT_EQ(h.image.at(0, 0, 3, 0), o.image.at(0, 0, 3, 63));
            EXPECT_EQ(v.image.at(0, 0, 0, 5), o.image.at(0, 0, 63, 5));
            EXPECT_EQ(h.mask[3 * 64], o.mask[3 * 64 + 63]);
            EXPECT_EQ(h.label, o.label);
        }
}

TEST(Dataset, StratifiedAndDisjoint) {
    const Dataset d = make_dataset(30, 20, 4);
    auto count_pos = [](const std::vector<Sample>& s) {
        return std::count_if(s.begin(), s.end(), [](const Sample& x) { return x.label == Label::Damage; });
    };
    EXPECT_EQ(count_pos(d.train), 18);
    EXPECT_EQ(static_cast<std::size_t>(count_pos(d.train)), d.train.size() - 12);
    EXPECT_EQ(count_pos(d.val), 3 * 6);
    EXPECT_EQ(count_pos(d.test), 3 * 6);
    const auto tr = base_ids(d.train), va = base_ids(d.val), te = base_ids(d.test);
    for (const auto& id : va) EXPECT_FALSE(tr.count(id) || te.count(id)) << id;
    for (const auto& id : te) EXPECT_FALSE(tr.count(id)) << id;
    EXPECT_EQ(tr.size() + va.size() + te.size(), 50u);
}

TEST(Dataset, LabelsMatchMasks) {
    const Dataset d = make_dataset(10, 10, 5);
    for (const auto* split : {&d.train, &d.val, &d.test})
        for (const Sample& s : *split)
            EXPECT_EQ(s.label == Label::Damage, std::count(s.mask.begin(), s.mask.end(), 1) > 0) << s.id;
}

TEST(Dataset, DeterministicAndMinimumSize) {
    const Dataset a = make_dataset(6, 6, 9), b = make_dataset(6, 6, 9);
    ASSERT_EQ(a.test.size(), b.test.size());
    for (std::size_t i = 0; i < a.test.size(); ++i) {
        EXPECT_EQ(a.test[i].id, b.test[i].id);
        EXPECT_EQ(a.test[i].image, b.test[i].image);
    }
    EXPECT_THROW(make_dataset(4, 10, 1), ConfigError);
}

TEST_F(TempDir, DatasetRoundTripsThroughDisk) {
    const Dataset d = make_dataset(5, 5, 6);
    write_dataset(dir_, d);
    const auto rows = read_manifest(dir_ / "manifest.csv");
    EXPECT_EQ(rows.size(), d.train.size() + d.val.size() + d.test.size());
    const auto test = read_split(dir_, "test");
    ASSERT_EQ(test.size(), d.test.size());
    for (std::size_t i = 0; i < test.size(); ++i) {
        EXPECT_EQ(test[i].id, d.test[i].id);
        EXPECT_EQ(test[i].label, d.test[i].label);
        EXPECT_EQ(test[i].image, d.test[i].image);
        EXPECT_EQ(test[i].mask, d.test[i].mask);
    }
    EXPECT_EQ(read_split(dir_, "").size(), rows.size());
}

TEST_F(TempDir, ManifestErrors) {
    EXPECT_THROW(read_manifest(dir_ / "absent.csv"), Error);
    {
        std::ofstream out(dir_ / "bad.csv");
        out << "name,label\nx,damage\n";
    }
    EXPECT_THROW(read_manifest(dir_ / "bad.csv"), FormatError);
}

TEST_F(TempDir, FloatMapAndPngRoundTrip) {
    RelevanceMap m(3, 4);
    for (std::size_t i = 0; i < m.size(); ++i) m.values[i] = static_cast<float>(i) * 0.37f - 1.0f;
    write_float_map(dir_ / "m.f32", m);
    const RelevanceMap back = read_float_map(dir_ / "m.f32");
    EXPECT_EQ(back.height, 3u);
    EXPECT_EQ(back.width, 4u);
    EXPECT_EQ(back.values, m.values);

    const std::vector<std::uint8_t> mask{0, 1, 1, 0, 1, 0};
    write_mask_png(dir_ / "mask.png", 2, 3, mask);
    std::size_t h = 0, w = 0;
    EXPECT_EQ(read_mask_png(dir_ / "mask.png", &h, &w), mask);
    EXPECT_EQ(h, 2u);
    EXPECT_EQ(w, 3u);

    std::vector<std::uint8_t> rgb(2 * 2 * 3);
    for (std::size_t i = 0; i < rgb.size(); ++i) rgb[i] = static_cast<std::uint8_t>(i * 20);
    write_png_rgb(dir_ / "rgb.png", 2, 2, rgb);
    const Tensor4 img = read_png(dir_ / "rgb.png");
    EXPECT_EQ(img.shape(), (Shape{1, 3, 2, 2}));
    EXPECT_FLOAT_EQ(img.at(0, 1, 0, 0), 20.0f / 255.0f);
    EXPECT_FLOAT_EQ(img.at(0, 2, 1, 1), 220.0f / 255.0f);

    EXPECT_THROW(read_png(dir_ / "m.f32"), Error);
}

TEST(Signal, TrainedToyBeatsPermutationNull) {
    const Dataset d = make_dataset(30, 30, 11);
    std::vector<LabeledImage> train_set, held_out;
    for (const auto& s : d.train) train_set.push_back({s.image, s.label});
    for (const auto& s : d.test) held_out.push_back({s.image, s.label});
    const TrainResult r = train(Architecture::toy(), train_set, {}, TrainConfig::toy(1));
    const Network net(Architecture::toy(), r.weights);
    const std::vector<Label> pred = predict(net, held_out);
    std::vector<Label> truth;
    for (const auto& s : held_out) truth.push_back(s.label);
    const double ba = balanced_accuracy(truth, pred).balanced;

    std::mt19937_64 rng(12);
    std::vector<double> null;
    for (int k = 0; k < 1000; ++k) {
        std::vector<Label> shuffled = truth;
        std::shuffle(shuffled.begin(), shuffled.end(), rng);
        null.push_back(balanced_accuracy(shuffled, pred).balanced);
    }
    double mean = 0.0, var = 0.0;
    for (double v : null) mean += v / 1000.0;
    for (double v : null) var += (v - mean) * (v - mean) / 1000.0;
    EXPECT_GT(ba, mean + 3.0 * std::sqrt(var)) << "BA " << ba << " null " << mean << " +- " << std::sqrt(var);
}
