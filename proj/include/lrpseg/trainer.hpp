#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "lrpseg/network.hpp"

namespace lrpseg {

struct TrainConfig {
    float learning_rate_head = 0.001f;   // fully connected layers
    float learning_rate_conv = 0.0001f;  // convolutional layers
    float momentum = 0.9f;
    std::size_t epochs = 10;
    std::size_t batch_size = 8;
    std::uint64_t seed = 0;
    bool flip_augment = true;

    // Settings for the toy net trained from scratch on synthetic scenes. The
    // defaults above are the fine-tuning rates for pretrained VGG-A weights,
    // far too small to move randomly initialized filters in a few epochs.
    static TrainConfig toy(std::uint64_t seed = 1) { return {0.01f, 0.01f, 0.9f, 20, 8, seed, true}; }

    // Throws ConfigError on non-positive rates, zero epochs or zero batch size.
    void check() const;
};

struct LabeledImage {
    Tensor4 image;  // 1 x 3 x H x W, raw pixels in [0, 1]
    Label label;
};

struct BinaryRates {
    double tpr = 0.0;
    double tnr = 0.0;
    double balanced = 0.0;
};

// Damage is the positive class. Throws DataError if either class is absent
// from `truth` or the inputs are empty or of different length.
BinaryRates balanced_accuracy(std::span<const Label> truth, std::span<const Label> predicted);

struct EpochLog {
    std::size_t epoch = 0;
    double loss = 0.0;               // mean training cross-entropy
    double balanced_accuracy = 0.0;  // on the held-out split
};

struct TrainResult {
    WeightContainer weights;
    std::vector<EpochLog> log;
};

// Per-entry gradients, aligned with WeightContainer::entries.
struct Gradients {
    std::vector<std::vector<double>> values;
};

// Softmax cross-entropy loss of one image and its gradient w.r.t. every weight entry.
double loss_and_gradients(const Network& net, const Tensor4& image, Label label, Gradients& grads);
double cross_entropy(std::array<float, 2> logits, Label label);

// Trains from He-initialized weights seeded by cfg.seed. Normalization
// constants are estimated from `train_set` and written to the manifest.
TrainResult train(const Architecture& arch, std::span<const LabeledImage> train_set,
                  std::span<const LabeledImage> heldout, const TrainConfig& cfg,
                  const std::function<void(const EpochLog&)>& on_epoch = {});

std::vector<Label> predict(const Network& net, std::span<const LabeledImage> images);

std::string training_log_csv(const std::vector<EpochLog>& log);

}  // namespace lrpseg
