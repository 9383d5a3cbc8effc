#include "lrpseg/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "lrpseg/error.hpp"

namespace lrpseg {

void TrainConfig::check() const {
    if (!(learning_rate_head > 0.0f) || !(learning_rate_conv > 0.0f)) {
        throw ConfigError("learning rates must be positive");
    }
    if (epochs < 1) throw ConfigError("epochs must be at least 1");
    if (batch_size < 1) throw ConfigError("batch size must be at least 1");
    if (momentum < 0.0f || momentum >= 1.0f) throw ConfigError("momentum must lie in [0, 1)");
}

BinaryRates balanced_accuracy(std::span<const Label> truth, std::span<const Label> predicted) {
    if (truth.empty() || truth.size() != predicted.size()) {
        throw DataError("balanced accuracy needs equally long, nonempty label lists");
    }
    std::size_t tp = 0, fn = 0, tn = 0, fp = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const bool pos = truth[i] == Label::Damage;
        const bool hit = predicted[i] == Label::Damage;
        if (pos) hit ? ++tp : ++fn;
        else hit ? ++fp : ++tn;
    }
    if (tp + fn == 0) throw DataError("balanced accuracy undefined: no damage samples");
    if (tn + fp == 0) throw DataError("balanced accuracy undefined: no damage-free samples");
    BinaryRates r;
    r.tpr = static_cast<double>(tp) / static_cast<double>(tp + fn);
    r.tnr = static_cast<double>(tn) / static_cast<double>(tn + fp);
    r.balanced = 0.5 * (r.tpr + r.tnr);
    return r;
}

namespace {

std::size_t class_index(Label l) { return l == Label::Damage ? 0 : 1; }

std::array<double, 2> softmax(std::array<float, 2> logits) {
    const double m = std::max(logits[0], logits[1]);
    const double e0 = std::exp(logits[0] - m);
    const double e1 = std::exp(logits[1] - m);
    return {e0 / (e0 + e1), e1 / (e0 + e1)};
}

std::size_t entry_index(const WeightContainer& w, const std::string& name) {
    for (std::size_t i = 0; i < w.entries.size(); ++i)
        if (w.entries[i].name == name) return i;
    throw FormatError("missing entry '" + name + "'");
}

void accumulate(std::vector<double>& dst, std::span<const float> src) {
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] += src[i];
}

Tensor4 flip(const Tensor4& img, bool horizontal) {
    const Shape& s = img.shape();
    Tensor4 out(s);
    for (std::size_t c = 0; c < s.c; ++c)
        for (std::size_t y = 0; y < s.h; ++y)
            for (std::size_t x = 0; x < s.w; ++x)
                out.at(0, c, y, x) = horizontal ? img.at(0, c, y, s.w - 1 - x) : img.at(0, c, s.h - 1 - y, x);
    return out;
}

}  // namespace

double cross_entropy(std::array<float, 2> logits, Label label) {
    const double m = std::max(logits[0], logits[1]);
    const double lse = m + std::log(std::exp(logits[0] - m) + std::exp(logits[1] - m));
    return lse - logits[class_index(label)];
}

double loss_and_gradients(const Network& net, const Tensor4& image, Label label, Gradients& grads) {
    const auto& arch = net.architecture();
    const auto& weights = net.weights();
    if (grads.values.size() != weights.entries.size()) {
        grads.values.resize(weights.entries.size());
        for (std::size_t i = 0; i < weights.entries.size(); ++i)
            grads.values[i].assign(weights.entries[i].data.size(), 0.0);
    }

    const ForwardTrace trace = forward(net, image);
    const auto p = softmax(trace.logits);
    const std::size_t y = class_index(label);
    Tensor4 g(trace.inputs.back().shape());
    g[0] = static_cast<float>(p[0] - (y == 0 ? 1.0 : 0.0));
    g[1] = static_cast<float>(p[1] - (y == 1 ? 1.0 : 0.0));

    const std::size_t first = arch.first_conv();
    for (std::size_t i = arch.layers.size(); i-- > 0;) {
        const LayerSpec& l = arch.layers[i];
        const Tensor4& in = trace.inputs[i];
        const LayerParams& prm = net.params(i);
        switch (l.kind) {
            case LayerKind::Conv: {
                const Tensor4 dk = conv2d_backward_kernel(in, g, prm.conv.kernel.shape(), prm.conv.stride,
                                                          prm.conv.padding);
                accumulate(grads.values[entry_index(weights, l.name + ".weight")], dk.data());
                auto& db = grads.values[entry_index(weights, l.name + ".bias")];
                const Shape& gs = g.shape();
                for (std::size_t c = 0; c < gs.c; ++c) {
                    double s = 0.0;
                    for (std::size_t k = 0; k < gs.plane(); ++k) s += g[c * gs.plane() + k];
                    db[c] += s;
                }
                if (i > first) {
                    g = conv2d_backward_input(g, prm.conv.kernel, prm.conv.stride, prm.conv.padding, in.shape());
                }
                break;
            }
            case LayerKind::Relu:
                for (std::size_t k = 0; k < g.size(); ++k)
                    if (!(in[k] > 0.0f)) g[k] = 0.0f;
                break;
            case LayerKind::MaxPool: g = unpool(g, trace.pool_indices.at(i)); break;
            case LayerKind::Flatten: g = g.reshaped(in.shape()); break;
            case LayerKind::Linear: {
                auto& dw = grads.values[entry_index(weights, l.name + ".weight")];
                auto& db = grads.values[entry_index(weights, l.name + ".bias")];
                const std::size_t cols = prm.matrix.cols;
                for (std::size_t r = 0; r < prm.matrix.rows; ++r) {
                    const double gr = g[r];
                    db[r] += gr;
                    for (std::size_t c = 0; c < cols; ++c) dw[r * cols + c] += gr * in[c];
                }
                const auto dx = linear_backward_input(g.data(), prm.matrix);
                g = Tensor4(in.shape(), dx);
                break;
            }
        }
        if (i == first) break;
    }
    return cross_entropy(trace.logits, label);
}

std::vector<Label> predict(const Network& net, std::span<const LabeledImage> images) {
    std::vector<Label> out;
    out.reserve(images.size());
    for (const auto& s : images) out.push_back(classify(forward(net, s.image)).label);
    return out;
}

TrainResult train(const Architecture& arch, std::span<const LabeledImage> train_set,
                  std::span<const LabeledImage> heldout, const TrainConfig& cfg,
                  const std::function<void(const EpochLog&)>& on_epoch) {
    cfg.check();
    const bool has_pos = std::any_of(train_set.begin(), train_set.end(),
                                     [](const LabeledImage& s) { return s.label == Label::Damage; });
    const bool has_neg = std::any_of(train_set.begin(), train_set.end(),
                                     [](const LabeledImage& s) { return s.label == Label::NoDamage; });
    if (!has_pos || !has_neg) throw ConfigError("training set must contain both damage and damage-free images");

    // Per-channel input statistics.
    Manifest manifest;
    manifest.variant = to_string(arch.variant);
    for (std::size_t c = 0; c < arch.input.c; ++c) {
        double sum = 0.0, sq = 0.0;
        std::size_t count = 0;
        for (const auto& s : train_set) {
            const Shape& sh = s.image.shape();
            for (std::size_t k = 0; k < sh.plane(); ++k) {
                const double v = s.image[c * sh.plane() + k];
                sum += v;
                sq += v * v;
                ++count;
            }
        }
        const double mean = sum / static_cast<double>(count);
        const double var = std::max(sq / static_cast<double>(count) - mean * mean, 1e-8);
        manifest.mean[c] = static_cast<float>(mean);
        manifest.std[c] = static_cast<float>(std::sqrt(var));
    }

    WeightContainer weights = random_weights(arch, cfg.seed);
    weights.set_manifest(manifest);

    std::vector<bool> is_conv(weights.entries.size(), false);
    for (std::size_t i = 0; i < weights.entries.size(); ++i) {
        const auto& name = weights.entries[i].name;
        for (const auto& l : arch.layers)
            if (l.kind == LayerKind::Conv && name.rfind(l.name + ".", 0) == 0) is_conv[i] = true;
    }
    std::vector<std::vector<double>> velocity(weights.entries.size());
    for (std::size_t i = 0; i < weights.entries.size(); ++i) velocity[i].assign(weights.entries[i].data.size(), 0.0);

    std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);

    TrainResult result;
    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double loss_sum = 0.0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
            const Network net(arch, weights);
            Gradients grads;
            for (std::size_t k = start; k < stop; ++k) {
                const LabeledImage& s = train_set[order[k]];
                const unsigned flips = cfg.flip_augment ? static_cast<unsigned>(rng() & 3u) : 0u;
                Tensor4 img = s.image;
                if (flips & 1u) img = flip(img, true);
                if (flips & 2u) img = flip(img, false);
                loss_sum += loss_and_gradients(net, img, s.label, grads);
            }
            const double scale = 1.0 / static_cast<double>(stop - start);
            for (std::size_t i = 0; i < weights.entries.size(); ++i) {
                const double lr = is_conv[i] ? cfg.learning_rate_conv : cfg.learning_rate_head;
                auto& data = weights.entries[i].data;
                auto& v = velocity[i];
                const auto& gv = grads.values[i];
                for (std::size_t k = 0; k < data.size(); ++k) {
                    v[k] = cfg.momentum * v[k] + gv[k] * scale;
                    data[k] = static_cast<float>(data[k] - lr * v[k]);
                }
            }
        }

        EpochLog entry;
        entry.epoch = epoch;
        entry.loss = loss_sum / static_cast<double>(train_set.size());
        const Network net(arch, weights);
        const auto eval_set = heldout.empty() ? train_set : heldout;
        std::vector<Label> truth;
        for (const auto& s : eval_set) truth.push_back(s.label);
        try {
            entry.balanced_accuracy = balanced_accuracy(truth, predict(net, eval_set)).balanced;
        } catch (const DataError&) {
            entry.balanced_accuracy = std::nan("");
        }
        result.log.push_back(entry);
        if (on_epoch) on_epoch(entry);
    }
    result.weights = std::move(weights);
    return result;
}

std::string training_log_csv(const std::vector<EpochLog>& log) {
    std::ostringstream os;
    os.precision(9);
    os << "epoch,loss,balanced_accuracy\n";
    for (const auto& e : log) os << e.epoch << ',' << e.loss << ',' << e.balanced_accuracy << '\n';
    return os.str();
}

}  // namespace lrpseg
